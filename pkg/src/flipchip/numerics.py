"""Small numerical kernels used across the package.

Everything here is a pure function of its arguments.  The eigenvalue
routines deliberately avoid a general eigensolver: the matrices of interest
are 2x2 or 3x3 and closed forms (plus a Newton polish) are both faster and
easier to reason about near the avoided crossings the Purcell code visits.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import (
    ConvergenceError,
    DomainError,
    NoSignChangeError,
    RankDeficiencyError,
)

__all__ = [
    "LineFit",
    "PlaneFit",
    "elliptic_k",
    "k_ratio",
    "eigenvalues",
    "eigenvector",
    "eigenpairs",
    "charpoly",
    "brent_root",
    "fit_line",
    "fit_plane",
]

# below this modulus the series K(k) ~ pi/2 (1 + k^2/4) is exact to double precision
_ASYMPTOTIC_K = 1e-6
_MAX_BRENT_ITER = 200


def _agm(a: float, b: float) -> float:
    while True:
        an = 0.5 * (a + b)
        bn = math.sqrt(a * b)
        if abs(an - bn) <= 2.0 * np.finfo(float).eps * an:
            return 0.5 * (an + bn)
        a, b = an, bn


def _complement(k: float) -> float:
    # (1-k)(1+k) keeps full relative precision of k' as k -> 1
    return math.sqrt((1.0 - k) * (1.0 + k))


def elliptic_k(k: float) -> float:
    """Complete elliptic integral of the first kind, K(k), by AGM.

    ``k`` is the modulus (not the parameter m = k**2).
    """
    k = float(k)
    if not (0.0 <= k < 1.0) or math.isnan(k):
        raise DomainError(f"elliptic_k needs 0 <= k < 1, got {k!r}")
    if k == 0.0:
        return math.pi / 2.0
    return math.pi / (2.0 * _agm(1.0, _complement(k)))


def _k_small_pair(k: float) -> tuple[float, float]:
    """(K(k), K(k')) for tiny k from the logarithmic expansion."""
    k2 = k * k
    lg = math.log(4.0 / k)
    return (math.pi / 2.0) * (1.0 + 0.25 * k2), lg + 0.25 * k2 * (lg - 1.0)


def k_ratio(k: float, kp: float | None = None) -> float:
    """Return K(k)/K(k').

    ``kp`` may be passed when the complementary modulus is known more
    accurately than ``sqrt(1 - k**2)`` (moduli close to one).
    """
    k = float(k)
    if math.isnan(k) or not (0.0 <= k <= 1.0):
        raise DomainError(f"k_ratio needs 0 <= k <= 1, got {k!r}")
    if kp is None:
        kp = _complement(k)
    if k == 0.0:
        return 0.0
    if kp == 0.0:
        return math.inf
    if k < _ASYMPTOTIC_K:
        kk, kkp = _k_small_pair(k)
        return kk / kkp
    if kp < _ASYMPTOTIC_K:
        kkp, kk = _k_small_pair(kp)
        return kk / kkp
    return (math.pi / (2.0 * _agm(1.0, kp))) / (math.pi / (2.0 * _agm(1.0, k)))


# ---------------------------------------------------------------------------
# small non-Hermitian eigenproblems


def _as_matrix(m) -> np.ndarray:
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] not in (2, 3):
        raise DomainError(f"expected a 2x2 or 3x3 matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    return a


def charpoly(m) -> tuple[complex, ...]:
    """Monic characteristic polynomial coefficients of det(x I - m), highest first."""
    a = _as_matrix(m)
    if a.shape[0] == 2:
        tr = a[0, 0] + a[1, 1]
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        return (1.0 + 0j, complex(-tr), complex(det))
    tr = a[0, 0] + a[1, 1] + a[2, 2]
    minors = (
        a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
        + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    )
    det = (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )
    return (1.0 + 0j, complex(-tr), complex(minors), complex(-det))


def _eig2(a: np.ndarray) -> list[complex]:
    p, q, r, s = complex(a[0, 0]), complex(a[0, 1]), complex(a[1, 0]), complex(a[1, 1])
    if q == 0 or r == 0:
        return [p, s]
    mean = 0.5 * (p + s)
    half = 0.5 * (p - s)
    disc = cmath.sqrt(half * half + q * r)
    return [mean + disc, mean - disc]


def _cbrt(z: complex) -> complex:
    if z == 0:
        return 0j
    return cmath.rect(abs(z) ** (1.0 / 3.0), cmath.phase(z) / 3.0)


def _eig3_shifted(b: np.ndarray) -> list[complex]:
    _, c2, c1, c0 = charpoly(b)
    # depressed cubic t^3 + p t + q for x = t - c2/3
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2**3 / 27.0 - c2 * c1 / 3.0 + c0
    s = cmath.sqrt((q / 2.0) ** 2 + (p / 3.0) ** 3)
    w1, w2 = -q / 2.0 + s, -q / 2.0 - s
    u = _cbrt(w1 if abs(w1) >= abs(w2) else w2)
    if u == 0:
        roots = [0j, 0j, 0j]
    else:
        v = -p / (3.0 * u)
        om = complex(-0.5, math.sqrt(3.0) / 2.0)
        roots = [u + v, om * u + v / om, u / om + om * v]
    roots = [t - c2 / 3.0 for t in roots]
    return [_polish(r, c2, c1, c0) for r in roots]


def _polish(x: complex, c2: complex, c1: complex, c0: complex) -> complex:
    px = ((x + c2) * x + c1) * x + c0
    dpx = (3.0 * x + 2.0 * c2) * x + c1
    if dpx == 0 or px == 0:
        return x
    y = x - px / dpx
    py = ((y + c2) * y + c1) * y + c0
    return y if abs(py) < abs(px) else x


def _deflate3(a: np.ndarray) -> list[complex] | None:
    # a zero row/column pair off the diagonal splits the problem into 1 + 2
    for i in range(3):
        others = [j for j in range(3) if j != i]
        if all(a[i, j] == 0 for j in others) or all(a[j, i] == 0 for j in others):
            return [complex(a[i, i])] + _eigenvalues_shifted(a[np.ix_(others, others)])
    return None


def _eigenvalues_shifted(a: np.ndarray) -> list[complex]:
    n = a.shape[0]
    if n == 3:
        split = _deflate3(a)
        if split is not None:
            return split
    shift = complex(np.trace(a)) / n
    b = a - shift * np.eye(n)
    roots = _eig2(b) if n == 2 else _eig3_shifted(b)
    return [r + shift for r in roots]


def eigenvalues(m) -> list[complex]:
    """All eigenvalues of a 2x2 or 3x3 complex matrix (with multiplicity).

    2x2 uses the quadratic formula, 3x3 Cardano's formula on the trace-shifted
    matrix followed by one Newton step per root on the characteristic
    polynomial.  Block-decoupled matrices are split first so exactly
    decoupled modes keep exact eigenvalues.
    """
    return _eigenvalues_shifted(_as_matrix(m))


def eigenvector(m, lam: complex) -> np.ndarray:
    """Unit right eigenvector of ``m`` for eigenvalue ``lam``."""
    a = _as_matrix(m)
    n = a.shape[0]
    r = a - lam * np.eye(n)
    if n == 2:
        rows = [np.array([r[i, 1], -r[i, 0]]) for i in range(2)]
        v = max(rows, key=lambda x: np.linalg.norm(x))
    else:
        v = max(
            (np.cross(r[i], r[j]) for i, j in combinations(range(3), 2)),
            key=lambda x: np.linalg.norm(x),
        )
    scale = np.linalg.norm(a) or 1.0
    if np.linalg.norm(v) <= 1e-13 * scale ** (n - 1):
        # eigenspace of dimension >= 2; any null vector will do
        _, _, vh = np.linalg.svd(r)
        v = vh[-1].conj()
    return v / np.linalg.norm(v)


def eigenpairs(m) -> list[tuple[complex, np.ndarray]]:
    a = _as_matrix(m)
    return [(lam, eigenvector(a, lam)) for lam in eigenvalues(a)]


# ---------------------------------------------------------------------------
# root finding


def brent_root(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-12,
    maxiter: int = _MAX_BRENT_ITER,
) -> float:
    """Root of ``f`` in ``[a, b]`` by Brent's method.

    Raises NoSignChangeError if ``f(a)`` and ``f(b)`` share a sign and
    ConvergenceError after ``maxiter`` iterations.
    """
    if not a < b:
        raise DomainError(f"brent_root needs a < b, got a={a!r}, b={b!r}")
    fa, fb = f(a), f(b)
    if fa == 0:
        return float(a)
    if fb == 0:
        return float(b)
    if math.isnan(fa) or math.isnan(fb) or (fa > 0) == (fb > 0):
        raise NoSignChangeError(
            f"no sign change on [{a!r}, {b!r}]: f(a)={fa!r}, f(b)={fb!r}"
        )
    try:
        return float(optimize.brentq(f, a, b, xtol=tol, maxiter=maxiter))
    except RuntimeError as exc:
        raise ConvergenceError(f"brent_root: {exc}") from exc


# ---------------------------------------------------------------------------
# least squares


@dataclass(frozen=True)
class LineFit:
    """Ordinary least-squares line ``y = intercept + slope * x``.

    ``rmse`` divides by ``n`` (not ``n - 2``).  Units follow the inputs.
    """

    slope: float
    intercept: float
    rmse: float
    n: int

    def predict(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class PlaneFit:
    """Least-squares plane ``z = z0 + alpha * x + beta * y``."""

    z0: float
    alpha: float
    beta: float
    residual_rms: float
    n: int

    @property
    def tilt(self) -> float:
        """Small-angle tilt in radians."""
        return math.hypot(self.alpha, self.beta)

    @property
    def tilt_urad(self) -> float:
        return 1e6 * self.tilt

    def __call__(self, x, y):
        return self.z0 + self.alpha * np.asarray(x, dtype=float) + self.beta * np.asarray(y, dtype=float)


def fit_line(xs: Sequence[float], ys: Sequence[float]) -> LineFit:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("fit_line needs two equal-length 1-D sequences")
    n = x.size
    if n < 2:
        raise RankDeficiencyError(f"fit_line needs at least 2 points, got {n}")
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise RankDeficiencyError("fit_line: all abscissae are equal")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    return LineFit(slope, intercept, math.sqrt(float(resid @ resid) / n), n)


def fit_plane(points) -> PlaneFit:
    """Fit ``z = z0 + alpha x + beta y`` to an (n, 3) array of points."""
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 3:
        raise DomainError("fit_plane expects (x, y, z) triplets")
    n = p.shape[0]
    if n < 3:
        raise RankDeficiencyError(f"fit_plane needs at least 3 points, got {n}")
    xm, ym = p[:, 0].mean(), p[:, 1].mean()
    design = np.column_stack([p[:, 0] - xm, p[:, 1] - ym])
    scale = np.abs(design).max()
    if scale == 0.0 or np.linalg.matrix_rank(design / scale) < 2:
        raise RankDeficiencyError("fit_plane: points are collinear in (x, y)")
    zm = p[:, 2].mean()
    (alpha, beta), *_ = np.linalg.lstsq(design, p[:, 2] - zm, rcond=None)
    resid = p[:, 2] - zm - design @ np.array([alpha, beta])
    z0 = zm - alpha * xm - beta * ym
    return PlaneFit(float(z0), float(alpha), float(beta), math.sqrt(float(resid @ resid) / n), n)
