"""Purcell-limited qubit lifetime for qubit-resonator(-filter) chains.

User-facing frequencies are ordinary frequencies: mode frequencies in GHz,
couplings and linewidths in MHz.  The effective non-Hermitian Hamiltonians
are assembled in rad/us, so ``T1 = 1 / (-2 Im(w))`` comes out in
microseconds directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .design import ladder
from .errors import DomainError, FlipChipError, NoSignChangeError
from .numerics import brent_root, eigenpairs

__all__ = [
    "QrParams",
    "QrfParams",
    "SpuriousMode",
    "PurcellSweepConfig",
    "SweepRow",
    "chi",
    "solve_g_qr",
    "qr_matrix",
    "qrf_matrix",
    "qr_t1",
    "qrf_t1",
    "solve_g_rf",
    "sweep",
    "min_t1",
    "resonator_linewidth",
    "spurious_mode_t1",
]

_TWO_PI = 2.0 * math.pi
QUBIT, RESONATOR, FILTER = 0, 1, 2
SWEEP_HEADER = ("kappa_f_MHz", "step_MHz", "delta_rf_MHz", "g_qr_MHz", "g_rf_MHz", "t1_us")


def _ghz(x: float) -> float:
    return _TWO_PI * 1e3 * x


def _mhz(x: float) -> float:
    return _TWO_PI * x


@dataclass(frozen=True)
class QrParams:
    omega_q: float = 5.0
    omega_r: float = 6.7
    g_qr: float = 111.37
    kappa_r: float = 2.0
    eta: float = -270.0

    def __post_init__(self):
        vals = (self.omega_q, self.omega_r, self.g_qr, self.kappa_r, self.eta)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("all parameters must be finite")
        if self.kappa_r < 0:
            raise DomainError(f"kappa_r must be >= 0, got {self.kappa_r}")
        if not self.eta < 0:
            raise DomainError(f"eta must be negative, got {self.eta}")


@dataclass(frozen=True)
class QrfParams(QrParams):
    omega_f: float = 6.7
    g_rf: float = 0.0
    kappa_f: float = 600.0

    def __post_init__(self):
        super().__post_init__()
        if not (math.isfinite(self.omega_f) and math.isfinite(self.g_rf)):
            raise DomainError("all parameters must be finite")
        if not self.kappa_f > 0:
            raise DomainError(f"kappa_f must be > 0, got {self.kappa_f}")


@dataclass(frozen=True)
class SpuriousMode:
    omega_mode: float
    q_coupling: float
    g: float

    def __post_init__(self):
        if not self.q_coupling > 0:
            raise DomainError(f"coupling Q must be > 0, got {self.q_coupling}")

    @property
    def kappa(self) -> float:
        """Mode linewidth in MHz."""
        return self.omega_mode * 1e3 / self.q_coupling


def chi(g_qr: float, delta_qr: float, eta: float) -> float:
    """Dispersive shift (MHz) from coupling (MHz), detuning (GHz), anharmonicity (MHz)."""
    d = delta_qr * 1e3
    denom = d + d * d / eta
    if denom == 0:
        raise DomainError("dispersive shift undefined: detuning at the straddle point")
    return -g_qr * g_qr / denom


def solve_g_qr(kappa_r: float, delta_qr: float, eta: float) -> float:
    """Coupling (MHz) for which ``|chi| = kappa_r / 2``."""
    d = delta_qr * 1e3
    denom = d + d * d / eta
    if denom == 0:
        raise DomainError("dispersive shift undefined: detuning at the straddle point")
    return math.sqrt(0.5 * kappa_r * abs(denom))


def qr_matrix(p: QrParams) -> np.ndarray:
    return np.array(
        [
            [_ghz(p.omega_q), _mhz(p.g_qr)],
            [_mhz(p.g_qr), _ghz(p.omega_r) - 0.5j * _mhz(p.kappa_r)],
        ]
    )


def qrf_matrix(p: QrfParams) -> np.ndarray:
    return np.array(
        [
            [_ghz(p.omega_q), _mhz(p.g_qr), 0.0],
            [_mhz(p.g_qr), _ghz(p.omega_r), _mhz(p.g_rf)],
            [0.0, _mhz(p.g_rf), _ghz(p.omega_f) - 0.5j * _mhz(p.kappa_f)],
        ]
    )


def _mode_eigenvalue(m: np.ndarray, index: int) -> complex:
    """Eigenvalue whose eigenvector has the largest weight on ``index``.

    Ties go to the eigenvalue whose real part is closest to the bare mode.
    """
    bare = m[index, index].real
    pairs = eigenpairs(m)
    best = max(pairs, key=lambda p: (round(abs(p[1][index]) ** 2, 12), -abs(p[0].real - bare)))
    return best[0]


def _t1(lam: complex) -> float:
    return math.inf if lam.imag >= 0 else 1.0 / (-2.0 * lam.imag)


def _mode_t1(m: np.ndarray, index: int) -> float:
    """T1 of the mode dominated by ``index``, accurate even when -Im(w) << |w|.

    For M = H - iD with H real symmetric and D diagonal, Im(w) equals
    -sum(d_k |v_k|^2) / |v|^2, so the decay rate comes from eigenvector
    weights instead of a small difference of large eigenvalues.
    """
    lam = _mode_eigenvalue(m, index)
    off = m - np.diag(np.diag(m).imag * 1j)
    if np.any(off.imag != 0) or np.any(off.real != off.real.T):
        return _t1(lam)
    others = [k for k in range(m.shape[0]) if k != index]
    a = m[np.ix_(others, others)] - lam * np.eye(len(others))
    try:
        vo = np.linalg.solve(a, -m[others, index])
    except np.linalg.LinAlgError:
        return _t1(lam)
    w = np.ones(m.shape[0])
    w[others] = np.abs(vo) ** 2
    rate = 2.0 * float(-np.diag(m).imag @ w) / float(w.sum())
    return math.inf if rate <= 0 else 1.0 / rate


def qr_t1(p: QrParams) -> float:
    """Purcell T1 (us) of a qubit coupled to one damped resonator."""
    return _mode_t1(qr_matrix(p), QUBIT)


def qrf_t1(p: QrfParams) -> float:
    """Purcell T1 (us) with a damped filter between resonator and environment."""
    return _mode_t1(qrf_matrix(p), QUBIT)


def resonator_linewidth(p: QrfParams) -> float:
    """Dressed resonator linewidth -2 Im(w_r) in MHz."""
    lam = _mode_eigenvalue(qrf_matrix(p), RESONATOR)
    return -2.0 * lam.imag / _TWO_PI


def solve_g_rf(
    omega_r: float,
    omega_f: float,
    kappa_f: float,
    target_kappa_r: float = 2.0,
    omega_q: float = 5.0,
    g_qr: float = 0.0,
    eta: float = -270.0,
) -> float:
    """Resonator-filter coupling (MHz) giving the resonator linewidth ``target_kappa_r``."""
    if not 0 < target_kappa_r < kappa_f:
        raise DomainError(
            f"need 0 < target kappa_r < kappa_f, got {target_kappa_r} and {kappa_f}"
        )
    base = QrfParams(omega_q, omega_r, g_qr, 0.0, eta, omega_f, 0.0, kappa_f)

    def resid(g: float) -> float:
        return resonator_linewidth(replace(base, g_rf=g)) - target_kappa_r

    try:
        # the lower end is open: at g_rf = 0 the linewidth is exactly zero
        return brent_root(resid, 1e-9 * kappa_f, kappa_f, tol=1e-12 * kappa_f)
    except NoSignChangeError:
        raise NoSignChangeError(
            f"resonator linewidth {target_kappa_r} MHz unreachable for "
            f"g_rf in (0, {kappa_f}] MHz at omega_r={omega_r} GHz"
        ) from None


@dataclass(frozen=True)
class PurcellSweepConfig:
    kappa_f: tuple[float, ...] = (300.0, 600.0, 1200.0)
    steps: tuple[float, ...] = (30.0,)
    count: int = 14
    omega_f: float = 6.7
    omega_q: float = 5.0
    kappa_r: float = 2.0
    eta: float = -270.0

    def __post_init__(self):
        object.__setattr__(self, "kappa_f", tuple(float(k) for k in self.kappa_f))
        object.__setattr__(self, "steps", tuple(float(s) for s in self.steps))
        if not self.kappa_f or not self.steps:
            raise DomainError("sweep needs at least one kappa_f and one step")
        if self.count < 1:
            raise DomainError(f"resonator count must be >= 1, got {self.count}")
        if any(s <= 0 for s in self.steps) or any(k <= 0 for k in self.kappa_f):
            raise DomainError("steps and kappa_f values must be > 0")
        if not self.eta < 0:
            raise DomainError(f"eta must be negative, got {self.eta}")


@dataclass(frozen=True)
class SweepRow:
    kappa_f: float
    step: float
    delta_rf: float
    g_qr: float
    g_rf: float
    t1: float
    trace_error: float = field(default=0.0, compare=False)

    def as_tuple(self) -> tuple[float, ...]:
        return (self.kappa_f, self.step, self.delta_rf, self.g_qr, self.g_rf, self.t1)


def sweep(config: PurcellSweepConfig) -> list[SweepRow]:
    """Purcell T1 for every resonator of every (kappa_f, step) configuration.

    Rows are ordered by (kappa_f, step, resonator index).  ``trace_error``
    records the relative mismatch between the summed mode linewidths and
    kappa_f.
    """
    rows = []
    for kf in config.kappa_f:
        for step in config.steps:
            for wr in ladder(config.omega_f, step, config.count):
                try:
                    g = solve_g_qr(config.kappa_r, config.omega_q - wr, config.eta)
                    grf = solve_g_rf(wr, config.omega_f, kf, config.kappa_r, config.omega_q, g, config.eta)
                except FlipChipError as exc:
                    raise type(exc)(
                        f"kappa_f={kf} MHz, step={step} MHz, omega_r={wr:.6f} GHz: {exc}"
                    ) from exc
                p = QrfParams(config.omega_q, wr, g, 0.0, config.eta, config.omega_f, grf, kf)
                m = qrf_matrix(p)
                lam = [e for e, _ in eigenpairs(m)]
                total = sum(-2.0 * e.imag for e in lam) / _TWO_PI
                rows.append(
                    SweepRow(
                        kf, step, (wr - config.omega_f) * 1e3, g, grf,
                        _mode_t1(m, QUBIT), abs(total - kf) / kf,
                    )
                )
    return rows


def min_t1(rows: Sequence[SweepRow], kappa_f: float, step: float) -> float:
    sel = [r.t1 for r in rows if r.kappa_f == kappa_f and r.step == step]
    if not sel:
        raise KeyError((kappa_f, step))
    return min(sel)


def spurious_mode_t1(omega_q: float, mode: SpuriousMode) -> float:
    """Purcell T1 (ms) through a parasitic mode with linewidth omega/Q_c."""
    if omega_q == mode.omega_mode:
        raise DomainError("qubit and spurious mode are degenerate")
    m = np.array(
        [
            [_ghz(omega_q), _mhz(mode.g)],
            [_mhz(mode.g), _ghz(mode.omega_mode) - 0.5j * _mhz(mode.kappa)],
        ]
    )
    return _mode_t1(m, QUBIT) * 1e-3
