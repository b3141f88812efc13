import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipchip.errors import ConvergenceError, DomainError, NoSignChangeError, RankDeficiencyError
from flipchip.numerics import (
    brent_root,
    charpoly,
    eigenpairs,
    eigenvalues,
    elliptic_k,
    fit_line,
    fit_plane,
    k_ratio,
)

import oracles


# --- elliptic integral ------------------------------------------------------


def test_k_at_zero():
    assert elliptic_k(0.0) == pytest.approx(math.pi / 2, rel=1e-15)


def test_k_half_against_frozen_quadrature():
    assert elliptic_k(0.5) == pytest.approx(oracles.K_HALF, rel=1e-14)


def test_k_ratio_symmetric_point():
    assert k_ratio(1 / math.sqrt(2)) == pytest.approx(1.0, rel=1e-14)


def test_k_ratio_definition():
    assert k_ratio(0.3) == pytest.approx(elliptic_k(0.3) / elliptic_k(math.sqrt(0.91)), rel=1e-12)


def test_k_ratio_small_k_asymptote():
    k = 1e-8
    assert k_ratio(k) == pytest.approx(math.pi / (2 * math.log(4 / k)), rel=1e-12)


def test_k_ratio_endpoints():
    assert k_ratio(0.0) == 0.0
    assert k_ratio(1.0) == math.inf


@pytest.mark.parametrize("k", [-0.1, 1.0, 1.5, math.nan])
def test_k_domain(k):
    with pytest.raises(DomainError):
        elliptic_k(k)


def test_k_against_quadrature_sample():
    rng = np.random.default_rng(7)
    ks = np.concatenate([rng.uniform(0, 0.999, 40), [1e-5, 0.9999, 0.999999]])
    for k in ks:
        ref = float(oracles.k_quadrature(k))
        assert elliptic_k(float(k)) == pytest.approx(ref, rel=1e-12)


@given(st.floats(0.0, 0.999), st.floats(0.0, 0.999))
def test_k_increasing(a, b):
    a, b = sorted((a, b))
    assert elliptic_k(a) <= elliptic_k(b)
    # K(b) - K(a) ~ pi/8 (b^2 - a^2) near 0; strictness is only observable above rounding
    if b * b - a * a > 1e-14:
        assert elliptic_k(a) < elliptic_k(b)


def test_k_diverges_near_one():
    assert elliptic_k(1 - 1e-15) > 18


# --- eigenvalues --------------------------------------------------------------


def _match(got, ref, rel):
    got = sorted(got, key=lambda z: (z.real, z.imag))
    ref = sorted(ref, key=lambda z: (z.real, z.imag))
    scale = max(abs(z) for z in ref) or 1.0
    for g, r in zip(got, ref):
        assert abs(g - r) <= rel * max(abs(r), 1e-3 * scale)


def test_diagonal():
    assert sorted(eigenvalues(np.diag([2.0 + 1j, -3.0])), key=lambda z: z.real) == [-3.0, 2.0 + 1j]


def test_pauli_x():
    assert sorted(e.real for e in eigenvalues([[0, 1], [1, 0]])) == [-1.0, 1.0]


def test_random_3x3_against_companion_oracle():
    rng = np.random.default_rng(11)
    for _ in range(50):
        m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        _match(eigenvalues(m), oracles.eig_oracle(m), 1e-9)


def test_repeated_and_defective():
    _match(eigenvalues([[1, 1, 0], [0, 1, 1], [0, 0, 1]]), [1, 1, 1], 1e-5)
    _match(eigenvalues(np.eye(3) * 2.5), [2.5] * 3, 1e-15)


def test_block_decoupled():
    m = np.array([[5.0, 0, 0], [0, 6.0, 0.1], [0, 0.1, 6.0 - 1j]])
    _match(eigenvalues(m), np.linalg.eigvals(m), 1e-12)


def test_charpoly_consistency():
    m = np.array([[1, 2j, 0], [0.5, -1, 3], [1, 1, 1j]])
    c = charpoly(m)
    for lam in eigenvalues(m):
        assert abs(np.polyval(c, lam)) < 1e-10


def test_eigenpairs_are_eigenvectors():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    for lam, v in eigenpairs(m):
        assert np.linalg.norm(m @ v - lam * v) < 1e-10 * np.linalg.norm(m)
        assert np.linalg.norm(v) == pytest.approx(1.0)


def test_rejects_bad_shape():
    with pytest.raises(DomainError):
        eigenvalues(np.zeros((4, 4)))


_cplx = st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=200)
@given(st.lists(_cplx, min_size=9, max_size=9))
def test_trace_and_determinant(entries):
    m = np.array(entries).reshape(3, 3)
    lam = eigenvalues(m)
    scale = max(np.abs(m).max(), 1e-300)
    assert abs(sum(lam) - np.trace(m)) <= 1e-12 * 3 * scale
    det = np.linalg.det(m)
    assert abs(np.prod(lam) - det) <= 1e-10 * max(abs(det), scale**3 * 1e-3) + 1e-12 * scale**3


@given(st.lists(_cplx, min_size=4, max_size=4))
def test_eigenvalues_pure(entries):
    m = np.array(entries).reshape(2, 2)
    assert eigenvalues(m) == eigenvalues(m.copy())


# --- root finding -------------------------------------------------------------


def test_brent_linear():
    assert brent_root(lambda x: x - 3, 0, 10) == pytest.approx(3.0, abs=1e-12)


def test_brent_cos():
    assert brent_root(math.cos, 1, 2, tol=1e-14) == pytest.approx(math.pi / 2, abs=1e-13)


def test_brent_errors():
    with pytest.raises(NoSignChangeError):
        brent_root(lambda x: x * x + 1, -1, 1)
    with pytest.raises(DomainError):
        brent_root(lambda x: x, 1, 0)
    with pytest.raises(ConvergenceError):
        brent_root(lambda x: math.exp(5 * x) - 2, 0, 1, maxiter=1)


def test_brent_endpoint_root():
    assert brent_root(lambda x: x, 0.0, 1.0) == 0.0


# --- line fit -----------------------------------------------------------------


def test_collinear_line():
    f = fit_line([0, 1, 2, 3], [1, 4, 7, 10])
    assert f.slope == pytest.approx(3.0, rel=1e-15)
    assert f.rmse == pytest.approx(0.0, abs=1e-14)


def test_line_offset_invariance():
    xs = np.arange(8.0)
    ys = np.array([0.1, 0.9, 2.2, 2.8, 4.1, 5.3, 5.9, 7.2])
    assert fit_line(xs, ys + 17.0).rmse == pytest.approx(fit_line(xs, ys).rmse, rel=1e-12)


def test_line_against_normal_equations():
    rng = np.random.default_rng(5)
    xs = np.arange(10.0)
    ys = 2.5 * xs + 1 + rng.normal(0, 0.3, 10)
    slope, icpt, rmse = oracles.line_fit_oracle(xs, ys)
    f = fit_line(xs, ys)
    assert f.slope == pytest.approx(slope, rel=1e-12)
    assert f.intercept == pytest.approx(icpt, rel=1e-12)
    assert f.rmse == pytest.approx(rmse, rel=1e-12)


def test_line_degenerate():
    with pytest.raises(RankDeficiencyError):
        fit_line([1, 1, 1], [1, 2, 3])
    with pytest.raises(RankDeficiencyError):
        fit_line([1], [1])


_small = st.floats(-1e3, 1e3)


@given(st.lists(_small, min_size=4, max_size=20), _small, _small)
def test_line_translation_invariance(ys, dx, dy):
    xs = np.arange(len(ys), dtype=float)
    base = fit_line(xs, ys)
    moved = fit_line(xs + dx, np.asarray(ys) + dy)
    assert moved.slope == pytest.approx(base.slope, rel=1e-9, abs=1e-9)
    assert moved.rmse == pytest.approx(base.rmse, rel=1e-9, abs=1e-8)


# --- plane fit ----------------------------------------------------------------


def _grid(fn, nx=6, ny=5):
    x, y = np.meshgrid(np.linspace(0, 25e3, nx), np.linspace(0, 10e3, ny))
    x, y = x.ravel(), y.ravel()
    return np.column_stack([x, y, fn(x, y)])


def test_exact_plane():
    f = fit_plane(_grid(lambda x, y: 3.0 + 1e-4 * x - 2e-4 * y))
    assert (f.z0, f.alpha, f.beta) == pytest.approx((3.0, 1e-4, -2e-4), rel=1e-12)
    assert f.residual_rms == pytest.approx(0.0, abs=1e-12)


def test_horizontal_plane():
    f = fit_plane(_grid(lambda x, y: np.full_like(x, 9.6)))
    assert f.tilt == pytest.approx(0.0, abs=1e-15)


def test_plane_tilt_219():
    f = fit_plane(_grid(lambda x, y: 9.6 + 155e-6 * x + 155e-6 * y))
    assert f.tilt_urad == pytest.approx(math.hypot(155, 155), rel=1e-12)
    assert f.tilt_urad == pytest.approx(219.2, abs=0.05)


def test_plane_degenerate():
    with pytest.raises(RankDeficiencyError):
        fit_plane([[0, 0, 1], [1, 1, 2], [2, 2, 3]])


@given(_small, st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3))
def test_plane_recovers_any_plane(z0, a, b):
    f = fit_plane(_grid(lambda x, y: z0 + a * x + b * y))
    assert f.residual_rms <= 1e-9 * (1 + abs(z0) + 3e4 * (abs(a) + abs(b)))
