"""Exit criteria, each run at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line; the lines are printed together in
the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from flipchip.analysis import S11Trace, compare_designs, fit_s11, s11_model
from flipchip.chipmodel import (
    ChipLayout,
    ChipScenario,
    column_designs,
    column_plans,
    simulate_chip,
    spacing_map,
    synthetic_scan,
)
from flipchip.cpw import CpwCrossSection, ResonatorDesign, resonator_frequency, sensitivity
from flipchip.design import EtchCalibration, calibrate_length, optimal_gamma
from flipchip.numerics import eigenvalues, elliptic_k
from flipchip.purcell import (
    PurcellSweepConfig,
    QrParams,
    min_t1,
    qr_matrix,
    qr_t1,
    solve_g_qr,
    sweep,
)

import oracles
from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance


def _record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_coupling_solver():
    t = time.perf_counter()
    g = solve_g_qr(2.0, -1.7, -270.0)
    dt = time.perf_counter() - t
    _record(1, abs(g - 111.37) <= 0.01 and dt < 1.0, f"g_qr = {g:.4f} MHz (target 111.37 +/- 0.01)")


def test_criterion_2_filterless_t1():
    t = time.perf_counter()
    t1 = qr_t1(QrParams(5.0, 6.7, solve_g_qr(2.0, -1.7, -270.0), 2.0, -270.0))
    dt = time.perf_counter() - t
    _record(2, abs(t1 - 18.78) <= 0.05 and dt < 1.0, f"T1 = {t1:.4f} us (target 18.78 +/- 0.05)")


def test_criterion_3_filtered_sweep():
    t = time.perf_counter()
    rows = sweep(PurcellSweepConfig(kappa_f=(300.0, 600.0, 1200.0), steps=(30.0,), count=14))
    dt = time.perf_counter() - t
    mins = [min_t1(rows, kf, 30.0) for kf in (300.0, 600.0, 1200.0)]
    sel = [r for r in rows if r.kappa_f == 600.0]
    span = (min(r.delta_rf for r in sel), max(r.delta_rf for r in sel))
    ok = (
        300 <= mins[1] <= 500
        and mins[0] >= mins[1] >= mins[2]
        and abs(span[0] + 195) < 1e-9
        and abs(span[1] - 195) < 1e-9
        and dt < 10
    )
    _record(
        3, ok,
        f"min T1 at 600 MHz = {mins[1]:.1f} us; by kappa_f 300/600/1200: "
        f"{mins[0]:.1f}/{mins[1]:.1f}/{mins[2]:.1f} us; {dt:.2f} s",
    )


def test_criterion_4_etching_optimum():
    t = time.perf_counter()
    xs = CpwCrossSection()
    g = optimal_gamma(xs, 4.5, 9.0)
    base = ResonatorDesign(4.5, g, xs)
    s = sensitivity(base, 9.0)
    below = sensitivity(base.with_(gamma=max(g - 0.01, 0.0)), 9.0)
    above = sensitivity(base.with_(gamma=min(g + 0.01, 1.0)), 9.0)
    dt = time.perf_counter() - t
    ok = 0.74 <= g <= 0.90 and abs(s) < 0.05 and below * above < 0 and dt < 5
    _record(
        4, ok,
        f"gamma* = {g:.4f} (target [0.74, 0.90]); |df/dh| = {abs(s):.2e} MHz/um; "
        f"sign flip {below:+.3f} -> {above:+.3f}",
    )


def test_criterion_5_facing_signs():
    t = time.perf_counter()
    rng = np.random.default_rng(20240)
    geoms = [CpwCrossSection()] + [
        CpwCrossSection(rng.uniform(4, 20), rng.uniform(4, 20), rng.uniform(9, 12)) for _ in range(20)
    ]
    bad = 0
    for xs in geoms:
        sm = sensitivity(ResonatorDesign(4.5, 0.0, xs), 9.0)
        sd = sensitivity(ResonatorDesign(4.5, 1.0, xs), 9.0)
        bad += not (sm * sd < 0)
    dt = time.perf_counter() - t
    _record(5, bad == 0 and dt < 5, f"{len(geoms) - bad}/{len(geoms)} geometries with opposite signs")


def test_criterion_6_metal_facing_magnitude():
    t = time.perf_counter()
    xs = CpwCrossSection()
    length = calibrate_length(xs, 0.0, 9.0, 6.5)
    d = ResonatorDesign(length, 0.0, xs)
    shift = (resonator_frequency(d, 8.2) - resonator_frequency(d, 9.8)) * 1e3
    dt = time.perf_counter() - t
    _record(6, 30 <= shift <= 150 and dt < 1.0, f"f(8.2) - f(9.8) = {shift:.1f} MHz (target 30..150)")


def test_criterion_7_synthetic_chip():
    t = time.perf_counter()
    g = optimal_gamma()
    layout = ChipLayout.alternating(330.0, columns=15, rows=12)
    designs = column_designs(layout, EtchCalibration(((0.0, 0.0), (330.0, g))))
    scen = ChipScenario(tilt_urad=219.0, mean_spacing_um=9.6, freq_noise_mhz=0.1, seed=0)
    smap = spacing_map(synthetic_scan(layout, scen))
    table = simulate_chip(layout, smap, designs, column_plans(designs, layout.rows), scen.freq_noise_mhz, scen.seed)
    rep = compare_designs(table, 30.0)
    imp, ratio = rep.improvement_factor(330.0), rep.step_error_ratio(330.0)
    dt = time.perf_counter() - t
    ok = imp >= 3 and ratio <= 0.2 and dt < 30
    _record(7, ok, f"improvement {imp:.2f} (>= 3); step error ratio {ratio:.4f} (<= 0.2); tilt {smap.tilt_urad:.1f} urad")


def test_criterion_8_oracle_suites():
    t = time.perf_counter()
    rng = np.random.default_rng(8)

    ks = np.concatenate([rng.uniform(0.0, 1.0, 990), [0.0, 1e-12, 1e-6, 0.5, 0.9, 0.99, 0.999, 0.9999, 0.99999, 0.999999]])
    k_err = max(abs(elliptic_k(float(k)) / float(oracles.k_quadrature(k)) - 1) for k in ks)

    e_err = 0.0
    for _ in range(1000):
        m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        got = sorted(eigenvalues(m), key=lambda z: (z.real, z.imag))
        ref = sorted(oracles.eig_oracle(m), key=lambda z: (z.real, z.imag))
        e_err = max(e_err, max(abs(a - b) / abs(b) for a, b in zip(got, ref)))

    f = np.linspace(6.49, 6.51, 401)
    f_err = 0.0
    for seed in range(100):
        r = np.random.default_rng([8, seed])
        f0 = 6.5 + r.uniform(-0.003, 0.003)
        clean = s11_model(f, f0, 2.0, 0.1)
        noisy = clean * (1 + 0.01 * r.normal(size=f.size))
        fit = fit_s11(S11Trace(f, noisy))
        f_err = max(f_err, abs(fit.f0 - f0) / f0)
    dt = time.perf_counter() - t
    ok = k_err <= 1e-12 and e_err <= 1e-9 and f_err <= 1e-5 and dt < 60
    _record(
        8, ok,
        f"K rel err {k_err:.1e}; eig rel err {e_err:.1e}; f0 rel err {f_err:.1e}; {dt:.1f} s",
    )


def test_criterion_9_trace_preservation():
    cfg = PurcellSweepConfig(kappa_f=(300.0, 600.0, 1200.0), steps=(30.0,), count=14)
    rows = sweep(cfg)
    err3 = max(r.trace_error for r in rows)
    err2 = 0.0
    for r in rows:
        p = QrParams(cfg.omega_q, cfg.omega_f + r.delta_rf * 1e-3, r.g_qr, cfg.kappa_r, cfg.eta)
        total = sum(-2 * e.imag for e in eigenvalues(qr_matrix(p))) / (2 * math.pi)
        err2 = max(err2, abs(total - cfg.kappa_r) / cfg.kappa_r)
    _record(9, err3 <= 1e-10 and err2 <= 1e-10, f"max rel error 3x3 {err3:.1e}, 2x2 {err2:.1e} over {len(rows)} grid points")
