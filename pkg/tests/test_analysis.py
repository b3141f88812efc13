import io
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipchip.analysis import (
    S11Trace,
    column_linearity,
    compare_designs,
    fit_s11,
    read_trace,
    s11_model,
)
from flipchip.chipmodel import (
    ChipLayout,
    ChipScenario,
    FrequencyRecord,
    FrequencyTable,
    column_designs,
    column_plans,
    simulate_chip,
    spacing_map,
    synthetic_scan,
)
from flipchip.design import EtchCalibration, optimal_gamma
from flipchip.errors import DomainError, InputFormatError, MissingBaselineError, NoResonanceError

F = np.linspace(6.49, 6.51, 401)


def _trace(f0=6.5, kc=2.0, ki=0.1, noise=0.0, seed=0, amp=1.0, phase=0.0):
    s = s11_model(F, f0, kc, ki, amp, phase)
    if noise:
        rng = np.random.default_rng(seed)
        s = s + noise * (rng.normal(size=F.size) + 1j * rng.normal(size=F.size))
    return S11Trace(F, s)


# --- reflection model ----------------------------------------------------------------


def test_far_detuned_unit_magnitude():
    s = s11_model(np.array([1.0, 20.0]), 6.5, 2.0, 0.1)
    assert np.abs(s) == pytest.approx([1.0, 1.0], abs=1e-6)


def test_on_resonance_depth():
    s = s11_model(np.array([6.5]), 6.5, 2.0, 0.1)
    assert abs(s[0]) == pytest.approx(abs(0.1 - 2.0) / 2.1, rel=1e-14)


def test_noise_free_round_trip():
    fit = fit_s11(_trace())
    assert fit.converged
    assert fit.f0 == pytest.approx(6.5, rel=1e-6)
    assert fit.kappa_c == pytest.approx(2.0, rel=1e-6)
    assert fit.kappa_i == pytest.approx(0.1, rel=1e-6)
    assert fit.residual < 1e-8


def test_noisy_round_trips():
    rng = random.Random(5)
    for seed in range(20):
        f0 = 6.5 + rng.uniform(-0.003, 0.003)
        fit = fit_s11(_trace(f0=f0, noise=0.01, seed=seed))
        assert fit.f0 == pytest.approx(f0, rel=1e-5)


@settings(max_examples=15, deadline=None)
@given(st.floats(-math.pi, math.pi))
def test_global_phase_invariance(phi):
    base = fit_s11(_trace())
    rot = fit_s11(S11Trace(F, _trace().s11 * np.exp(1j * phi)))
    assert abs(rot.f0 - base.f0) * 1e6 < 1.0


def test_free_amplitude():
    fit = fit_s11(_trace(amp=0.3, phase=1.0))
    assert fit.amplitude == pytest.approx(0.3, rel=1e-6)
    assert fit.f0 == pytest.approx(6.5, rel=1e-9)


def test_flat_trace_has_no_resonance():
    with pytest.raises(NoResonanceError):
        fit_s11(S11Trace(F, np.ones(F.size, dtype=complex)))


def test_trace_validation():
    with pytest.raises(DomainError):
        S11Trace(F[:10], np.ones(10))
    with pytest.raises(DomainError):
        S11Trace(F[::-1], np.ones(F.size))


def test_read_trace(tmp_path):
    s = _trace().s11
    text = "freq_GHz,re,im\n" + "".join(f"{float(f)!r},{float(z.real)!r},{float(z.imag)!r}\n" for f, z in zip(F, s))
    tr = read_trace(io.StringIO(text))
    assert np.array_equal(tr.s11, s)
    with pytest.raises(InputFormatError, match="line 3"):
        read_trace(io.StringIO("freq_GHz,re,im\n6.5,1,0\n6.6,x,0\n"))


# --- column linearity ------------------------------------------------------------------


def test_exact_ladder():
    fit = column_linearity([6.5 + 0.03 * i for i in range(12)])
    assert fit.slope == pytest.approx(30.0, rel=1e-9)
    assert fit.rmse == pytest.approx(0.0, abs=1e-9)


def test_single_outlier_oracle():
    ladder = [30.0 * i for i in range(10)]
    ladder[4] += 15.0
    x = np.arange(10.0)
    # direct arithmetic: OLS through the perturbed ladder
    xm, ym = x.mean(), np.mean(ladder)
    slope = np.sum((x - xm) * (np.array(ladder) - ym)) / np.sum((x - xm) ** 2)
    resid = np.array(ladder) - (ym + slope * (x - xm))
    expected = math.sqrt(sum(r * r for r in resid) / 10)
    fit = column_linearity([v * 1e-3 + 6.5 for v in ladder], exclude_tail=0)
    assert fit.rmse == pytest.approx(expected, rel=1e-9)


def test_exclude_tail_count():
    assert column_linearity([6.5 + 0.03 * i for i in range(12)], exclude_tail=2).n == 10


def test_too_few_rows():
    with pytest.raises(DomainError):
        column_linearity([6.5, 6.53, 6.56, 6.59], exclude_tail=2)


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=12), st.floats(-1, 1), st.floats(-0.1, 0.1))
def test_linearity_invariances(noise, c, b):
    base = [6.5 + 0.03 * i + 1e-3 * e for i, e in enumerate(noise)]
    f0 = column_linearity(base)
    f1 = column_linearity([v + c + b * i for i, v in enumerate(base)])
    assert f1.rmse == pytest.approx(f0.rmse, abs=1e-6)
    assert column_linearity([v + c for v in base]).slope == pytest.approx(f0.slope, abs=1e-6)


# --- design comparison ------------------------------------------------------------------


def _ladder_table(lengths, step=0.03):
    recs = [
        FrequencyRecord(c, r, e, 6.5 + step * r)
        for c, e in enumerate(lengths)
        for r in range(12)
    ]
    return FrequencyTable(tuple(recs))


def test_perfect_ladders_report_inf():
    # dyadic step keeps every intermediate exact, so the residuals are exactly zero
    rep = compare_designs(_ladder_table([0, 330, 0, 330], step=0.03125), targets=31.25)
    assert all(d.mean_rmse_mhz == 0.0 for d in rep.designs)
    assert rep.improvement_factor(330.0) == math.inf
    assert rep.step_error_ratio(330.0) == 0.0


def test_zero_rmse_gives_inf_sentinel():
    recs = [FrequencyRecord(0, r, 0.0, 6.5 + 0.001 * r * r) for r in range(12)]
    recs += [FrequencyRecord(1, r, 330.0, 6.5) for r in range(12)]
    rep = compare_designs(FrequencyTable(tuple(recs)), targets={0.0: 30.0, 330.0: 0.0})
    assert rep.improvement_factor(330.0) == math.inf
    assert rep.to_dict()["designs"][1]["improvement_factor"] == math.inf


def test_missing_baseline():
    with pytest.raises(MissingBaselineError):
        compare_designs(_ladder_table([330, 330]))


def test_missing_target():
    with pytest.raises(DomainError):
        compare_designs(_ladder_table([0, 330]), targets={0.0: 30.0})


def test_permutation_invariance():
    t = _ladder_table([0, 330, 0, 330], step=0.031)
    recs = list(t.records)
    shuffled = FrequencyTable(tuple(random.Random(3).sample(recs, len(recs))))
    remapped = FrequencyTable(tuple(FrequencyRecord(3 - r.column, r.row, r.etched_length_um, r.freq_GHz) for r in recs))
    assert compare_designs(t).to_dict() == compare_designs(shuffled).to_dict()
    a, b = compare_designs(t).to_dict(), compare_designs(remapped).to_dict()
    for da, db in zip(a["designs"], b["designs"]):
        assert da["mean_rmse_MHz"] == db["mean_rmse_MHz"]


def test_synthetic_chip_pipeline():
    g = optimal_gamma()
    layout = ChipLayout.alternating(330.0)
    designs = column_designs(layout, EtchCalibration(((0, 0), (330, g))))
    smap = spacing_map(synthetic_scan(layout, ChipScenario()))
    table = simulate_chip(layout, smap, designs, column_plans(designs, 12), 0.1, seed=0)
    rep = compare_designs(table)
    assert rep.improvement_factor(330.0) >= 3
    assert rep.step_error_ratio(330.0) <= 0.2
    assert "330.0" in rep.text()
