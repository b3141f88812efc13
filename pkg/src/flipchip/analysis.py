"""Resonance extraction from S11 traces and per-column linearity analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize

from .chipmodel import FrequencyTable
from .errors import DomainError, InputFormatError, MissingBaselineError, NoResonanceError
from .numerics import LineFit, fit_line
from .tables import parse_floats, read_rows

__all__ = [
    "S11Trace",
    "ResonanceFit",
    "DesignSummary",
    "DesignReport",
    "s11_model",
    "read_trace",
    "fit_s11",
    "column_linearity",
    "compare_designs",
]

TRACE_HEADER = ("freq_GHz", "re", "im")
MIN_TRACE_POINTS = 16
# unwrapped phase excursion below this is not treated as a resonance
_MIN_PHASE_SWING = 0.5


@dataclass(frozen=True, eq=False)
class S11Trace:
    freqs: np.ndarray
    s11: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        s = np.asarray(self.s11, dtype=complex)
        if f.ndim != 1 or f.shape != s.shape:
            raise DomainError("frequencies and S11 samples must be equal-length 1-D arrays")
        if f.size < MIN_TRACE_POINTS:
            raise DomainError(f"trace needs at least {MIN_TRACE_POINTS} samples, got {f.size}")
        if not np.all(np.diff(f) > 0):
            raise DomainError("trace frequencies must be strictly increasing")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "s11", s)


def read_trace(source) -> S11Trace:
    f, s = [], []
    for lineno, fields in read_rows(source, TRACE_HEADER):
        fr, re, im = parse_floats(lineno, fields)
        if not all(math.isfinite(v) for v in (fr, re, im)):
            raise InputFormatError("non-finite value", line=lineno)
        f.append(fr)
        s.append(complex(re, im))
    try:
        return S11Trace(np.array(f), np.array(s))
    except DomainError as exc:
        raise InputFormatError(str(exc)) from None


def s11_model(freqs, f0: float, kappa_c: float, kappa_i: float, amplitude: float = 1.0, phase: float = 0.0):
    """Single-port reflection of a resonator; ``f0`` in GHz, linewidths in MHz."""
    det = 2j * math.pi * (np.asarray(freqs, dtype=float) - f0) * 1e3
    num = det + math.pi * (kappa_i - kappa_c)
    den = det + math.pi * (kappa_i + kappa_c)
    return amplitude * np.exp(1j * phase) * num / den


@dataclass(frozen=True)
class ResonanceFit:
    f0: float
    kappa_c: float
    kappa_i: float
    residual: float
    amplitude: float = 1.0
    phase: float = 0.0
    converged: bool = True


def _moving_average(x: np.ndarray, n: int = 5) -> np.ndarray:
    pad = n // 2
    xp = np.pad(x, pad, mode="edge")
    return np.convolve(xp, np.ones(n) / n, mode="valid")


def _initial_guess(trace: S11Trace):
    f, s = trace.freqs, trace.s11
    phase = _moving_average(np.unwrap(np.angle(s)))
    if np.ptp(phase) < _MIN_PHASE_SWING:
        raise NoResonanceError("no phase winding found in S11 trace")
    dphi = np.gradient(phase, f * 1e3)
    i = int(np.argmax(np.abs(dphi)))
    # |dphi/df| at resonance is about 4 / kappa_total for an over-coupled port
    kappa = min(max(4.0 / abs(dphi[i]), 1e-6), np.ptp(f) * 1e3)
    ends = s[0] / abs(s[0]) + s[-1] / abs(s[-1])
    amp = 0.5 * (abs(s[0]) + abs(s[-1]))
    return f[i], 0.9 * kappa, 0.1 * kappa, amp, float(np.angle(ends))


def fit_s11(trace: S11Trace, max_iter: int = 100, rtol: float = 1e-8) -> ResonanceFit:
    """Least-squares fit of :func:`s11_model` with free amplitude and phase.

    The start point comes from the steepest point of the 5-point smoothed,
    unwrapped phase.  A fit that exhausts ``max_iter`` iterations is returned
    with ``converged=False``.
    """
    f0g, kc, ki, amp, ph = _initial_guess(trace)
    f, s = trace.freqs, trace.s11
    norm = np.linalg.norm(s)

    def resid(p):
        df0, kc_, ki_, a, phi = p
        d = s11_model(f, f0g + df0 * 1e-3, kc_, ki_, a, phi) - s
        return np.concatenate([d.real, d.imag])

    span = np.ptp(f) * 1e3
    res = optimize.least_squares(
        resid,
        x0=[0.0, kc, ki, amp, ph],
        bounds=([-span, 1e-9, 0.0, 0.0, -np.inf], [span, np.inf, np.inf, np.inf, np.inf]),
        x_scale=[kc, kc, kc, 1.0, 1.0],
        ftol=rtol,
        xtol=1e-15,
        gtol=1e-15,
        max_nfev=max_iter * 6,
        method="trf",
    )
    df0, kc_, ki_, a, phi = res.x
    phi = math.remainder(phi, 2 * math.pi)
    return ResonanceFit(
        f0=f0g + df0 * 1e-3,
        kappa_c=float(kc_),
        kappa_i=float(ki_),
        residual=float(np.sqrt(2 * res.cost) / norm),
        amplitude=float(a),
        phase=phi,
        converged=bool(res.status > 0),
    )


def column_linearity(freqs: Sequence[float], exclude_tail: int = 2) -> LineFit:
    """Linear fit of frequency (GHz in) against row index; slope and RMSE in MHz.

    The last ``exclude_tail`` rows are dropped first.
    """
    if exclude_tail < 0:
        raise DomainError("exclude_tail must be >= 0")
    kept = list(freqs)[: len(freqs) - exclude_tail]
    if len(kept) < 3:
        raise DomainError(f"need at least 3 rows after exclusion, got {len(kept)}")
    mhz = np.asarray(kept, dtype=float) * 1e3
    return fit_line(np.arange(len(kept), dtype=float), mhz)


@dataclass(frozen=True)
class DesignSummary:
    etched_length_um: float
    columns: tuple[int, ...]
    mean_rmse_mhz: float
    mean_step_mhz: float
    target_step_mhz: float

    @property
    def off_target_mhz(self) -> float:
        return abs(self.mean_step_mhz - self.target_step_mhz)


@dataclass(frozen=True)
class DesignReport:
    designs: tuple[DesignSummary, ...]

    @property
    def baseline(self) -> DesignSummary:
        return next(d for d in self.designs if d.etched_length_um == 0.0)

    def improvement_factor(self, etched_length_um: float) -> float:
        """Baseline mean RMSE over the given design's mean RMSE (inf if the latter is 0)."""
        d = self._get(etched_length_um)
        if d.mean_rmse_mhz == 0:
            return math.inf
        return self.baseline.mean_rmse_mhz / d.mean_rmse_mhz

    def step_error_ratio(self, etched_length_um: float) -> float:
        """Off-target step error of a design relative to the baseline's."""
        d = self._get(etched_length_um)
        base = self.baseline.off_target_mhz
        if base == 0:
            return 0.0 if d.off_target_mhz == 0 else math.inf
        return d.off_target_mhz / base

    def _get(self, etched_length_um: float) -> DesignSummary:
        for d in self.designs:
            if d.etched_length_um == etched_length_um:
                return d
        raise KeyError(etched_length_um)

    def to_dict(self) -> dict:
        out = []
        for d in self.designs:
            out.append(
                {
                    "etched_length_um": d.etched_length_um,
                    "columns": list(d.columns),
                    "mean_rmse_MHz": d.mean_rmse_mhz,
                    "mean_step_MHz": d.mean_step_mhz,
                    "target_step_MHz": d.target_step_mhz,
                    "off_target_MHz": d.off_target_mhz,
                    "improvement_factor": self.improvement_factor(d.etched_length_um),
                    "step_error_ratio": self.step_error_ratio(d.etched_length_um),
                }
            )
        return {"designs": out}

    def text(self) -> str:
        head = f"{'etched_um':>10} {'cols':>5} {'rmse_MHz':>10} {'step_MHz':>10} {'target':>8} {'off_MHz':>9} {'improve':>8}"
        lines = [head]
        for d in self.designs:
            lines.append(
                f"{d.etched_length_um:10.1f} {len(d.columns):5d} {d.mean_rmse_mhz:10.4f} "
                f"{d.mean_step_mhz:10.4f} {d.target_step_mhz:8.2f} {d.off_target_mhz:9.4f} "
                f"{self.improvement_factor(d.etched_length_um):8.3f}"
            )
        return "\n".join(lines)


def compare_designs(
    table: FrequencyTable,
    targets: float | Mapping[float, float] = 30.0,
    exclude_tail: int = 2,
) -> DesignReport:
    """Aggregate column linearity per etched length.

    ``targets`` is the designed step in MHz, either one value for all
    designs or a mapping from etched length to step.
    """
    groups: dict[float, list[tuple[int, LineFit]]] = {}
    for col, recs in table.columns().items():
        lengths = {r.etched_length_um for r in recs}
        if len(lengths) != 1:
            raise DomainError(f"column {col} mixes etched lengths {sorted(lengths)}")
        fit = column_linearity([r.freq_GHz for r in recs], exclude_tail)
        groups.setdefault(lengths.pop(), []).append((col, fit))
    if 0.0 not in groups:
        raise MissingBaselineError("no zero-etch columns to compare against")
    if len(groups) < 2:
        raise DomainError("need at least one etched design besides the baseline")
    summaries = []
    for length in sorted(groups):
        fits = groups[length]
        target = targets if isinstance(targets, (int, float)) else targets.get(length)
        if target is None:
            raise DomainError(f"no target step for etched length {length}")
        summaries.append(
            DesignSummary(
                length,
                tuple(c for c, _ in fits),
                float(np.mean([f.rmse for _, f in fits])),
                float(np.mean([f.slope for _, f in fits])),
                float(target),
            )
        )
    return DesignReport(tuple(summaries))
