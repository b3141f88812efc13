"""Design-space helpers: spacing-insensitive etch ratio, length calibration
and frequency allocation inside a shared filter band."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cpw import (
    CpwCrossSection,
    EtchPosition,
    FrequencyModel,
    ResonatorDesign,
    resonator_frequency,
    sensitivity,
)
from .errors import DomainError, NoSignChangeError
from .numerics import brent_root
from .tables import parse_floats, read_rows

__all__ = [
    "EtchCalibration",
    "AllocationPlan",
    "DEFAULT_CALIBRATION",
    "optimal_gamma",
    "calibrate_length",
    "ladder",
    "allocate",
    "gamma_from_etched_length",
    "read_calibration_csv",
]

CALIBRATION_HEADER = ("etched_length_um", "gamma")
PLAN_HEADER = ("index", "target_freq_GHz", "length_mm")

# reference length for seeding length calibration; any positive value works
_SEED_LENGTH_MM = 4.5


def optimal_gamma(
    cross_section: CpwCrossSection = CpwCrossSection(),
    length_mm: float = 4.5,
    h_ref: float = 9.0,
    model: FrequencyModel | str = FrequencyModel.AVERAGED,
    etched_position: EtchPosition | str = EtchPosition.SHORTED_END,
    delta: float = 0.01,
) -> float:
    """Etch ratio at which df/dh vanishes at ``h_ref``.

    Raises NoSignChangeError when the all-metal and all-dielectric
    resonators do not pull the frequency in opposite directions.
    """
    base = ResonatorDesign(length_mm, 0.0, cross_section, etched_position, model)

    def sens(g: float) -> float:
        return sensitivity(base.with_(gamma=g), h_ref, delta)

    s0, s1 = sens(0.0), sens(1.0)
    if not s0 * s1 < 0:
        raise NoSignChangeError(
            f"no spacing-insensitive etch ratio: df/dh = {s0:.6g} MHz/um at gamma=0 "
            f"and {s1:.6g} MHz/um at gamma=1"
        )
    return brent_root(sens, 0.0, 1.0, tol=1e-12)


def calibrate_length(
    cross_section: CpwCrossSection,
    gamma: float,
    h_ref: float,
    f_target: float,
    model: FrequencyModel | str = FrequencyModel.AVERAGED,
    etched_position: EtchPosition | str = EtchPosition.SHORTED_END,
) -> float:
    """Total length (mm) that puts the resonator at ``f_target`` GHz at ``h_ref``."""
    if not f_target > 0:
        raise DomainError(f"f_target must be > 0, got {f_target}")
    base = ResonatorDesign(_SEED_LENGTH_MM, gamma, cross_section, etched_position, model)
    # f scales as 1/length for both models, so the seed is already close
    seed = _SEED_LENGTH_MM * resonator_frequency(base, h_ref) / f_target

    def resid(length: float) -> float:
        return resonator_frequency(base.with_(total_length=length), h_ref) - f_target

    return brent_root(resid, 0.9 * seed, 1.1 * seed, tol=1e-13 * seed)


def ladder(center: float, step_mhz: float, count: int) -> tuple[float, ...]:
    """``count`` frequencies (GHz) spaced by ``step_mhz`` and centred on ``center``."""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    if not step_mhz > 0:
        raise DomainError(f"step must be > 0, got {step_mhz}")
    mid = (count - 1) / 2.0
    return tuple(center + (i - mid) * step_mhz * 1e-3 for i in range(count))


@dataclass(frozen=True)
class AllocationPlan:
    filter_center: float
    step: float
    count: int
    gamma: float
    h_ref: float
    target_freqs: tuple[float, ...]
    lengths: tuple[float, ...]

    @property
    def span_mhz(self) -> float:
        return (self.target_freqs[-1] - self.target_freqs[0]) * 1e3

    def within_band(self, bandwidth_mhz: float) -> bool:
        half = bandwidth_mhz * 1e-3 / 2.0
        return all(abs(f - self.filter_center) <= half for f in self.target_freqs)

    def rows(self) -> list[tuple[int, float, float]]:
        return [(i, f, l) for i, (f, l) in enumerate(zip(self.target_freqs, self.lengths))]

    def to_dict(self) -> dict:
        return {
            "filter_center_GHz": self.filter_center,
            "step_MHz": self.step,
            "count": self.count,
            "gamma": self.gamma,
            "h_ref_um": self.h_ref,
            "resonators": [
                {"index": i, "target_freq_GHz": f, "length_mm": l} for i, f, l in self.rows()
            ],
        }


def allocate(
    filter_center: float,
    step: float,
    count: int,
    cross_section: CpwCrossSection = CpwCrossSection(),
    gamma: float = 0.0,
    h_ref: float = 9.0,
    model: FrequencyModel | str = FrequencyModel.AVERAGED,
    etched_position: EtchPosition | str = EtchPosition.SHORTED_END,
) -> AllocationPlan:
    freqs = ladder(filter_center, step, count)
    lengths = tuple(
        calibrate_length(cross_section, gamma, h_ref, f, model, etched_position) for f in freqs
    )
    return AllocationPlan(filter_center, step, count, gamma, h_ref, freqs, lengths)


@dataclass(frozen=True)
class EtchCalibration:
    """Monotone map from experimental etched length (um) to etch ratio."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(g)) for x, g in self.points)
        if len(pts) < 2:
            raise DomainError("calibration needs at least two points")
        if pts[0] != (0.0, 0.0):
            raise DomainError(f"calibration must start at (0, 0), got {pts[0]}")
        for (x0, g0), (x1, g1) in zip(pts, pts[1:]):
            if not (x1 > x0 and g1 > g0):
                raise DomainError("calibration must be strictly increasing in both columns")
        if pts[-1][1] > 1.0:
            raise DomainError("calibrated gamma must not exceed 1")
        object.__setattr__(self, "points", pts)

    @property
    def max_length(self) -> float:
        return self.points[-1][0]


DEFAULT_CALIBRATION = EtchCalibration(((0.0, 0.0), (330.0, 0.82)))


def gamma_from_etched_length(cal: EtchCalibration, etched_length: float) -> float:
    if not 0.0 <= etched_length <= cal.max_length:
        raise DomainError(
            f"etched length {etched_length} um outside calibrated range [0, {cal.max_length}]"
        )
    xs, gs = zip(*cal.points)
    return float(np.interp(etched_length, xs, gs))


def read_calibration_csv(source) -> EtchCalibration:
    """Read ``etched_length_um,gamma`` rows into a calibration table."""
    points = [tuple(parse_floats(n, row)) for n, row in read_rows(source, CALIBRATION_HEADER)]
    return EtchCalibration(tuple(points))


def sensitivity_scan(
    cross_section: CpwCrossSection,
    gammas: Sequence[float],
    length_mm: float = 4.5,
    h_ref: float = 9.0,
    model: FrequencyModel | str = FrequencyModel.AVERAGED,
    etched_position: EtchPosition | str = EtchPosition.SHORTED_END,
) -> list[tuple[float, float]]:
    base = ResonatorDesign(length_mm, 0.0, cross_section, etched_position, model)
    return [(g, sensitivity(base.with_(gamma=g), h_ref)) for g in gammas]
