"""Inter-chip spacing maps and synthetic chip frequency tables.

Chip coordinates are in mm with the origin at the top-left corner of the
top chip, x to the right along the columns and y downward along the rows.
Heights and spacings are in um.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .cpw import CpwCrossSection, EtchPosition, FrequencyModel, ResonatorDesign, resonator_frequency
from .design import AllocationPlan, EtchCalibration, allocate, gamma_from_etched_length
from .errors import DomainError, InputFormatError
from .numerics import PlaneFit, brent_root, fit_plane
from .tables import csv_text, parse_floats, read_rows

__all__ = [
    "ChipLayout",
    "HeightScan",
    "SpacingMap",
    "FrequencyRecord",
    "FrequencyTable",
    "ChipScenario",
    "ingest_scan",
    "scan_csv",
    "spacing_map",
    "spacing_at",
    "synthetic_scan",
    "tilt_direction_for_range",
    "column_designs",
    "column_plans",
    "simulate_chip",
]

SCAN_HEADER = ("x_mm", "y_mm", "height_um")
TABLE_HEADER = ("column", "row", "etched_length_um", "freq_GHz")


@dataclass(frozen=True)
class ChipLayout:
    """Regular grid of resonator footprints; ``etched_lengths`` is per column (um)."""

    columns: int = 15
    rows: int = 12
    width_mm: float = 25.0
    height_mm: float = 10.0
    etched_lengths: tuple[float, ...] = ()

    def __post_init__(self):
        if self.columns < 1 or self.rows < 1:
            raise DomainError("layout needs at least one column and one row")
        if not (self.width_mm > 0 and self.height_mm > 0):
            raise DomainError("chip extent must be positive")
        lengths = tuple(float(x) for x in self.etched_lengths) or (0.0,) * self.columns
        if len(lengths) != self.columns:
            raise DomainError(f"{len(lengths)} etched lengths given for {self.columns} columns")
        if any(x < 0 for x in lengths):
            raise DomainError("etched lengths must be >= 0")
        object.__setattr__(self, "etched_lengths", lengths)

    @classmethod
    def alternating(cls, etched_um: float, **kw) -> "ChipLayout":
        """Etched design in odd-numbered columns (1-based), zero etch in the even ones."""
        cols = kw.get("columns", cls.columns)
        return cls(etched_lengths=tuple(etched_um if c % 2 == 0 else 0.0 for c in range(cols)), **kw)

    def center(self, col: int, row: int) -> tuple[float, float]:
        if not (0 <= col < self.columns and 0 <= row < self.rows):
            raise IndexError(f"footprint ({col}, {row}) outside {self.columns}x{self.rows} layout")
        return (
            (col + 0.5) * self.width_mm / self.columns,
            (row + 0.5) * self.height_mm / self.rows,
        )


@dataclass(frozen=True, eq=False)
class HeightScan:
    """Profilometer samples ``(x_mm, y_mm, height_um)`` over the top chip surface."""

    samples: np.ndarray
    top_chip_thickness: float = 430.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 3:
            raise DomainError("height samples must be (x, y, height) triplets")
        if s.shape[0] < 3:
            raise DomainError(f"need at least 3 samples, got {s.shape[0]}")
        if not self.top_chip_thickness > 0:
            raise DomainError("top chip thickness must be > 0")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def spacings(self) -> np.ndarray:
        return self.samples[:, 2] - self.top_chip_thickness


def ingest_scan(source, top_chip_thickness: float = 430.0) -> HeightScan:
    """Read a ``x_mm,y_mm,height_um`` CSV (path, text stream or StringIO)."""
    samples = []
    for lineno, fields in read_rows(source, SCAN_HEADER):
        x, y, z = parse_floats(lineno, fields)
        if not all(math.isfinite(v) for v in (x, y, z)):
            raise InputFormatError("non-finite value", line=lineno)
        if z < 0:
            raise InputFormatError(f"negative height {z}", line=lineno)
        samples.append((x, y, z))
    if not samples:
        raise InputFormatError("scan has a header but no samples")
    if len(samples) < 3:
        raise InputFormatError(f"need at least 3 samples, got {len(samples)}")
    return HeightScan(np.array(samples), top_chip_thickness)


def scan_csv(scan: HeightScan) -> str:
    # repr keeps the float round trip exact
    rows = ((repr(float(x)), repr(float(y)), repr(float(z))) for x, y, z in scan.samples)
    return csv_text(SCAN_HEADER, rows)


@dataclass(frozen=True, eq=False)
class SpacingMap:
    """Tilt plane (x, y in um) plus optional gridded residuals."""

    plane: PlaneFit
    mean: float
    min: float
    max: float
    grid_x: np.ndarray | None = None
    grid_y: np.ndarray | None = None
    residuals: np.ndarray | None = None
    _interp: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.residuals is not None:
            interp = RegularGridInterpolator(
                (self.grid_y, self.grid_x), self.residuals, method="linear"
            )
            object.__setattr__(self, "_interp", interp)

    @property
    def tilt_urad(self) -> float:
        return self.plane.tilt_urad

    def plane_at(self, x_mm, y_mm):
        return self.plane(np.asarray(x_mm) * 1e3, np.asarray(y_mm) * 1e3)

    def __call__(self, x_mm: float, y_mm: float) -> float:
        h = float(self.plane_at(x_mm, y_mm))
        if self._interp is not None:
            xc = min(max(x_mm, self.grid_x[0]), self.grid_x[-1])
            yc = min(max(y_mm, self.grid_y[0]), self.grid_y[-1])
            h += float(self._interp([[yc, xc]])[0])
        return h

    def report(self) -> dict:
        return {
            "mean_um": self.mean,
            "min_um": self.min,
            "max_um": self.max,
            "tilt_urad": self.tilt_urad,
            "plane": {
                "z0_um": self.plane.z0,
                "alpha": self.plane.alpha,
                "beta": self.plane.beta,
                "residual_rms_um": self.plane.residual_rms,
            },
        }


def _grid_residuals(xy: np.ndarray, resid: np.ndarray):
    xs, ys = np.unique(xy[:, 0]), np.unique(xy[:, 1])
    if xs.size < 2 or ys.size < 2 or xs.size * ys.size != xy.shape[0]:
        raise DomainError("residual grid needs samples on a complete rectilinear grid")
    grid = np.full((ys.size, xs.size), np.nan)
    grid[np.searchsorted(ys, xy[:, 1]), np.searchsorted(xs, xy[:, 0])] = resid
    if np.isnan(grid).any():
        raise DomainError("residual grid has duplicate or missing nodes")
    return xs, ys, grid


def spacing_map(scan: HeightScan, keep_residuals: bool = False) -> SpacingMap:
    """Subtract the top chip thickness and fit the tilt plane."""
    h = scan.spacings()
    xy_um = scan.samples[:, :2] * 1e3
    plane = fit_plane(np.column_stack([xy_um, h]))
    grid = (None, None, None)
    if keep_residuals:
        grid = _grid_residuals(scan.samples[:, :2], h - plane(xy_um[:, 0], xy_um[:, 1]))
    return SpacingMap(plane, float(h.mean()), float(h.min()), float(h.max()), *grid)


def spacing_at(smap: SpacingMap, layout: ChipLayout, col: int, row: int) -> float:
    """Spacing (um) under the footprint centre of resonator (col, row)."""
    return smap(*layout.center(col, row))


def tilt_direction_for_range(tilt_urad: float, half_range_um: float, width_mm: float, height_mm: float) -> float:
    """Tilt azimuth (degrees from +x) giving ``mean +/- half_range`` over the chip.

    Searches between the diagonal (largest span) and the short axis.
    """
    t = tilt_urad * 1e-6
    w, hgt = width_mm * 1e3, height_mm * 1e3

    def span(theta: float) -> float:
        return t * (w * abs(math.cos(theta)) + hgt * abs(math.sin(theta))) - 2 * half_range_um

    diag = math.atan2(hgt, w)
    if span(diag) < 0 or span(math.pi / 2) > 0:
        raise DomainError(
            f"a {tilt_urad} urad tilt cannot produce +/-{half_range_um} um over "
            f"a {width_mm}x{height_mm} mm chip"
        )
    return math.degrees(brent_root(span, diag, math.pi / 2, tol=1e-14))


@dataclass(frozen=True)
class ChipScenario:
    """Synthetic tilted flip-chip; ``direction_deg=None`` derives the azimuth
    from ``half_range_um``."""

    tilt_urad: float = 219.0
    mean_spacing_um: float = 9.6
    half_range_um: float = 2.2
    direction_deg: float | None = None
    thickness_um: float = 430.0
    bow_um: float = 0.0
    height_noise_um: float = 0.0
    scan_nx: int = 26
    scan_ny: int = 11
    freq_noise_mhz: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.tilt_urad < 0 or self.mean_spacing_um <= 0 or self.thickness_um <= 0:
            raise DomainError("scenario needs tilt >= 0, spacing > 0 and thickness > 0")
        if self.scan_nx < 2 or self.scan_ny < 2:
            raise DomainError("scan grid needs at least 2x2 nodes")
        if self.freq_noise_mhz < 0 or self.height_noise_um < 0:
            raise DomainError("noise levels must be >= 0")


def synthetic_scan(layout: ChipLayout, scenario: ChipScenario = ChipScenario()) -> HeightScan:
    """Profilometer-style scan of a tilted (optionally bowed) chip stack."""
    if scenario.direction_deg is None:
        if scenario.tilt_urad == 0:
            theta = 0.0
        else:
            theta = math.radians(
                tilt_direction_for_range(
                    scenario.tilt_urad, scenario.half_range_um, layout.width_mm, layout.height_mm
                )
            )
    else:
        theta = math.radians(scenario.direction_deg)
    t = scenario.tilt_urad * 1e-6
    xs = np.linspace(0.0, layout.width_mm, scenario.scan_nx)
    ys = np.linspace(0.0, layout.height_mm, scenario.scan_ny)
    gx, gy = np.meshgrid(xs, ys)
    u = (gx - layout.width_mm / 2) * 1e3
    v = (gy - layout.height_mm / 2) * 1e3
    spacing = scenario.mean_spacing_um + t * (math.cos(theta) * u + math.sin(theta) * v)
    if scenario.bow_um:
        un, vn = u / (layout.width_mm * 500), v / (layout.height_mm * 500)
        spacing = spacing + scenario.bow_um * (un**2 + vn**2 - 2.0 / 3.0)
    if scenario.height_noise_um:
        rng = np.random.default_rng([scenario.seed, 0x5CA9])
        spacing = spacing + rng.normal(0.0, scenario.height_noise_um, spacing.shape)
    heights = spacing + scenario.thickness_um
    return HeightScan(np.column_stack([gx.ravel(), gy.ravel(), heights.ravel()]), scenario.thickness_um)


@dataclass(frozen=True)
class FrequencyRecord:
    column: int
    row: int
    etched_length_um: float
    freq_GHz: float


@dataclass(frozen=True)
class FrequencyTable:
    records: tuple[FrequencyRecord, ...]

    def columns(self) -> dict[int, list[FrequencyRecord]]:
        """Records grouped by column, each sorted by row."""
        out: dict[int, list[FrequencyRecord]] = {}
        for r in self.records:
            out.setdefault(r.column, []).append(r)
        return {c: sorted(v, key=lambda r: r.row) for c, v in sorted(out.items())}

    def to_csv(self, meta: str | None = None) -> str:
        rows = ((r.column, r.row, r.etched_length_um, r.freq_GHz) for r in self.records)
        return csv_text(TABLE_HEADER, rows, meta)

    @classmethod
    def read_csv(cls, source) -> "FrequencyTable":
        recs = []
        seen = set()
        for lineno, fields in read_rows(source, TABLE_HEADER):
            c, r, e, f = parse_floats(lineno, fields)
            if c != int(c) or r != int(r) or c < 0 or r < 0:
                raise InputFormatError("column and row must be non-negative integers", line=lineno)
            if not (math.isfinite(f) and f > 0 and e >= 0):
                raise InputFormatError("need freq > 0 and etched length >= 0", line=lineno)
            if (int(c), int(r)) in seen:
                raise InputFormatError(f"duplicate footprint ({int(c)}, {int(r)})", line=lineno)
            seen.add((int(c), int(r)))
            recs.append(FrequencyRecord(int(c), int(r), e, f))
        if not recs:
            raise InputFormatError("frequency table has no rows")
        return cls(tuple(recs))


def column_designs(
    layout: ChipLayout,
    calibration: EtchCalibration,
    cross_section: CpwCrossSection = CpwCrossSection(),
    model: FrequencyModel | str = FrequencyModel.AVERAGED,
    etched_position: EtchPosition | str = EtchPosition.SHORTED_END,
    length_mm: float = 4.5,
) -> list[ResonatorDesign]:
    """One design per column with gamma taken from the etch calibration."""
    return [
        ResonatorDesign(length_mm, gamma_from_etched_length(calibration, e), cross_section, etched_position, model)
        for e in layout.etched_lengths
    ]


def column_plans(
    designs: Sequence[ResonatorDesign],
    rows: int,
    center: float = 6.5,
    step: float = 30.0,
    h_ref: float = 9.0,
) -> list[AllocationPlan]:
    cache: dict[ResonatorDesign, AllocationPlan] = {}
    plans = []
    for d in designs:
        key = d.with_(total_length=1.0)
        if key not in cache:
            cache[key] = allocate(
                center, step, rows, d.cross_section, d.gamma, h_ref, d.model, d.etched_position
            )
        plans.append(cache[key])
    return plans


def simulate_chip(
    layout: ChipLayout,
    smap: SpacingMap,
    designs: Sequence[ResonatorDesign],
    plans: Sequence[AllocationPlan],
    noise_mhz: float = 0.0,
    seed: int = 0,
) -> FrequencyTable:
    """Frequencies of every footprint at its local spacing, plus seeded noise.

    Each footprint draws from its own stream keyed on (seed, col, row), so
    the result does not depend on evaluation order.
    """
    if len(designs) != layout.columns or len(plans) != layout.columns:
        raise DomainError("need one design and one plan per column")
    if noise_mhz < 0:
        raise DomainError("noise must be >= 0")
    recs = []
    for col in range(layout.columns):
        plan = plans[col]
        if plan.count != layout.rows:
            raise DomainError(f"plan for column {col} has {plan.count} entries, layout has {layout.rows} rows")
        for row in range(layout.rows):
            d = designs[col].with_(total_length=plan.lengths[row])
            f = resonator_frequency(d, spacing_at(smap, layout, col, row))
            if noise_mhz:
                f += 1e-3 * np.random.default_rng([seed, col, row]).normal(0.0, noise_mhz)
            recs.append(FrequencyRecord(col, row, layout.etched_lengths[col], float(f)))
    return FrequencyTable(tuple(recs))


def iter_spacings(smap: SpacingMap, layout: ChipLayout) -> Iterable[tuple[int, int, float]]:
    for col in range(layout.columns):
        for row in range(layout.rows):
            yield col, row, spacing_at(smap, layout, col, row)
