"""Flip-chip CPW line parameters and quarter-wave resonator frequency.

Transverse dimensions are in micrometres, resonator lengths in millimetres
and frequencies in GHz.  Per-unit-length quantities are SI.

The opposing chip is either metallised directly above the line (a
conductive cover at height ``h``) or etched to bare substrate (a dielectric
half-space starting at ``h``).  Both use conformal-mapping partial
capacitances; the substrate below the line is taken as infinitely thick.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable

from scipy.constants import epsilon_0, mu_0

from .errors import DomainError, NoResonanceError
from .numerics import brent_root, k_ratio

__all__ = [
    "Facing",
    "EtchPosition",
    "FrequencyModel",
    "CpwCrossSection",
    "CpwGeometry",
    "LineParams",
    "ResonatorDesign",
    "ShiftPoint",
    "line_params",
    "resonator_frequency",
    "sensitivity",
    "shift_curve",
]


class Facing(str, enum.Enum):
    METAL = "metal"
    DIELECTRIC = "dielectric"


class EtchPosition(str, enum.Enum):
    """Which end of the quarter-wave line the dielectric-facing part sits at."""

    SHORTED_END = "shorted"
    OPEN_END = "open"


class FrequencyModel(str, enum.Enum):
    AVERAGED = "averaged"
    CASCADE = "cascade"


@dataclass(frozen=True)
class CpwCrossSection:
    """Centre width ``w``, gap ``s`` (um) and substrate permittivity."""

    w: float = 10.0
    s: float = 6.0
    eps_r: float = 10.0

    def __post_init__(self):
        if not (self.w > 0 and self.s > 0):
            raise DomainError(f"CPW needs w > 0 and s > 0, got w={self.w}, s={self.s}")
        if not self.eps_r >= 1:
            raise DomainError(f"eps_r must be >= 1, got {self.eps_r}")

    def at(self, h: float, facing: Facing | str) -> "CpwGeometry":
        return CpwGeometry(self.w, self.s, self.eps_r, h, Facing(facing))


@dataclass(frozen=True)
class CpwGeometry:
    w: float
    s: float
    eps_r: float
    h: float
    facing: Facing

    def __post_init__(self):
        CpwCrossSection(self.w, self.s, self.eps_r)
        if not self.h > 0:
            raise DomainError(f"inter-chip spacing must be > 0, got h={self.h}")
        object.__setattr__(self, "facing", Facing(self.facing))


@dataclass(frozen=True)
class LineParams:
    c_per_len: float
    l_per_len: float

    @property
    def phase_velocity(self) -> float:
        return 1.0 / math.sqrt(self.l_per_len * self.c_per_len)

    @property
    def char_impedance(self) -> float:
        return math.sqrt(self.l_per_len / self.c_per_len)


def _cover_moduli(a: float, b: float, h: float) -> tuple[float, float]:
    """k = tanh(pi a/2h)/tanh(pi b/2h) and its complement, overflow-safe."""
    x, y = math.pi * a / (2 * h), math.pi * b / (2 * h)
    ex, ey = math.exp(-2 * x), math.exp(-2 * y)
    ta, tb = (1 - ex) / (1 + ex), (1 - ey) / (1 + ey)
    # tanh(y) - tanh(x) = 2 e^{-2x} (1 - e^{-2(y-x)}) / ((1 + e^{-2x})(1 + e^{-2y}))
    diff = -2.0 * math.expm1(-2 * (y - x)) * math.exp(-2 * x) / ((1 + ex) * (1 + ey))
    kp = math.sqrt(diff * (ta + tb)) / tb
    return ta / tb, kp


def _layer_modulus(a: float, b: float, h: float) -> float:
    """k = sinh(pi a/2h)/sinh(pi b/2h) for a dielectric layer of thickness h."""
    x, y = math.pi * a / (2 * h), math.pi * b / (2 * h)
    return math.exp(x - y) * (-math.expm1(-2 * x)) / (-math.expm1(-2 * y))


def line_params(geom: CpwGeometry) -> LineParams:
    """Per-unit-length capacitance and inductance of a flip-chip CPW."""
    a = geom.w / 2.0
    b = geom.w / 2.0 + geom.s
    r0 = k_ratio(a / b)
    substrate = 2 * epsilon_0 * (geom.eps_r - 1) * r0
    if geom.facing is Facing.METAL:
        k3, k3p = _cover_moduli(a, b, geom.h)
        r3 = k_ratio(k3, k3p)
        c = substrate + 2 * epsilon_0 * (r0 + r3)
        # air-filled capacitance 2 eps0 (r0 + r3) fixes L = mu0 eps0 / C_air
        l = mu_0 / (2 * (r0 + r3))
    else:
        rh = k_ratio(_layer_modulus(a, b, geom.h))
        c = substrate + 4 * epsilon_0 * r0 + 2 * epsilon_0 * (geom.eps_r - 1) * (r0 - rh)
        l = mu_0 / (4 * r0)
    return LineParams(c, l)


@dataclass(frozen=True)
class ResonatorDesign:
    """Composite quarter-wave resonator.

    ``gamma`` is the dielectric-facing fraction of ``total_length`` (mm).
    """

    total_length: float
    gamma: float = 0.0
    cross_section: CpwCrossSection = CpwCrossSection()
    etched_position: EtchPosition = EtchPosition.SHORTED_END
    model: FrequencyModel = FrequencyModel.AVERAGED

    def __post_init__(self):
        if not self.total_length > 0:
            raise DomainError(f"total_length must be > 0, got {self.total_length}")
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in [0, 1], got {self.gamma}")
        object.__setattr__(self, "etched_position", EtchPosition(self.etched_position))
        object.__setattr__(self, "model", FrequencyModel(self.model))

    def with_(self, **changes) -> "ResonatorDesign":
        return replace(self, **changes)


def _averaged(design: ResonatorDesign, dlp: LineParams, mlp: LineParams) -> float:
    g = design.gamma
    l = g * dlp.l_per_len + (1 - g) * mlp.l_per_len
    c = g * dlp.c_per_len + (1 - g) * mlp.c_per_len
    return 1.0 / (4.0 * design.total_length * 1e-3 * math.sqrt(l * c))


def _cascade(design: ResonatorDesign, dlp: LineParams, mlp: LineParams) -> float:
    length = design.total_length * 1e-3
    if design.etched_position is EtchPosition.SHORTED_END:
        short, open_ = (dlp, design.gamma), (mlp, 1 - design.gamma)
    else:
        short, open_ = (mlp, 1 - design.gamma), (dlp, design.gamma)
    zs, ts = short[0].char_impedance, short[1] * length / short[0].phase_velocity
    zo, to = open_[0].char_impedance, open_[1] * length / open_[0].phase_velocity

    # tan(bo lo) tan(bs ls) = Zo/Zs, multiplied through by the cosines
    def resid(f: float) -> float:
        wo, ws = 2 * math.pi * f * to, 2 * math.pi * f * ts
        return zs * math.sin(wo) * math.sin(ws) - zo * math.cos(wo) * math.cos(ws)

    vmax = max(dlp.phase_velocity, mlp.phase_velocity)
    upper = 1.5 * vmax / (4 * length * min(design.gamma, 1 - design.gamma))
    # steps of pi/32 in total electrical length cannot skip the first zero
    step = (1.0 / 64.0) / (to + ts)
    lo, flo = 0.0, resid(0.0)
    while lo < upper:
        hi = min(lo + step, upper)
        fhi = resid(hi)
        if (flo < 0) != (fhi < 0) or fhi == 0:
            return brent_root(resid, lo, hi, tol=1e-5)
        lo, flo = hi, fhi
    raise NoResonanceError(f"no resonance below {upper / 1e9:.6g} GHz")


def resonator_frequency(design: ResonatorDesign, h: float) -> float:
    """Fundamental frequency (GHz) of ``design`` at inter-chip spacing ``h`` (um)."""
    xs = design.cross_section
    dlp = line_params(xs.at(h, Facing.DIELECTRIC))
    mlp = line_params(xs.at(h, Facing.METAL))
    if design.gamma in (0.0, 1.0):
        v = (dlp if design.gamma == 1.0 else mlp).phase_velocity
        return v / (4.0 * design.total_length * 1e-3) / 1e9
    if design.model is FrequencyModel.AVERAGED:
        return _averaged(design, dlp, mlp) / 1e9
    return _cascade(design, dlp, mlp) / 1e9


def sensitivity(design: ResonatorDesign, h: float, delta: float = 0.01) -> float:
    """Central-difference df/dh in MHz per um."""
    if not (delta > 0 and h - delta > 0):
        raise DomainError(f"need delta > 0 and h - delta > 0, got h={h}, delta={delta}")
    up = resonator_frequency(design, h + delta)
    down = resonator_frequency(design, h - delta)
    return (up - down) * 1e3 / (2 * delta)


@dataclass(frozen=True)
class ShiftPoint:
    h_um: float
    freq_GHz: float
    shift_percent: float


def shift_curve(
    design: ResonatorDesign, h_values: Iterable[float], h_ref: float = 9.0
) -> list[ShiftPoint]:
    """Relative frequency change versus spacing, referenced to ``h_ref``."""
    hs = sorted(float(h) for h in h_values)
    if not hs:
        raise DomainError("shift_curve needs at least one spacing")
    if any(h <= 0 for h in hs):
        raise DomainError("all spacings must be > 0")
    if not hs[0] <= h_ref <= hs[-1]:
        raise DomainError(f"h_ref={h_ref} outside the sampled range [{hs[0]}, {hs[-1]}]")
    f_ref = resonator_frequency(design, h_ref)
    out = []
    for h in hs:
        f = resonator_frequency(design, h)
        out.append(ShiftPoint(h, f, 100.0 * (f - f_ref) / f_ref))
    return out
