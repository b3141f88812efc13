"""Run configuration: one YAML (or JSON) document with a section per command.

Every section is optional; missing keys take the defaults below and unknown
keys are rejected.  Values are validated by building the typed objects the
commands need, before any computation starts.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .chipmodel import ChipLayout, ChipScenario
from .cpw import CpwCrossSection, EtchPosition, FrequencyModel
from .design import EtchCalibration, read_calibration_csv
from .errors import FlipChipError
from .purcell import PurcellSweepConfig, SpuriousMode

OPTIMAL = "optimal"

DEFAULTS: dict[str, Any] = {
    "geometry": {"w_um": 10.0, "s_um": 6.0, "eps_r": 10.0},
    "design": {
        "length_mm": 4.5,
        "h_ref_um": 9.0,
        "model": "averaged",
        "etched_position": "shorted",
        "delta_um": 0.01,
    },
    "cpw": {
        "gammas": [0.0, 0.82, 1.0],
        "h_min_um": 8.0,
        "h_max_um": 10.0,
        "h_points": 21,
        "target_freq_GHz": 6.5,
    },
    "allocation": {"center_GHz": 6.5, "step_MHz": 30.0, "count": 12, "bandwidth_MHz": 600.0},
    "purcell": {
        "omega_q_GHz": 5.0,
        "omega_r_GHz": 6.7,
        "omega_f_GHz": 6.7,
        "kappa_r_MHz": 2.0,
        "eta_MHz": -270.0,
        "count": 14,
        "kappa_f_MHz": [300.0, 600.0, 1200.0],
        "steps_MHz": [30.0],
        "spurious": {
            "omega_mode_GHz": 14.8,
            "q_coupling": 14000.0,
            "g_MHz": 96.0,
            "reference_t1_ms": 14.5,
        },
    },
    "chip": {
        "columns": 15,
        "rows": 12,
        "width_mm": 25.0,
        "height_mm": 10.0,
        "etched_um": 330.0,
        "etched_lengths_um": None,
        "calibration": [[0.0, 0.0], [330.0, OPTIMAL]],
        "center_GHz": 6.5,
        "step_MHz": 30.0,
        "scan_csv": None,
        "top_chip_thickness_um": 430.0,
        "keep_residuals": False,
        "scenario": {
            "tilt_urad": 219.0,
            "mean_spacing_um": 9.6,
            "half_range_um": 2.2,
            "direction_deg": None,
            "bow_um": 0.0,
            "height_noise_um": 0.0,
            "scan_nx": 26,
            "scan_ny": 11,
            "freq_noise_MHz": 0.1,
            "seed": 0,
        },
    },
    "analyze": {"table": None, "traces": [], "target_step_MHz": 30.0, "exclude_tail": 2},
}


class ConfigError(FlipChipError, ValueError):
    """Invalid or unreadable run configuration."""


def _merge(defaults: dict, user: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    if not isinstance(user, dict):
        raise ConfigError(f"section {path or '<root>'} must be a mapping")
    for key, value in user.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], value or {}, where)
        else:
            out[key] = value
    return out


def _num(section: dict, key: str, where: str) -> float:
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


@dataclass
class RunConfig:
    data: dict
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path: str | Path | None = None, seed: int | None = None) -> "RunConfig":
        user: dict = {}
        base = Path(".")
        if path is not None:
            p = Path(path)
            try:
                user = yaml.safe_load(p.read_text()) or {}
            except OSError as exc:
                raise ConfigError(f"cannot read config {p}: {exc}") from None
            except yaml.YAMLError as exc:
                raise ConfigError(f"cannot parse config {p}: {exc}") from None
            base = p.parent
        return cls.from_dict(user, seed=seed, base_dir=base)

    @classmethod
    def from_dict(cls, user: dict, seed: int | None = None, base_dir: Path = Path(".")) -> "RunConfig":
        data = _merge(DEFAULTS, user)
        if seed is not None:
            if seed < 0:
                raise ConfigError("seed must be a non-negative integer")
            data["chip"]["scenario"]["seed"] = int(seed)
        return cls(data, Path(base_dir))

    @property
    def sha256(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def resolve(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    # --- typed views; each raises ConfigError on invalid values -------------

    def cross_section(self) -> CpwCrossSection:
        g = self.data["geometry"]
        try:
            return CpwCrossSection(_num(g, "w_um", "geometry"), _num(g, "s_um", "geometry"), _num(g, "eps_r", "geometry"))
        except ValueError as exc:
            raise ConfigError(f"geometry: {exc}") from None

    def design(self) -> dict:
        d = self.data["design"]
        try:
            out = {
                "length_mm": _num(d, "length_mm", "design"),
                "h_ref": _num(d, "h_ref_um", "design"),
                "model": FrequencyModel(d["model"]),
                "etched_position": EtchPosition(d["etched_position"]),
                "delta": _num(d, "delta_um", "design"),
            }
        except ValueError as exc:
            raise ConfigError(f"design: {exc}") from None
        if out["length_mm"] <= 0 or out["h_ref"] <= 0 or out["delta"] <= 0 or out["h_ref"] <= out["delta"]:
            raise ConfigError("design: length, h_ref and delta must be > 0 with h_ref > delta")
        return out

    def cpw_sweep(self) -> dict:
        c = self.data["cpw"]
        lo, hi = _num(c, "h_min_um", "cpw"), _num(c, "h_max_um", "cpw")
        n = c["h_points"]
        if lo <= 0 or hi <= 0:
            raise ConfigError(f"cpw: spacings must be > 0, got [{lo}, {hi}]")
        if not (isinstance(n, int) and n >= 2 and hi > lo):
            raise ConfigError("cpw: need h_max_um > h_min_um and h_points >= 2")
        h_ref = self.design()["h_ref"]
        if not lo <= h_ref <= hi:
            raise ConfigError(f"cpw: h_ref {h_ref} outside [{lo}, {hi}]")
        gammas = c["gammas"]
        if not isinstance(gammas, list) or not gammas:
            raise ConfigError("cpw.gammas must be a non-empty list")
        for g in gammas:
            if g != OPTIMAL and (isinstance(g, bool) or not isinstance(g, (int, float)) or not 0 <= g <= 1):
                raise ConfigError(f"cpw.gammas entries must be in [0, 1] or {OPTIMAL!r}, got {g!r}")
        target = c["target_freq_GHz"]
        if target is not None and not (isinstance(target, (int, float)) and target > 0):
            raise ConfigError("cpw.target_freq_GHz must be > 0 or null")
        return {"h_min": lo, "h_max": hi, "h_points": n, "gammas": gammas, "target": target}

    def allocation(self) -> dict:
        a = self.data["allocation"]
        out = {
            "center": _num(a, "center_GHz", "allocation"),
            "step": _num(a, "step_MHz", "allocation"),
            "count": a["count"],
            "bandwidth": _num(a, "bandwidth_MHz", "allocation"),
        }
        if not (isinstance(out["count"], int) and out["count"] >= 1 and out["step"] > 0 and out["center"] > 0):
            raise ConfigError("allocation: need count >= 1, step > 0, center > 0")
        return out

    def purcell(self) -> tuple[PurcellSweepConfig, dict, SpuriousMode, float]:
        p = self.data["purcell"]
        try:
            sweep = PurcellSweepConfig(
                kappa_f=tuple(p["kappa_f_MHz"]),
                steps=tuple(p["steps_MHz"]),
                count=p["count"],
                omega_f=_num(p, "omega_f_GHz", "purcell"),
                omega_q=_num(p, "omega_q_GHz", "purcell"),
                kappa_r=_num(p, "kappa_r_MHz", "purcell"),
                eta=_num(p, "eta_MHz", "purcell"),
            )
            sp = p["spurious"]
            mode = SpuriousMode(
                _num(sp, "omega_mode_GHz", "purcell.spurious"),
                _num(sp, "q_coupling", "purcell.spurious"),
                _num(sp, "g_MHz", "purcell.spurious"),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"purcell: {exc}") from None
        if not isinstance(sweep.count, int):
            raise ConfigError("purcell.count must be an integer")
        if not 0 < sweep.kappa_r < min(sweep.kappa_f):
            raise ConfigError("purcell: kappa_r must be > 0 and below every kappa_f")
        qr = {"omega_r": _num(p, "omega_r_GHz", "purcell")}
        return sweep, qr, mode, _num(sp, "reference_t1_ms", "purcell.spurious")

    def layout(self) -> ChipLayout:
        c = self.data["chip"]
        try:
            kw = dict(
                columns=c["columns"], rows=c["rows"],
                width_mm=_num(c, "width_mm", "chip"), height_mm=_num(c, "height_mm", "chip"),
            )
            if not (isinstance(kw["columns"], int) and isinstance(kw["rows"], int)):
                raise ConfigError("chip.columns and chip.rows must be integers")
            if c["etched_lengths_um"] is None:
                return ChipLayout.alternating(_num(c, "etched_um", "chip"), **kw)
            return ChipLayout(etched_lengths=tuple(c["etched_lengths_um"]), **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"chip: {exc}") from None

    def calibration(self, optimal: float | None) -> EtchCalibration:
        """Etch calibration; ``optimal`` substitutes table entries equal to 'optimal'."""
        cal = self.data["chip"]["calibration"]
        try:
            if isinstance(cal, str):
                return read_calibration_csv(self.resolve(cal))
            pts = []
            for pair in cal:
                x, g = pair
                if g == OPTIMAL:
                    if optimal is None:
                        raise ConfigError("calibration refers to the optimal gamma, which is unavailable")
                    g = optimal
                pts.append((float(x), float(g)))
            return EtchCalibration(tuple(pts))
        except OSError as exc:
            raise ConfigError(f"chip.calibration: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"chip.calibration: {exc}") from None

    def calibration_needs_optimum(self) -> bool:
        cal = self.data["chip"]["calibration"]
        return not isinstance(cal, str) and any(
            isinstance(p, (list, tuple)) and len(p) == 2 and p[1] == OPTIMAL for p in cal
        )

    def scenario(self) -> ChipScenario:
        s = self.data["chip"]["scenario"]
        try:
            return ChipScenario(
                tilt_urad=_num(s, "tilt_urad", "chip.scenario"),
                mean_spacing_um=_num(s, "mean_spacing_um", "chip.scenario"),
                half_range_um=_num(s, "half_range_um", "chip.scenario"),
                direction_deg=None if s["direction_deg"] is None else _num(s, "direction_deg", "chip.scenario"),
                thickness_um=_num(self.data["chip"], "top_chip_thickness_um", "chip"),
                bow_um=_num(s, "bow_um", "chip.scenario"),
                height_noise_um=_num(s, "height_noise_um", "chip.scenario"),
                scan_nx=int(s["scan_nx"]),
                scan_ny=int(s["scan_ny"]),
                freq_noise_mhz=_num(s, "freq_noise_MHz", "chip.scenario"),
                seed=int(s["seed"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"chip.scenario: {exc}") from None

    def chip_plan(self) -> dict:
        c = self.data["chip"]
        out = {"center": _num(c, "center_GHz", "chip"), "step": _num(c, "step_MHz", "chip")}
        if out["center"] <= 0 or out["step"] <= 0:
            raise ConfigError("chip: center_GHz and step_MHz must be > 0")
        return out

    def analyze(self) -> dict:
        a = self.data["analyze"]
        t = a["target_step_MHz"]
        if isinstance(t, dict):
            try:
                t = {float(k): float(v) for k, v in t.items()}
            except (TypeError, ValueError):
                raise ConfigError("analyze.target_step_MHz mapping must be numeric") from None
        elif isinstance(t, bool) or not isinstance(t, (int, float)):
            raise ConfigError("analyze.target_step_MHz must be a number or a mapping")
        ex = a["exclude_tail"]
        if not (isinstance(ex, int) and ex >= 0):
            raise ConfigError("analyze.exclude_tail must be a non-negative integer")
        return {"table": a["table"], "traces": list(a["traces"] or []), "targets": t, "exclude_tail": ex}
