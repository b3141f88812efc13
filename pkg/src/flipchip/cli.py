"""Command-line front end: ``flipchip {cpw,optimize,purcell,chip,analyze}``.

All commands read one config document, validate it fully, compute, and only
then write their outputs (each file via temp-file + rename).  Exit codes:
0 success, 2 config/input error, 3 computation error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, chipmodel, cpw, design, purcell
from .config import OPTIMAL, ConfigError, RunConfig
from .errors import FlipChipError, InputFormatError, MissingBaselineError
from .tables import csv_text, fmt, json_text, write_atomic

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 2, 3

LINE_HEADER = ("h_um", "facing", "c_F_per_m", "l_H_per_m", "phase_velocity_m_per_s", "impedance_ohm")
SHIFT_HEADER = ("h_um", "freq_GHz", "shift_percent")
FIT_HEADER = ("trace", "f0_GHz", "kappa_c_MHz", "kappa_i_MHz", "residual", "converged")


class _Run:
    """Output collector: nothing touches the disk until :meth:`commit`."""

    def __init__(self, command: str, cfg: RunConfig, out: Path, fmt_: str):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.format = fmt_
        self.files: dict[str, str] = {}

    @property
    def meta_line(self) -> str:
        return f"flipchip {self.command} config_sha256={self.cfg.sha256}"

    @property
    def meta(self) -> dict:
        return {"command": self.command, "config_sha256": self.cfg.sha256}

    def csv(self, name: str, header, rows) -> None:
        self.files[name] = csv_text(header, rows, self.meta_line)

    def json(self, name: str, payload: dict) -> None:
        self.files[name] = json_text(_jsonable({"meta": self.meta, **payload}))

    def text(self, name: str, body: str) -> None:
        self.files[name] = f"# {self.meta_line}\n{body}\n"

    def commit(self) -> list[Path]:
        return [write_atomic(self.out / name, text) for name, text in self.files.items()]


def _jsonable(obj):
    """Strict-JSON view: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _gamma_label(g) -> str:
    return OPTIMAL if g == OPTIMAL else fmt(float(g))


def _optimum(cfg: RunConfig) -> float:
    d = cfg.design()
    return design.optimal_gamma(
        cfg.cross_section(), d["length_mm"], d["h_ref"], d["model"], d["etched_position"], d["delta"]
    )


def cmd_cpw(run: _Run) -> None:
    cfg = run.cfg
    xs, d, sw = cfg.cross_section(), cfg.design(), cfg.cpw_sweep()
    hs = np.linspace(sw["h_min"], sw["h_max"], sw["h_points"]).round(12)

    line_rows = []
    for h in hs:
        for facing in cpw.Facing:
            lp = cpw.line_params(xs.at(float(h), facing))
            line_rows.append((float(h), facing.value, lp.c_per_len, lp.l_per_len, lp.phase_velocity, lp.char_impedance))

    opt = _optimum(cfg) if OPTIMAL in sw["gammas"] else None
    curves = {}
    for g in sw["gammas"]:
        gamma = opt if g == OPTIMAL else float(g)
        length = d["length_mm"]
        if sw["target"] is not None:
            length = design.calibrate_length(xs, gamma, d["h_ref"], float(sw["target"]), d["model"], d["etched_position"])
        rd = cpw.ResonatorDesign(length, gamma, xs, d["etched_position"], d["model"])
        curves[_gamma_label(g)] = (gamma, length, cpw.shift_curve(rd, hs, d["h_ref"]))

    if run.format == "json":
        run.json(
            "cpw.json",
            {
                "line_params": [dict(zip(LINE_HEADER, r)) for r in line_rows],
                "shift_curves": {
                    k: {"gamma": g, "length_mm": ln, "points": [dict(zip(SHIFT_HEADER, (p.h_um, p.freq_GHz, p.shift_percent))) for p in pts]}
                    for k, (g, ln, pts) in curves.items()
                },
            },
        )
    else:
        run.csv("line_params.csv", LINE_HEADER, line_rows)
        for k, (_, _, pts) in curves.items():
            run.csv(f"shift_gamma_{k}.csv", SHIFT_HEADER, ((p.h_um, p.freq_GHz, p.shift_percent) for p in pts))
    for k, (g, ln, pts) in curves.items():
        span = (pts[-1].freq_GHz - pts[0].freq_GHz) * 1e3
        print(f"gamma={fmt(g)} length={ln:.6f} mm  f({fmt(pts[0].h_um)})-f({fmt(pts[-1].h_um)}) = {-span:.3f} MHz")


def cmd_optimize(run: _Run) -> None:
    cfg = run.cfg
    xs, d, a = cfg.cross_section(), cfg.design(), cfg.allocation()
    base = cpw.ResonatorDesign(d["length_mm"], 0.0, xs, d["etched_position"], d["model"])
    s0 = cpw.sensitivity(base, d["h_ref"], d["delta"])
    s1 = cpw.sensitivity(base.with_(gamma=1.0), d["h_ref"], d["delta"])
    g = _optimum(cfg)
    resid = cpw.sensitivity(base.with_(gamma=g), d["h_ref"], d["delta"])
    plan = design.allocate(a["center"], a["step"], a["count"], xs, g, d["h_ref"], d["model"], d["etched_position"])
    summary = {
        "gamma_opt": g,
        "residual_MHz_per_um": resid,
        "baseline_MHz_per_um": s0,
        "dielectric_MHz_per_um": s1,
        "within_band": plan.within_band(a["bandwidth"]),
    }
    if run.format == "json":
        run.json("optimize.json", {**summary, "allocation": plan.to_dict()})
    else:
        run.json("optimize.json", summary)
        run.csv("allocation.csv", design.PLAN_HEADER, plan.rows())
    print(f"gamma* = {g:.6f}")
    print(f"residual df/dh at gamma* = {resid:.3e} MHz/um")
    print(f"baseline df/dh (gamma=0) = {s0:.4f} MHz/um; gamma=1: {s1:.4f} MHz/um")


def cmd_purcell(run: _Run) -> None:
    cfg = run.cfg
    sw, qr, mode, ref_ms = cfg.purcell()
    rows = purcell.sweep(sw)
    g_qr = purcell.solve_g_qr(sw.kappa_r, sw.omega_q - qr["omega_r"], sw.eta)
    t1_qr = purcell.qr_t1(purcell.QrParams(sw.omega_q, qr["omega_r"], g_qr, sw.kappa_r, sw.eta))
    t1_sp = purcell.spurious_mode_t1(sw.omega_q, mode)
    summary = {
        "filterless": {"omega_r_GHz": qr["omega_r"], "g_qr_MHz": g_qr, "t1_us": t1_qr},
        "min_t1_us": [
            {"kappa_f_MHz": kf, "step_MHz": st, "t1_us": purcell.min_t1(rows, kf, st)}
            for kf in sw.kappa_f
            for st in sw.steps
        ],
        "max_trace_error": max(r.trace_error for r in rows),
        "spurious_mode": {
            "omega_mode_GHz": mode.omega_mode,
            "q_coupling": mode.q_coupling,
            "g_MHz": mode.g,
            "kappa_MHz": mode.kappa,
            "t1_ms": t1_sp,
            "reference_t1_ms": ref_ms,
        },
    }
    if run.format == "json":
        run.json("purcell.json", {**summary, "sweep": [dict(zip(purcell.SWEEP_HEADER, r.as_tuple())) for r in rows]})
    else:
        run.csv("purcell_sweep.csv", purcell.SWEEP_HEADER, (r.as_tuple() for r in rows))
        run.json("purcell_summary.json", summary)
    print(f"filterless T1 = {t1_qr:.4f} us (g_qr = {g_qr:.4f} MHz)")
    for m in summary["min_t1_us"]:
        print(f"kappa_f={fmt(m['kappa_f_MHz'])} MHz step={fmt(m['step_MHz'])} MHz: min T1 = {m['t1_us']:.2f} us")
    print(f"spurious-mode T1 = {t1_sp:.4g} ms (reference {fmt(ref_ms)} ms)")


def cmd_chip(run: _Run) -> None:
    cfg = run.cfg
    xs, d, layout, scen, cp = cfg.cross_section(), cfg.design(), cfg.layout(), cfg.scenario(), cfg.chip_plan()
    c = cfg.data["chip"]
    scan_path = c["scan_csv"]
    scan = None
    if scan_path is not None:
        try:
            scan = chipmodel.ingest_scan(cfg.resolve(scan_path), scen.thickness_um)
        except OSError as exc:
            raise ConfigError(f"chip.scan_csv: {exc}") from None
    opt = _optimum(cfg) if cfg.calibration_needs_optimum() else None
    cal = cfg.calibration(opt)
    try:
        designs = chipmodel.column_designs(layout, cal, xs, d["model"], d["etched_position"], d["length_mm"])
    except FlipChipError as exc:
        raise ConfigError(f"chip: {exc}") from None

    if scan is None:
        scan = chipmodel.synthetic_scan(layout, scen)
        run.files["height_scan.csv"] = f"# {run.meta_line}\n" + chipmodel.scan_csv(scan)
    smap = chipmodel.spacing_map(scan, keep_residuals=bool(c["keep_residuals"]))
    plans = chipmodel.column_plans(designs, layout.rows, cp["center"], cp["step"], d["h_ref"])
    table = chipmodel.simulate_chip(layout, smap, designs, plans, scen.freq_noise_mhz, scen.seed)

    run.files["frequency_table.csv"] = table.to_csv(run.meta_line)
    run.json(
        "spacing_report.json",
        {
            **smap.report(),
            "seed": scen.seed,
            "gamma_opt": opt,
            "columns": [
                {"column": i, "etched_length_um": e, "gamma": dz.gamma}
                for i, (e, dz) in enumerate(zip(layout.etched_lengths, designs))
            ],
            "footprints": [
                {"column": col, "row": row, "spacing_um": h}
                for col, row, h in chipmodel.iter_spacings(smap, layout)
            ],
        },
    )
    print(
        f"spacing mean {smap.mean:.4f} um, range [{smap.min:.4f}, {smap.max:.4f}] um, "
        f"tilt {smap.tilt_urad:.2f} urad; {len(table.records)} resonators"
    )


def cmd_analyze(run: _Run, table_path: str | None, traces: list[str]) -> None:
    cfg = run.cfg
    a = cfg.analyze()
    path = table_path or a["table"]
    if path is None:
        raise ConfigError("analyze needs a frequency table (argument or analyze.table)")
    try:
        table = chipmodel.FrequencyTable.read_csv(path if table_path else cfg.resolve(path))
        trace_paths = traces or [str(cfg.resolve(t)) for t in a["traces"]]
        loaded = [(Path(t).name, analysis.read_trace(t)) for t in trace_paths]
    except OSError as exc:
        raise InputFormatError(str(exc)) from None

    report = analysis.compare_designs(table, a["targets"], a["exclude_tail"])
    fits = [(name, analysis.fit_s11(tr)) for name, tr in loaded]
    fit_rows = [(n, f.f0, f.kappa_c, f.kappa_i, f.residual, int(f.converged)) for n, f in fits]

    if run.format == "json":
        run.json("design_report.json", {**report.to_dict(), "fits": [dict(zip(FIT_HEADER, r)) for r in fit_rows]})
    else:
        run.csv(
            "design_report.csv",
            ("etched_length_um", "columns", "mean_rmse_MHz", "mean_step_MHz", "target_step_MHz", "improvement_factor", "step_error_ratio"),
            (
                (s.etched_length_um, len(s.columns), s.mean_rmse_mhz, s.mean_step_mhz, s.target_step_mhz,
                 report.improvement_factor(s.etched_length_um), report.step_error_ratio(s.etched_length_um))
                for s in report.designs
            ),
        )
        if fit_rows:
            run.csv("resonance_fits.csv", FIT_HEADER, fit_rows)
    run.text("design_report.txt", report.text())
    print(report.text())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="YAML or JSON run configuration")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")
    common.add_argument("--seed", type=int, default=None, help="override chip.scenario.seed")

    p = argparse.ArgumentParser(prog="flipchip", description="Flip-chip resonator design and analysis")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("cpw", parents=[common], help="line parameters and shift curves versus spacing")
    sub.add_parser("optimize", parents=[common], help="spacing-insensitive etch ratio and allocation")
    sub.add_parser("purcell", parents=[common], help="Purcell-limited T1 sweep")
    sub.add_parser("chip", parents=[common], help="synthetic chip frequency table")
    an = sub.add_parser("analyze", parents=[common], help="column linearity report for a frequency table")
    an.add_argument("table", nargs="?", default=None, help="frequency table CSV")
    an.add_argument("--trace", action="append", default=[], help="S11 trace CSV to fit (repeatable)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, seed=args.seed)
        run = _Run(args.command, cfg, args.out, args.format)
        if args.command == "cpw":
            cmd_cpw(run)
        elif args.command == "optimize":
            cmd_optimize(run)
        elif args.command == "purcell":
            cmd_purcell(run)
        elif args.command == "chip":
            cmd_chip(run)
        else:
            cmd_analyze(run, args.table, args.trace)
        for path in run.commit():
            print(f"wrote {path}", file=sys.stderr)
    except (ConfigError, InputFormatError, MissingBaselineError) as exc:
        print(f"flipchip {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlipChipError as exc:
        print(f"flipchip {args.command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
