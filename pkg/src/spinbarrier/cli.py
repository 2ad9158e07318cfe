"""Command-line entry point: run, sweep, plot, gate, selftest.

Exit codes: 0 success, 2 config error, 3 solver drift, 4 flagged scientific
failure (revival below threshold, decay-fit failure), 5 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import apply_overrides, emit_config, parse_number, read_raw, resolve
from .errors import ConfigError, ConfigFileError, OutputError, SpinBarrierError
from .experiments import SCHEMA_VERSION, run_scenario, scenario_to_dict
from .gates import extract_gate
from .outputs import (
    fmt,
    gate_report_dict,
    read_json,
    read_trace_csv,
    write_json,
    write_svg,
    write_text,
    write_trace_csv,
)

log = logging.getLogger("spinbarrier")

EXIT_OK, EXIT_CONFIG, EXIT_DRIFT, EXIT_SCIENCE, EXIT_IO = 0, 2, 3, 4, 5
SUMMARY_FRACTIONS = (0.25, 0.5, 0.75, 1.0)


def _load_raw(args):
    """Raw config sections plus line map, with --set/--seed/--trajectories applied."""
    raw, lines = {}, {}
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigFileError(f"cannot read config file {path}: {exc.strerror}") from None
        raw, lines = read_raw(text, str(path))
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"trajectories.master_seed={args.seed}")
    if getattr(args, "trajectories", None) is not None:
        overrides.append(f"trajectories.n_traj={args.trajectories}")
    return apply_overrides(raw, overrides), lines


def _make_dir(path: Path):
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc.strerror}") from None


def execute_run(cfg, out_dir) -> tuple[int, dict]:
    """Run one scenario and write trace.csv, config.ini, [gate_report.json] and
    manifest.json into out_dir. Returns (exit status, manifest)."""
    out = Path(out_dir)
    _make_dir(out)
    run = run_scenario(cfg)
    write_trace_csv(out / "trace.csv", run.trace)
    write_text(out / "config.ini", emit_config(cfg))
    outputs = ["trace.csv", "config.ini"]
    status = EXIT_OK
    if run.gate_report is not None:
        write_json(out / "gate_report.json", gate_report_dict(run.gate_report))
        outputs.append("gate_report.json")
        if run.gate_report.flagged:
            log.error("barrier revival %.6f below threshold", run.gate_report.barrier_revival_population)
            status = EXIT_SCIENCE
    if run.decay_fit is not None and run.decay_fit.failed:
        log.error("decay-trend fit failed")
        status = EXIT_SCIENCE
    manifest = dict(run.manifest)
    manifest["outputs"] = outputs
    manifest["exit_status"] = status
    write_json(out / "manifest.json", manifest)
    return status, manifest


def cmd_run(args) -> int:
    raw, lines = _load_raw(args)
    cfg = resolve(raw, lines)
    status, manifest = execute_run(cfg, args.out)
    f_min = _trace_min(Path(args.out) / "trace.csv")
    print(f"{cfg.scenario}: min F = {f_min:.6f}, wall clock {manifest['wall_clock_seconds']:.2f} s -> {args.out}")
    return status


def _trace_min(path):
    return float(np.min(read_trace_csv(path)["fidelity"]))


def _sweep_job(raw, lines, key, text, out_dir):
    """One sweep point in a worker process; never raises."""
    row = {"value": text, "status": "ok", "exit_code": EXIT_OK}
    try:
        cfg = resolve(apply_overrides(raw, [f"{key}={text}"]), lines)
        code, manifest = execute_run(cfg, out_dir)
        cols = read_trace_csv(Path(out_dir) / "trace.csv")
        t, f = cols["t"], cols["fidelity"]
        for frac in SUMMARY_FRACTIONS:
            i = int(np.argmin(np.abs(t - frac * t[-1])))
            row[f"F_t{frac * t[-1]:g}"] = float(f[i])
        row["F_min"] = float(np.min(f))
        fit = manifest.get("decay_fit")
        row["k_fit"] = fit["k_fit"] if fit else float("nan")
        row["exit_code"] = code
        if code:
            row["status"] = "flagged"
    except SpinBarrierError as exc:
        row.update(status=type(exc).__name__, exit_code=exc.exit_code, error=str(exc))
    except Exception as exc:  # keep the sweep going, record the failure
        row.update(status=type(exc).__name__, exit_code=1, error=str(exc))
    return row


def cmd_sweep(args) -> int:
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one value", key=args.axis)
    for v in values:
        try:
            parse_number(v)
        except ValueError:
            raise ConfigError(f"sweep value {v!r} is not numeric", key=args.axis) from None
    raw, lines = _load_raw(args)
    # fail fast on a bad axis key before spawning work
    resolve(apply_overrides(raw, [f"{args.axis}={values[0]}"]), lines)
    out = Path(args.out)
    _make_dir(out)
    dirs = [f"{i:02d}_{args.axis}={v}" for i, v in enumerate(values)]
    start = time.perf_counter()
    jobs = [(raw, lines, args.axis, v, str(out / d)) for v, d in zip(values, dirs)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_job, *zip(*jobs)))
    else:
        rows = [_sweep_job(*job) for job in jobs]

    _write_summary(out / "sweep_summary.csv", rows)
    failed = [r for r in rows if r["exit_code"]]
    write_json(out / "sweep_manifest.json", {
        "schema_version": SCHEMA_VERSION,
        "axis": args.axis,
        "values": values,
        "runs": [f"{d}/manifest.json" for d in dirs],
        "outputs": ["sweep_summary.csv"],
        "failed_runs": len(failed),
        "wall_clock_seconds": time.perf_counter() - start,
    })
    for r in rows:
        print(f"{args.axis}={r['value']}: {r['status']}" + (f" min F = {r['F_min']:.6f}" if "F_min" in r else ""))
    if not failed:
        return EXIT_OK
    return max(r["exit_code"] for r in failed)


def _write_summary(path, rows):
    names = []
    for r in rows:
        names += [k for k in r if k not in names and k != "error"]
    lines = [",".join(names)]
    for r in rows:
        cells = []
        for k in names:
            v = r.get(k, "")
            cells.append(fmt(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    write_text(path, "\n".join(lines) + "\n")


def cmd_plot(args) -> int:
    series = []
    for name in args.traces:
        path = Path(name)
        cols = read_trace_csv(path)
        label = path.parent.name or path.stem
        manifest = path.parent / "manifest.json"
        if manifest.exists():
            label = read_json(manifest).get("label") or label
        series.append((label, cols["t"], cols["fidelity"]))
    out = Path(args.out)
    if out.parent != Path(""):
        _make_dir(out.parent)
    write_svg(out, series)
    write_json(out.with_name(out.name + ".json"), {
        "schema_version": SCHEMA_VERSION,
        "inputs": [str(p) for p in args.traces],
        "outputs": [out.name],
    })
    print(f"plotted {len(series)} trace(s) -> {out}")
    return EXIT_OK


def cmd_gate(args) -> int:
    raw, lines = _load_raw(args)
    raw.setdefault("run", {}).setdefault("scenario", "three_site_gate")
    cfg = resolve(raw, lines)
    if cfg.chain.layout.n_sites != 3:
        raise ConfigError("gate extraction needs the three-site chain", key="chain.sites")
    report = extract_gate(cfg.chain, cfg.integrator, periods=args.periods)
    out = Path(args.out)
    _make_dir(out)
    write_json(out / "gate_report.json", gate_report_dict(report))
    write_json(out / "manifest.json", {
        "schema_version": SCHEMA_VERSION,
        "scenario": "three_site_gate",
        "label": cfg.label,
        "config": scenario_to_dict(cfg),
        "solver": "unitary_static",
        "periods": args.periods,
        "outputs": ["gate_report.json"],
    })
    print(f"t_R = {report.params.t_r:.12g}, phi = {report.params.phi:.12g}, "
          f"revival = {report.barrier_revival_population:.12f}, fidelity = {report.gate_fidelity:.12f} "
          f"(without local frame {report.gate_fidelity_unframed:.6f})")
    return EXIT_SCIENCE if report.flagged else EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    failed = sum(not ok for _, ok, _ in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_SCIENCE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinbarrier", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_flags(p, out_help):
        p.add_argument("--config", help="INI scenario config")
        p.add_argument("--out", required=True, help=out_help)
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
        p.add_argument("--seed", type=int, help="trajectory master seed")
        p.add_argument("--trajectories", type=int, help="number of trajectories")

    p = sub.add_parser("run", help="run one scenario")
    config_flags(p, "output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario over a list of values of one key")
    config_flags(p, "output directory (one sub-directory per value)")
    p.add_argument("--axis", required=True, metavar="SECTION.KEY")
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 0,4,13,40 or pi,2pi,4pi")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="quick-look SVG of trace.csv files")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out", required=True, help="output .svg")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("gate", help="extract the three-site revival gate")
    config_flags(p, "output directory")
    p.add_argument("--periods", type=int, default=1)
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except SpinBarrierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
