"""Command line entry point: run, sweep, verify and plot.

Exit codes: 0 when a run completes and every applicable check passes,
1 when the run aborts or cannot start, 2 when a check fails.
"""
import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import acceptance
from . import io as fio
from .config import config_from_dict, parse_config, sweep_points
from .diagnostics import all_passed, build_report
from .errors import ConfigurationError
from .flow import calibrate_reference_radius, run
from .plots import emit_plots, plot_monitors, plot_snapshots

log = logging.getLogger("icflow")

EXIT_OK, EXIT_ABORT, EXIT_CHECK = 0, 1, 2


def _echo(cfg, fc=None, r_ref=None):
    d = cfg.as_dict()
    if fc is not None:
        d["resolved_flow"] = fc.describe()
    if r_ref is not None:
        d["r_ref"] = r_ref
    return d


def execute(cfg, outdir=None):
    """Run one experiment and write its files; returns (exit code, summary)."""
    grid = cfg.build_grid()
    u0 = cfg.initial(grid)
    fc = cfg.flow_config()
    summary = {"termination": None, "exit_code": None}
    try:
        if cfg.calibrate:
            fc = replace(fc, reference_radius=calibrate_reference_radius(u0, fc))
        traj = run(u0, fc, checkpoints=cfg.checkpoints)
    except ConfigurationError as exc:
        reason = "admissibility" if "admissible" in str(exc) else "configuration"
        summary.update(termination=reason, detail=str(exc), exit_code=EXIT_ABORT)
        if outdir is not None:
            Path(outdir).mkdir(parents=True, exist_ok=True)
            fio.write_summary(Path(outdir) / "summary.json", dict(summary, config=_echo(cfg, fc)))
        return EXIT_ABORT, summary

    report = build_report(traj, cfg.check_settings())
    term = traj.termination
    if term.aborted:
        code = EXIT_ABORT
    else:
        code = EXIT_OK if all_passed(report) else EXIT_CHECK
    s = traj.series
    summary.update(
        termination=term.reason,
        detail=term.detail,
        exit_code=code,
        steps=term.steps,
        t=term.t,
        tau=term.tau,
        r_ref=traj.r_ref,
        u_tilde_dev=float(s["u_tilde_dev"][-1]),
        grad_sq_sup=float(s["grad_sq_sup"][-1]),
        checks_passed=all_passed(report),
        failed_checks=[c.name for c in report.checks if not c.passed],
        t_star_est=traj.blow_up.t_star if traj.blow_up else None,
        t_star_low_confidence=traj.blow_up.low_confidence if traj.blow_up else None,
        gamma_hat=report.derived.get("gamma_hat"),
    )
    if outdir is not None:
        _write_outputs(cfg, fc, traj, report, summary, Path(outdir))
    return code, summary


def _write_outputs(cfg, fc, traj, report, summary, outdir):
    outdir.mkdir(parents=True, exist_ok=True)
    echo = _echo(cfg, fc, traj.r_ref)
    fio.write_trajectory(outdir / "trajectory.csv", traj, echo)
    for i, snap in enumerate(traj.snapshots[1:-1], start=1):
        fio.write_snapshot(outdir / f"snapshot_{i:03d}.csv", traj.grid, snap, echo)
    fio.write_snapshot(outdir / "snapshot_initial.csv", traj.grid, traj.snapshots[0], echo)
    fio.write_snapshot(outdir / "snapshot_final.csv", traj.grid, traj.snapshots[-1], echo)
    fio.write_monitor_report(outdir / "monitor.csv", report, echo)
    fio.write_checks(outdir, report, echo)
    fio.write_summary(outdir / "summary.json", dict(summary, config=echo))
    emit_plots(traj, report, outdir, enabled=cfg.output["emit_plots"])


def cmd_run(cfg, outdir):
    code, summary = execute(cfg, outdir)
    print(f"termination: {summary['termination']} {summary.get('detail', '')}".rstrip())
    if summary.get("t_star_est") is not None:
        print(f"T*_est = {summary['t_star_est']:.12g}")
    if summary.get("failed_checks"):
        print("failed checks: " + ", ".join(summary["failed_checks"]))
    print(f"exit code {code}; outputs in {outdir}")
    return code


def _sweep_worker(job):
    index, choice, cfg, outdir = job
    sub = None if outdir is None else Path(outdir) / f"run_{index:03d}"
    code, summary = execute(cfg, sub)
    row = {"index": index}
    row.update({k: (v if not isinstance(v, dict) else dict(v)) for k, v in choice.items()})
    row.update(p=cfg.flow["p"], F=cfg.flow["F"], shape=dict(cfg.shape))
    row.update({k: summary.get(k) for k in (
        "termination", "exit_code", "steps", "t", "tau", "u_tilde_dev", "grad_sq_sup",
        "t_star_est", "checks_passed")})
    return row


SWEEP_COLUMNS = ("index", "p", "F", "shape", "termination", "exit_code", "steps", "t", "tau",
                 "u_tilde_dev", "grad_sq_sup", "t_star_est", "checks_passed")


def sweep_rows(cfg, outdir=None, workers=1):
    """Run every sweep point; rows come back in point order."""
    jobs = [(i, choice, point, outdir) for i, (choice, point) in enumerate(sweep_points(cfg))]
    if workers <= 1 or len(jobs) == 1:
        return [_sweep_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_sweep_worker, jobs))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, dict):
        return " ".join(f"{k}={v[k]}" for k in sorted(v))
    if isinstance(v, float):
        return fio.fmt(v)
    return str(v)


def cmd_sweep(cfg, outdir, workers=1):
    rows = sweep_rows(cfg, outdir, workers)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config: {json.dumps(_echo(cfg), sort_keys=True, default=str)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in SWEEP_COLUMNS])
    for row in rows:
        est = row["t_star_est"]
        print(f"run {row['index']:3d}  p={row['p']:<5g} F={row['F']:<12} {row['termination']:<10} "
              f"T*_est={'-' if est is None else f'{est:.8g}'}  exit={row['exit_code']}")
    codes = [r["exit_code"] for r in rows]
    if EXIT_ABORT in codes:
        return EXIT_ABORT
    return EXIT_CHECK if EXIT_CHECK in codes else EXIT_OK


def cmd_verify(name_filter=None):
    results = acceptance.run_suite(name_filter)
    if not results:
        print(f"no criterion matches {name_filter!r}")
        return EXIT_ABORT
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_CHECK


def _read_snapshot(path, grid_shape):
    series, echo = fio.read_trajectory(path)
    snap = echo.get("snapshot", {})
    return SimpleNamespace(t=snap.get("t", np.nan), tau=snap.get("tau", np.nan),
                           theta=snap.get("theta", np.nan), u=series["u"].reshape(grid_shape))


def cmd_plot(outdir):
    """Re-render the SVG charts from the files of an earlier run."""
    outdir = Path(outdir)
    series, echo = fio.read_trajectory(outdir / "trajectory.csv")
    cfg = config_from_dict({k: v for k, v in echo.items() if k in (
        "flow", "grid", "shape", "output", "checks", "seed")})
    grid = cfg.build_grid()
    clock = "tau" if cfg.flow["mode"] == "rescaled" else "t"
    plot_monitors(series, clock, outdir / "monitors.svg")
    names = (["snapshot_initial.csv"] + sorted(p.name for p in outdir.glob("snapshot_[0-9]*.csv"))
             + ["snapshot_final.csv"])
    snaps = [_read_snapshot(outdir / n, grid.shape) for n in names if (outdir / n).exists()]
    plot_snapshots(grid, snaps, outdir / "snapshots.svg")
    print(f"plots written to {outdir}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="icflow", description="Inverse curvature flow simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "integrate one configuration"),
                            ("sweep", "run the Cartesian product of the sweep axes")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir)")
        p.add_argument("--seed", type=int)
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1, metavar="N")
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--filter", metavar="NAME", help="criterion number or name substring")
    v.add_argument("--seed", type=int)
    pl = sub.add_parser("plot", help="re-render charts of an earlier run")
    pl.add_argument("--out", required=True, metavar="DIR")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.filter)
        if args.command == "plot":
            return cmd_plot(args.out)
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        outdir = args.out or cfg.output["dir"]
        if args.command == "run":
            return cmd_run(cfg, outdir)
        if args.workers < 1:
            raise ConfigurationError("--workers must be >= 1")
        return cmd_sweep(cfg, outdir, args.workers)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
