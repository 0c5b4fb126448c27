"""Flat-file outputs of a run: trajectory, snapshots, monitor and check reports.

Numbers are written with 17 significant digits, and every file starts with
a ``#`` header echoing the resolved configuration, so identical inputs give
byte-identical files.
"""
import json
import math
from pathlib import Path

import numpy as np

from .flow import COLUMNS, EXTRA_COLUMNS


def fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _header(config_echo):
    text = json.dumps(config_echo, sort_keys=True, default=str)
    return f"# config: {text}\n"


def write_table(path, columns, rows, config_echo):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header(config_echo))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def write_trajectory(path, traj, config_echo):
    cols = COLUMNS + EXTRA_COLUMNS
    s = traj.series
    write_table(path, cols, zip(*(s[c] for c in cols)), config_echo)


def read_trajectory(path):
    """Series dict and config echo of a trajectory file."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        echo = json.loads(first[len("# config: "):]) if first.startswith("# config: ") else {}
        data = np.genfromtxt(fh, delimiter=",", names=True)
    series = {name: np.atleast_1d(data[name]) for name in data.dtype.names}
    return series, echo


def snapshot_columns(dim):
    coords = ["theta"] if dim == 1 else ["theta", "lambda"]
    kappas = [f"kappa_{i + 1}" for i in range(dim)]
    return coords + ["u"] + kappas + ["v", "u_bar"]


def write_snapshot(path, grid, snap, config_echo):
    coords = [c.ravel() for c in grid.nodes]
    kappa = snap.kappa.reshape(-1, grid.dim)
    cols = [*coords, snap.u.ravel(), *(kappa[:, i] for i in range(grid.dim)),
            snap.v.ravel(), snap.u_bar.ravel()]
    echo = dict(config_echo, snapshot={"t": snap.t, "tau": snap.tau, "theta": snap.theta})
    write_table(path, snapshot_columns(grid.dim), zip(*cols), echo)


def write_monitor_report(path, report, config_echo):
    cols = ["t", "tau", "theta", "osc_ubar", "v_decay", "grad_sq_sup", "F_max", "F_tilde_min", "u_tilde_dev"]
    s, d = report.series, report.derived
    data = [s["t"], s["tau"], s["theta"], d["osc_ubar"], d["v_decay"], s["grad_sq_sup"],
            s["F_max"], s["F_tilde_min"], s["u_tilde_dev"]]
    write_table(path, cols, zip(*data), config_echo)


def write_checks(outdir, report, config_echo):
    outdir = Path(outdir)
    with open(outdir / "checks.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header(config_echo))
        fh.write(report.text())
    payload = report.as_dict()
    payload["config"] = config_echo
    with open(outdir / "checks.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def write_summary(path, summary):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return fmt(obj)
    return obj
