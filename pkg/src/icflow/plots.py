"""SVG charts of monitor series and shape snapshots."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed salt and no date stamp: identical runs give identical SVG bytes
_RC = {"svg.hashsalt": "icflow", "svg.fonttype": "path"}
_META = {"Date": None}

MONITOR_PANELS = (
    ("u_tilde_dev", "||u~ - 1||_inf"),
    ("osc_ubar", "osc ubar"),
    ("grad_sq_sup", "sup |Du|^2"),
    ("F_max", "F_max"),
)


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_monitors(series, clock, path):
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 2, figsize=(9, 6.5), sharex=True)
        x = series[clock]
        for ax, (key, label) in zip(axes.ravel(), MONITOR_PANELS):
            y = np.asarray(series[key], dtype=float)
            ax.plot(x, y, lw=1.2)
            if np.all(y[np.isfinite(y)] > 0) and np.isfinite(y).any():
                ymin, ymax = np.nanmin(y), np.nanmax(y)
                if ymax / ymin > 100:
                    ax.set_yscale("log")
            ax.set_title(label, fontsize=10)
            ax.grid(alpha=0.3)
        for ax in axes[-1]:
            ax.set_xlabel(clock)
        fig.tight_layout()
        return _save(fig, path)


def _pick(snapshots, limit=8):
    if len(snapshots) <= limit:
        return list(snapshots)
    idx = np.unique(np.linspace(0, len(snapshots) - 1, limit).round().astype(int))
    return [snapshots[i] for i in idx]


def plot_snapshots(grid, snapshots, path):
    """Polar overlay of u/Theta on S^1, colatitude profiles on S^2."""
    shown = [s for s in _pick(snapshots) if np.isfinite(s.theta)]
    with plt.rc_context(_RC):
        if grid.dim == 1:
            fig = plt.figure(figsize=(6, 6))
            ax = fig.add_subplot(projection="polar")
            ang = np.append(grid.nodes[0], grid.nodes[0][:1] + 2 * np.pi)
            for s in shown:
                r = s.u / s.theta
                ax.plot(ang, np.append(r, r[:1]), lw=1.0, label=f"t={s.t:.4g}")
            ax.set_title("u / Theta")
        else:
            fig, ax = plt.subplots(figsize=(7, 4.5))
            colat = grid.nodes[0][:, 0]
            for s in shown:
                ax.plot(colat, s.u[:, 0] / s.theta, lw=1.0, label=f"t={s.t:.4g}")
            ax.set_xlabel("colatitude (rad), longitude 0")
            ax.set_ylabel("u / Theta")
            ax.grid(alpha=0.3)
        ax.legend(fontsize=7, loc="best")
        fig.tight_layout()
        return _save(fig, path)


def emit_plots(traj, report, outdir, enabled=True):
    """Write monitors.svg and snapshots.svg; nothing when disabled."""
    if not enabled:
        return []
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    clock = report.meta.get("clock", "t")
    return [
        plot_monitors(traj.series, clock, outdir / "monitors.svg"),
        plot_snapshots(traj.grid, traj.snapshots, outdir / "snapshots.svg"),
    ]
