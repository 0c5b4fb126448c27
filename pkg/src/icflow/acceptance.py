"""The acceptance suite: eleven end-to-end criteria with pinned tolerances.

Expensive runs are shared between criteria through :class:`Suite`, which
computes each one lazily and keeps it for the rest of the session.
"""
import time
from dataclasses import dataclass, replace

import numpy as np

from . import diagnostics as dg
from .curvature import CurvatureFunction
from .exact import SphericalFlow
from .flow import FlowConfig, calibrate_reference_radius, reference_radius, run
from .geometry import compute_shape, curvature_kernel, make_initial
from .oracles import ellipse_curvature, spheroid_curvatures
from .sphere import build_circle_grid, build_latlong_grid


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: str
    expected: str
    seconds: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.number:>2} {self.name}: measured {self.measured}; "
                f"expected {self.expected} ({self.seconds:.1f} s)")


class Suite:
    """Lazily computed runs shared by several criteria."""

    def __init__(self):
        self._cache = {}

    def _get(self, key, build):
        if key not in self._cache:
            start = time.perf_counter()
            value = build()
            self._cache[key] = (value, time.perf_counter() - start)
        return self._cache[key]

    def run1(self):
        def build():
            grid = build_latlong_grid(32, 64)
            cfg = FlowConfig(p=0.5, F=CurvatureFunction("mean", 2), t_end=3.0, sample_every=100)
            return run(make_initial(grid, "sphere", r=1.0), cfg)
        return self._get("run1", build)

    def run2(self):
        def build():
            grid = build_circle_grid(256)
            cfg = FlowConfig(p=2.0, F=CurvatureFunction("mean", 1), R_max=100.0)
            return run(make_initial(grid, "sphere", r=1.0), cfg)
        return self._get("run2", build)

    def run6(self):
        def build():
            grid = build_circle_grid(128)
            cfg = FlowConfig(p=0.5, F=CurvatureFunction("mean", 1), mode="rescaled", tau_end=20.0)
            return run(make_initial(grid, "ellipse", a=2.0, b=1.0), cfg)
        return self._get("run6", build)

    def run7(self):
        def build():
            grid = build_latlong_grid(16, 32)
            u0 = make_initial(grid, "ellipsoid_of_revolution", a=1.0, c=1.3)
            cfg = FlowConfig(p=2.0, F=CurvatureFunction("gauss_root", 2), mode="rescaled", tau_end=10.0)
            r_ref = calibrate_reference_radius(u0, cfg)
            return run(u0, replace(cfg, reference_radius=r_ref))
        return self._get("run7", build)

    def report(self, name):
        traj, _ = getattr(self, name)()
        return self._get(name + "_report", lambda: dg.build_report(traj))[0]


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def criterion_1(suite):
    traj, secs = suite.run1()
    exact = SphericalFlow(0.5, 2, 1.0).theta(3.0)
    u = traj.final_state.field
    dev = float(np.max(np.abs(u / exact - 1.0)))
    ok = traj.termination.reason == "completed" and traj.final_state.t == 3.0 and dev < 1e-5 and secs < 60
    return ok, f"max rel dev {dev:.3e} from Theta(3,1)={exact:.6f}, {secs:.1f} s", "< 1e-05 in < 60 s"


def criterion_2(suite):
    traj, secs = suite.run2()
    est = traj.blow_up.t_star if traj.blow_up else float("nan")
    u_max = float(traj.series["u_max"][-1])
    rel = abs(est - 1.0)
    ok = traj.termination.reason == "blow-up" and u_max >= 100 and rel < 0.01 and secs < 60
    return ok, f"stop at u_max={u_max:.4f}, t={traj.final_state.t:.6f}, T*_est={est:.10f}, {secs:.1f} s", \
        "u_max >= 100, |T*_est - 1| < 1%, < 60 s"


def criterion_3(suite):
    from .cli import sweep_rows
    from .config import config_from_dict

    cfg = config_from_dict({
        "flow": {"p": 2.0, "F": "mean", "R_max": 100.0},
        "grid": {"dim": 1, "N": 64},
        "shape": {"kind": "sphere", "r": 1.0},
        "output": {"emit_plots": False},
        "sweep": {"p": [1.5, 2.0, 3.0]},
    })
    rows = sweep_rows(cfg, outdir=None, workers=1)
    expected = {1.5: 2.0, 2.0: 1.0, 3.0: 0.5}
    errs = {r["p"]: abs(r["t_star_est"] / expected[r["p"]] - 1.0) for r in rows}
    ok = len(rows) == 3 and all(e < 0.01 for e in errs.values())
    measured = ", ".join(f"p={r['p']:g}: {r['t_star_est']:.6f}" for r in rows)
    return ok, measured, "T*_est within 1% of {2, 1, 0.5}"


def criterion_4(suite):
    worst = 0.0
    cases = [
        (build_circle_grid(64), CurvatureFunction("mean", 1), 0.5),
        (build_latlong_grid(16, 32), CurvatureFunction("gauss_root", 2), 2.0),
    ]
    for grid, F, p in cases:
        cfg = FlowConfig(p=p, F=F, mode="rescaled", tau_end=1e12, max_steps=10_000, sample_every=1000,
                         reference_radius=1.0)
        traj = run(make_initial(grid, "sphere", r=1.0), cfg)
        if traj.final_state.step_count != 10_000:
            return False, f"stopped after {traj.final_state.step_count} steps", "10^4 steps"
        worst = max(worst, float(np.max(np.abs(traj.final_state.field))))
    return worst < 1e-12, f"max|phi~| = {worst:.3e} after 10^4 steps (S^1 and S^2)", "< 1e-12"


def criterion_5(suite):
    grid = build_circle_grid(128)
    u0 = make_initial(grid, "ellipse", a=2.0, b=1.0)
    F = CurvatureFunction("mean", 1)
    t_k = [round(0.1 * k, 10) for k in range(1, 21)]
    un = run(u0, FlowConfig(p=0.5, F=F, t_end=2.0), checkpoints=t_k)
    sf = SphericalFlow(0.5, 1, reference_radius(u0))
    tau_k = [sf.tau_of_t(t) for t in t_k]
    re = run(u0, FlowConfig(p=0.5, F=F, mode="rescaled", tau_end=tau_k[-1]), checkpoints=tau_k)
    worst = 0.0
    for t, tau in zip(t_k, tau_k):
        a = un.snapshot_at(t, "t").u
        b = re.snapshot_at(tau, "tau").u
        worst = max(worst, float(np.max(np.abs(b / a - 1.0))))
    return worst < 1e-4, f"max rel diff {worst:.3e} over 20 checkpoints in (0, 2]", "< 1e-4"


def criterion_6(suite):
    traj, _ = suite.run6()
    s = traj.series
    dev = float(s["u_tilde_dev"][-1])
    k_lo, k_hi = float(s["kappa_tilde_min"][-1]), float(s["kappa_tilde_max"][-1])
    later = s["u_tilde_dev"][s["tau"] >= 1.0]
    rise = float(np.max(np.diff(later))) if later.size > 1 else 0.0
    ok = (traj.termination.reason == "completed" and dev < 0.01 and 0.9 <= k_lo and k_hi <= 1.1
          and rise <= 0.0)
    return ok, (f"||u~-1|| = {dev:.3e}, kappa~ in [{k_lo:.6f}, {k_hi:.6f}], "
                f"largest increase after tau=1: {rise:.2e}"), \
        "||u~-1|| < 0.01, kappa~ in [0.9, 1.1], non-increasing after tau=1"


def criterion_7(suite):
    traj, secs = suite.run7()
    rep = suite.report("run7")
    s = traj.series
    dev = float(s["u_tilde_dev"][-1])
    osc = dg.check_oscillation_support(rep)
    g0, g1 = float(np.sqrt(s["grad_sq_sup"][0])), float(np.sqrt(s["grad_sq_sup"][-1]))
    ok = traj.termination.reason == "completed" and dev < 0.05 and osc.passed and g1 < g0
    return ok, (f"||u~-1|| = {dev:.3e}, osc ubar margin {osc.margin:.3e}, "
                f"sup|Du| {g0:.4f} -> {g1:.3e}, r_ref={traj.r_ref:.9f}, {secs:.1f} s"), \
        "||u~-1|| < 0.05, osc ubar <= initial + slack, final sup|Du| < initial"


def criterion_8(suite):
    r6, r7 = suite.report("run6"), suite.report("run7")
    results = [dg.check_F_max_monotone(r6), dg.check_F_max_monotone(r7), dg.check_gradient_monotone(r6)]
    ok = all(r.passed for r in results)
    measured = "; ".join(f"{lbl} {r.name} margin {r.margin:.3e}"
                         for lbl, r in zip(("run6", "run7", "run6"), results))
    return ok, measured, "all pass with slack 1e-8*initial"


def criterion_9(suite):
    parts = []
    ok = True
    for name in ("run1", "run2", "run6", "run7"):
        res = dg.check_barrier_series(suite.report(name))
        ok &= res.passed
        parts.append(f"{name} {res.margin:.2e}")
    return ok, "min relative margin " + ", ".join(parts), "> 0 at every sample"


def _circle_kappa_error(N):
    grid = build_circle_grid(N)
    u0 = make_initial(grid, "ellipse", a=2.0, b=1.0)
    kappa = curvature_kernel(grid, u0.phi, u0.u)[2][:, 0]
    return float(np.max(np.abs(kappa - ellipse_curvature(grid.nodes[0], 2.0, 1.0))))


def _spheroid_error(n_theta):
    grid = build_latlong_grid(n_theta, 2 * n_theta)
    u0 = make_initial(grid, "ellipsoid_of_revolution", a=1.0, c=1.3)
    eig = np.linalg.eigvals(compute_shape(u0).shape_op).real
    eig.sort(axis=-1)
    ref = np.sort(np.stack(spheroid_curvatures(grid.nodes[0], 1.0, 1.3), axis=-1), axis=-1)
    return float(np.max(np.abs(eig - ref)))


def criterion_10(suite):
    e1 = [_circle_kappa_error(N) for N in (64, 128, 256)]
    e2 = [_spheroid_error(n) for n in (16, 32, 64)]
    r1 = [e1[i] / e1[i + 1] for i in range(2)]
    r2 = [e2[i] / e2[i + 1] for i in range(2)]
    ok = all(12 <= r <= 20 for r in r1) and all(3.5 <= r <= 4.5 for r in r2)
    return ok, (f"S^1 ratios {', '.join(f'{r:.2f}' for r in r1)}; "
                f"S^2 ratios {', '.join(f'{r:.2f}' for r in r2)}"), "S^1 in [12, 20], S^2 in [3.5, 4.5]"


def criterion_11(suite):
    failed, missed = [], []
    for name, report in dg.synthetic_counterexamples().items():
        (failed if not dg.CHECKS[name](report).passed else missed).append(name)
    ok = not missed and len(failed) == len(dg.CHECKS)
    measured = f"{len(failed)}/{len(dg.CHECKS)} checks fail on their counterexample"
    if missed:
        measured += f" (missed: {', '.join(missed)})"
    return ok, measured, "every check fails"


CRITERIA = (
    (1, "spherical_exactness_expanding", criterion_1),
    (2, "blow_up_time", criterion_2),
    (3, "sweep_blow_up_table", criterion_3),
    (4, "rescaled_fixed_point", criterion_4),
    (5, "mode_consistency", criterion_5),
    (6, "convergence_expanding", criterion_6),
    (7, "convergence_contracting_scale", criterion_7),
    (8, "monotone_monitors", criterion_8),
    (9, "barrier_inequality", criterion_9),
    (10, "discretization_order", criterion_10),
    (11, "detector_sanity", criterion_11),
)


def select(name_filter=None):
    if not name_filter:
        return list(CRITERIA)
    f = str(name_filter)
    return [c for c in CRITERIA if f == str(c[0]) or f in c[1]]


def evaluate(number, suite=None):
    suite = suite or Suite()
    for num, name, fn in CRITERIA:
        if num == number:
            (ok, measured, expected), secs = _timed(lambda: fn(suite))
            return CriterionResult(num, name, bool(ok), measured, expected, secs)
    raise KeyError(number)


def run_suite(name_filter=None, out=print, suite=None):
    suite = suite or Suite()
    results = []
    for num, _, _ in select(name_filter):
        res = evaluate(num, suite)
        results.append(res)
        if out:
            out(res.line())
    return results
