"""Theorem checks evaluated on sampled trajectories.

The a-priori estimates of the flow involve constants that exist but are
not computable.  Each check replaces them with an explicit surrogate
(initial value plus slack, a fixed ratio, ...) and states it in its
result, so a failure can be attributed to the mathematics or to the
surrogate.

All checks are pure functions of a :class:`MonitorReport`.
"""
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .exact import check_barriers


@dataclass(frozen=True)
class CheckSettings:
    tol_mono_rel: float = 1e-8
    # absolute floor so exact-zero initial series tolerate roundoff
    tol_mono_abs: float = 1e-14
    rho_F: float = 0.1
    tol_osc_rel: float = 0.1
    rho_v: float = 10.0
    v_slack: float = 0.0
    eps_conv: float = 0.02
    delta_conv: float = 0.1
    pinch_factor: float = 10.0
    barrier_rel: float = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    time: float
    surrogate: str
    skipped: bool = False

    def line(self):
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        return f"{self.name:<26} {status}  margin={self.margin:.6g}  time={self.time:.6g}  [{self.surrogate}]"


@dataclass(eq=False)
class MonitorReport:
    """Sampled monitor series of one run plus derived series and check results.

    ``meta`` carries p, n, mode, the clock name ("t" or "tau") and the
    extreme initial radii used for the barrier radii.
    """

    series: dict
    meta: dict
    derived: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def clock(self):
        return self.series[self.meta.get("clock", "t")]

    def __len__(self):
        return len(self.series["t"])

    def text(self):
        lines = [c.line() for c in self.checks]
        gamma = self.derived.get("gamma_hat")
        if gamma is not None:
            lines.append(f"gamma_hat = {gamma:.6g}")
        return "\n".join(lines) + "\n"

    def as_dict(self):
        return {
            "meta": self.meta,
            "derived": {k: _jsonable(v) for k, v in self.derived.items()},
            "checks": [asdict(c) for c in self.checks],
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, allow_nan=True)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def from_series(series, p, n, mode="unrescaled", u0_min=None, u0_max=None):
    """Report from raw arrays; used for synthetic series and reloaded runs."""
    series = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    lengths = {len(v) for v in series.values()}
    if len(lengths) != 1:
        raise ValueError(f"series lengths differ: {sorted(lengths)}")
    meta = {
        "p": float(p),
        "n": int(n),
        "mode": mode,
        "clock": "tau" if mode == "rescaled" else "t",
        "u0_min": u0_min,
        "u0_max": u0_max,
    }
    report = MonitorReport(series, meta)
    _derive(report)
    return report


def build_report(traj, settings=None):
    """Monitor report of a trajectory with all applicable checks evaluated."""
    report = from_series(
        traj.series,
        traj.config.p,
        traj.grid.dim,
        traj.config.mode,
        float(traj.u0.u.min()),
        float(traj.u0.u.max()),
    )
    report.meta["termination"] = traj.termination.reason
    report.meta["r_ref"] = traj.r_ref
    if traj.blow_up is not None:
        report.meta["t_star_est"] = traj.blow_up.t_star
        report.meta["t_star_low_confidence"] = traj.blow_up.low_confidence
    run_checks(report, settings)
    return report


def _derive(report):
    s = report.series
    with np.errstate(invalid="ignore"):
        report.derived["v_decay"] = (s["v_max"] - 1.0) * s["theta"]
    report.derived["osc_ubar"] = s["osc_ubar"].copy()
    report.derived["gamma_hat"] = None
    if report.meta["p"] < 1:
        report.derived["gamma_hat"] = fit_gradient_decay(report)[0]


def _worst(margins, times):
    margins = np.asarray(margins, dtype=float)
    ok = np.isfinite(margins)
    if not ok.any():
        return np.inf, float("nan")
    idx = np.flatnonzero(ok)[np.argmin(margins[ok])]
    return float(margins[idx]), float(times[idx])


def _mono_tol(x0, settings):
    return settings.tol_mono_rel * abs(x0) + settings.tol_mono_abs


def check_gradient_monotone(report, settings=None):
    """sup|Du|^2(t) <= sup|Du_0|^2 + tol at every sample."""
    st = settings or CheckSettings()
    g = report.series["grad_sq_sup"]
    bound = g[0] + _mono_tol(g[0], st)
    margin, when = _worst(bound - g, report.clock)
    return CheckResult("gradient_monotone", margin >= 0, margin, when,
                       f"initial sup|Du|^2 + {st.tol_mono_rel:g}*initial")


def fit_gradient_decay(report):
    """Fit sup|Du|^2 ~ C (t + b)^(-gamma); returns (gamma_hat, b_hat).

    For fixed b the model is linear in (log C, gamma); b is found by a
    bounded scalar search on log b.  Zero or non-positive series return
    (None, None).
    """
    t = report.series["t"]
    g = report.series["grad_sq_sup"]
    ok = np.isfinite(t) & np.isfinite(g) & (g > 0)
    if ok.sum() < 3 or not g[0] > 0:
        return None, None
    t, y = t[ok], np.log(g[ok])
    span = max(float(t[-1] - t[0]), 1e-300)

    def solve(log_b):
        x = np.log(t + np.exp(log_b))
        A = np.column_stack((np.ones_like(x), -x))
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return coef, float(np.sum((A @ coef - y) ** 2))

    lo = np.log(span) - 14.0
    hi = np.log(span) + 14.0
    res = minimize_scalar(lambda s: solve(s)[1], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    coef, _ = solve(res.x)
    return float(coef[1]), float(np.exp(res.x))


def check_gradient_decay(report, settings=None):
    gamma = report.derived.get("gamma_hat")
    if gamma is None:
        gamma = fit_gradient_decay(report)[0]
    if gamma is None:
        return CheckResult("gradient_decay", True, np.inf, float("nan"),
                           "gamma_hat > 0 (zero series, skipped)", skipped=True)
    return CheckResult("gradient_decay", gamma > 0, gamma, float(report.clock[-1]),
                       "fitted gamma_hat > 0")


def check_F_max_monotone(report, settings=None):
    """F_max(t) <= F_max(0) + tol."""
    st = settings or CheckSettings()
    f = report.series["F_max"]
    bound = f[0] + _mono_tol(f[0], st)
    margin, when = _worst(bound - f, report.clock)
    return CheckResult("F_max_monotone", margin >= 0, margin, when,
                       f"initial F_max + {st.tol_mono_rel:g}*initial")


def check_F_tilde_positive(report, settings=None):
    """min F~ never falls below rho times its initial value."""
    st = settings or CheckSettings()
    f = report.series["F_tilde_min"]
    margin, when = _worst(f - st.rho_F * f[0], report.clock)
    return CheckResult("F_tilde_positive", margin >= 0, margin, when,
                       f"F~_min >= {st.rho_F:g}*initial (samples with finite Theta)")


def check_oscillation_support(report, settings=None):
    """osc of the support function stays below its initial value plus slack.

    The slack is relative to the initial radius scale, since a round
    start has zero oscillation.
    """
    st = settings or CheckSettings()
    o = report.derived.get("osc_ubar", report.series["osc_ubar"])
    scale = max(o[0], st.tol_mono_abs)
    bound = o[0] + st.tol_osc_rel * scale
    margin, when = _worst(bound - o, report.clock)
    return CheckResult("oscillation_support", margin >= 0, margin, when,
                       f"osc ubar <= initial*(1+{st.tol_osc_rel:g})")


def check_v_decay(report, settings=None):
    """(v_max - 1) Theta stays bounded and sup|Du| ends below its start."""
    st = settings or CheckSettings()
    w = report.derived.get("v_decay")
    if w is None:
        w = (report.series["v_max"] - 1.0) * report.series["theta"]
    g = report.series["grad_sq_sup"]
    surrogate = f"(v_max-1)*Theta <= {st.rho_v:g}*initial; final sup|Du| < initial"
    if not g[0] > 0:
        # round start: nothing to decay
        margin, when = _worst(st.tol_mono_abs - g, report.clock)
        return CheckResult("v_decay", margin >= 0, margin, when, surrogate)
    bound = st.rho_v * w[0] * (1.0 + st.v_slack)
    margin, when = _worst(bound - w, report.clock)
    final = np.sqrt(g[0]) - np.sqrt(g[-1])
    if final <= 0 and final < margin:
        margin, when = float(final), float(report.clock[-1])
    return CheckResult("v_decay", margin >= 0 and final > 0, margin, when, surrogate)


def check_convergence_to_sphere(report, settings=None):
    """||u~ - 1|| and the spread of kappa~ at the final sample."""
    st = settings or CheckSettings()
    s = report.series
    dev = s["u_tilde_dev"][-1]
    k_lo, k_hi = s["kappa_tilde_min"][-1], s["kappa_tilde_max"][-1]
    margin = min(st.eps_conv - dev, st.delta_conv - (1.0 - k_lo), st.delta_conv - (k_hi - 1.0))
    passed = bool(np.isfinite(margin) and margin > 0)
    return CheckResult("convergence_to_sphere", passed, float(margin), float(report.clock[-1]),
                       f"||u~-1|| < {st.eps_conv:g}, kappa~ in [1-{st.delta_conv:g}, 1+{st.delta_conv:g}]")


def check_barrier_series(report, settings=None):
    """Theta(t, r1) < u < Theta(t, r2) at every sample."""
    st = settings or CheckSettings()
    r1 = report.meta["u0_min"] * (1.0 - st.barrier_rel)
    r2 = report.meta["u0_max"] * (1.0 + st.barrier_rel)
    s = report.series
    p, n = report.meta["p"], report.meta["n"]
    margins = []
    for t, lo, hi in zip(s["t"], s["u_min"], s["u_max"]):
        res = check_barriers(lo, hi, t, r1, r2, p, n)
        # relative margins so that growing radii stay comparable
        margins.append(min(res.lower_margin / lo, res.upper_margin / hi))
    margin, when = _worst(margins, report.clock)
    return CheckResult("barrier_series", margin > 0, margin, when,
                       "r1 = min u0*(1-1e-9), r2 = max u0*(1+1e-9); relative margin")


def check_curvature_pinching(report, settings=None):
    """kappa~_min > 0 and kappa~_max < factor * kappa~_max(0)."""
    st = settings or CheckSettings()
    s = report.series
    lo = s["kappa_tilde_min"]
    hi = s["kappa_tilde_max"]
    margins = np.minimum(lo, st.pinch_factor * hi[0] - hi)
    margin, when = _worst(margins, report.clock)
    return CheckResult("curvature_pinching", margin > 0, margin, when,
                       f"kappa~_min > 0, kappa~_max < {st.pinch_factor:g}*initial")


CHECKS = {
    "gradient_monotone": check_gradient_monotone,
    "gradient_decay": check_gradient_decay,
    "F_max_monotone": check_F_max_monotone,
    "F_tilde_positive": check_F_tilde_positive,
    "oscillation_support": check_oscillation_support,
    "v_decay": check_v_decay,
    "convergence_to_sphere": check_convergence_to_sphere,
    "barrier_series": check_barrier_series,
    "curvature_pinching": check_curvature_pinching,
}


def applicable_checks(meta):
    names = ["F_max_monotone", "F_tilde_positive"]
    if meta["p"] < 1:
        names = ["gradient_monotone", "gradient_decay"] + names
    else:
        names += ["oscillation_support", "v_decay", "curvature_pinching"]
    if meta.get("u0_min") is not None:
        names.append("barrier_series")
    if meta["mode"] == "rescaled":
        names.append("convergence_to_sphere")
    return names


def run_checks(report, settings=None, names=None):
    names = applicable_checks(report.meta) if names is None else names
    report.checks = [CHECKS[name](report, settings) for name in names]
    return report.checks


def all_passed(report):
    return all(c.passed for c in report.checks)


def synthetic_counterexamples():
    """One series per check that violates exactly the inequality it tests."""
    t = np.linspace(0.0, 1.0, 21)
    ones = np.ones_like(t)

    def base(**over):
        s = {
            "t": t, "tau": t, "theta": 1.0 + t,
            "u_min": 1.0 + t, "u_max": 1.0 + t, "osc_ubar": 0.1 * ones,
            "F_min": ones, "F_max": ones, "F_tilde_min": 2.0 * ones, "F_tilde_max": 2.0 * ones,
            "grad_sq_sup": 0.1 / (1.0 + t) ** 2, "u_tilde_dev": 0.5 * ones,
            "kappa_tilde_min": ones, "kappa_tilde_max": ones, "v_max": 1.0 + 0.01 / (1.0 + t) ** 2,
            "dt": 1e-3 * ones,
        }
        s.update(over)
        return s

    bump = np.where(np.arange(t.size) == 12, 1.0, 0.0)
    cases = {
        "gradient_monotone": (base(grad_sq_sup=0.1 / (1.0 + t) ** 2 + 0.2 * bump), 0.5),
        "gradient_decay": (base(grad_sq_sup=0.1 * (1.0 + t) ** 2), 0.5),
        "F_max_monotone": (base(F_max=ones + 0.01 * bump), 2.0),
        "F_tilde_positive": (base(F_tilde_min=2.0 * np.exp(-8.0 * t)), 2.0),
        "oscillation_support": (base(osc_ubar=0.1 + t), 2.0),
        "v_decay": (base(v_max=1.01 * ones, theta=1.0 + 20.0 * t), 2.0),
        "convergence_to_sphere": (base(u_tilde_dev=0.3 * ones, kappa_tilde_min=0.7 * ones), 0.5),
        "barrier_series": (base(u_max=1.0 + 3.0 * t), 0.5),
        "curvature_pinching": (base(kappa_tilde_max=1.0 + 20.0 * t), 2.0),
    }
    out = {}
    for name, (series, p) in cases.items():
        mode = "rescaled" if name == "convergence_to_sphere" else "unrescaled"
        out[name] = from_series(series, p=p, n=1, mode=mode, u0_min=1.0, u0_max=1.0)
    return out
