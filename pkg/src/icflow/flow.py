"""Time integration of the inverse curvature flow in graph form.

Unrescaled mode integrates du/dt = v F(kappa)^{-p} for the radial function
u.  Rescaled mode integrates, in tau-time, the log of the rescaled radius
phi~ = log(u / Theta(t, r_ref)):

    dphi~/dtau = v u~^{-1} F(kappa~)^{-p} - n^{-p},

where kappa~ are the curvatures of the graph u~ itself (curvature scales
like 1/length, so kappa~ = Theta kappa).  Both use classical RK4 with a
parabolic step limit dt = safety h_min^2 / D_max.
"""
import logging
from functools import lru_cache
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import root_scalar

from .curvature import CurvatureFunction, _lastmax, check_admissible
from .errors import AdmissibilityError, ConfigurationError
from .exact import SphericalFlow, validate_exponent
from .geometry import DEFAULT_V_CAP, GraphFunction, curvature_kernel

log = logging.getLogger(__name__)

MODES = ("unrescaled", "rescaled")

# trajectory columns, in file order
COLUMNS = (
    "t", "tau", "theta", "u_min", "u_max", "osc_ubar", "F_min", "F_max",
    "grad_sq_sup", "u_tilde_dev", "kappa_tilde_min", "kappa_tilde_max", "v_max", "dt",
)
EXTRA_COLUMNS = ("F_tilde_min", "F_tilde_max")


@dataclass(frozen=True)
class FlowConfig:
    p: float
    F: CurvatureFunction
    mode: str = "unrescaled"
    dt_safety: float = 0.2
    t_end: float = None
    tau_end: float = None
    R_max: float = None
    dt_min: float = 1e-12
    sample_every: int = 10
    v_cap: float = DEFAULT_V_CAP
    reference_radius: float = None
    max_steps: int = 20_000_000

    def __post_init__(self):
        object.__setattr__(self, "p", validate_exponent(self.p))
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.dt_safety <= 1:
            raise ConfigurationError(f"dt_safety must lie in (0, 1], got {self.dt_safety}")
        if self.p > 1 and self.F.cone != "gamma_plus":
            raise ConfigurationError(f"p>1 requires gamma_plus (got cone {self.F.cone})")
        for name in ("R_max", "dt_min", "v_cap", "reference_radius", "t_end", "tau_end"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ConfigurationError(f"{name} must be positive, got {val}")
        if not isinstance(self.sample_every, int) or self.sample_every < 1:
            raise ConfigurationError(f"sample_every must be a positive integer, got {self.sample_every!r}")
        if self.mode == "rescaled" and self.tau_end is None:
            raise ConfigurationError("rescaled mode needs tau_end")
        if self.mode == "unrescaled" and self.t_end is None and self.p < 1:
            raise ConfigurationError("unrescaled runs with p<1 need t_end")

    def describe(self):
        d = {"p": self.p, "mode": self.mode}
        d.update(self.F.describe())
        for name in ("dt_safety", "t_end", "tau_end", "R_max", "dt_min", "sample_every",
                     "v_cap", "reference_radius"):
            d[name] = getattr(self, name)
        return d


class RunStop(Exception):
    """Raised inside the integrator to end a run with a structured reason."""

    def __init__(self, reason, detail=""):
        super().__init__(f"{reason}: {detail}")
        self.reason = reason
        self.detail = detail


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Geometry and right-hand side of the graph currently integrated.

    ``u`` is the graph the curvatures belong to: the radius itself in
    unrescaled mode, u~ in rescaled mode.
    """

    u: np.ndarray
    v: np.ndarray
    grad_sq: np.ndarray
    kappa: np.ndarray
    F: np.ndarray
    rhs: np.ndarray


def evaluate(grid, values, config):
    """Geometry and time derivative of the integrated field ``values``."""
    if config.mode == "unrescaled":
        u = values
        if not u.min() > 0:
            raise RunStop("resolution-lost", "radial function became non-positive")
        phi = np.log(u)
    else:
        phi = values
        u = np.exp(phi)
    v, grad_sq, kappa = curvature_kernel(grid, phi, u)
    if not np.isfinite(kappa.sum()):
        raise RunStop("resolution-lost", "non-finite curvatures")
    func = config.F
    if not func.all_admissible(kappa):
        try:
            check_admissible(func, kappa)
        except AdmissibilityError as exc:
            raise RunStop("admissibility-lost", str(exc)) from None
    F = func.value(kappa)
    speed = v * F ** (-config.p)
    if config.mode == "unrescaled":
        rhs = speed
    else:
        rhs = speed / u - float(grid.dim) ** (-config.p)
    return Evaluation(u, v, grad_sq, kappa, F, rhs)


def rhs_unrescaled(graph, F, p):
    """du/dt = v / F(kappa)^p per node."""
    check_admissible(F, curvature_kernel(graph.grid, graph.phi, graph.u)[2])
    cfg = FlowConfig(p=p, F=F, mode="unrescaled", t_end=1.0)
    return evaluate(graph.grid, graph.u, cfg).rhs


def rhs_rescaled(grid, phi_tilde, F, p):
    """dphi~/dtau = v u~^{-1} F(kappa~)^{-p} - n^{-p} per node."""
    phi_tilde = np.asarray(phi_tilde, dtype=float)
    check_admissible(F, curvature_kernel(grid, phi_tilde, np.exp(phi_tilde))[2])
    cfg = FlowConfig(p=p, F=F, mode="rescaled", tau_end=1.0)
    return evaluate(grid, phi_tilde, cfg).rhs


def diffusion_coefficient(ev, F, p):
    """Per-node angular diffusion coefficient of the linearized operator."""
    dF = _lastmax(F.grad(ev.kappa))
    return p * ev.F ** (-(p + 1.0)) * dF / (ev.v * ev.u * ev.u)


def propose_dt(grid, ev, config):
    """Explicit parabolic step: dt_safety * h_min^2 / D_max."""
    d_max = float(np.max(diffusion_coefficient(ev, config.F, config.p)))
    if not np.isfinite(d_max) or d_max <= 0:
        return 0.0
    return config.dt_safety * grid.min_spacing ** 2 / d_max


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    tau: float
    field: np.ndarray
    theta_ref: float
    r_ref: float
    step_count: int = 0
    last_dt: float = 0.0
    ev: Evaluation = field(default=None, repr=False)

    def radius(self, mode):
        """Unrescaled radial values u."""
        if mode == "unrescaled":
            return self.field
        return np.exp(self.field) * self.theta_ref


def initial_state(grid, u0, config, r_ref):
    if config.mode == "unrescaled":
        values = np.array(u0.u, dtype=float)
    else:
        values = np.log(u0.u / r_ref)
    ev = evaluate(grid, values, config)
    return FlowState(t=0.0, tau=0.0, field=values, theta_ref=r_ref, r_ref=r_ref, ev=ev)


@lru_cache(maxsize=64)
def _spherical(p, n, r0):
    return SphericalFlow(p, n, r0)


def step(state, config, grid, dt_cap=None):
    """One RK4 step; returns the new state with its evaluation cached."""
    ev1 = state.ev if state.ev is not None else evaluate(grid, state.field, config)
    dt = propose_dt(grid, ev1, config)
    if dt < config.dt_min:
        raise RunStop("blow-up", f"step size {dt:.3g} fell below dt_min={config.dt_min:.3g}")
    if dt_cap is not None and dt_cap < dt:
        dt = dt_cap
    y = state.field
    k1 = ev1.rhs
    k2 = evaluate(grid, y + 0.5 * dt * k1, config).rhs
    k3 = evaluate(grid, y + 0.5 * dt * k2, config).rhs
    k4 = evaluate(grid, y + dt * k3, config).rhs
    y_new = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(y_new.sum()):
        raise RunStop("resolution-lost", "non-finite field after step")
    ev = evaluate(grid, y_new, config)
    v_max = float(ev.v.max())
    if v_max > config.v_cap:
        raise RunStop("resolution-lost", f"v_max={v_max:.3g} exceeds v_cap={config.v_cap:.3g}")

    sf = _spherical(config.p, grid.dim, state.r_ref)
    if config.mode == "unrescaled":
        t = state.t + dt
        if config.p > 1 and t >= sf.t_star():
            tau, theta = np.inf, np.inf
        else:
            tau, theta = sf.tau_of_t(t), sf.theta(t)
    else:
        tau = state.tau + dt
        t, theta = sf.t_of_tau(tau), sf.theta_of_tau(tau)
    return FlowState(t=t, tau=tau, field=y_new, theta_ref=theta, r_ref=state.r_ref,
                     step_count=state.step_count + 1, last_dt=dt, ev=ev)


def monitor_row(state, config):
    """One trajectory row (COLUMNS + EXTRA_COLUMNS) for ``state``."""
    ev = state.ev
    theta = state.theta_ref
    finite = np.isfinite(theta)
    if config.mode == "unrescaled":
        u = ev.u
        F = ev.F
        with np.errstate(invalid="ignore"):
            u_tilde = u / theta if finite else np.full_like(u, np.nan)
            k_tilde = ev.kappa * theta if finite else np.full_like(ev.kappa, np.nan)
            F_tilde = F * theta if finite else np.full_like(F, np.nan)
    else:
        u_tilde = ev.u
        u = u_tilde * theta
        k_tilde = ev.kappa
        F_tilde = ev.F
        F = F_tilde / theta
    u_bar = u / ev.v
    return {
        "t": state.t,
        "tau": state.tau,
        "theta": theta,
        "u_min": float(u.min()),
        "u_max": float(u.max()),
        "osc_ubar": float(u_bar.max() - u_bar.min()),
        "F_min": float(F.min()),
        "F_max": float(F.max()),
        "grad_sq_sup": float(ev.grad_sq.max()),
        "u_tilde_dev": float(np.max(np.abs(u_tilde - 1.0))),
        "kappa_tilde_min": float(np.min(k_tilde)),
        "kappa_tilde_max": float(np.max(k_tilde)),
        "v_max": float(ev.v.max()),
        "dt": state.last_dt,
        "F_tilde_min": float(np.min(F_tilde)),
        "F_tilde_max": float(np.max(F_tilde)),
    }


@dataclass(frozen=True, eq=False)
class Snapshot:
    t: float
    tau: float
    theta: float
    u: np.ndarray
    kappa: np.ndarray
    v: np.ndarray

    @property
    def u_bar(self):
        return self.u / self.v


def snapshot(state, config):
    ev = state.ev
    u = state.radius(config.mode)
    kappa = ev.kappa
    if config.mode == "rescaled":
        kappa = kappa / state.theta_ref
    return Snapshot(state.t, state.tau, state.theta_ref, np.array(u), np.array(kappa), np.array(ev.v))


@dataclass(frozen=True)
class Termination:
    reason: str
    detail: str
    t: float
    tau: float
    steps: int

    @property
    def aborted(self):
        return self.reason in ("admissibility-lost", "resolution-lost", "step-limit")


@dataclass(frozen=True)
class BlowUpEstimate:
    t_star: float
    r0: float
    n_samples: int
    low_confidence: bool


@dataclass(eq=False)
class Trajectory:
    grid: object
    config: FlowConfig
    u0: GraphFunction
    r_ref: float
    series: dict
    snapshots: list
    termination: Termination
    final_state: FlowState
    blow_up: BlowUpEstimate = None

    def __len__(self):
        return len(self.series["t"])

    def snapshot_at(self, time, key="t", rtol=1e-12):
        for snap in self.snapshots:
            if abs(getattr(snap, key) - time) <= rtol * max(1.0, abs(time)):
                return snap
        raise KeyError(f"no snapshot at {key}={time}")


def reference_radius(u0):
    return 0.5 * (float(u0.u.min()) + float(u0.u.max()))


def _validate_initial(u0, config):
    grid = u0.grid
    if config.F.n != grid.dim:
        raise ConfigurationError(f"curvature function has n={config.F.n} but grid has dim={grid.dim}")
    v, _, kappa = curvature_kernel(grid, u0.phi, u0.u)
    if float(v.max()) > config.v_cap:
        raise ConfigurationError(
            f"initial graph is not resolvable: v_max={float(v.max()):.3g} exceeds v_cap={config.v_cap}"
        )
    try:
        check_admissible(config.F, kappa)
    except AdmissibilityError as exc:
        raise ConfigurationError(f"initial hypersurface is not admissible: {exc}") from exc


def run(u0, config, checkpoints=(), monitors=None):
    """Integrate from ``u0`` until the end time or a stop condition.

    ``checkpoints`` are times (t in unrescaled mode, tau in rescaled mode)
    that the integrator lands on exactly and snapshots.  ``monitors`` is an
    optional callable receiving each sampled row.
    """
    _validate_initial(u0, config)
    grid = u0.grid
    r_ref = config.reference_radius or reference_radius(u0)
    R_max = config.R_max or 1e3 * r_ref
    rescaled = config.mode == "rescaled"
    end = config.tau_end if rescaled else config.t_end
    stops = sorted(float(c) for c in checkpoints if c > 0 and (end is None or c <= end))
    if end is not None and (not stops or stops[-1] < end):
        stops.append(float(end))

    state = initial_state(grid, u0, config, r_ref)
    rows = [monitor_row(state, config)]
    snaps = [snapshot(state, config)]
    if monitors:
        monitors(rows[-1])

    def clock(s):
        return s.tau if rescaled else s.t

    reason, detail = "completed", ""
    next_stop = 0
    while True:
        if next_stop < len(stops) and clock(state) >= stops[next_stop]:
            next_stop += 1
            continue
        if next_stop >= len(stops) and end is not None:
            break
        if state.step_count >= config.max_steps:
            reason, detail = "step-limit", f"max_steps={config.max_steps} reached"
            break
        cap = stops[next_stop] - clock(state) if next_stop < len(stops) else None
        try:
            new = step(state, config, grid, dt_cap=cap)
        except RunStop as exc:
            reason, detail = exc.reason, exc.detail
            break
        state = new
        landed = cap is not None and state.last_dt == cap
        if landed:
            # remove the roundoff of t + dt so checkpoint lookups are exact
            target = stops[next_stop]
            if rescaled:
                sf = _spherical(config.p, grid.dim, r_ref)
                state = replace(state, tau=target, t=sf.t_of_tau(target), theta_ref=sf.theta_of_tau(target))
            elif config.p < 1 or target < _spherical(config.p, grid.dim, r_ref).t_star():
                sf = _spherical(config.p, grid.dim, r_ref)
                state = replace(state, t=target, tau=sf.tau_of_t(target), theta_ref=sf.theta(target))
        u_max = float(state.radius(config.mode).max())
        hit_cap = u_max >= R_max if not rescaled else float(np.exp(state.field).max()) * r_ref >= R_max
        if landed or hit_cap or state.step_count % config.sample_every == 0:
            rows.append(monitor_row(state, config))
            if monitors:
                monitors(rows[-1])
        if landed:
            snaps.append(snapshot(state, config))
            next_stop += 1
        if hit_cap:
            reason, detail = "blow-up", f"max radius {u_max:.6g} reached R_max={R_max:.6g}"
            break

    if rows[-1]["t"] != state.t or rows[-1]["tau"] != state.tau:
        rows.append(monitor_row(state, config))
    if snaps[-1].t != state.t:
        snaps.append(snapshot(state, config))
    series = {k: np.array([r[k] for r in rows]) for k in COLUMNS + EXTRA_COLUMNS}
    term = Termination(reason, detail, state.t, state.tau, state.step_count)
    log.info("run finished: %s after %d steps (t=%.6g, tau=%.6g) %s",
             reason, state.step_count, state.t, state.tau, detail)
    traj = Trajectory(grid, config, u0, r_ref, series, snaps, term, state)
    if config.p > 1 and config.mode == "unrescaled" and reason == "blow-up":
        traj.blow_up = estimate_blow_up(traj)
    return traj


def estimate_blow_up(traj, min_samples=5):
    """Blow-up time from a linear fit of (max u)^{1-p} against t.

    Only the last decade of growth (max u >= final max u / 10) is used.
    """
    p = traj.config.p
    n = traj.grid.dim
    t = traj.series["t"]
    u_max = traj.series["u_max"]
    sel = u_max >= u_max[-1] / 10.0
    low = int(sel.sum()) < min_samples or u_max[-1] < 10.0 * u_max[0]
    if int(sel.sum()) < 2:
        sel = np.ones_like(sel)
    y = u_max[sel] ** (1.0 - p)
    slope, intercept = np.polyfit(t[sel], y, 1)
    t_star = -intercept / slope
    r0 = ((p - 1.0) * t_star / float(n) ** p) ** (1.0 / (1.0 - p)) if t_star > 0 else np.nan
    return BlowUpEstimate(float(t_star), float(r0), int(sel.sum()), bool(low))


def calibrate_reference_radius(u0, config, tau_probe=4.0, xtol=1e-9):
    """Reference radius r0 whose spherical solution blows up with the flow.

    For p > 1 the rescaled equation has one unstable direction, the overall
    scale, so u~ only converges to 1 when Theta is built on the r0 with
    T*(r0) = T* of the actual flow.  A secant search on log r0 drives the
    area-weighted mean of phi~ at ``tau_probe`` to zero.
    """
    grid = u0.grid
    probe = replace(config, mode="rescaled", tau_end=tau_probe, sample_every=10**9)

    def mean_log(s):
        traj = run(u0, replace(probe, reference_radius=float(np.exp(s))))
        phi = np.log(traj.final_state.radius("rescaled") / traj.final_state.theta_ref)
        return grid.integrate(phi) / grid.area

    s0 = np.log(reference_radius(u0))
    sol = root_scalar(mean_log, x0=s0, x1=s0 - 0.02, method="secant", xtol=xtol, maxiter=20)
    if not sol.converged:
        raise RuntimeError(f"reference radius calibration did not converge: {sol.flag}")
    lo, hi = np.log(u0.u.min()), np.log(u0.u.max())
    if not lo <= sol.root <= hi:
        raise RuntimeError("calibrated reference radius left the barrier interval")
    log.info("calibrated reference radius %.12g after %d probe runs", np.exp(sol.root), sol.function_calls)
    return float(np.exp(sol.root))
