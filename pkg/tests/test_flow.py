from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icflow.curvature import CurvatureFunction
from icflow.errors import ConfigurationError
from icflow.exact import SphericalFlow
from icflow.flow import (
    FlowConfig,
    RunStop,
    calibrate_reference_radius,
    estimate_blow_up,
    evaluate,
    initial_state,
    propose_dt,
    rhs_rescaled,
    rhs_unrescaled,
    run,
    step,
)
from icflow.geometry import GraphFunction, make_initial
from icflow.oracles import ellipse_curvature
from icflow.sphere import build_circle_grid, build_latlong_grid

MEAN1 = CurvatureFunction("mean", 1)
MEAN2 = CurvatureFunction("mean", 2)
GAUSS2 = CurvatureFunction("gauss_root", 2)
# mean curvature restricted to the positive cone, as p > 1 requires
MEAN2_PLUS = CurvatureFunction("mean", 2, cone="gamma_plus")


def test_rhs_unit_sphere_s2():
    g = build_latlong_grid(8, 16)
    rhs = rhs_unrescaled(make_initial(g, "sphere", r=1.0), MEAN2, 0.5)
    assert np.allclose(rhs, 2 ** -0.5, rtol=1e-14)


@pytest.mark.parametrize("r,p", [(0.5, 0.5), (3.0, 2.0), (1.7, 0.25)])
def test_rhs_sphere_reduces_to_ode(r, p):
    g = build_circle_grid(16)
    rhs = rhs_unrescaled(make_initial(g, "sphere", r=r), MEAN1, p)
    assert np.allclose(rhs, r ** p, rtol=1e-13)


def test_rhs_ellipse_at_vertex_matches_oracle_chain():
    g = build_circle_grid(256)
    rhs = rhs_unrescaled(make_initial(g, "ellipse", a=2.0, b=1.0), MEAN1, 0.5)
    # v = 1 at the vertex, kappa from the parametric oracle
    expected = ellipse_curvature(0.0, 2.0, 1.0) ** -0.5
    assert abs(rhs[0] - expected) < 20 * g.spacing[0] ** 4


def test_rhs_rescaled_fixed_point():
    for g, F in ((build_circle_grid(16), MEAN1), (build_latlong_grid(8, 16), GAUSS2)):
        assert np.max(np.abs(rhs_rescaled(g, np.zeros(g.shape), F, 2.0))) < 1e-15


def test_rhs_rescaled_scaled_sphere():
    g = build_latlong_grid(8, 16)
    rhs = rhs_rescaled(g, np.full(g.shape, np.log(2.0)), MEAN2_PLUS, 2.0)
    assert np.allclose(rhs, 0.25, rtol=1e-13)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 2.0, 3.0]), st.floats(0.5, 5.0))
def test_rhs_rescaled_chain_rule(seed, p, big_theta):
    g = build_circle_grid(64)
    rng = np.random.default_rng(seed)
    th = g.nodes[0]
    # small enough that the curve stays convex
    c2, c3 = rng.uniform(-1.0, 1.0, 2)
    phi_t = 0.03 * (c2 * np.cos(2 * th) + c3 * np.sin(3 * th))
    u = np.exp(phi_t) * big_theta
    u_t = rhs_unrescaled(GraphFunction(g, u), MEAN1, p)
    # d(log u - log Theta)/dtau with dtau/dt = Theta^{p-1} and Theta' = n^{-p} Theta^p
    chain = (u_t / u - big_theta ** (p - 1.0)) / big_theta ** (p - 1.0)
    assert np.max(np.abs(rhs_rescaled(g, phi_t, MEAN1, p) - chain)) < 1e-8


def _ev(grid, u, cfg):
    return evaluate(grid, u, cfg)


def test_propose_dt_sphere_formula():
    g = build_circle_grid(256)
    cfg = FlowConfig(p=0.5, F=MEAN1, t_end=1.0)
    dt = propose_dt(g, _ev(g, np.ones(g.shape), cfg), cfg)
    assert dt == pytest.approx(0.2 * g.spacing[0] ** 2 / 0.5, rel=1e-14)
    g2 = build_latlong_grid(16, 32)
    cfg2 = FlowConfig(p=0.5, F=MEAN2, t_end=1.0)
    dt2 = propose_dt(g2, _ev(g2, np.ones(g2.shape), cfg2), cfg2)
    assert dt2 == pytest.approx(0.2 * g2.min_spacing ** 2 / (0.5 * 2 ** -1.5), rel=1e-14)


@pytest.mark.parametrize("p", [0.5, 2.0, 3.0])
def test_propose_dt_homogeneity(p):
    g = build_circle_grid(64)
    cfg = FlowConfig(p=p, F=MEAN1, t_end=1.0)
    u = make_initial(g, "ellipse", a=1.5, b=1.0).u
    ratio = propose_dt(g, _ev(g, 2 * u, cfg), cfg) / propose_dt(g, _ev(g, u, cfg), cfg)
    assert ratio == pytest.approx(2 ** (1 - p), rel=1e-12)


def test_degenerate_gauss_curvature_stops_run():
    g = build_latlong_grid(32, 64)
    cfg = FlowConfig(p=2.0, F=GAUSS2, t_end=1.0)
    # flatter spheroids have smaller polar curvature, so F -> 0 and D_max -> infinity
    dts = []
    for c in (0.8, 0.5, 0.3):
        u0 = make_initial(g, "ellipsoid_of_revolution", a=1.0, c=c)
        dts.append(propose_dt(g, _ev(g, u0.u, cfg), cfg))
    assert dts[0] > dts[1] > dts[2]
    strict = replace(cfg, dt_min=2 * dts[2])
    state = initial_state(g, u0, strict, 1.0)
    with pytest.raises(RunStop) as info:
        step(state, strict, g)
    assert info.value.reason == "blow-up"


@pytest.mark.parametrize("p", [0.5, 2.0])
def test_single_step_local_error_is_fifth_order(p):
    g = build_circle_grid(16)
    sf = SphericalFlow(p, 1, 1.0)
    errs = []
    for dt in (0.04, 0.02):
        cfg = FlowConfig(p=p, F=MEAN1, t_end=1.0, dt_safety=1.0)
        st0 = initial_state(g, make_initial(g, "sphere", r=1.0), cfg, 1.0)
        new = step(st0, cfg, g, dt_cap=dt)
        assert new.last_dt == dt
        errs.append(abs(new.field[0] - sf.theta(dt)))
    assert errs[0] / errs[1] == pytest.approx(32, rel=0.15)


def test_rescaled_fixed_point_step():
    g = build_latlong_grid(8, 16)
    cfg = FlowConfig(p=2.0, F=GAUSS2, mode="rescaled", tau_end=1.0)
    st0 = initial_state(g, make_initial(g, "sphere", r=1.0), cfg, 1.0)
    new = step(st0, cfg, g)
    assert np.max(np.abs(new.field)) < 1e-14
    assert new.t == pytest.approx(SphericalFlow(2.0, 2, 1.0).t_of_tau(new.tau))


@given(st.integers(1, 15), st.integers(0, 2**32 - 1))
@settings(max_examples=15)
def test_step_commutes_with_rotation(shift, seed):
    g = build_circle_grid(32)
    rng = np.random.default_rng(seed)
    th = g.nodes[0]
    c2, c3 = rng.uniform(-1.0, 1.0, 2)
    u = 1.5 * np.exp(0.03 * (c2 * np.cos(2 * th) + c3 * np.sin(3 * th)))
    cfg = FlowConfig(p=0.5, F=MEAN1, t_end=1.0)
    a = step(initial_state(g, GraphFunction(g, g.shift(u, shift)), cfg, 1.5), cfg, g, dt_cap=1e-3)
    b = step(initial_state(g, GraphFunction(g, u), cfg, 1.5), cfg, g, dt_cap=1e-3)
    assert np.max(np.abs(a.field - g.shift(b.field, shift))) < 1e-12


def test_run_sphere_s2_tracks_theta():
    g = build_latlong_grid(8, 16)
    traj = run(make_initial(g, "sphere", r=1.0), FlowConfig(p=0.5, F=MEAN2, t_end=3.0))
    exact = SphericalFlow(0.5, 2, 1.0).theta(3.0)
    assert exact == pytest.approx((1 + 1.5 / np.sqrt(2)) ** 2)
    assert traj.termination.reason == "completed"
    assert traj.final_state.t == 3.0
    assert np.max(np.abs(traj.final_state.field / exact - 1)) < 1e-5


def test_run_rescaled_sphere_stays_at_one():
    g = build_circle_grid(32)
    traj = run(make_initial(g, "sphere", r=1.3), FlowConfig(p=2.0, F=MEAN1, mode="rescaled", tau_end=3.0))
    assert np.max(traj.series["u_tilde_dev"]) < 1e-5


def test_run_blow_up_stops_near_099():
    g = build_circle_grid(32)
    traj = run(make_initial(g, "sphere", r=1.0), FlowConfig(p=2.0, F=MEAN1, R_max=100.0))
    assert traj.termination.reason == "blow-up"
    assert traj.series["u_max"][-1] >= 100
    assert traj.final_state.t == pytest.approx(0.99, abs=1e-3)
    assert traj.blow_up.t_star == pytest.approx(1.0, rel=1e-2)
    assert not traj.blow_up.low_confidence


@pytest.mark.parametrize("p,expected", [(2.0, 4.0), (3.0, 4.0)])
def test_blow_up_estimate_on_s2(p, expected):
    g = build_latlong_grid(8, 16)
    traj = run(make_initial(g, "sphere", r=1.0), FlowConfig(p=p, F=MEAN2_PLUS, R_max=30.0))
    assert traj.blow_up.t_star == pytest.approx(expected, rel=1e-2)


def test_blow_up_of_convex_ellipse_is_bracketed():
    g = build_circle_grid(64)
    traj = run(make_initial(g, "ellipse", a=2.0, b=1.0), FlowConfig(p=2.0, F=MEAN1, R_max=200.0))
    # barrier spheres of radius 2 and 1 blow up at 0.5 and 1
    assert 0.5 < traj.blow_up.t_star < 1.0


def test_blow_up_estimate_flags_short_series():
    g = build_circle_grid(16)
    traj = run(make_initial(g, "sphere", r=1.0), FlowConfig(p=2.0, F=MEAN1, R_max=1.5, sample_every=10**6))
    assert estimate_blow_up(traj).low_confidence


def test_comparison_of_spherical_runs():
    g = build_circle_grid(16)
    cfg = FlowConfig(p=0.5, F=MEAN1, t_end=2.0, sample_every=1)
    grid_t = [0.25 * k for k in range(1, 9)]
    a = run(make_initial(g, "sphere", r=1.0), cfg, checkpoints=grid_t)
    b = run(make_initial(g, "sphere", r=1.05), cfg, checkpoints=grid_t)
    gaps = [b.snapshot_at(t).u.min() - a.snapshot_at(t).u.max() for t in grid_t]
    assert min(gaps) > 0


def test_run_equivariance_under_rotation():
    g = build_circle_grid(64)
    u0 = make_initial(g, "ellipse", a=1.5, b=1.0)
    cfg = FlowConfig(p=0.5, F=MEAN1, t_end=0.5)
    a = run(GraphFunction(g, g.shift(u0.u, 5)), cfg).final_state.field
    b = g.shift(run(u0, cfg).final_state.field, 5)
    assert np.max(np.abs(a - b)) < 1e-10


def test_p_below_one_reaches_end_time():
    g = build_circle_grid(64)
    u0 = make_initial(g, "perturbed_sphere", r=1.0, eps=0.1, mode=3)
    traj = run(u0, FlowConfig(p=0.5, F=MEAN1, t_end=5.0))
    assert traj.termination.reason == "completed" and traj.final_state.t == 5.0


def test_checkpoints_are_hit_exactly():
    g = build_circle_grid(32)
    traj = run(make_initial(g, "ellipse", a=1.5, b=1.0), FlowConfig(p=0.5, F=MEAN1, t_end=1.0),
               checkpoints=[0.1, 0.3, 0.7])
    assert [s.t for s in traj.snapshots] == [0.0, 0.1, 0.3, 0.7, 1.0]
    assert traj.snapshot_at(0.3).t == 0.3


def test_series_columns_have_equal_length():
    g = build_circle_grid(32)
    traj = run(make_initial(g, "ellipse", a=1.5, b=1.0), FlowConfig(p=0.5, F=MEAN1, t_end=0.2))
    assert len({len(v) for v in traj.series.values()}) == 1


def test_configuration_errors():
    with pytest.raises(ConfigurationError, match="p must differ from 1"):
        FlowConfig(p=1.0, F=MEAN1, t_end=1.0)
    with pytest.raises(ConfigurationError, match="p>1 requires gamma_plus"):
        FlowConfig(p=2.0, F=MEAN2, t_end=1.0)
    with pytest.raises(ConfigurationError):
        FlowConfig(p=0.5, F=MEAN1)
    with pytest.raises(ConfigurationError):
        FlowConfig(p=0.5, F=MEAN1, mode="rescaled")
    with pytest.raises(ConfigurationError):
        FlowConfig(p=0.5, F=MEAN1, t_end=1.0, dt_safety=1.5)


def test_inadmissible_initial_data_rejected():
    g = build_circle_grid(64)
    star = make_initial(g, "perturbed_sphere", r=1.0, eps=0.3, mode=5)
    with pytest.raises(ConfigurationError, match="not admissible"):
        run(star, FlowConfig(p=2.0, F=MEAN1, R_max=10.0))


def test_dimension_mismatch_rejected():
    g = build_circle_grid(16)
    with pytest.raises(ConfigurationError):
        run(make_initial(g, "sphere", r=1.0), FlowConfig(p=0.5, F=MEAN2, t_end=1.0))


def test_unresolvable_initial_data_rejected():
    g = build_circle_grid(64)
    u0 = make_initial(g, "ellipse", a=2.0, b=1.0)
    with pytest.raises(ConfigurationError, match="v_max"):
        run(u0, FlowConfig(p=0.5, F=MEAN1, t_end=1.0, v_cap=1.01))


def test_calibration_keeps_sphere_radius():
    g = build_circle_grid(16)
    cfg = FlowConfig(p=2.0, F=MEAN1, mode="rescaled", tau_end=1.0)
    r = calibrate_reference_radius(make_initial(g, "sphere", r=1.3), cfg, tau_probe=1.0)
    assert r == pytest.approx(1.3, rel=1e-9)


def test_calibration_improves_contracting_convergence():
    g = build_circle_grid(32)
    u0 = make_initial(g, "ellipse", a=1.3, b=1.0)
    cfg = FlowConfig(p=2.0, F=MEAN1, mode="rescaled", tau_end=6.0, sample_every=100)
    plain = run(u0, cfg).series["u_tilde_dev"][-1]
    r = calibrate_reference_radius(u0, cfg, tau_probe=3.0)
    tuned = run(u0, replace(cfg, reference_radius=r)).series["u_tilde_dev"][-1]
    assert tuned < 0.01 < plain
