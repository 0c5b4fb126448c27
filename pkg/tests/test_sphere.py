import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icflow.errors import ConfigurationError
from icflow.sphere import (
    build_circle_grid,
    build_latlong_grid,
    grad_sigma,
    hessian_sigma,
    laplacian_sigma,
    osc,
    raise_index,
    sup_norm,
)


def test_circle_grid_eight_nodes():
    g = build_circle_grid(8)
    assert g.size == 8
    assert g.spacing[0] == pytest.approx(np.pi / 4)
    assert g.weights.sum() == pytest.approx(2 * np.pi, rel=1e-12)
    assert g.stencil_order == 4


@pytest.mark.parametrize("n", [7, 6, 0, 9])
def test_circle_grid_rejects_bad_counts(n):
    with pytest.raises(ConfigurationError):
        build_circle_grid(n)


def test_circle_grid_spacing_256():
    assert build_circle_grid(256).spacing[0] == 2 * np.pi / 256


def test_latlong_grid_basic():
    g = build_latlong_grid(8, 16)
    assert g.size == 128
    assert g.nodes[0].min() == pytest.approx(np.pi / 16)
    assert g.stencil_order == 2
    # no node on a pole
    assert np.all(g.sin_theta > 0)


@pytest.mark.parametrize("nt,nl", [(8, 15), (7, 16), (8, 14)])
def test_latlong_grid_rejects_bad_sizes(nt, nl):
    with pytest.raises(ConfigurationError):
        build_latlong_grid(nt, nl)


@pytest.mark.parametrize("nt,nl", [(8, 16), (13, 30), (32, 64)])
def test_latlong_weights_sum_to_area(nt, nl):
    g = build_latlong_grid(nt, nl)
    assert g.weights.min() > 0
    assert g.weights.sum() == pytest.approx(4 * np.pi, rel=1e-12)


grids = st.one_of(
    st.integers(4, 64).map(lambda k: build_circle_grid(2 * k)),
    st.tuples(st.integers(8, 24), st.integers(8, 24)).map(lambda t: build_latlong_grid(t[0], 2 * t[1])),
)


@given(grids, st.floats(-1e3, 1e3, allow_nan=False))
def test_operators_annihilate_constants(g, c):
    f = np.full(g.shape, c)
    assert np.max(np.abs(grad_sigma(g, f))) <= 1e-12 * max(1.0, abs(c))
    assert np.max(np.abs(hessian_sigma(g, f))) <= 1e-12 * max(1.0, abs(c)) * 1e3


@given(grids, st.integers(0, 2**32 - 1))
def test_hessian_is_symmetric(g, seed):
    f = np.random.default_rng(seed).standard_normal(g.shape)
    h = hessian_sigma(g, f)
    assert np.max(np.abs(h - np.swapaxes(h, -1, -2))) <= 1e-12


def test_circle_gradient_of_sine():
    g = build_circle_grid(64)
    d = grad_sigma(g, np.sin(g.nodes[0]))[..., 0]
    assert abs(d[0] - 1.0) < 10 * g.spacing[0] ** 4


def test_circle_hessian_of_cosine():
    g = build_circle_grid(64)
    th = g.nodes[0]
    h = hessian_sigma(g, np.cos(th))[..., 0, 0]
    assert np.max(np.abs(h + np.cos(th))) < 10 * g.spacing[0] ** 4


def test_sphere_gradient_of_cos_colatitude():
    g = build_latlong_grid(32, 64)
    th = g.nodes[0]
    d = grad_sigma(g, np.cos(th))
    assert np.max(np.abs(d[..., 0] + np.sin(th))) < g.spacing[0] ** 2
    assert np.max(np.abs(d[..., 1])) < 1e-12


def _y_lm(g, l):
    th, lam = g.nodes
    x, y, z = np.sin(th) * np.cos(lam), np.sin(th) * np.sin(lam), np.cos(th)
    return {1: x + 2 * z, 2: x * y + 0.5 * (3 * z * z - 1), 3: z * (5 * z * z - 3) + x * (5 * z * z - 1)}[l]


@pytest.mark.parametrize("l", [1, 2, 3])
def test_laplacian_of_spherical_harmonics(l):
    g = build_latlong_grid(64, 128)
    f = _y_lm(g, l)
    lap = laplacian_sigma(g, f)
    err = np.max(np.abs(lap + l * (l + 1) * f))
    assert err < 0.05 * l * (l + 1)


def _circle_errors(N):
    g = build_circle_grid(N)
    th = g.nodes[0]
    f = np.exp(np.sin(th))
    df = np.cos(th) * f
    d2f = (np.cos(th) ** 2 - np.sin(th)) * f
    return (np.max(np.abs(grad_sigma(g, f)[..., 0] - df)),
            np.max(np.abs(hessian_sigma(g, f)[..., 0, 0] - d2f)))


def _sphere_errors(nt):
    g = build_latlong_grid(nt, 2 * nt)
    th, lam = g.nodes
    f = np.sin(th) ** 2 * np.cos(2 * lam) + np.cos(th)
    f_t = 2 * np.sin(th) * np.cos(th) * np.cos(2 * lam) - np.sin(th)
    f_l = -2 * np.sin(th) ** 2 * np.sin(2 * lam)
    grad = grad_sigma(g, f)
    lap = laplacian_sigma(g, f)
    # the two pieces are spherical harmonics of degree 2 and 1
    exact_lap = -6 * np.sin(th) ** 2 * np.cos(2 * lam) - 2 * np.cos(th)
    return (max(np.max(np.abs(grad[..., 0] - f_t)), np.max(np.abs(grad[..., 1] - f_l))),
            np.max(np.abs(lap - exact_lap)))


def _within_order(errors, order):
    target = 2.0 ** order
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    return all(0.75 * target <= r <= 1.25 * target for r in ratios), ratios


def test_circle_stencils_are_fourth_order():
    errs = [_circle_errors(N) for N in (32, 64, 128)]
    for k in range(2):
        ok, ratios = _within_order([e[k] for e in errs], 4)
        assert ok, ratios


def test_sphere_stencils_are_second_order():
    errs = [_sphere_errors(n) for n in (16, 32, 64)]
    for k in range(2):
        ok, ratios = _within_order([e[k] for e in errs], 2)
        assert ok, ratios


def test_raise_index_divides_by_metric():
    g = build_latlong_grid(8, 16)
    cov = np.ones(g.shape + (2,))
    up = raise_index(g, cov)
    assert np.allclose(up[..., 0], 1.0)
    assert np.allclose(up[..., 1], 1.0 / g.sin_theta ** 2)


def test_sup_norm_and_osc():
    assert osc(np.full(5, 3.0)) == 0.0
    assert osc(np.array([1.0, 3.0, 1.0])) == 2.0
    g = build_circle_grid(256)
    assert abs(sup_norm(np.sin(g.nodes[0])) - 1.0) < g.spacing[0] ** 2


@given(st.integers(4, 40), st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_gradient_commutes_with_rotation(k, shift, seed):
    g = build_circle_grid(2 * k)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    a = grad_sigma(g, g.shift(f, shift))
    b = g.shift(grad_sigma(g, f)[..., 0], shift)
    assert np.max(np.abs(a[..., 0] - b)) < 1e-12 * (1 + np.abs(b).max())
