"""Extrinsic geometry of a star-shaped radial graph over S^n in R^{n+1}.

With phi = log u and derivatives taken with respect to the round metric,

    v^2      = 1 + |D phi|^2
    h^i_j    = (v u)^{-1} { -(sigma^{ik} - v^{-2} phi^i phi^k) phi_{;jk} + delta^i_j }

and the principal curvatures are u^{-1} times the eigenvalues of the
symmetric pencil

    h~_ij = v^{-1} (-phi_{;ij} + phi_i phi_j + sigma_ij),   g~_ij = phi_i phi_j + sigma_ij.

The normal points outward, so a round sphere of radius r has kappa_i = 1/r.
The pencil is reduced to an ordinary symmetric eigenproblem in an
orthonormal frame of sigma, using g~^{-1/2} = I - a a^T / (v (1 + v)).
"""
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from . import _kernels
from .errors import DomainError, NumericalError
from .sphere import grad_sigma, hessian_sigma, raise_index

DEFAULT_V_CAP = 50.0


@dataclass(frozen=True, eq=False)
class GraphFunction:
    grid: object
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != self.grid.shape:
            raise DomainError(f"field shape {u.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(u)):
            raise DomainError("radial function has non-finite values")
        if np.any(u <= 0.0):
            idx = np.unravel_index(int(np.argmin(u)), u.shape)
            raise DomainError(f"radial function must be positive; u={u[idx]:.6g} at node {idx}")
        object.__setattr__(self, "u", u)

    @property
    def phi(self):
        return np.log(self.u)

    def scaled(self, factor):
        return GraphFunction(self.grid, self.u * factor)


@dataclass(frozen=True, eq=False)
class ShapeData:
    v: np.ndarray
    phi_grad: np.ndarray
    phi_hess: np.ndarray
    shape_op: np.ndarray
    kappa: np.ndarray
    u_bar: np.ndarray
    chi: np.ndarray

    @property
    def grad_norm_sq(self):
        return self.v ** 2 - 1.0


def curvature_kernel(grid, phi, u):
    """Tilt factor, |D phi|^2 and sorted principal curvatures.

    This is the hot path of the time integrator; it touches only what the
    flow speed needs.  ``u`` must equal ``exp(phi)``.
    """
    phi = np.ascontiguousarray(phi, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    if grid.dim == 1:
        return _kernels.circle_kernel(phi, u, grid.spacing[0])
    return _kernels.latlong_kernel(phi, u, *grid.spacing, grid.sin_theta_1d, grid.cos_theta_1d)


def curvature_kernel_numpy(grid, phi, u):
    """Vectorized reference implementation of ``curvature_kernel``."""
    first, second = grid.partials(phi)
    if grid.dim == 1:
        (p_t,), (p_tt,) = first, second
        grad_sq = p_t * p_t
        v2 = 1.0 + grad_sq
        v = np.sqrt(v2)
        kappa = ((v2 - p_tt) / (v2 * v * u))[..., None]
        return v, grad_sq, kappa

    (p_t, p_l), (p_tt, p_tl, p_ll) = first, second
    s, c = grid.sin_theta, grid.cos_theta
    # orthonormal-frame gradient and covariant Hessian
    a1 = p_t
    a2 = p_l / s
    h11 = p_tt
    h12 = (p_tl - (c / s) * p_l) / s
    h22 = (p_ll + s * c * p_t) / (s * s)
    grad_sq = a1 * a1 + a2 * a2
    v = np.sqrt(1.0 + grad_sq)
    b11 = (1.0 - h11 + a1 * a1) / v
    b12 = (a1 * a2 - h12) / v
    b22 = (1.0 - h22 + a2 * a2) / v
    w = 1.0 / (v * (1.0 + v))
    s11 = 1.0 - w * a1 * a1
    s12 = -w * a1 * a2
    s22 = 1.0 - w * a2 * a2
    m11 = b11 * s11 + b12 * s12
    m12 = b11 * s12 + b12 * s22
    m21 = b12 * s11 + b22 * s12
    m22 = b12 * s12 + b22 * s22
    c11 = s11 * m11 + s12 * m21
    c12 = s11 * m12 + s12 * m22
    c22 = s12 * m12 + s22 * m22
    mid = 0.5 * (c11 + c22)
    rad = np.hypot(0.5 * (c11 - c22), c12)
    kappa = np.stack(((mid - rad) / u, (mid + rad) / u), axis=-1)
    return v, grad_sq, kappa


def compute_shape(graph):
    """Full per-node geometry of ``graph`` (a GraphFunction)."""
    grid, u = graph.grid, graph.u
    phi = np.log(u)
    v, grad_sq, kappa = curvature_kernel(grid, phi, u)
    if not np.all(np.isfinite(kappa)):
        bad = np.argwhere(~np.all(np.isfinite(kappa), axis=-1))[0]
        raise NumericalError(f"non-finite principal curvatures at node {tuple(bad)}", node=tuple(bad))

    dphi = grad_sigma(grid, phi)
    hess = hessian_sigma(grid, phi)
    up = raise_index(grid, dphi)
    n = grid.dim
    sigma_inv = np.zeros(grid.shape + (n, n))
    sigma_inv[..., 0, 0] = 1.0
    if n == 2:
        sigma_inv[..., 1, 1] = 1.0 / grid.sin_theta ** 2
    proj = sigma_inv - up[..., :, None] * up[..., None, :] / (v * v)[..., None, None]
    shape_op = (np.eye(n) - proj @ hess) / (v * u)[..., None, None]
    return ShapeData(
        v=v,
        phi_grad=dphi,
        phi_hess=hess,
        shape_op=shape_op,
        kappa=kappa,
        u_bar=u / v,
        chi=v / u,
    )


def grad_norm_sq(graph):
    """|Du|^2 = sigma^{ij} phi_i phi_j per node, and its supremum."""
    _, grad_sq, _ = curvature_kernel(graph.grid, graph.phi, graph.u)
    return grad_sq, float(grad_sq.max())


def make_initial(grid, kind, **params):
    """Radial graph of one of the built-in initial shapes.

    kinds: ``sphere(r)``, ``ellipse(a, b)`` (S^1 only),
    ``ellipsoid_of_revolution(a, c)`` (S^2 only; equatorial a, polar c),
    ``perturbed_sphere(r, eps, mode)``.
    """
    theta = grid.nodes[0]
    try:
        if kind == "sphere":
            r = _positive(params, "r")
            u = np.full(grid.shape, r)
        elif kind == "ellipse":
            if grid.dim != 1:
                raise DomainError("ellipse is defined on S^1 grids only")
            a, b = _positive(params, "a"), _positive(params, "b")
            u = a * b / np.sqrt(b * b * np.cos(theta) ** 2 + a * a * np.sin(theta) ** 2)
        elif kind == "ellipsoid_of_revolution":
            if grid.dim != 2:
                raise DomainError("ellipsoid_of_revolution is defined on S^2 grids only")
            a, c = _positive(params, "a"), _positive(params, "c")
            u = a * c / np.sqrt(c * c * np.sin(theta) ** 2 + a * a * np.cos(theta) ** 2)
        elif kind == "perturbed_sphere":
            r = _positive(params, "r")
            eps = float(params["eps"])
            mode = int(params["mode"])
            if mode < 0:
                raise DomainError("perturbation mode must be >= 0")
            if grid.dim == 1:
                shape = np.cos(mode * theta)
            else:
                shape = legendre.Legendre.basis(mode)(np.cos(theta))
            u = r * (1.0 + eps * shape)
        else:
            raise DomainError(f"unknown initial shape {kind!r}")
    except KeyError as exc:
        raise DomainError(f"initial shape {kind!r} is missing parameter {exc.args[0]!r}") from None
    return GraphFunction(grid, u)


def _positive(params, key):
    val = float(params[key])
    if not val > 0:
        raise DomainError(f"shape parameter {key} must be positive, got {val}")
    return val
