"""Finite-difference discretizations of the unit circle and the unit 2-sphere.

Fields live on the node arrays directly: shape ``(N,)`` on S^1 and
``(n_theta, n_lambda)`` on S^2 (colatitude rows, longitude columns).
Covector fields carry a trailing axis of length ``dim`` and 2-tensors two
trailing axes, ordered (theta,) resp. (theta, lambda).

The S^2 grid is offset in colatitude so no node sits on a pole.  Stencils
that reach across a pole read the node on the same colatitude ring at
longitude lambda + pi, which is the smooth continuation of a scalar field
through the pole.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True, eq=False)
class DomainGrid:
    dim: int
    nodes: tuple
    weights: np.ndarray
    spacing: tuple
    stencil_order: int
    # sin(colatitude) broadcast to the field shape; all ones on S^1
    sin_theta: np.ndarray = field(repr=False)
    cos_theta: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.weights.shape

    @property
    def size(self):
        return self.weights.size

    @cached_property
    def sin_theta_1d(self):
        return np.ascontiguousarray(self.sin_theta[:, 0])

    @cached_property
    def cos_theta_1d(self):
        return np.ascontiguousarray(self.cos_theta[:, 0])

    @property
    def min_spacing(self):
        """Smallest geodesic node distance; sets the explicit step limit."""
        if self.dim == 1:
            return self.spacing[0]
        h_theta, h_lambda = self.spacing
        return min(h_theta, float(self.sin_theta.min()) * h_lambda)

    @property
    def area(self):
        return 2.0 * np.pi if self.dim == 1 else 4.0 * np.pi

    def describe(self):
        if self.dim == 1:
            return {"dim": 1, "N": self.shape[0]}
        return {"dim": 2, "n_theta": self.shape[0], "n_lambda": self.shape[1]}

    def integrate(self, f):
        return float(np.sum(self.weights * f))

    def shift(self, f, k=1):
        """Rotate a field by ``k`` nodes in the periodic direction."""
        return np.roll(f, k, axis=-1)

    def partials(self, f):
        """Coordinate partial derivatives of a scalar field.

        Returns ``(f_t,)`` and ``(f_tt,)`` on S^1, and
        ``(f_t, f_l)``, ``(f_tt, f_tl, f_ll)`` on S^2.
        """
        if self.dim == 1:
            return _partials_circle(f, self.spacing[0])
        return _partials_latlong(f, *self.spacing)


def build_circle_grid(N):
    """Uniform periodic grid on S^1 with fourth-order stencils."""
    if not isinstance(N, (int, np.integer)) or N < 8 or N % 2:
        raise ConfigurationError(f"circle grid needs an even node count >= 8, got N={N!r}")
    h = 2.0 * np.pi / N
    theta = h * np.arange(N)
    ones = np.ones(N)
    return DomainGrid(
        dim=1,
        nodes=(theta,),
        weights=np.full(N, h),
        spacing=(h,),
        stencil_order=4,
        sin_theta=ones,
        cos_theta=ones,
    )


def build_latlong_grid(n_theta, n_lambda):
    """Pole-free colatitude/longitude grid on S^2 with second-order stencils."""
    if not isinstance(n_theta, (int, np.integer)) or n_theta < 8:
        raise ConfigurationError(f"n_theta must be an integer >= 8, got {n_theta!r}")
    if not isinstance(n_lambda, (int, np.integer)) or n_lambda < 16 or n_lambda % 2:
        raise ConfigurationError(
            f"n_lambda must be an even integer >= 16 (pole pairing), got {n_lambda!r}"
        )
    h_t = np.pi / n_theta
    h_l = 2.0 * np.pi / n_lambda
    theta_1d = (np.arange(n_theta) + 0.5) * h_t
    lam_1d = h_l * np.arange(n_lambda)
    theta, lam = np.meshgrid(theta_1d, lam_1d, indexing="ij")
    sin_t = np.sin(theta)
    # exact cell areas: integral of sin over [theta - h/2, theta + h/2]
    weights = 2.0 * np.sin(0.5 * h_t) * sin_t * h_l
    return DomainGrid(
        dim=2,
        nodes=(theta, lam),
        weights=weights,
        spacing=(h_t, h_l),
        stencil_order=2,
        sin_theta=sin_t,
        cos_theta=np.cos(theta),
    )


def _partials_circle(f, h):
    n = f.shape[-1]
    p = np.concatenate((f[-2:], f, f[:2]))
    fm2, fm1, fp1, fp2 = p[0:n], p[1:n + 1], p[3:n + 3], p[4:n + 4]
    f_t = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h)
    f_tt = (16.0 * (fp1 + fm1) - (fp2 + fm2) - 30.0 * f) / (12.0 * h * h)
    return (f_t,), (f_tt,)


def _pad_poles(f):
    half = f.shape[1] // 2
    north = np.roll(f[:1], half, axis=1)
    south = np.roll(f[-1:], half, axis=1)
    return np.concatenate((north, f, south), axis=0)


def _dlam(p, h):
    return (np.roll(p, -1, axis=1) - np.roll(p, 1, axis=1)) / (2.0 * h)


def _partials_latlong(f, h_t, h_l):
    p = _pad_poles(f)
    up, dn = p[2:], p[:-2]
    f_t = (up - dn) / (2.0 * h_t)
    f_tt = (up - 2.0 * f + dn) / (h_t * h_t)
    p_l = _dlam(p, h_l)
    f_l = p_l[1:-1]
    f_ll = (np.roll(f, -1, axis=1) - 2.0 * f + np.roll(f, 1, axis=1)) / (h_l * h_l)
    f_tl = (p_l[2:] - p_l[:-2]) / (2.0 * h_t)
    return (f_t, f_l), (f_tt, f_tl, f_ll)


def grad_sigma(grid, f):
    """Covariant gradient components f_i with respect to the round metric."""
    first, _ = grid.partials(np.asarray(f, dtype=float))
    return np.stack(first, axis=-1)


def raise_index(grid, covec):
    """f^i = sigma^{ik} f_k."""
    out = np.array(covec, dtype=float, copy=True)
    if grid.dim == 2:
        out[..., 1] /= grid.sin_theta ** 2
    return out


def hessian_sigma(grid, f):
    """Covariant Hessian f_{;ij} of a scalar field, Christoffel terms included.

    On S^2 (colatitude t, longitude l) the non-zero Christoffel symbols are
    Gamma^t_{ll} = -sin t cos t and Gamma^l_{tl} = cot t.
    """
    first, second = grid.partials(np.asarray(f, dtype=float))
    if grid.dim == 1:
        return second[0][..., None, None]
    (f_t, f_l), (f_tt, f_tl, f_ll) = first, second
    s, c = grid.sin_theta, grid.cos_theta
    h_tl = f_tl - (c / s) * f_l
    h_ll = f_ll + s * c * f_t
    return np.stack(
        (np.stack((f_tt, h_tl), axis=-1), np.stack((h_tl, h_ll), axis=-1)),
        axis=-2,
    )


def laplacian_sigma(grid, f):
    hess = hessian_sigma(grid, f)
    if grid.dim == 1:
        return hess[..., 0, 0]
    return hess[..., 0, 0] + hess[..., 1, 1] / grid.sin_theta ** 2


def sup_norm(f):
    return float(np.max(np.abs(f)))


def osc(f):
    return float(np.max(f) - np.min(f))
