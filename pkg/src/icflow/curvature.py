"""Admissible curvature functions F and their defining cones.

Every function is symmetric, homogeneous of degree one, monotone and
concave on its cone, and normalized so that F(1, ..., 1) = n.  Arrays of
principal curvatures carry the n curvatures on the last axis; all methods
broadcast over the leading (node) axes.
"""
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import AdmissibilityError, ConfigurationError

KINDS = ("mean", "gauss_root", "sigma_k_root", "power_mean")


def elementary_symmetric(kappa, k):
    """sigma_0 .. sigma_k of the last axis, stacked on a new leading axis."""
    kappa = np.asarray(kappa, dtype=float)
    e = [np.ones(kappa.shape[:-1])] + [np.zeros(kappa.shape[:-1]) for _ in range(k)]
    for i in range(kappa.shape[-1]):
        x = kappa[..., i]
        for j in range(k, 0, -1):
            e[j] = e[j] + x * e[j - 1]
    return np.stack(e)


def _lastsum(x):
    # summing a short trailing axis term by term beats np.sum(axis=-1) by ~10x
    out = x[..., 0].copy()
    for i in range(1, x.shape[-1]):
        out += x[..., i]
    return out


def _lastprod(x):
    out = x[..., 0].copy()
    for i in range(1, x.shape[-1]):
        out *= x[..., i]
    return out


def _lastmax(x):
    out = x[..., 0].copy()
    for i in range(1, x.shape[-1]):
        np.maximum(out, x[..., i], out=out)
    return out


def _cone_order(cone, n):
    if cone == "gamma_plus":
        return n
    if cone == "mean_cone":
        return 1
    if cone.startswith("gamma_"):
        try:
            k = int(cone[len("gamma_"):])
        except ValueError:
            raise ConfigurationError(f"unknown cone {cone!r}") from None
        if not 1 <= k <= n:
            raise ConfigurationError(f"cone {cone!r} needs 1 <= k <= n={n}")
        return k
    raise ConfigurationError(f"unknown cone {cone!r}")


def _canonical_cone(order, n):
    if order == n:
        return "gamma_plus"
    if order == 1:
        return "mean_cone"
    return f"gamma_{order}"


@dataclass(frozen=True)
class CurvatureFunction:
    """A curvature function F together with its cone.

    ``cone`` defaults to the natural defining cone of ``kind``; a smaller
    Garding cone may be requested.  Cone names are canonicalized, so on S^1
    every cone is ``gamma_plus``.
    """

    kind: str
    n: int
    k: int = None
    q: float = None
    cone: str = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown curvature function {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigurationError(f"n must be a positive integer, got {self.n!r}")
        if self.kind == "sigma_k_root":
            if self.k is None or not 1 <= self.k <= self.n:
                raise ConfigurationError(f"sigma_k_root needs 1 <= k <= n={self.n}, got k={self.k!r}")
        if self.kind == "power_mean":
            if self.q is None or self.q > 1 or self.q == 0:
                raise ConfigurationError(f"power_mean needs q <= 1 and q != 0, got q={self.q!r}")
        natural = self.natural_order
        order = natural if self.cone is None else _cone_order(self.cone, self.n)
        if order < natural:
            raise ConfigurationError(
                f"cone {self.cone!r} is larger than the defining cone of {self.kind}"
            )
        object.__setattr__(self, "cone", _canonical_cone(order, self.n))

    @property
    def natural_order(self):
        if self.kind == "mean":
            return 1
        if self.kind == "sigma_k_root":
            return self.k
        if self.kind == "power_mean" and self.q == 1:
            return 1
        return self.n

    @property
    def cone_order(self):
        return _cone_order(self.cone, self.n)

    def describe(self):
        d = {"F": self.kind, "cone": self.cone}
        if self.k is not None:
            d["k"] = self.k
        if self.q is not None:
            d["q"] = self.q
        return d

    def admissible(self, kappa):
        """Boolean mask (over leading axes) of points inside the open cone."""
        kappa = np.asarray(kappa, dtype=float)
        if self.cone == "gamma_plus":
            return np.all(kappa > 0.0, axis=-1)
        if self.cone == "mean_cone":
            return np.sum(kappa, axis=-1) > 0.0
        e = elementary_symmetric(kappa, self.cone_order)
        return np.all(e[1:] > 0.0, axis=0)

    def all_admissible(self, kappa):
        """True when every node lies in the open cone (fast path)."""
        if self.cone == "gamma_plus":
            return bool(kappa.min() > 0.0)
        if self.cone == "mean_cone":
            return bool(_lastsum(kappa).min() > 0.0)
        return bool(np.all(self.admissible(kappa)))

    def value(self, kappa):
        """F(kappa) without admissibility checking."""
        kappa = np.asarray(kappa, dtype=float)
        n = self.n
        if self.kind == "mean" or (self.kind == "power_mean" and self.q == 1):
            return _lastsum(kappa)
        if self.kind == "gauss_root":
            return n * _lastprod(np.maximum(kappa, 0.0)) ** (1.0 / n)
        if self.kind == "sigma_k_root":
            sk = elementary_symmetric(kappa, self.k)[self.k]
            return n * (np.maximum(sk, 0.0) / comb(n, self.k)) ** (1.0 / self.k)
        q = self.q
        return n * (_lastsum(kappa ** q) / n) ** (1.0 / q)

    def grad(self, kappa):
        """Partial derivatives dF/dkappa_i, same shape as ``kappa``."""
        kappa = np.asarray(kappa, dtype=float)
        n = self.n
        if self.kind == "mean" or (self.kind == "power_mean" and self.q == 1):
            return np.ones_like(kappa)
        if self.kind == "gauss_root":
            return self.value(kappa)[..., None] / (n * kappa)
        if self.kind == "sigma_k_root":
            k = self.k
            c = comb(n, k)
            sk = elementary_symmetric(kappa, k)[k]
            out = np.empty_like(kappa)
            for i in range(n):
                rest = np.delete(kappa, i, axis=-1)
                out[..., i] = elementary_symmetric(rest, k - 1)[k - 1]
            scale = (n / k) * (sk / c) ** (1.0 / k - 1.0) / c
            return scale[..., None] * out
        q = self.q
        mean_q = (_lastsum(kappa ** q) / n) ** (1.0 / q)
        return mean_q[..., None] ** (1.0 - q) * kappa ** (q - 1.0)


def _first_bad(func, kappa):
    mask = func.admissible(kappa)
    if np.all(mask):
        return None
    flat = np.flatnonzero(~np.asarray(mask).ravel())
    if np.ndim(mask) == 0:
        return 0
    return int(flat[0])


def check_admissible(func, kappa):
    """Raise AdmissibilityError naming the first node outside the cone."""
    kappa = np.asarray(kappa, dtype=float)
    bad = _first_bad(func, kappa)
    if bad is None:
        return
    values = kappa.reshape(-1, kappa.shape[-1])[bad]
    node = tuple(int(i) for i in np.unravel_index(bad, kappa.shape[:-1])) if kappa.ndim > 1 else None
    raise AdmissibilityError(
        f"curvatures {values.tolist()} at node {node} are outside cone {func.cone} of {func.kind}",
        node=node,
        kappa=values,
    )


def eval_F(func, kappa):
    check_admissible(func, kappa)
    return func.value(kappa)


def grad_F(func, kappa):
    check_admissible(func, kappa)
    return func.grad(kappa)


def admissible(func, kappa):
    return func.admissible(kappa)
