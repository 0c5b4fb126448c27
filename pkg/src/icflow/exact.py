"""Spherical solutions of the inverse curvature flow and related oracles.

A sphere of radius r has F = n/r, so the flow reduces to
dr/dt = n^{-p} r^p with solution

    Theta(t, r0) = ((1 - p) n^{-p} t + r0^{1-p})^{1/(1-p)},

which exists for all time when p < 1 and blows up at
T* = n^p r0^{1-p} / (p - 1) when p > 1.  The rescaling time
tau with dtau/dt = Theta^{p-1}, tau(0) = 0, has the closed form

    tau(t) = n^p / (1 - p) * log(1 + (1 - p) n^{-p} r0^{p-1} t)

and Theta(t(tau), r0) = r0 exp(n^{-p} tau).
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError

# relative distance to T* below which Theta is clamped
_BLOWUP_CLAMP = 1e-14


def validate_exponent(p):
    p = float(p)
    if not p > 0:
        raise ConfigurationError(f"p must be positive, got {p}")
    if p == 1.0:
        raise ConfigurationError("p must differ from 1")
    return p


@dataclass(frozen=True)
class SphericalFlow:
    p: float
    n: int
    r0: float

    def __post_init__(self):
        validate_exponent(self.p)
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if not self.r0 > 0:
            raise ConfigurationError(f"r0 must be positive, got {self.r0}")

    @property
    def rate(self):
        """(1 - p) n^{-p}, the slope of Theta^{1-p} in t."""
        return (1.0 - self.p) * float(self.n) ** (-self.p)

    def t_star(self):
        if self.p < 1:
            return np.inf
        return float(self.n) ** self.p * self.r0 ** (1.0 - self.p) / (self.p - 1.0)

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("t must be non-negative")
        if self.p > 1 and np.any(t >= self.t_star()):
            raise DomainError(f"t reaches the blow-up time T*={self.t_star():.17g}")
        return t

    def theta(self, t):
        t = self._check_time(t)
        # r0 (1 + rate r0^{p-1} t)^{1/(1-p)}: same closed form, exact at t = 0
        base = 1.0 + self.rate * self.r0 ** (self.p - 1.0) * t
        if self.p > 1:
            base = np.maximum(base, _BLOWUP_CLAMP)
        out = self.r0 * base ** (1.0 / (1.0 - self.p))
        return float(out) if out.ndim == 0 else out

    def theta_of_tau(self, tau):
        out = self.r0 * np.exp(np.asarray(tau, dtype=float) * float(self.n) ** (-self.p))
        return float(out) if np.ndim(out) == 0 else out

    def tau_of_t(self, t):
        t = self._check_time(t)
        n_p = float(self.n) ** self.p
        out = n_p / (1.0 - self.p) * np.log1p(self.rate * self.r0 ** (self.p - 1.0) * t)
        return float(out) if out.ndim == 0 else out

    def t_of_tau(self, tau):
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 0):
            raise DomainError("tau must be non-negative")
        n_p = float(self.n) ** self.p
        out = np.expm1((1.0 - self.p) * tau / n_p) / (self.rate * self.r0 ** (self.p - 1.0))
        return float(out) if out.ndim == 0 else out


def theta(sf, t):
    return sf.theta(t)


def t_star(sf):
    return sf.t_star()


def tau_of_t(sf, t):
    return sf.tau_of_t(t)


def t_of_tau(sf, tau):
    return sf.t_of_tau(tau)


def barrier_radius(p, n, r, t):
    """Theta(t, r), or +inf once the spherical barrier has blown up."""
    sf = SphericalFlow(p, n, r)
    if p > 1 and t >= sf.t_star():
        return np.inf
    return sf.theta(t)


@dataclass(frozen=True)
class BarrierResult:
    passed: bool
    lower_margin: float
    upper_margin: float


def check_barriers(u_min, u_max, t, r1, r2, p, n):
    """Theta(t, r1) < min u and max u < Theta(t, r2), with signed margins.

    ``u_min``/``u_max`` may be taken from a GraphFunction via
    ``check_graph_barriers``.  Past the blow-up time of the outer sphere the
    upper barrier is vacuous (margin +inf).
    """
    lower = barrier_radius(p, n, r1, t)
    upper = barrier_radius(p, n, r2, t)
    lo = u_min - lower
    hi = upper - u_max
    return BarrierResult(bool(lo > 0 and hi > 0), float(lo), float(hi))


def check_graph_barriers(graph, t, r1, r2, p):
    return check_barriers(float(graph.u.min()), float(graph.u.max()), t, r1, r2, p, graph.grid.dim)
