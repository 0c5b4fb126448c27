"""Reference curvatures computed independently of the graph formulas.

These use parametric descriptions of conics and quadrics, or finite
differences of the planar immersion, and never touch phi = log u.
"""
import numpy as np


def ellipse_curvature(theta, a, b):
    """Curvature of x^2/a^2 + y^2/b^2 = 1 at polar angle ``theta``."""
    t = np.arctan2(a * np.sin(theta), b * np.cos(theta))
    return a * b / (a * a * np.sin(t) ** 2 + b * b * np.cos(t) ** 2) ** 1.5


def spheroid_curvatures(theta, a, c):
    """Meridian and parallel curvatures of a spheroid (equatorial a, polar c).

    ``theta`` is the colatitude of the radial ray; the parametric angle s
    of x = a sin s, z = c cos s satisfies tan s = (c/a) tan theta.
    """
    s = np.arctan2(c * np.sin(theta), a * np.cos(theta))
    q = a * a * np.cos(s) ** 2 + c * c * np.sin(s) ** 2
    k_meridian = a * c / q ** 1.5
    k_parallel = c / (a * np.sqrt(q))
    return k_meridian, k_parallel


def immersion_curvature(u, h):
    """Curvature of the closed curve theta -> u(theta)(cos theta, sin theta).

    Fourth-order periodic differences of the Cartesian immersion, then the
    planar formula (x'y'' - y'x'') / (x'^2 + y'^2)^{3/2}.
    """
    n = u.size
    theta = h * np.arange(n)
    x = u * np.cos(theta)
    y = u * np.sin(theta)

    def d1(f):
        return (8 * (np.roll(f, -1) - np.roll(f, 1)) - (np.roll(f, -2) - np.roll(f, 2))) / (12 * h)

    def d2(f):
        return (16 * (np.roll(f, -1) + np.roll(f, 1)) - (np.roll(f, -2) + np.roll(f, 2)) - 30 * f) / (12 * h * h)

    xp, yp, xpp, ypp = d1(x), d1(y), d2(x), d2(y)
    return (xp * ypp - yp * xpp) / (xp * xp + yp * yp) ** 1.5
