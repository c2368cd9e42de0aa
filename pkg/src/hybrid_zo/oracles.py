"""Independent reference computations for the built-in example families.

None of these reuse the numerical machinery they are meant to check: the
circle gap comes from a scalar root-find, warps from a generic matrix
exponential and dither averages from Bessel functions.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq
from scipy.special import j1


def circle_critical_angle():
    """Angle of the non-optimal critical point of the first circle warp.

    With ``phi = 1 - cos(theta)``, ``gamma = 1``, ``alpha(r) = r^2`` and
    gain 1/2 the warped cost is ``1 - cos(theta + cos(theta)^2 / 2)`` on the
    warped arc; its derivative vanishes where the argument equals ``pi``.
    """
    return brentq(lambda th: th + 0.5 * math.cos(th) ** 2 - math.pi, math.pi / 2, math.pi, xtol=1e-15)


def circle_warped_costs(theta):
    """Both warped costs (gains +1/2 and -1/2) at angle ``theta``."""
    c = math.cos(theta)
    if c >= 0.0:
        v = 1.0 - c
        return v, v
    return 1.0 - math.cos(theta + 0.5 * c * c), 1.0 - math.cos(theta - 0.5 * c * c)


def circle_gap():
    th = circle_critical_angle()
    a, b = circle_warped_costs(th)
    return a - b


def rotation_by_expm(generator, beta, z):
    """``expm(beta G) z`` with a general-purpose matrix exponential."""
    return expm(beta * np.asarray(generator, dtype=float)) @ np.asarray(z, dtype=float)


def circle_gradient(theta):
    """Ambient gradient of ``1 - cos(theta)`` on the circle."""
    return math.sin(theta) * np.array([-math.sin(theta), math.cos(theta)])


def bessel_average_factor(eps_a):
    """Period average of the single-evaluation dither on the circle.

    For ``phi = 1 - cos(theta)`` the average of
    ``(2/eps) phi(theta + eps cos s) cos s`` over ``s`` equals
    ``(2/eps) J1(eps) sin(theta)``, so this factor tends to 1 with
    an ``eps^2 / 8`` deficit.
    """
    return 2.0 * j1(eps_a) / eps_a
