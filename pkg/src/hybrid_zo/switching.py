"""Delta-threshold switching shared by the first- and zeroth-order systems.

A state carries the optimization point in block ``z`` and the active mode
in the one-entry block ``q`` (stored as a float, always an exact integer).
The mode may flow while the current warped cost is within ``delta`` of the
best one and must be able to jump once the excess reaches ``delta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import TOL
from .warp import SynergisticFamily, all_warped_costs, best_mode, fd_gradient, warped_cost


def modes_of(layout, x):
    return np.rint(layout.get(x, "q")[..., 0]).astype(int)


def mode_excess(family: SynergisticFamily, layout, x):
    """``phi_q(z) - m(z)`` per state."""
    z = family.manifold.project(layout.get(x, "z"))
    vals = all_warped_costs(family, z)
    q = modes_of(layout, x)
    cur = np.take_along_axis(vals, (q - 1)[..., None], axis=-1)[..., 0]
    return cur - vals.min(axis=-1)


def threshold_sets(family: SynergisticFamily, layout, boundary_tol=1e-12):
    """``(in_flow_set, in_jump_set)`` predicates with the shared overlap band."""
    delta = family.delta

    def in_flow(x, t=None, j=None):
        return mode_excess(family, layout, x) <= delta + boundary_tol

    def in_jump(x, t=None, j=None):
        return mode_excess(family, layout, x) >= delta - boundary_tol

    return in_flow, in_jump


def threshold_classifier(family: SynergisticFamily, layout, boundary_tol=1e-12):
    """Both memberships from a single evaluation of the mode excess."""
    delta = family.delta

    def sets(x, t=None, j=None):
        e = mode_excess(family, layout, x)
        return e <= delta + boundary_tol, e >= delta - boundary_tol

    return sets


def apply_jump_delta_system(family: SynergisticFamily, layout, x, check=True, boundary_tol=1e-12):
    """Reset ``q`` to the smallest mode attaining ``m(z)``; every other block is kept."""
    x = np.array(x, dtype=float, copy=True)
    if check:
        excess = mode_excess(family, layout, x)
        if np.any(excess < family.delta - boundary_tol):
            raise ValueError("jump requested outside the jump set")
    z = family.manifold.project(layout.get(x, "z"))
    x[..., layout["q"].start] = best_mode(all_warped_costs(family, z))
    return x


def tie_sets(family: SynergisticFamily, layout, x, tie=TOL.tie):
    """Every mode attaining ``m(z)``, one tuple per state."""
    z = family.manifold.project(layout.get(x, "z"))
    vals = np.atleast_2d(all_warped_costs(family, z))
    m = vals.min(axis=-1, keepdims=True)
    return [tuple(int(i) + 1 for i in np.flatnonzero(row)) for row in vals <= m + tie]


@dataclass
class LyapunovReport:
    V: np.ndarray
    uC: np.ndarray
    jump_dV: np.ndarray
    flow_dV: np.ndarray
    flow_violations: int
    jump_violations: int
    manifold_violations: int
    worst_manifold: float


def lyapunov_diagnostics(family: SynergisticFamily, arc, min_value, flow_slack=TOL.flow_slack,
                         jump_slack=TOL.jump_slack, steps_per_sample=1, with_uC=True):
    """``V = phi_q(z) - min phi`` and ``u_C = -|grad phi_q|^2`` along an arc.

    Flow samples may be ``steps_per_sample`` solver steps apart; the flow
    slack is applied per step.
    """
    layout = arc.layout
    z = family.manifold.project(layout.get(arc.x, "z"))
    q = modes_of(layout, arc.x)
    V = warped_cost(family, q, z) - min_value
    if with_uC:
        g = fd_gradient(lambda p: warped_cost(family, q[:, None], p), family.manifold, z)
        uC = -np.sum(g * g, axis=-1)
    else:
        uC = np.full(len(V), np.nan)
    dV = np.diff(V)
    jumped = np.diff(arc.j) > 0
    jump_dV = dV[jumped]
    flow_dV = dV[~jumped]
    flow_bad = int(np.sum(flow_dV > flow_slack * steps_per_sample))
    jump_bad = int(np.sum(jump_dV > -family.delta + jump_slack))
    viol = layout.violation(arc.x)
    worst = float(np.max(viol, initial=0.0))
    return LyapunovReport(V, uC, jump_dV, flow_dV, flow_bad, jump_bad, int(np.sum(viol > TOL.point)), worst)
