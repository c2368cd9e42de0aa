"""First-order reference dynamics: warped gradient flows with delta-threshold switching."""

from __future__ import annotations

import numpy as np

from .hybrid import HybridSystem, StateLayout
from .switching import apply_jump_delta_system, modes_of, threshold_classifier, threshold_sets, tie_sets
from .warp import SynergisticFamily, fd_gradient, validate_family, warped_cost


def fo_layout(manifold):
    return StateLayout.build(("z", manifold), ("q", 1))


def fo_flow_field(family: SynergisticFamily, z, q):
    """``-grad phi_q(z)`` by finite differences in the orthonormal frame."""
    manifold = family.manifold
    z = manifold.project(np.asarray(z, dtype=float))
    q = np.asarray(q)
    qb = q[..., None] if q.ndim else q
    return -fd_gradient(lambda p: warped_cost(family, qb, p), manifold, z)


def make_state(layout, z, q, **blocks):
    z = np.atleast_2d(np.asarray(z, dtype=float))
    q = np.broadcast_to(np.asarray(q, dtype=float), z.shape[:-1])
    x = np.zeros(z.shape[:-1] + (layout.size,))
    x[..., layout["z"].slice] = z
    x[..., layout["q"].start] = q
    for name, value in blocks.items():
        x[..., layout[name].slice] = value
    return x


def build_H1(family: SynergisticFamily, boundary_tol=1e-12, validate=True, gap=None):
    """Assemble ``{C1, F1, D1, G1}``; raises ``ValueError`` for an invalid family."""
    if validate:
        report = validate_family(family, gap=gap)
        if not report.ok:
            raise ValueError("invalid synergistic family: " + "; ".join(report.problems))
    layout = fo_layout(family.manifold)
    zs = layout["z"].slice
    in_flow, in_jump = threshold_sets(family, layout, boundary_tol)

    def flow(x, t, j):
        dx = np.zeros_like(x)
        dx[:, zs] = fo_flow_field(family, x[:, zs], modes_of(layout, x))
        return dx

    def jump(x, t, j):
        return apply_jump_delta_system(family, layout, x, check=False)

    return HybridSystem(
        layout, flow, jump, in_flow, in_jump,
        jump_ties=lambda x, t, j: tie_sets(family, layout, x),
        sets=threshold_classifier(family, layout, boundary_tol),
        name="first_order", meta={"delta": family.delta},
    )


def build_single_mode_flow(family: SynergisticFamily):
    """Gradient flow of one warped cost per state (its ``q`` is frozen); no jumps."""
    layout = fo_layout(family.manifold)
    zs = layout["z"].slice

    def flow(x, t, j):
        dx = np.zeros_like(x)
        dx[:, zs] = fo_flow_field(family, x[:, zs], modes_of(layout, x))
        return dx

    return HybridSystem(layout, flow, lambda x, t, j: x, name="single_mode_gradient_flow")


def build_gradient_flow(cost):
    """Plain gradient flow of the unwarped cost; ``q`` is carried but unused."""
    manifold = cost.manifold
    layout = fo_layout(manifold)
    zs = layout["z"].slice

    def flow(x, t, j):
        dx = np.zeros_like(x)
        dx[:, zs] = -fd_gradient(cost, manifold, manifold.project(x[:, zs]))
        return dx

    return HybridSystem(layout, flow, lambda x, t, j: x, name="gradient_flow")


def polish_equilibrium(field, manifold, z0, span=2e-11, count=401):
    """A point near ``z0`` where ``field`` is exactly zero in floating point.

    An unstable equilibrium only stays put numerically if the evaluated
    field vanishes bitwise and the point is a fixed point of the projection;
    near a true zero this holds on a small set of float points, found here
    by scanning offsets along the tangent frame. Returns ``(z, residual)``
    with the closest exact candidate, or the smallest residual if none is exact.
    """
    z0 = manifold.project(np.asarray(z0, dtype=float))
    frame = manifold.tangent_frame(z0)
    s = np.linspace(-span, span, count)
    if manifold.dim == 1:
        offsets = s[:, None] * frame[0]
    else:
        a, b = np.meshgrid(s[::8], s[::8], indexing="ij")
        offsets = a.reshape(-1, 1) * frame[0] + b.reshape(-1, 1) * frame[1]
    cand = manifold.project(z0 + offsets)
    fixed = np.all(manifold.project(cand) == cand, axis=-1)
    res = np.abs(field(cand)).max(axis=-1)
    exact = np.flatnonzero(fixed & (res == 0.0))
    if exact.size:
        k = exact[np.argmin(np.abs(offsets[exact]).sum(axis=-1))]
    else:
        k = int(np.argmin(np.where(fixed, res, np.inf)))
    return cand[k], float(res[k])
