"""Bounded disturbances acting on hybrid systems.

Six channels perturb a system ``{C, F, D, G}``:

    flow:  x + d1 in C,   dx/dt = F(x + d2) + d3
    jump:  x + d4 in D,   x+ = G(x + d5) + d6

Every signal is a pure function ``d(x, t, j)`` returning a state-shaped
batch; additions of manifold blocks are retracted (or, for ``d3``,
projected to the tangent space) so the perturbed state stays on the
manifold.  Discrete blocks are never perturbed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .hybrid import HybridSystem, StateLayout, classify
from .manifolds import Manifold

CHANNELS = ("d1", "d2", "d3", "d4", "d5", "d6")


class DisturbanceBoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class DisturbanceProfile:
    """Signals for the six channels (``None`` means identically zero) and
    their common bound ``d_star``."""

    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    d3: Optional[Callable] = None
    d4: Optional[Callable] = None
    d5: Optional[Callable] = None
    d6: Optional[Callable] = None
    d_star: float = 0.0
    tol: float = 1e-12
    log: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        if self.d_star < 0:
            raise ValueError("d_star must be nonnegative")

    @property
    def is_zero(self):
        return all(getattr(self, c) is None for c in CHANNELS)

    def evaluate(self, name, x, t, j, layout: StateLayout):
        """Signal of channel ``name`` restricted to the manifold blocks, with
        the bound checked; ``None`` for an inactive channel."""
        sig = getattr(self, name)
        if sig is None:
            return None
        d = np.asarray(sig(x, t, j), dtype=float)
        d = np.broadcast_to(d, x.shape).copy()
        for b in layout.blocks:
            if b.manifold is None:
                d[..., b.slice] = 0.0
        size = np.sqrt((d * d).sum(axis=-1))
        worst = float(size.max(initial=0.0))
        if worst > self.d_star + self.tol:
            k = int(np.argmax(size))
            raise DisturbanceBoundError(
                f"channel {name}: |d| = {worst:.6g} exceeds d* = {self.d_star:.6g} "
                f"at t = {float(np.atleast_1d(t)[k]):.6g}, j = {int(np.atleast_1d(j)[k])}"
            )
        return d


def perturb_system(sys: HybridSystem, profile: DisturbanceProfile) -> HybridSystem:
    """The system driven by ``profile``; a zero profile returns ``sys`` itself."""
    if profile.is_zero:
        return sys
    layout = sys.layout

    def shifted(name, x, t, j):
        d = profile.evaluate(name, x, t, j, layout)
        return x if d is None else layout.project(x + d)

    def flow(x, t, j):
        dx = sys.flow(shifted("d2", x, t, j), t, j)
        d3 = profile.evaluate("d3", x, t, j, layout)
        if d3 is not None:
            dx = dx + layout.to_tangent(layout.project(x), d3)
        return dx

    def in_flow(x, t, j):
        return sys.in_flow_set(shifted("d1", x, t, j), t, j)

    def in_jump(x, t, j):
        return sys.in_jump_set(shifted("d4", x, t, j), t, j)

    def sets(x, t, j):
        if profile.d1 is None and profile.d4 is None:
            return classify(sys, x, t, j)
        return in_flow(x, t, j), in_jump(x, t, j)

    def jump(x, t, j):
        out = sys.jump(shifted("d5", x, t, j), t, j)
        d6 = profile.evaluate("d6", x, t, j, layout)
        return out if d6 is None else layout.project(out + d6)

    ties = None
    if sys.jump_ties is not None:
        ties = lambda x, t, j: sys.jump_ties(shifted("d5", x, t, j), t, j)  # noqa: E731

    return HybridSystem(
        layout, flow, jump, in_flow, in_jump, jump_ties=ties, post_flow=sys.post_flow, sets=sets,
        name=sys.name + "+disturbance", meta={**sys.meta, "d_star": profile.d_star},
    )


def _embed(layout, block, values, x):
    out = np.zeros_like(x)
    out[..., layout[block].slice] = values
    return out


@dataclass(frozen=True)
class AdversarialSpec:
    target: tuple
    amplitude: float
    engagement_radius: float

    def __post_init__(self):
        if self.amplitude <= 0 or self.engagement_radius <= 0:
            raise ValueError("amplitude and engagement radius must be positive")


def adversarial_tangent(manifold: Manifold, spec: AdversarialSpec, z):
    """Pull toward ``spec.target`` along the geodesic, of size
    ``amplitude * max(0, 1 - dist / radius)``; zero at the target itself."""
    z = np.asarray(z, dtype=float)
    target = np.asarray(spec.target, dtype=float)
    d = manifold.distance(z, target)
    toward = manifold.to_tangent(z, np.broadcast_to(target, z.shape))
    n = np.sqrt((toward * toward).sum(axis=-1))
    gain = spec.amplitude * np.maximum(0.0, 1.0 - d / spec.engagement_radius)
    scale = np.where(n > 1e-300, gain / np.where(n > 1e-300, n, 1.0), 0.0)
    return scale[..., None] * toward


def adversarial_tangential(manifold: Manifold, spec: AdversarialSpec, layout: StateLayout, block="z"):
    """Channel signal ``d(x, t, j)`` for :func:`adversarial_tangent`."""
    manifold.check_point(np.asarray(spec.target, dtype=float))
    sl = layout[block].slice

    def signal(x, t, j):
        return _embed(layout, block, adversarial_tangent(manifold, spec, manifold.project(x[..., sl])), x)

    return signal


def constant_tangent(manifold: Manifold, magnitude: float, layout: StateLayout, block="z", direction=0):
    """Channel signal ``magnitude * e_k(z)`` with ``e_k`` the ``direction``-th frame vector."""
    sl = layout[block].slice

    def signal(x, t, j):
        frame = manifold.tangent_frame(manifold.project(x[..., sl]))
        return _embed(layout, block, magnitude * frame[..., direction, :], x)

    return signal
