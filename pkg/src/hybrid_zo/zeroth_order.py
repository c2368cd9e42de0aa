"""Zeroth-order dynamics: torus oscillators driving a geodesic dither.

The optimization point moves along

    dz/dt = -(2 / eps_a) * phi_q(exp_z(eps_a * sum_i c_i e_i)) * sum_j c_j e_j

where ``c`` stacks the first coordinate of each oscillator pair and
``{e_i}`` is the orthonormal tangent frame at ``z``.  Only the warped cost
is measured; no derivative is ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .hybrid import HybridSystem, StateLayout
from .manifolds import Manifold, Torus
from .switching import apply_jump_delta_system, modes_of, threshold_classifier, threshold_sets, tie_sets
from .warp import SynergisticFamily, validate_family, warped_cost

DEFAULT_RATIOS = {1: (1,), 2: (5, 7)}


class FrequencyError(ValueError):
    def __init__(self, violations):
        self.violations = violations
        lines = [f"ratio[{i}] = {a} equals {m} x ratio[{j}] = {b}" for i, j, m, a, b in violations]
        super().__init__("frequency condition violated: " + "; ".join(lines))


def _fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return Fraction(int(v[0]), int(v[1]))
    if isinstance(v, float) and v.is_integer():
        return Fraction(int(v))
    raise TypeError(f"frequency ratio {v!r} must be an integer, 'p/q' string or [p, q] pair")


def validate_frequencies(ratios):
    """Return every ordered pair ``(i, j, m, w_i, w_j)`` with ``w_i = m w_j``, m in {1, 2, 3}.

    Indices are 1-based.  Nonpositive ratios raise ``ValueError``.
    """
    w = [_fraction(r) for r in ratios]
    for i, wi in enumerate(w, start=1):
        if wi <= 0:
            raise ValueError(f"frequency ratio {i} must be positive, got {wi}")
    bad = []
    for i, wi in enumerate(w, start=1):
        for j, wj in enumerate(w, start=1):
            if i == j:
                continue
            for m in (1, 2, 3):
                if wi == m * wj:
                    bad.append((i, j, m, str(wi), str(wj)))
    return bad


@dataclass(frozen=True)
class DitherParams:
    eps_a: float = 0.05
    eps_p: float = 0.01
    omega_hat: float = 1.0
    ratios: tuple = (1,)
    chi0: tuple = None  # flat pairs; default every pair at (1, 0)
    steps_per_period: int = 20

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(_fraction(r) for r in self.ratios))
        if self.eps_a <= 0 or self.eps_p <= 0 or self.omega_hat <= 0:
            raise ValueError("eps_a, eps_p and omega_hat must be positive")
        if not self.ratios or any(r <= 0 for r in self.ratios):
            raise ValueError("frequency ratios must be positive")
        if self.steps_per_period < 20:
            raise ValueError("at least 20 steps per fastest dither period are required")
        if self.chi0 is None:
            object.__setattr__(self, "chi0", (1.0, 0.0) * len(self.ratios))
        else:
            object.__setattr__(self, "chi0", tuple(float(c) for c in self.chi0))
        if len(self.chi0) != 2 * len(self.ratios):
            raise ValueError("chi0 needs one unit pair per frequency ratio")
        object.__setattr__(self, "_omegas", np.array([float(r) for r in self.ratios]) * self.omega_hat)

    @classmethod
    def for_manifold(cls, manifold: Manifold, **kw):
        kw.setdefault("ratios", DEFAULT_RATIOS[manifold.dim])
        return cls(**kw)

    @property
    def n(self):
        return len(self.ratios)

    @property
    def omegas(self):
        return self._omegas

    @property
    def common_period(self):
        """Time after which every oscillator has completed an integer number of turns."""
        den = math.lcm(*(r.denominator for r in self.ratios))
        return 2.0 * math.pi * self.eps_p * den / self.omega_hat

    @property
    def step(self):
        """Largest step with ``steps_per_period`` steps per fastest dither period."""
        fastest = max(self.omegas)
        return 2.0 * math.pi * self.eps_p / (fastest * self.steps_per_period)

    def steps_per_common_period(self):
        return round(self.common_period / self.step)

    def check(self, manifold: Manifold):
        if self.n != manifold.dim:
            raise ValueError(f"{manifold.name} needs {manifold.dim} frequency ratios, got {self.n}")
        bad = validate_frequencies(self.ratios)
        if bad:
            raise FrequencyError(bad)
        if self.eps_a * math.sqrt(self.n) >= manifold.injectivity_radius:
            raise ValueError("dither amplitude eps_a * sqrt(n) must stay below the injectivity radius")
        Torus(self.n).check_point(np.asarray(self.chi0))


def dither_amplitudes(chi):
    """Odd coordinates ``chi^1, chi^3, ...`` of a flat torus state."""
    chi = np.asarray(chi, dtype=float)
    return chi[..., 0::2]


def oscillator_rotate(chi, angles):
    """Rotate each pair ``(a, b)`` clockwise by its angle: the exact flow of
    ``d/dt (a, b) = w (b, -a)``."""
    chi = np.asarray(chi, dtype=float)
    a, b = chi[..., 0::2], chi[..., 1::2]
    c, s = np.cos(angles), np.sin(angles)
    pairs = np.stack((a * c + b * s, b * c - a * s), axis=-1)
    out = pairs.reshape(pairs.shape[:-2] + (2 * pairs.shape[-2],))
    return Torus(chi.shape[-1] // 2).project(out)


def oscillator_step(chi, params: DitherParams, h):
    """Exact oscillator update over a step ``h`` (scalar or per-state array)."""
    h = np.asarray(h, dtype=float)
    angles = params.omegas * (h[..., None] if h.ndim else h) / params.eps_p
    return oscillator_rotate(chi, angles)


def oscillator_rate(chi, params: DitherParams):
    chi = np.asarray(chi, dtype=float)
    w = params.omegas / params.eps_p
    out = np.empty_like(chi)
    out[..., 0::2] = w * chi[..., 1::2]
    out[..., 1::2] = -w * chi[..., 0::2]
    return out


def zo_field(family: SynergisticFamily, z, q, chi, eps_a):
    """``-f_q(z, chi)``: one warped-cost measurement per state.

    ``eps_a`` is a scalar or one amplitude per state.
    """
    manifold = family.manifold
    eps_a = np.asarray(eps_a, dtype=float)
    if eps_a.ndim:
        eps_a = eps_a[..., None]
    z = manifold.project(np.asarray(z, dtype=float))
    c = dither_amplitudes(chi)
    frame = manifold.tangent_frame(z)
    direction = np.einsum("...i,...id->...d", c, frame)
    probe = manifold.exp(z, eps_a * direction, check=False)
    value = warped_cost(family, q, probe)
    return -(2.0 / eps_a) * value[..., None] * direction


def zo_layout(manifold: Manifold):
    return StateLayout.build(("z", manifold), ("q", 1), ("chi", Torus(manifold.dim)))


def zo_flow_field(family: SynergisticFamily, x, params: DitherParams, layout=None, eps_a=None):
    """Full state derivative; ``q`` does not move, ``chi`` rotates."""
    layout = layout or zo_layout(family.manifold)
    eps_a = params.eps_a if eps_a is None else eps_a
    zs, cs = layout["z"].slice, layout["chi"].slice
    dx = np.zeros_like(x)
    chi = layout["chi"].manifold.project(x[..., cs])
    dx[..., zs] = zo_field(family, x[..., zs], modes_of(layout, x), chi, eps_a)
    dx[..., cs] = oscillator_rate(chi, params)
    return dx


def build_H0(family: SynergisticFamily, params: DitherParams, boundary_tol=1e-12, validate=True, gap=None,
             member_eps_a=None):
    """Assemble ``{C0, F0, D0, G0}``; the sets and the jump only see ``(z, q)``.

    ``member_eps_a`` optionally gives one dither amplitude per batch member,
    so that an amplitude sweep runs as a single batch (the solver evaluates
    flows on the full batch in member order).
    """
    params.check(family.manifold)
    if member_eps_a is not None:
        member_eps_a = np.asarray(member_eps_a, dtype=float)
        for ea in np.unique(member_eps_a):
            replace(params, eps_a=float(ea)).check(family.manifold)
    if validate:
        report = validate_family(family, gap=gap)
        if not report.ok:
            raise ValueError("invalid synergistic family: " + "; ".join(report.problems))
    layout = zo_layout(family.manifold)
    cs = layout["chi"].slice
    in_flow, in_jump = threshold_sets(family, layout, boundary_tol)

    def flow(x, t, j):
        return zo_flow_field(family, x, params, layout, member_eps_a)

    def jump(x, t, j):
        return apply_jump_delta_system(family, layout, x, check=False)

    def exact_oscillator(x_old, x_new, h):
        x_new[:, cs] = oscillator_step(x_old[:, cs], params, h)
        return x_new

    return HybridSystem(
        layout, flow, jump, in_flow, in_jump,
        jump_ties=lambda x, t, j: tie_sets(family, layout, x),
        sets=threshold_classifier(family, layout, boundary_tol),
        post_flow=exact_oscillator, name="zeroth_order",
        meta={"delta": family.delta, "eps_a": params.eps_a, "eps_p": params.eps_p},
    )


def period_average(field_fn, params: DitherParams, chi0=None, samples=1024):
    """Average of ``field_fn(chi)`` over one common oscillator period.

    ``field_fn`` maps a batch ``(samples, 2n)`` of oscillator states to
    ``(samples, ...)`` values; uniform quadrature is exact for trigonometric
    integrands of degree below ``samples``.
    """
    chi0 = np.asarray(params.chi0 if chi0 is None else chi0, dtype=float)
    tau = params.common_period * np.arange(samples) / samples
    chi = oscillator_step(np.broadcast_to(chi0, (samples, chi0.size)), params, tau)
    return np.mean(field_fn(chi), axis=0)
