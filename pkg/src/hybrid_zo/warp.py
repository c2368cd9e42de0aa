"""Costs, rotation warps and the switching data of synergistic families.

A cost is only ever *evaluated*; derivatives needed by certificates and by
the first-order reference dynamics come from :func:`fd_gradient`, which
central-differences the cost along geodesics of an orthonormal frame.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .constants import TOL
from .manifolds import CIRCLE, SPHERE, Circle, KindMismatchError, Manifold, Sphere2, cross3


class EvalCounter:
    """Counts evaluated points; read ``count``, call ``reset()``."""

    def __init__(self):
        self.count = 0
        self.calls = 0

    def add(self, n_points):
        self.count += int(n_points)
        self.calls += 1

    def reset(self):
        self.count = 0
        self.calls = 0


# Every call of the finite-difference gradient oracle is recorded here, so
# tests can assert that zeroth-order flows never touch it.
DERIVATIVE_ORACLE = EvalCounter()


class CostFunction:
    """Black-box cost on a manifold.

    ``fn`` maps an array of points ``(..., ambient_dim)`` to values ``(...)``.
    """

    def __init__(self, manifold: Manifold, fn: Callable[[np.ndarray], np.ndarray], label: str = ""):
        self.manifold = manifold
        self.fn = fn
        self.label = label
        self.evals = EvalCounter()

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        self.evals.add(math.prod(z.shape[:-1]))
        return np.asarray(self.fn(z), dtype=float)

    def __repr__(self):
        return f"CostFunction({self.manifold!r}, label={self.label!r})"


def circle_1_minus_z1():
    return CostFunction(CIRCLE, lambda z: 1.0 - z[..., 0], "circle_1_minus_z1")


def sphere_1_minus_z3():
    return CostFunction(SPHERE, lambda z: 1.0 - z[..., 2], "sphere_1_minus_z3")


def polynomial_cost(manifold, terms, label="polynomial"):
    """Sum of monomials ``coef * prod(z_i ** e_i)`` in embedded coordinates.

    ``terms`` is a sequence of ``(coef, exponents)`` with one exponent per
    ambient coordinate.
    """
    terms = [(float(c), tuple(int(e) for e in exps)) for c, exps in terms]
    for _, exps in terms:
        if len(exps) != manifold.ambient_dim:
            raise ValueError(f"monomial {exps} does not match ambient dimension {manifold.ambient_dim}")

    def fn(z):
        out = np.zeros(z.shape[:-1])
        for c, exps in terms:
            mono = np.full(z.shape[:-1], c)
            for i, e in enumerate(exps):
                if e:
                    mono = mono * z[..., i] ** e
            out = out + mono
        return out

    return CostFunction(manifold, fn, label)


BUILTIN_COSTS = {
    "circle_1_minus_z1": circle_1_minus_z1,
    "sphere_1_minus_z3": sphere_1_minus_z3,
}


def cost_from_config(spec, manifold):
    """Build a cost from a config value: a built-in name or
    ``{"polynomial": [[coef, [exponents...]], ...]}``."""
    if isinstance(spec, str):
        try:
            cost = BUILTIN_COSTS[spec]()
        except KeyError:
            raise ValueError(f"unknown cost {spec!r}; known: {sorted(BUILTIN_COSTS)}") from None
        if cost.manifold != manifold:
            raise KindMismatchError(f"cost {spec!r} lives on {cost.manifold.name}, not {manifold.name}")
        return cost
    if isinstance(spec, dict) and set(spec) == {"polynomial"}:
        return polynomial_cost(manifold, spec["polynomial"])
    raise ValueError(f"cannot build a cost from {spec!r}")


@dataclass(frozen=True)
class ShapeFunction:
    """Warp profile alpha and its derivative."""

    name: str
    fn: Callable
    dfn: Callable


SHAPES = {
    "square": ShapeFunction("square", lambda r: r * r, lambda r: 2.0 * r),
    "cubic": ShapeFunction("cubic", lambda r: r**3, lambda r: 3.0 * r * r),
    "zero": ShapeFunction("zero", lambda r: 0.0 * r, lambda r: 0.0 * r),
}


def shape_from_name(name):
    try:
        return SHAPES[name]
    except KeyError:
        raise ValueError(f"unknown alpha {name!r}; known: {sorted(SHAPES)}") from None


def skew(u):
    """Cross-product matrix ``[u]_x``."""
    u1, u2, u3 = u
    return np.array([[0.0, -u3, u2], [u3, 0.0, -u1], [-u2, u1, 0.0]])


# Generator of the planar warps: exp(beta * PSI) is the rotation by +beta.
PSI = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class WarpSpec:
    """Rotation warp ``z -> exp(k alpha(phi(z) - gamma) G) z`` above the threshold.

    ``axis`` is the unit rotation axis on S^2 and ``None`` on S^1.
    """

    gain: float
    shape: ShapeFunction
    gamma: float
    axis: Optional[tuple] = None

    def __post_init__(self):
        if self.axis is not None:
            u = np.asarray(self.axis, dtype=float)
            if u.shape != (3,) or abs(np.linalg.norm(u) - 1.0) > 1e-9:
                raise ValueError(f"warp axis must be a unit 3-vector, got {self.axis!r}")
            object.__setattr__(self, "axis", tuple(float(a) for a in u))

    def manifold_check(self, manifold):
        if isinstance(manifold, Circle) and self.axis is None:
            return
        if isinstance(manifold, Sphere2) and self.axis is not None:
            return
        raise KindMismatchError(f"warp generator does not match {manifold!r}")

    def generator(self):
        return PSI if self.axis is None else skew(self.axis)

    def generator_apply(self, z):
        """``G z`` for a batch of points."""
        if self.axis is None:
            return np.stack((-z[..., 1], z[..., 0]), axis=-1)
        return cross3(np.asarray(self.axis), z)

    def rotate(self, z, beta):
        """``exp(beta G) z``: planar rotation or Rodrigues' formula."""
        c, s = np.cos(beta), np.sin(beta)
        if self.axis is None:
            x, y = z[..., 0], z[..., 1]
            return np.stack((c * x - s * y, s * x + c * y), axis=-1)
        u = np.asarray(self.axis)
        c, s = c[..., None], s[..., None]
        return c * z + s * cross3(u, z) + (1.0 - c) * (u * z).sum(axis=-1, keepdims=True) * u

    def angle(self, phi):
        r = phi - self.gamma
        return np.where(r > 0.0, self.gain * self.shape.fn(np.maximum(r, 0.0)), 0.0)


def _warp_with_phi(spec, z, phi):
    beta = spec.angle(phi)
    out = spec.rotate(z, beta)
    out = out / np.sqrt(np.sum(out * out, axis=-1, keepdims=True))
    return np.where((phi <= spec.gamma)[..., None], z, out)


def warp_apply(spec: WarpSpec, cost: CostFunction, z):
    """Image of ``z`` under the warp; the identity wherever ``phi(z) <= gamma``."""
    spec.manifold_check(cost.manifold)
    z = np.asarray(z, dtype=float)
    return _warp_with_phi(spec, z, cost(z))


def directional_derivative(cost, manifold, z, direction, h=TOL.fd_step):
    """Central difference of ``t -> cost(project(z + t d))`` at ``t = 0``."""
    plus = manifold.project(z + h * direction)
    minus = manifold.project(z - h * direction)
    return (cost(plus) - cost(minus)) / (2.0 * h)


def warp_jacobian_det(spec: WarpSpec, cost: CostFunction, z):
    """``1 + k alpha'(phi - gamma) dphi_z(G z)``, exactly 1 where ``phi <= gamma``."""
    spec.manifold_check(cost.manifold)
    z = np.asarray(z, dtype=float)
    phi = cost(z)
    dphi = directional_derivative(cost, cost.manifold, z, spec.generator_apply(z))
    r = np.maximum(phi - spec.gamma, 0.0)
    det = 1.0 + spec.gain * spec.shape.dfn(r) * dphi
    return np.where(phi > spec.gamma, det, 1.0)


@dataclass(frozen=True)
class SynergisticFamily:
    """Warps indexed by modes ``q = 1..N`` sharing ``gamma``, with gap ``delta``."""

    cost: CostFunction
    warps: tuple
    delta: float
    gamma: float
    evals: EvalCounter = field(default_factory=EvalCounter, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "warps", tuple(self.warps))
        if len(self.warps) < 2:
            raise ValueError("a synergistic family needs at least two warps")
        for w in self.warps:
            w.manifold_check(self.cost.manifold)
            if w.gamma != self.gamma:
                raise ValueError("all warps must share the family threshold gamma")

    @property
    def manifold(self):
        return self.cost.manifold

    @property
    def n_modes(self):
        return len(self.warps)

    def warp(self, q):
        if not 1 <= int(q) <= self.n_modes:
            raise IndexError(f"mode {q} outside 1..{self.n_modes}")
        return self.warps[int(q) - 1]

    def with_delta(self, delta):
        return SynergisticFamily(self.cost, self.warps, float(delta), self.gamma)


def rotation_family(cost, gains, gamma, delta, alpha="square", axes=None):
    """Family of rotation warps; ``axes`` gives one axis per gain on S^2."""
    shape = shape_from_name(alpha) if isinstance(alpha, str) else alpha
    if axes is None:
        axes = [None] * len(gains)
    warps = [WarpSpec(float(k), shape, float(gamma), None if u is None else tuple(u)) for k, u in zip(gains, axes)]
    return SynergisticFamily(cost, tuple(warps), float(delta), float(gamma))


def _mode_tables(family):
    """Per-mode gains and axes, or ``None`` when the warps use different shapes."""
    cached = getattr(family, "_tables", None)
    if cached is not None:
        return cached
    shapes = {w.shape for w in family.warps}
    if len(shapes) != 1:
        tables = False
    else:
        gains = np.array([w.gain for w in family.warps])
        axes = None if family.warps[0].axis is None else np.array([w.axis for w in family.warps])
        tables = (gains, axes, family.warps[0].shape)
    object.__setattr__(family, "_tables", tables)
    return tables


def _rotate(z, beta, axes):
    c, s = np.cos(beta), np.sin(beta)
    if axes is None:
        x, y = z[..., 0], z[..., 1]
        out = np.empty(np.broadcast_shapes(x.shape, c.shape) + (2,))
        out[..., 0] = c * x - s * y
        out[..., 1] = s * x + c * y
    else:
        c, s = c[..., None], s[..., None]
        out = c * z + s * cross3(axes, z) + (1.0 - c) * (axes * z).sum(axis=-1, keepdims=True) * axes
    return out / np.sqrt((out * out).sum(axis=-1, keepdims=True))


def all_warped_costs(family: SynergisticFamily, z):
    """Values of every warped cost, shape ``(..., N)``; the cost is measured
    once at ``z`` and once per warped image."""
    z = np.asarray(z, dtype=float)
    phi = family.cost(z)
    family.evals.add(math.prod(z.shape[:-1]) * family.n_modes)
    tables = _mode_tables(family)
    if tables:
        gains, axes, shape = tables
        r = np.maximum(phi - family.gamma, 0.0)[..., None]
        images = _rotate(z[..., None, :], gains * shape.fn(r), axes)
        return np.where((phi <= family.gamma)[..., None], phi[..., None], family.cost(images))
    vals = [np.where(phi <= family.gamma, phi, family.cost(_warp_with_phi(w, z, phi))) for w in family.warps]
    return np.stack(vals, axis=-1)


def warped_cost(family: SynergisticFamily, q, z):
    """``phi(S_q(z))``; ``q`` may be an integer array broadcasting against the
    leading axes of ``z``."""
    z = np.asarray(z, dtype=float)
    q = np.asarray(q)
    if q.ndim == 0:
        w = family.warp(q)
        phi = family.cost(z)
        family.evals.add(math.prod(z.shape[:-1]))
        return np.where(phi <= family.gamma, phi, family.cost(_warp_with_phi(w, z, phi)))
    if q.shape != z.shape[:-1]:
        q = np.broadcast_to(q, z.shape[:-1])
    q = q.astype(int, copy=False)
    if q.size and (q.min() < 1 or q.max() > family.n_modes):
        raise IndexError(f"modes outside 1..{family.n_modes}")
    phi = family.cost(z)
    family.evals.add(q.size)
    tables = _mode_tables(family)
    if tables:
        gains, axes, shape = tables
        beta = gains[q - 1] * shape.fn(np.maximum(phi - family.gamma, 0.0))
        images = _rotate(z, beta, None if axes is None else axes[q - 1])
        return np.where(phi <= family.gamma, phi, family.cost(images))
    out = phi.copy()
    hot = phi > family.gamma
    for idx, w in enumerate(family.warps, start=1):
        mask = hot & (q == idx)
        if np.any(mask):
            out[mask] = family.cost(_warp_with_phi(w, z[mask], phi[mask]))
    return out


def min_warped(family, z):
    """``m(z)``, the smallest warped cost."""
    return np.min(all_warped_costs(family, z), axis=-1)


def argmin_modes(family, z, tie=TOL.tie):
    """``h(z)`` as a sorted tuple of 1-based modes (single point only)."""
    vals = all_warped_costs(family, np.asarray(z, dtype=float)[None])[0]
    m = vals.min()
    return tuple(int(i) + 1 for i in np.flatnonzero(vals <= m + tie))


def best_mode(values, tie=TOL.tie):
    """Smallest mode attaining the minimum of ``values`` (..., N) within ``tie``."""
    m = np.min(values, axis=-1, keepdims=True)
    return np.argmax(values <= m + tie, axis=-1) + 1


def fd_gradient(f, manifold: Manifold, z, h=TOL.fd_step, components=False):
    """Riemannian gradient by central differences along frame geodesics.

    Returns the ambient tangent vector ``sum_i g_i e_i``; with
    ``components=True`` also the coefficients ``g`` and the frame.
    """
    z = np.asarray(z, dtype=float)
    DERIVATIVE_ORACLE.add(math.prod(z.shape[:-1]))
    frame = manifold.tangent_frame(z)  # (..., n, d)
    n = manifold.dim
    steps = h * frame
    base = z[..., None, :]
    pts = np.concatenate(
        (manifold.exp(base, steps, check=False), manifold.exp(base, -steps, check=False)), axis=-2
    )
    vals = np.asarray(f(pts), dtype=float)
    g = (vals[..., :n] - vals[..., n:]) / (2.0 * h)
    grad = np.einsum("...i,...id->...d", g, frame)
    if components:
        return grad, g, frame
    return grad


def estimate_gain_bound(cost: CostFunction, shape, gamma, axis=None, num_samples=4096):
    """Safety factor times ``1 / max |alpha'(phi - gamma) dphi_z(G z)|`` over
    grid points with ``phi >= gamma``; ``inf`` when the max is zero or the
    superlevel set is empty."""
    if num_samples < 1000:
        raise ValueError("estimate_gain_bound needs at least 1000 samples")
    shape = shape_from_name(shape) if isinstance(shape, str) else shape
    spec = WarpSpec(1.0, shape, float(gamma), axis)
    spec.manifold_check(cost.manifold)
    z = cost.manifold.grid(num_samples)
    phi = cost(z)
    hot = phi >= gamma
    if not np.any(hot):
        return math.inf
    zh = z[hot]
    dphi = directional_derivative(cost, cost.manifold, zh, spec.generator_apply(zh))
    worst = float(np.max(np.abs(shape.dfn(phi[hot] - gamma) * dphi)))
    if worst == 0.0:
        return math.inf
    return TOL.gain_safety / worst


@dataclass
class CriticalSetEstimate:
    points: np.ndarray  # (k, ambient)
    values: np.ndarray
    grad_norms: np.ndarray
    hessian_eigs: np.ndarray  # (k, dim), in the local orthonormal frame
    tolerance: float
    rejected_seeds: np.ndarray
    rejected_residuals: np.ndarray
    degenerate: bool

    def __len__(self):
        return len(self.values)


def _local_derivatives(f, manifold, z, h_grad=TOL.fd_step, h_hess=1e-4):
    """Gradient and Hessian of ``w -> f(exp_z(sum w_i e_i))`` at ``w = 0``."""
    n = manifold.dim
    eye = np.eye(n)
    offsets = [np.zeros(n)]
    offsets += [h_grad * eye[i] for i in range(n)] + [-h_grad * eye[i] for i in range(n)]
    offsets += [h_hess * eye[i] for i in range(n)] + [-h_hess * eye[i] for i in range(n)]
    pairs = [(i, k) for i in range(n) for k in range(i + 1, n)]
    for i, k in pairs:
        offsets += [h_hess * (eye[i] + eye[k]), h_hess * (eye[i] - eye[k])]
        offsets += [-h_hess * (eye[i] - eye[k]), -h_hess * (eye[i] + eye[k])]
    w = np.array(offsets)
    frame = manifold.tangent_frame(z)
    v = np.einsum("kn,mnd->mkd", w, frame)
    vals = np.asarray(f(manifold.exp(z[:, None, :], v, check=False)), dtype=float)
    f0 = vals[:, 0]
    g = (vals[:, 1 : 1 + n] - vals[:, 1 + n : 1 + 2 * n]) / (2.0 * h_grad)
    hp = vals[:, 1 + 2 * n : 1 + 3 * n]
    hm = vals[:, 1 + 3 * n : 1 + 4 * n]
    hess = np.zeros((len(z), n, n))
    idx = np.arange(n)
    hess[:, idx, idx] = (hp - 2.0 * f0[:, None] + hm) / h_hess**2
    base = 1 + 4 * n
    for p, (i, k) in enumerate(pairs):
        a, b, c, d = (vals[:, base + 4 * p + r] for r in range(4))
        hess[:, i, k] = hess[:, k, i] = (a - b - c + d) / (4.0 * h_hess**2)
    return g, hess, frame


def find_critical_points(f, manifold: Manifold, grid_density=64, refine_tol=TOL.critical_grad,
                         max_iter=80, trust_radius=0.25):
    """Numerical critical set of ``f`` by Newton iteration on the gradient
    from every grid seed.

    Seeds whose residual gradient stays above ``refine_tol`` are returned in
    ``rejected_seeds`` rather than dropped.
    """
    if grid_density < 64:
        raise ValueError("grid_density must be at least 64 per intrinsic dimension")
    seeds = manifold.grid(grid_density**manifold.dim)
    z = seeds.copy()
    done = np.zeros(len(z), dtype=bool)
    residual = np.full(len(z), np.inf)
    hess_at = np.zeros((len(z), manifold.dim, manifold.dim))
    for _ in range(max_iter + 1):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        g, hess, frame = _local_derivatives(f, manifold, z[act])
        gn = np.sqrt(np.sum(g * g, axis=-1))
        residual[act] = gn
        hess_at[act] = hess
        ok = gn <= refine_tol
        done[act[ok]] = True
        move = act[~ok]
        if move.size == 0:
            break
        step = -np.einsum("mij,mj->mi", np.linalg.pinv(hess[~ok], rcond=1e-10), g[~ok])
        sn = np.sqrt(np.sum(step * step, axis=-1, keepdims=True))
        step = step * np.minimum(1.0, trust_radius / np.maximum(sn, 1e-300))
        v = np.einsum("mi,mid->md", step, frame[~ok])
        z[move] = manifold.exp(z[move], v, check=False)

    # Final residual with the reference oracle step.
    good = np.flatnonzero(done)
    points = z[good]
    if len(points):
        grad = fd_gradient(f, manifold, points)
        gnorm = np.sqrt(np.sum(grad * grad, axis=-1))
        keep = gnorm <= refine_tol
        rejected_extra = good[~keep]
        good, points, gnorm = good[keep], points[keep], gnorm[keep]
    else:
        gnorm = np.zeros(0)
        rejected_extra = np.zeros(0, dtype=int)
    rejected = np.concatenate((np.flatnonzero(~done), rejected_extra))
    values = np.asarray(f(points), dtype=float) if len(points) else np.zeros(0)

    # Deterministic dedup: sort by value then coordinates.
    order = np.lexsort(tuple(points[:, i] for i in range(points.shape[1] - 1, -1, -1)) + (values,)) if len(points) else []
    kept = []
    for i in order:
        merged = False
        for slot, j in enumerate(kept):
            if manifold.distance(points[i], points[j]) < TOL.dedup_radius:
                if gnorm[i] < gnorm[j]:
                    kept[slot] = i
                merged = True
                break
        if not merged:
            kept.append(i)
    kept = np.array(kept, dtype=int)
    hess_kept = hess_at[good[kept]] if len(kept) else np.zeros((0, manifold.dim, manifold.dim))
    eigs = np.linalg.eigvalsh(hess_kept) if len(kept) else np.zeros((0, manifold.dim))
    degenerate = bool(len(kept) and np.any(np.min(np.abs(eigs), axis=-1) < 1e-6))
    return CriticalSetEstimate(
        points=points[kept] if len(kept) else np.zeros((0, manifold.ambient_dim)),
        values=values[kept] if len(kept) else np.zeros(0),
        grad_norms=gnorm[kept] if len(kept) else np.zeros(0),
        hessian_eigs=eigs,
        tolerance=refine_tol,
        rejected_seeds=seeds[rejected],
        rejected_residuals=residual[rejected],
        degenerate=degenerate,
    )


@dataclass
class GapEstimate:
    mu: float
    witnesses: list  # (q, point, gap) at every non-optimal warped critical point
    minimizers: np.ndarray
    min_value: float
    critical_values: np.ndarray  # sorted distinct critical values of the cost
    no_critical_points: bool = False


def cost_critical_values(estimate, tol=1e-6):
    vals = np.sort(estimate.values)
    out = []
    for v in vals:
        if not out or v - out[-1] > tol:
            out.append(float(v))
    return np.array(out)


def estimate_synergy_gap(family: SynergisticFamily, grid_density=64):
    """Min over modes ``q`` and non-optimal critical points ``z`` of the
    warped cost ``q`` of ``max_p (phi_q(z) - phi_p(z))``."""
    manifold = family.manifold
    base = find_critical_points(family.cost, manifold, grid_density)
    if len(base) == 0:
        raise ValueError("no critical points found for the cost")
    min_value = float(np.min(base.values))
    minimizers = base.points[base.values <= min_value + 1e-9]
    witnesses = []
    for q in range(1, family.n_modes + 1):
        crit = find_critical_points(lambda p, q=q: warped_cost(family, q, p), manifold, grid_density)
        for z in crit.points:
            if np.min(manifold.distance(z[None], minimizers)) <= TOL.minimizer_radius:
                continue
            vals = all_warped_costs(family, z[None])[0]
            witnesses.append((q, z, float(vals[q - 1] - vals.min())))
    if not witnesses:
        warnings.warn("no warped critical points outside the minimizer set; gap is unbounded")
        mu = math.inf
    else:
        mu = min(w[2] for w in witnesses)
    return GapEstimate(mu, witnesses, minimizers, min_value, cost_critical_values(base), not witnesses)


def resolve_delta(mu):
    """Default gap: ``min(0.2, 0.8 mu)``."""
    return min(0.2, 0.8 * mu)


@dataclass
class FamilyReport:
    problems: list
    gap: Optional[GapEstimate]
    gain_bounds: list

    @property
    def ok(self):
        return not self.problems


def validate_family(family: SynergisticFamily, gap: Optional[GapEstimate] = None, check_delta=True):
    """Check the warp conditions, gain bounds, threshold placement and ``delta``."""
    problems = []
    manifold = family.manifold
    z = manifold.grid(4096)
    phi = family.cost(z)
    if not np.all(np.isfinite(phi)):
        problems.append("cost is not finite on the sample grid")
    phi_max = float(np.max(phi))
    bounds = []
    for q, w in enumerate(family.warps, start=1):
        a0, da0 = float(w.shape.fn(0.0)), float(w.shape.dfn(0.0))
        if abs(a0) > 1e-12 or abs(da0) > 1e-12:
            problems.append(f"mode {q}: alpha(0) and alpha'(0) must vanish")
        r = np.linspace(0.0, max(phi_max - family.gamma, 0.0), 1001)
        if np.any(w.shape.dfn(r) <= -1.0):
            problems.append(f"mode {q}: alpha' must stay above -1")
        bound = estimate_gain_bound(family.cost, w.shape, family.gamma, w.axis)
        bounds.append(bound)
        if abs(w.gain) >= bound:
            problems.append(f"mode {q}: |gain| {abs(w.gain)} exceeds the estimated bound {bound:.4f}")
    if gap is None:
        gap = estimate_synergy_gap(family)
    vals = gap.critical_values
    second = vals[1] if len(vals) > 1 else math.inf
    if not gap.min_value < family.gamma < second:
        problems.append(f"gamma {family.gamma} not strictly between {gap.min_value:.6g} and {second:.6g}")
    if check_delta and not 0.0 < family.delta < gap.mu:
        problems.append(f"delta {family.delta} not in (0, mu={gap.mu:.6g})")
    return FamilyReport(problems, gap, bounds)


def is_unwarped(family, z):
    return family.cost(z) <= family.gamma


__all__ = [
    "CostFunction", "WarpSpec", "SynergisticFamily", "ShapeFunction", "EvalCounter",
    "DERIVATIVE_ORACLE", "warp_apply", "warp_jacobian_det", "warped_cost", "all_warped_costs",
    "min_warped", "argmin_modes", "best_mode", "fd_gradient", "estimate_gain_bound",
    "find_critical_points", "estimate_synergy_gap", "resolve_delta", "validate_family",
    "rotation_family", "cost_from_config", "polynomial_cost",
]
