"""Fixed-step simulation of hybrid systems ``{C, F, D, G}`` on manifolds.

States are flat float vectors whose blocks are described by a
:class:`StateLayout`.  Flow steps use classical RK4 in ambient
coordinates followed by a retraction of every manifold block.  A batch of
initial conditions is integrated in lockstep; each member keeps its own
hybrid time and termination status, so a batch run yields the same arcs as
separate runs.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .constants import TOL
from .manifolds import Manifold, manifold_name


class HybridError(RuntimeError):
    pass


class InfeasibleStartError(HybridError):
    pass


class EscapeError(HybridError):
    def __init__(self, message, member, last_t, last_j, last_x):
        super().__init__(message)
        self.member = member
        self.last_t = last_t
        self.last_j = last_j
        self.last_x = last_x


@dataclass(frozen=True)
class Block:
    name: str
    start: int
    stop: int
    manifold: Optional[Manifold] = None  # None marks a discrete block

    @property
    def slice(self):
        return slice(self.start, self.stop)

    @property
    def size(self):
        return self.stop - self.start


class StateLayout:
    """Ordered blocks of a flat state vector."""

    def __init__(self, blocks):
        self.blocks = tuple(blocks)
        self._by_name = {b.name: b for b in self.blocks}
        self.size = self.blocks[-1].stop if self.blocks else 0

    @classmethod
    def build(cls, *parts):
        """``build(("z", manifold), ("q", 1), ...)``: an int size marks a discrete block."""
        blocks, pos = [], 0
        for name, spec in parts:
            if isinstance(spec, Manifold):
                blocks.append(Block(name, pos, pos + spec.ambient_dim, spec))
                pos += spec.ambient_dim
            else:
                blocks.append(Block(name, pos, pos + int(spec), None))
                pos += int(spec)
        return cls(blocks)

    def __getitem__(self, name):
        return self._by_name[name]

    def __contains__(self, name):
        return name in self._by_name

    def get(self, x, name):
        return x[..., self._by_name[name].slice]

    def project(self, x):
        out = np.array(x, dtype=float, copy=True)
        for b in self.blocks:
            if b.manifold is not None:
                out[..., b.slice] = b.manifold.project(out[..., b.slice])
        return out

    def to_tangent(self, x, dx):
        """Tangent projection of every manifold block; discrete blocks zeroed."""
        out = np.zeros_like(dx)
        for b in self.blocks:
            if b.manifold is not None:
                out[..., b.slice] = b.manifold.to_tangent(x[..., b.slice], dx[..., b.slice])
        return out

    def violation(self, x):
        """Worst manifold-invariant violation per state."""
        x = np.asarray(x, dtype=float)
        worst = np.zeros(x.shape[:-1])
        for b in self.blocks:
            if b.manifold is not None:
                worst = np.maximum(worst, b.manifold.point_violation(x[..., b.slice]))
        return worst

    def columns(self, include_discrete=True):
        cols = []
        for b in self.blocks:
            if b.manifold is None and not include_discrete:
                continue
            if b.size == 1:
                cols.append(b.name)
            else:
                cols.extend(f"{b.name}{i + 1}" for i in range(b.size))
        return cols

    def describe(self):
        return [
            {"name": b.name, "start": b.start, "stop": b.stop,
             "manifold": None if b.manifold is None else manifold_name(b.manifold)}
            for b in self.blocks
        ]


def classify(sys, x, t, j):
    """``(in C, in D)`` for a batch of states."""
    if sys.sets is not None:
        return sys.sets(x, t, j)
    return sys.in_flow_set(x, t, j), sys.in_jump_set(x, t, j)


def _always(x, t, j):
    return np.ones(x.shape[:-1], dtype=bool)


def _never(x, t, j):
    return np.zeros(x.shape[:-1], dtype=bool)


@dataclass(frozen=True)
class HybridSystem:
    """Data ``{C, F, D, G}`` acting on batches ``x`` of shape ``(B, size)``.

    Every map takes ``(x, t, j)`` with ``t``, ``j`` of shape ``(B,)``.
    ``jump`` returns the deterministic selection from the set-valued jump
    map; ``jump_ties`` (optional) returns the full tie set per state.
    ``post_flow(x_old, x_new, h)`` may correct a flow step (e.g. replace an
    oscillator block by its exact rotation).  ``sets`` (optional) returns
    both memberships at once when they share work.
    """

    layout: StateLayout
    flow: Callable
    jump: Callable
    in_flow_set: Callable = _always
    in_jump_set: Callable = _never
    jump_ties: Optional[Callable] = None
    post_flow: Optional[Callable] = None
    sets: Optional[Callable] = None
    name: str = "hybrid"
    meta: dict = field(default_factory=dict, compare=False)


class JumpPolicy(str, enum.Enum):
    JUMP_FIRST = "jump_first"
    FLOW_FIRST = "flow_first"


class Termination(str, enum.Enum):
    TIME_LIMIT = "TimeLimit"
    JUMP_LIMIT = "JumpLimit"
    CONVERGED = "Converged"
    STALLED = "Stalled"


@dataclass(frozen=True)
class SolverConfig:
    step: float = 0.01
    max_t: float = 10.0
    max_jumps: int = 100
    boundary_tol: float = 1e-12
    jump_policy: JumpPolicy = JumpPolicy.JUMP_FIRST
    record_stride: int = 1
    refine_events: bool = False

    def __post_init__(self):
        if not 0.0 < self.step <= 0.1:
            raise ValueError(f"step must lie in (0, 0.1], got {self.step}")
        if self.max_t <= 0.0:
            raise ValueError("max_t must be positive")
        if self.max_jumps < 1:
            raise ValueError("max_jumps must be a positive integer")
        if self.boundary_tol < 0.0:
            raise ValueError("boundary_tol must be nonnegative")
        if self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        object.__setattr__(self, "jump_policy", JumpPolicy(self.jump_policy))


@dataclass(frozen=True)
class Convergence:
    """Stop once the ``block`` component stays within ``tol`` of ``target``
    for ``hold`` units of continuous time."""

    manifold: Manifold
    target: np.ndarray
    tol: float = 1e-3
    hold: float = 1.0
    block: str = "z"


@dataclass(frozen=True)
class Stall:
    """Stop when the flow speed stays below ``speed`` for ``hold`` time units."""

    speed: float
    hold: float = 1.0


@dataclass
class HybridArc:
    t: np.ndarray
    j: np.ndarray
    x: np.ndarray
    jump_indices: np.ndarray
    termination: Termination
    layout: StateLayout
    jump_ties: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def block(self, name):
        return self.layout.get(self.x, name)

    @property
    def final(self):
        return self.x[-1]

    @property
    def n_jumps(self):
        return int(self.j[-1])


def rk4_step(sys, x, t, j, h):
    hh = h[:, None]
    k1 = sys.flow(x, t, j)
    k2 = sys.flow(x + 0.5 * hh * k1, t + 0.5 * h, j)
    k3 = sys.flow(x + 0.5 * hh * k2, t + 0.5 * h, j)
    k4 = sys.flow(x + hh * k3, t + h, j)
    x_new = sys.layout.project(x + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    if sys.post_flow is not None:
        x_new = sys.post_flow(x, x_new, h)
    return x_new, np.sqrt((k1 * k1).sum(axis=-1))


class _Recorder:
    """Chronological log of (member, t, j, x) rows, split per member at the end."""

    def __init__(self):
        self.members, self.t, self.j, self.x = [], [], [], []

    def add(self, members, t, j, x):
        if len(members):
            self.members.append(np.array(members))
            self.t.append(np.array(t, dtype=float))
            self.j.append(np.array(j, dtype=int))
            self.x.append(np.array(x, dtype=float))

    def split(self, n):
        members = np.concatenate(self.members)
        order = np.argsort(members, kind="stable")
        t = np.concatenate(self.t)[order]
        j = np.concatenate(self.j)[order]
        x = np.concatenate(self.x)[order]
        counts = np.bincount(members, minlength=n)
        bounds = np.concatenate(([0], np.cumsum(counts)))
        return [(t[a:b], j[a:b], x[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]


def solve_batch(sys: HybridSystem, x0, cfg: SolverConfig, convergence: Optional[Convergence] = None,
                stall: Optional[Stall] = None):
    """Simulate every row of ``x0``; returns one :class:`HybridArc` per row."""
    x = sys.layout.project(np.atleast_2d(np.asarray(x0, dtype=float)))
    n = len(x)
    t = np.zeros(n)
    j = np.zeros(n, dtype=int)
    in_c, in_d = classify(sys, x, t, j)
    bad = np.flatnonzero(~(in_c | in_d))
    if bad.size:
        raise InfeasibleStartError(f"initial state(s) {bad.tolist()} outside C and D")

    active = np.ones(n, dtype=bool)
    status = [None] * n
    ties = [[] for _ in range(n)]
    near_since = np.full(n, np.nan)
    slow_since = np.full(n, np.nan)
    rec = _Recorder()
    rec.add(np.arange(n), t, j, x)
    jump_first = cfg.jump_policy is JumpPolicy.JUMP_FIRST
    tol = cfg.boundary_tol
    steps = 0
    eps_t = 1e-9 * cfg.step

    def finish(idx, why):
        for i in idx:
            status[i] = why
        active[idx] = False

    while active.any():
        # Jumps, possibly chained, before the next flow step.
        while True:
            act = np.flatnonzero(active)
            if act.size == 0:
                break
            c_a, d_a = in_c[act], in_d[act]
            want = d_a & (~c_a if not jump_first else np.ones_like(d_a))
            stuck = ~(c_a | d_a)
            if stuck.any():
                i = int(act[np.flatnonzero(stuck)[0]])
                raise EscapeError(f"member {i} left C and D at t={t[i]:.6g}", i, t[i], j[i], x[i].copy())
            if not want.any():
                break
            idx = act[want]
            if sys.jump_ties is not None:
                for i, tie in zip(idx, sys.jump_ties(x[idx], t[idx], j[idx])):
                    ties[i].append(tie)
            x[idx] = sys.layout.project(sys.jump(x[idx], t[idx], j[idx]))
            j[idx] += 1
            in_c[idx], in_d[idx] = classify(sys, x[idx], t[idx], j[idx])
            rec.add(idx, t[idx], j[idx], x[idx])
            finish(idx[j[idx] >= cfg.max_jumps], Termination.JUMP_LIMIT)

        act = np.flatnonzero(active)
        if act.size == 0:
            break
        done_t = act[t[act] >= cfg.max_t - eps_t]
        finish(done_t, Termination.TIME_LIMIT)
        act = np.flatnonzero(active)
        if act.size == 0:
            break

        # The flow is evaluated on the whole batch, in member order, so that
        # systems may close over per-member parameter arrays; finished
        # members are discarded afterwards.
        h = np.clip(cfg.max_t - t, 0.0, cfg.step)
        x_full, speed_full = rk4_step(sys, x, t, j, h)
        t_full = t + h
        if cfg.refine_events and jump_first:
            x_full, t_full = _refine_entry(sys, x, x_full, t, t_full, j, h, tol, active)
        x_new, t_new, speed = x_full[act], t_full[act], speed_full[act]
        c_new, d_new = classify(sys, x_new, t_new, j[act])
        ok = c_new | d_new
        if not ok.all():
            i = int(act[np.flatnonzero(~ok)[0]])
            raise EscapeError(f"member {i} escaped C and D during flow at t={t[i]:.6g}", i, t[i], j[i], x[i].copy())
        h = h[act]
        x[act] = x_new
        t[act] = t_new
        in_c[act], in_d[act] = c_new, d_new
        steps += 1

        if convergence is not None:
            blk = sys.layout[convergence.block]
            d = convergence.manifold.distance(x[act][:, blk.slice], convergence.target)
            near = d < convergence.tol
            start = near_since[act]
            start = np.where(near & np.isnan(start), t[act], start)
            start = np.where(near, start, np.nan)
            near_since[act] = start
            conv = near & (t[act] - start >= convergence.hold - eps_t)
            finish(act[conv], Termination.CONVERGED)
        if stall is not None:
            slow = speed < stall.speed
            start = slow_since[act]
            start = np.where(slow & np.isnan(start), t[act] - h, start)
            start = np.where(slow, start, np.nan)
            slow_since[act] = start
            stalled = slow & (t[act] - start >= stall.hold - eps_t) & active[act]
            finish(act[stalled], Termination.STALLED)

        if steps % cfg.record_stride == 0:
            rec.add(act, t[act], j[act], x[act])
        else:
            ended = act[~active[act]]
            rec.add(ended, t[ended], j[ended], x[ended])
            # Members that stop on the time limit next round need their last sample.
            closing = act[active[act] & (t[act] >= cfg.max_t - eps_t)]
            rec.add(closing, t[closing], j[closing], x[closing])

    arcs = []
    for i, (ti, ji, xi) in enumerate(rec.split(n)):
        keep = _drop_duplicates(ti, ji)
        ti, ji, xi = ti[keep], ji[keep], xi[keep]
        jumps = np.flatnonzero(np.diff(ji) > 0) + 1
        arcs.append(HybridArc(ti, ji, xi, jumps, status[i], sys.layout, ties[i]))
    return arcs


def _drop_duplicates(t, j):
    keep = np.ones(len(t), dtype=bool)
    keep[1:] = (t[1:] != t[:-1]) | (j[1:] != j[:-1])
    return keep


def _refine_entry(sys, x_old, x_new, t_old, t_new, j, h, tol, active):
    """Bisect the flow step of active members that overshot the flow set so
    they stop (within ``tol`` in time) where they leave it."""
    c_new = sys.in_flow_set(x_new, t_new, j)
    deep = active & ~c_new
    if not deep.any():
        return x_new, t_new
    lo = np.zeros(len(h))
    hi = np.ones(len(h))
    for _ in range(60):
        mid = np.where(deep, 0.5 * (lo + hi), 1.0)
        xm, _ = rk4_step(sys, x_old, t_old, j, mid * h)
        inside = sys.in_flow_set(xm, t_old + mid * h, j)
        lo = np.where(deep & inside, mid, lo)
        hi = np.where(deep & ~inside, mid, hi)
        if np.all((hi - lo)[deep] * h[deep] <= max(tol, 1e-15)):
            break
    frac = np.where(deep, hi, 1.0)
    xs, _ = rk4_step(sys, x_old, t_old, j, frac * h)
    return np.where(deep[:, None], xs, x_new), np.where(deep, t_old + frac * h, t_new)


def solve(sys: HybridSystem, x0, cfg: SolverConfig, convergence: Optional[Convergence] = None,
          stall: Optional[Stall] = None):
    """Simulate a single initial state."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1:
        raise ValueError("solve takes one state; use solve_batch for several")
    return solve_batch(sys, x0[None], cfg, convergence, stall)[0]


# -- arc export ---------------------------------------------------------------


def _fmt(v):
    return format(float(v), ".17g")


def arc_to_csv(arc: HybridArc, diagnostics=None):
    """CSV text with header ``t,j,<state columns>,V,uC,mode``."""
    layout = arc.layout
    state_cols = layout.columns(include_discrete=False)
    mode_block = layout["q"] if "q" in layout else None
    cont = np.concatenate(
        [np.arange(b.start, b.stop) for b in layout.blocks if b.manifold is not None]
    ) if state_cols else np.zeros(0, dtype=int)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "j", *state_cols, "V", "uC", "mode"])
    for k in range(len(arc)):
        V = diagnostics.V[k] if diagnostics is not None else math.nan
        uC = diagnostics.uC[k] if diagnostics is not None else math.nan
        mode = int(round(arc.x[k, mode_block.start])) if mode_block is not None else ""
        w.writerow([_fmt(arc.t[k]), int(arc.j[k]), *(_fmt(v) for v in arc.x[k, cont]), _fmt(V), _fmt(uC), mode])
    return buf.getvalue()


def arc_to_json(arc: HybridArc, metadata=None, diagnostics=None):
    payload = {
        "metadata": metadata or {},
        "termination": arc.termination.value if arc.termination else None,
        "layout": arc.layout.describe(),
        "t": [float(v) for v in arc.t],
        "j": [int(v) for v in arc.j],
        "x": arc.x.tolist(),
        "jump_indices": [int(v) for v in arc.jump_indices],
        "jump_ties": [list(map(int, tie)) for tie in arc.jump_ties],
    }
    if diagnostics is not None:
        payload["V"] = [float(v) for v in diagnostics.V]
        payload["uC"] = [float(v) for v in diagnostics.uC]
    return json.dumps(payload, sort_keys=True, indent=1)


__all__ = [
    "Block", "StateLayout", "HybridSystem", "SolverConfig", "JumpPolicy", "Termination",
    "Convergence", "Stall", "HybridArc", "solve", "solve_batch", "arc_to_csv", "arc_to_json",
    "InfeasibleStartError", "EscapeError", "TOL",
]
