import math

import numpy as np
import pytest

from hybrid_zo.first_order import build_H1, make_state
from hybrid_zo.hybrid import (
    Convergence, EscapeError, HybridSystem, InfeasibleStartError, SolverConfig, StateLayout, Termination,
    arc_to_csv, arc_to_json, solve, solve_batch,
)
from hybrid_zo.manifolds import CIRCLE, SPHERE, Torus


def line_layout():
    return StateLayout.build(("z", CIRCLE), ("q", 1))


def rotation_system(rate=1.0):
    lay = line_layout()

    def flow(x, t, j):
        dx = np.zeros_like(x)
        z = x[:, :2]
        dx[:, :2] = rate * np.stack((-z[:, 1], z[:, 0]), -1)
        return dx

    return HybridSystem(lay, flow, lambda x, t, j: x)


def test_layout():
    lay = StateLayout.build(("z", SPHERE), ("q", 1), ("chi", Torus(2)))
    assert lay.size == 8 and "chi" in lay and "w" not in lay
    assert lay.columns() == ["z1", "z2", "z3", "q", "chi1", "chi2", "chi3", "chi4"]
    x = np.arange(8.0)[None] + 1
    assert np.array_equal(lay.get(x, "q"), [[4.0]])
    p = lay.project(x)
    assert lay.violation(p).max() < 1e-15 and p[0, 3] == 4.0


def test_constant_arc():
    lay = line_layout()
    sys = HybridSystem(lay, lambda x, t, j: np.zeros_like(x), lambda x, t, j: x)
    arc = solve(sys, np.array([1.0, 0.0, 1.0]), SolverConfig(step=0.1, max_t=2.0))
    assert np.all(arc.x == arc.x[0]) and np.all(arc.j == 0)
    assert arc.termination is Termination.TIME_LIMIT and arc.t[-1] == pytest.approx(2.0)


def test_pure_jumps():
    lay = line_layout()
    sys = HybridSystem(lay, lambda x, t, j: np.zeros_like(x), lambda x, t, j: x,
                       in_flow_set=lambda x, t, j: np.zeros(len(x), bool),
                       in_jump_set=lambda x, t, j: np.ones(len(x), bool))
    arc = solve(sys, np.array([1.0, 0.0, 1.0]), SolverConfig(max_jumps=7))
    assert arc.n_jumps == 7 and np.all(arc.t == 0.0)
    assert arc.termination is Termination.JUMP_LIMIT
    assert list(arc.jump_indices) == list(range(1, 8))


def test_rotation_accuracy_and_time_domain():
    h = 0.05
    arc = solve(rotation_system(), np.array([1.0, 0.0, 1.0]), SolverConfig(step=h, max_t=1.0))
    # Projected RK4 on a rotation advances the phase by arg of its stability polynomial.
    per_step = np.angle(1 + 1j * h - h**2 / 2 - 1j * h**3 / 6 + h**4 / 24)
    theta = np.unwrap(np.arctan2(arc.x[:, 1], arc.x[:, 0]))
    assert np.allclose(theta, per_step * np.arange(len(arc)), atol=1e-12)
    assert abs(theta[-1] - 1.0) < 1e-7
    assert np.all(np.diff(arc.t) >= 0) and np.all(np.diff(arc.j) >= 0)
    assert CIRCLE.point_violation(arc.x[:, :2]).max() < 1e-15


def test_infeasible_and_escape():
    lay = line_layout()
    nowhere = HybridSystem(lay, lambda x, t, j: np.zeros_like(x), lambda x, t, j: x,
                           in_flow_set=lambda x, t, j: np.zeros(len(x), bool))
    with pytest.raises(InfeasibleStartError):
        solve(nowhere, np.array([1.0, 0.0, 1.0]), SolverConfig())
    upper = HybridSystem(rotation_system().layout, rotation_system().flow, lambda x, t, j: x,
                         in_flow_set=lambda x, t, j: x[:, 1] >= 0)
    with pytest.raises(EscapeError) as err:
        solve(upper, np.array([1.0, 0.0, 1.0]), SolverConfig(step=0.05, max_t=10.0))
    assert err.value.last_t <= math.pi + 0.05


def threshold_state(family, layout):
    """A state whose mode excess equals delta to root-finding precision."""
    from scipy.optimize import brentq

    from hybrid_zo.warp import all_warped_costs

    def excess(th):
        v = all_warped_costs(family, np.array([math.cos(th), math.sin(th)]))
        return v[0] - v.min() - family.delta

    th = brentq(excess, math.pi / 2, 2.72, xtol=1e-15)
    return make_state(layout, [math.cos(th), math.sin(th)], 1)[0]


def test_jump_policies_on_overlap(circle_fam):
    h1 = build_H1(circle_fam, boundary_tol=1e-9)
    x0 = threshold_state(circle_fam, h1.layout)
    c, d = h1.sets(x0[None], None, None)
    assert c[0] and d[0]
    first = solve(h1, x0, SolverConfig(step=0.05, max_t=0.05, jump_policy="jump_first"))
    assert first.n_jumps == 1 and first.t[first.jump_indices[0]] == 0.0
    flow = solve(h1, x0, SolverConfig(step=0.05, max_t=0.05, jump_policy="flow_first"))
    assert flow.j[1] == 0 and flow.t[1] > 0.0


def test_convergence_termination(circle_fam):
    h1 = build_H1(circle_fam)
    conv = Convergence(CIRCLE, np.array([1.0, 0.0]), 1e-3, 1.0)
    arc = solve(h1, make_state(h1.layout, [0.0, 1.0], 1)[0], SolverConfig(step=0.05, max_t=50), convergence=conv)
    assert arc.termination is Termination.CONVERGED and arc.t[-1] < 50


def test_batch_matches_single_bitwise(circle_fam):
    h1 = build_H1(circle_fam)
    z = CIRCLE.grid(12)
    x0 = make_state(h1.layout, np.repeat(z, 2, axis=0), np.tile([1, 2], 12))
    cfg = SolverConfig(step=0.05, max_t=8.0)
    batch = solve_batch(h1, x0, cfg)
    for i in (0, 7, 13, 23):
        single = solve(h1, x0[i], cfg)
        assert np.array_equal(single.x, batch[i].x) and np.array_equal(single.t, batch[i].t)


def test_record_stride_keeps_jumps_and_final(circle_fam):
    h1 = build_H1(circle_fam)
    x0 = make_state(h1.layout, [math.cos(2.72388), math.sin(2.72388)], 1)[0]
    full = solve(h1, x0, SolverConfig(step=0.05, max_t=5.0))
    sparse = solve(h1, x0, SolverConfig(step=0.05, max_t=5.0, record_stride=10))
    assert sparse.n_jumps == full.n_jumps >= 1
    assert np.array_equal(sparse.x[-1], full.x[-1]) and sparse.t[-1] == full.t[-1]
    assert len(sparse) < len(full)


def test_refine_events_lands_on_boundary():
    lay = line_layout()
    base = rotation_system()
    sys = HybridSystem(lay, base.flow, lambda x, t, j: x * np.array([1.0, -1.0, 1.0]),
                       in_flow_set=lambda x, t, j: x[:, 1] >= 0, in_jump_set=lambda x, t, j: x[:, 1] <= 0)
    x0 = np.array([math.cos(3.0), math.sin(3.0), 1.0])
    arc = solve(sys, x0, SolverConfig(step=0.1, max_t=0.3, max_jumps=1, refine_events=True))
    k = arc.jump_indices[0]
    assert arc.t[k] == pytest.approx(math.pi - 3.0, abs=1e-6)  # RK4 phase error ~h^5/120
    assert abs(arc.x[k - 1, 1]) < 1e-12


def test_csv_and_json_export(circle_fam):
    h1 = build_H1(circle_fam)
    arc = solve(h1, make_state(h1.layout, [0.0, -1.0], 2)[0], SolverConfig(step=0.05, max_t=0.2))
    text = arc_to_csv(arc)
    lines = text.splitlines()
    assert lines[0] == "t,j,z1,z2,V,uC,mode"
    assert len(lines) == len(arc) + 1
    row = lines[1].split(",")
    assert float(row[2]) == arc.x[0, 0] and row[-1] == "2"
    import json
    doc = json.loads(arc_to_json(arc, {"k": 1}))
    assert doc["metadata"] == {"k": 1} and len(doc["t"]) == len(arc)
    assert np.array_equal(np.array(doc["x"]), arc.x)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(step=0.5)
    with pytest.raises(ValueError):
        SolverConfig(max_jumps=0)
    with pytest.raises(ValueError):
        SolverConfig(jump_policy="sometimes")
