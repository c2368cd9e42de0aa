import math

import numpy as np
import pytest

from hybrid_zo import oracles
from hybrid_zo.first_order import (
    build_gradient_flow, build_H1, build_single_mode_flow, fo_flow_field, make_state, polish_equilibrium,
)
from hybrid_zo.fixtures import load_fixtures
from hybrid_zo.hybrid import Convergence, SolverConfig, solve, solve_batch
from hybrid_zo.manifolds import CIRCLE, SPHERE
from hybrid_zo.switching import (
    apply_jump_delta_system, lyapunov_diagnostics, mode_excess, threshold_sets, tie_sets,
)
from hybrid_zo.warp import all_warped_costs, estimate_synergy_gap, find_critical_points, min_warped, warped_cost

from conftest import circle_family

CRIT = np.array(load_fixtures()["circle"]["critical_points"])


def state(layout, z, q):
    return make_state(layout, z, q)


def test_sets_at_argmin_mode(circle_fam, rng):
    h1 = build_H1(circle_fam)
    z = CIRCLE.random_point(rng, 500)
    vals = all_warped_costs(circle_fam, z)
    x = state(h1.layout, z, vals.argmin(axis=-1) + 1)
    c, d = h1.sets(x, None, None)
    assert c.all() and not d.any()


def test_threshold_state_in_both_sets(circle_fam):
    lay = build_H1(circle_fam).layout
    in_flow, in_jump = threshold_sets(circle_fam, lay, boundary_tol=0.0)
    # Move the threshold onto a known excess value: both predicates hold there.
    z = np.array([math.cos(2.6), math.sin(2.6)])
    x = state(lay, z, 1)
    e = float(mode_excess(circle_fam, lay, x)[0])
    fam = circle_fam.with_delta(e)
    f2, j2 = threshold_sets(fam, lay, boundary_tol=0.0)
    assert f2(x)[0] and j2(x)[0]


def test_warped_critical_points_strictly_in_jump_set(circle_fam, sphere_fam):
    for fam in (circle_fam, sphere_fam):
        lay = build_H1(fam).layout
        gap = estimate_synergy_gap(fam)
        assert gap.witnesses
        for q, z, g in gap.witnesses:
            x = state(lay, z, q)
            assert mode_excess(fam, lay, x)[0] > fam.delta  # interior of the jump set
            c, d = build_H1(fam).sets(x, None, None)
            assert d[0] and not c[0]


def test_jump_resets_to_minimum(circle_fam, rng):
    lay = build_H1(circle_fam).layout
    z = CIRCLE.random_point(rng, 2000)
    x = state(lay, z, 1)
    jumpable = mode_excess(circle_fam, lay, x) >= circle_fam.delta
    assert jumpable.any()
    xp = apply_jump_delta_system(circle_fam, lay, x[jumpable])
    qp = xp[:, 2].astype(int)
    assert np.allclose(warped_cost(circle_fam, qp, z[jumpable]), min_warped(circle_fam, z[jumpable]), atol=0)
    assert np.array_equal(xp[:, :2], x[jumpable, :2])
    with pytest.raises(ValueError):
        apply_jump_delta_system(circle_fam, lay, state(lay, [1.0, 0.0], 1))


def test_jump_with_gap_exactly_delta(circle_fam):
    lay = build_H1(circle_fam).layout
    x = state(lay, [math.cos(2.6), math.sin(2.6)], 1)
    e = float(mode_excess(circle_fam, lay, x)[0])
    fam = circle_fam.with_delta(e)
    before = warped_cost(fam, 1, x[:, :2])
    xp = apply_jump_delta_system(fam, lay, x)
    after = warped_cost(fam, int(xp[0, 2]), xp[:, :2])
    assert after - before == pytest.approx(-fam.delta, abs=1e-15)


def test_jump_at_critical_point_decreases_by_oracle_gap(circle_fam):
    lay = build_H1(circle_fam).layout
    th = oracles.circle_critical_angle()
    z = np.array([math.cos(th), math.sin(th)])
    a, b = oracles.circle_warped_costs(th)
    x = state(lay, z, 1)
    xp = apply_jump_delta_system(circle_fam, lay, x)
    drop = warped_cost(circle_fam, int(xp[0, 2]), z) - warped_cost(circle_fam, 1, z)
    assert drop == pytest.approx(b - a, abs=1e-12) and drop <= -circle_fam.delta


def test_ties_at_antipode(circle_fam):
    lay = build_H1(circle_fam).layout
    assert tie_sets(circle_fam, lay, state(lay, [-1.0, 0.0], 1)) == [(1, 2)]
    assert tie_sets(circle_fam, lay, state(lay, [math.cos(2.5), math.sin(2.5)], 1)) in ([(1,)], [(2,)])


def test_flow_field_examples(circle_fam):
    assert np.linalg.norm(fo_flow_field(circle_fam, np.array([[1.0, 0.0]]), np.array([1]))) < 1e-6
    f = fo_flow_field(circle_fam, np.array([[0.0, 1.0]]), np.array([2]))[0]
    assert np.linalg.norm(f) == pytest.approx(1.0, abs=1e-5)
    assert f @ np.array([1.0, 0.0]) > 0.99  # -d/dtheta at theta = pi/2, toward theta = 0
    for k, z in enumerate(CRIT):
        q = 1 + k  # fixture order: mode 1 then mode 2
        assert np.linalg.norm(fo_flow_field(circle_fam, z[None], np.array([q]))) < 1e-4


def test_lyapunov_at_minimizer(circle_fam):
    h1 = build_H1(circle_fam)
    arc = solve(h1, state(h1.layout, [1.0, 0.0], 2)[0], SolverConfig(step=0.05, max_t=5))
    rep = lyapunov_diagnostics(circle_fam, arc, 0.0)
    assert rep.V.max() <= 1e-6 and rep.uC.min() >= -1e-6
    assert arc.n_jumps == 0 and CIRCLE.distance(arc.x[:, :2], np.array([1.0, 0.0])).max() < 1e-3


def test_h1_from_antipode_converges():
    fam = circle_family()
    h1 = build_H1(fam)
    for q in (1, 2):
        arc = solve(h1, state(h1.layout, [-1.0, 0.0], q)[0], SolverConfig(step=0.05, max_t=50))
        assert CIRCLE.distance(arc.x[-1, :2], np.array([1.0, 0.0])) < 1e-3
        assert 0 <= arc.n_jumps <= 3
        rep = lyapunov_diagnostics(fam, arc, 0.0)
        assert rep.flow_violations == 0 and rep.jump_violations == 0


def test_h1_first_event_at_critical_point_is_jump(circle_fam):
    h1 = build_H1(circle_fam)
    arc = solve(h1, state(h1.layout, CRIT[0], 1)[0], SolverConfig(step=0.05, max_t=1))
    assert arc.j[1] == 1 and arc.t[1] == 0.0


def test_h1_sphere_random_starts(sphere_fam, rng):
    h1 = build_H1(sphere_fam)
    z = SPHERE.random_point(rng, 100)
    x0 = state(h1.layout, z, rng.integers(1, 3, 100))
    target = np.array([0.0, 0.0, 1.0])
    arcs = solve_batch(h1, x0, SolverConfig(step=0.05, max_t=50),
                       convergence=Convergence(SPHERE, target, 1e-3, 1.0))
    for arc in arcs:
        assert SPHERE.distance(arc.x[-1, :3], target) < 1e-3 and arc.t[-1] < 50
        rep = lyapunov_diagnostics(sphere_fam, arc, 0.0)
        assert rep.flow_violations == rep.jump_violations == 0


def test_single_mode_flow_stationary_at_polished_point(circle_fam):
    sm = build_single_mode_flow(circle_fam)
    z, res = polish_equilibrium(lambda p: fo_flow_field(circle_fam, p, np.ones(len(p), int)), CIRCLE, CRIT[0])
    assert res == 0.0 and CIRCLE.distance(z, CRIT[0]) < 1e-10
    arc = solve(sm, state(sm.layout, z, 1)[0], SolverConfig(step=0.05, max_t=10))
    assert CIRCLE.distance(arc.x[-1, :2], z) < 1e-6 and arc.n_jumps == 0


def test_gradient_flow_at_maximizer_stays(circle_fam):
    gf = build_gradient_flow(circle_fam.cost)
    arc = solve(gf, state(gf.layout, [-1.0, 0.0], 1)[0], SolverConfig(step=0.05, max_t=10))
    assert np.array_equal(arc.x[-1], arc.x[0])


def test_critical_points_of_warped_costs_match_oracle(circle_fam):
    th = oracles.circle_critical_angle()
    c = find_critical_points(lambda p: warped_cost(circle_fam, 1, p), CIRCLE)
    ang = np.arctan2(c.points[:, 1], c.points[:, 0])
    assert np.min(np.abs(ang - th)) < 1e-7
