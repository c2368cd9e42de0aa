import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_zo import oracles
from hybrid_zo.manifolds import CIRCLE, SPHERE, KindMismatchError
from hybrid_zo.warp import (
    DERIVATIVE_ORACLE, PSI, CostFunction, WarpSpec, all_warped_costs, argmin_modes, cost_from_config,
    estimate_gain_bound, estimate_synergy_gap, fd_gradient, find_critical_points, min_warped, resolve_delta,
    shape_from_name, skew, validate_family, warp_apply, warp_jacobian_det, warped_cost,
)

from conftest import circle_family

SQ = shape_from_name("square")
PHI1 = cost_from_config("circle_1_minus_z1", CIRCLE)
PHI2 = cost_from_config("sphere_1_minus_z3", SPHERE)


def at(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def test_warp_identity_below_threshold():
    assert np.array_equal(warp_apply(WarpSpec(0.5, SQ, 1.0), PHI1, np.array([1.0, 0.0])), [1.0, 0.0])


def test_circle_warp_matches_expm_oracle():
    out = warp_apply(WarpSpec(0.5, SQ, 1.0), PHI1, np.array([-1.0, 0.0]))
    ref = oracles.rotation_by_expm(PSI, 0.5, [-1.0, 0.0])
    assert np.allclose(out, ref, atol=1e-14)
    assert np.allclose(out, [-math.cos(0.5), -math.sin(0.5)], atol=1e-14)


def test_sphere_warp_matches_expm_oracle():
    u = (0.0, 1.0, 0.0)
    out = warp_apply(WarpSpec(0.5, SQ, 1.0, u), PHI2, np.array([0.0, 0.0, -1.0]))
    ref = oracles.rotation_by_expm(skew(u), 0.5, [0.0, 0.0, -1.0])
    assert np.allclose(out, ref, atol=1e-14)
    assert np.allclose(out, [-math.sin(0.5), 0.0, -math.cos(0.5)], atol=1e-14)


def test_rodrigues_against_expm_random(rng):
    for _ in range(50):
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        z = SPHERE.random_point(rng)
        beta = rng.uniform(-3, 3)
        spec = WarpSpec(1.0, SQ, 1.0, tuple(u))
        assert np.allclose(spec.rotate(z, np.array(beta)), oracles.rotation_by_expm(skew(u), beta, z), atol=1e-12)


def test_generator_mismatch():
    with pytest.raises(KindMismatchError):
        warp_apply(WarpSpec(0.5, SQ, 1.0, (0.0, 1.0, 0.0)), PHI1, np.array([1.0, 0.0]))


def test_jacobian_examples():
    spec = WarpSpec(0.5, SQ, 1.0)
    assert warp_jacobian_det(spec, PHI1, np.array([1.0, 0.0])) == 1.0
    assert warp_jacobian_det(WarpSpec(0.0, SQ, 1.0), PHI1, at(2.5)) == 1.0
    assert warp_jacobian_det(spec, PHI1, np.array([-1.0, 0.0])) == pytest.approx(1.0, abs=1e-9)


def test_jacobian_matches_analytic_circle():
    # d/dtheta (theta + k (cos theta)^2) = 1 - k sin(2 theta) where cos theta < 0
    th = np.linspace(math.pi / 2 + 0.01, 3 * math.pi / 2 - 0.01, 200)
    det = warp_jacobian_det(WarpSpec(0.5, SQ, 1.0), PHI1, np.stack((np.cos(th), np.sin(th)), -1))
    assert np.allclose(det, 1 - 0.5 * np.sin(2 * th), atol=1e-8)


def test_warped_cost_examples(circle_fam):
    z = np.array([-1.0, 0.0])
    want = 1 + math.cos(0.5)
    assert warped_cost(circle_fam, 1, z) == pytest.approx(want, abs=1e-12)
    assert warped_cost(circle_fam, 2, z) == pytest.approx(want, abs=1e-12)
    assert min_warped(circle_fam, z) == pytest.approx(want, abs=1e-12)
    assert set(argmin_modes(circle_fam, z)) == {1, 2}
    assert len(argmin_modes(circle_fam, at(math.pi - 0.3))) == 1
    assert set(argmin_modes(circle_fam, at(0.4))) == {1, 2}


def test_warped_cost_below_threshold_is_cost(circle_fam, rng):
    th = rng.uniform(-math.pi / 2, math.pi / 2, 500)
    z = np.stack((np.cos(th), np.sin(th)), -1)
    for q in (1, 2):
        assert np.array_equal(warped_cost(circle_fam, q, z), PHI1(z))
    assert np.array_equal(min_warped(circle_fam, z), PHI1(z))


def test_warped_cost_vector_modes_match_scalar(sphere_fam, rng):
    z = SPHERE.random_point(rng, 300)
    q = rng.integers(1, 3, 300)
    vec = warped_cost(sphere_fam, q, z)
    for m in (1, 2):
        assert np.allclose(vec[q == m], warped_cost(sphere_fam, m, z[q == m]), atol=0, rtol=0)
    allc = all_warped_costs(sphere_fam, z)
    assert np.array_equal(allc[np.arange(300), q - 1], vec)


def test_warped_cost_closed_form_circle(circle_fam):
    th = np.linspace(-math.pi, math.pi, 721)
    z = np.stack((np.cos(th), np.sin(th)), -1)
    ref = np.array([oracles.circle_warped_costs(t) for t in th])
    assert np.allclose(all_warped_costs(circle_fam, z), ref, atol=1e-12)


def test_jacobian_positive_on_random_points(rng):
    zc = CIRCLE.random_point(rng, 10000)
    zs = SPHERE.random_point(rng, 10000)
    for k in (0.5, -0.5):
        assert warp_jacobian_det(WarpSpec(k, SQ, 1.0), PHI1, zc).min() > 0
        assert warp_jacobian_det(WarpSpec(k, SQ, 1.0, (0.0, 1.0, 0.0)), PHI2, zs).min() > 0


def test_gain_bound():
    b = estimate_gain_bound(PHI1, "square", 1.0)
    assert 0.9 <= b < 0.9 + 1e-6  # oracle: safety 0.9 over max |sin 2 theta| = 1
    assert estimate_gain_bound(PHI1, "square", 5.0) == math.inf
    assert estimate_gain_bound(PHI1, "zero", 1.0) == math.inf
    with pytest.raises(ValueError):
        estimate_gain_bound(PHI1, "square", 1.0, num_samples=10)


def test_critical_points_of_costs():
    c = find_critical_points(PHI1, CIRCLE)
    assert len(c) == 2
    assert np.allclose(sorted(c.points[:, 0]), [-1.0, 1.0], atol=1e-6)
    s = find_critical_points(PHI2, SPHERE)
    assert len(s) == 2
    assert np.allclose(sorted(s.points[:, 2]), [-1.0, 1.0], atol=1e-6)
    assert c.grad_norms.max() < 1e-6 and not c.degenerate


def test_constant_cost_degenerate():
    const = CostFunction(CIRCLE, lambda z: np.zeros(z.shape[:-1]), "const")
    c = find_critical_points(const, CIRCLE)
    assert c.degenerate and len(c) >= 1
    g = fd_gradient(const, CIRCLE, CIRCLE.grid(50))
    assert np.abs(g).max() <= 1e-9


def test_fd_gradient_analytic():
    g = fd_gradient(PHI1, CIRCLE, at(math.pi / 2))
    assert np.linalg.norm(g) == pytest.approx(1.0, abs=1e-6)
    assert g @ CIRCLE.tangent_frame(at(math.pi / 2))[0] > 0  # toward increasing phi
    th = np.linspace(-3, 3, 101)
    g = fd_gradient(PHI1, CIRCLE, np.stack((np.cos(th), np.sin(th)), -1))
    ref = np.array([oracles.circle_gradient(t) for t in th])
    assert np.allclose(g, ref, atol=1e-9)
    assert np.linalg.norm(fd_gradient(PHI1, CIRCLE, np.array([1.0, 0.0]))) < 1e-6


def test_fd_gradient_counts():
    before = DERIVATIVE_ORACLE.count
    fd_gradient(PHI1, CIRCLE, CIRCLE.grid(7))
    assert DERIVATIVE_ORACLE.count - before == 7


def test_gap_circle_matches_root_find_oracle(circle_fam):
    gap = estimate_synergy_gap(circle_fam)
    assert gap.mu == pytest.approx(oracles.circle_gap(), abs=1e-8)
    th = oracles.circle_critical_angle()
    assert th + 0.5 * math.cos(th) ** 2 == pytest.approx(math.pi, abs=1e-14)
    assert resolve_delta(gap.mu) == 0.2


def test_gap_sphere(sphere_fam):
    gap = estimate_synergy_gap(sphere_fam)
    assert gap.mu >= 0.25
    assert gap.mu == pytest.approx(oracles.circle_gap(), abs=1e-8)  # reduces to the x-z great circle


def test_gap_equal_gains_is_zero():
    gap = estimate_synergy_gap(circle_family(gains=(0.5, 0.5)))
    assert gap.mu == pytest.approx(0.0, abs=1e-9)


def test_validate_family(circle_fam):
    assert validate_family(circle_fam).ok
    bad = validate_family(circle_family(delta=0.5))
    assert not bad.ok and any("delta" in p for p in bad.problems)
    big = validate_family(circle_family(gains=(0.95, -0.5)))
    assert any("gain" in p for p in big.problems)


@settings(max_examples=100, deadline=None)
@given(st.floats(-math.pi, math.pi, allow_nan=False))
def test_warp_preserves_norm(theta):
    z = at(theta)
    for k in (0.5, -0.5):
        assert abs(np.linalg.norm(warp_apply(WarpSpec(k, SQ, 1.0), PHI1, z)) - 1) < 1e-12
