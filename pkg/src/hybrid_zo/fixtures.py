"""Derived constants of the built-in examples, kept in one JSON file.

``derive_fixtures()`` recomputes every value: first through the independent
oracles, then through the package's own estimators, so a stale file or a
drifting estimator both show up as a mismatch.
"""

from __future__ import annotations

import json
import math
from importlib import resources

from . import oracles
from .manifolds import manifold_from_name
from .warp import cost_from_config, estimate_gain_bound, estimate_synergy_gap, resolve_delta, rotation_family

FIXTURES_FILE = "fixtures.json"

# Acceptance thresholds; desk-scale choices, not properties of the examples.
THRESHOLDS = {
    "h1_convergence_distance": 1e-3,
    "h1_horizon": 50.0,
    "h0_final_distance": 0.1,
    "stationary_motion": 1e-6,
    "stationary_horizon": 10.0,
    "adversarial_amplitude": 0.3,
    "adversarial_pin_distance": 0.2,
    "adversarial_reach_distance": 0.05,
    "sweep_slack": 0.2,
    "averaging_ratio": [3.0, 5.0],
    "gain_bound_range": [0.8, 1.0],
    "sphere_mu_min": 0.25,
    "circle_mu_min": 0.2,
    "manifold_violation": 1e-9,
    "eps_a_sweep": [0.1, 0.05, 0.025],
    "d_star_sweep": [1e-2, 1e-3, 1e-4],
}


def _family(manifold, cost, axes=None):
    m = manifold_from_name(manifold)
    return rotation_family(cost_from_config(cost, m), [0.5, -0.5], 1.0, 0.1, axes=axes)


def derive_fixtures():
    """Every derived constant, freshly computed."""
    theta_c = oracles.circle_critical_angle()
    mu_oracle = oracles.circle_gap()
    circle = _family("circle", "circle_1_minus_z1")
    sphere = _family("sphere", "sphere_1_minus_z3", axes=[[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])
    gc, gs = estimate_synergy_gap(circle), estimate_synergy_gap(sphere)
    # |d/dtheta alpha(phi - 1)| = |sin(2 theta)| on the circle: max 1, bound = safety / 1.
    return {
        "circle": {
            "critical_angle": theta_c,
            "warped_costs_at_critical": list(oracles.circle_warped_costs(theta_c)),
            "mu_oracle": mu_oracle,
            "mu_estimate": gc.mu,
            "delta_auto": resolve_delta(gc.mu),
            "gain_bound_oracle": 0.9,
            "gain_bound_estimate": estimate_gain_bound(circle.cost, "square", 1.0),
            "critical_values": [float(v) for v in gc.critical_values],
            "critical_points": [[float(c) for c in w[1]] for w in gc.witnesses],
        },
        "sphere": {
            # Rotations about the y axis keep the x-z great circle invariant and
            # the cost restricted to it is the circle example, so the gap agrees.
            "mu_oracle": mu_oracle,
            "mu_estimate": gs.mu,
            "delta_auto": resolve_delta(gs.mu),
            "gain_bound_estimate": estimate_gain_bound(sphere.cost, "square", 1.0, (0.0, 1.0, 0.0)),
            "critical_values": [float(v) for v in gs.critical_values],
            "critical_points": [[float(c) for c in w[1]] for w in gs.witnesses],
        },
        "thresholds": THRESHOLDS,
    }


def load_fixtures():
    return json.loads(resources.files("hybrid_zo").joinpath(FIXTURES_FILE).read_text(encoding="utf-8"))


def render(fixtures):
    return json.dumps(fixtures, indent=2, sort_keys=True) + "\n"


def compare(stored, fresh, rel=1e-7, abs_tol=1e-9, path=""):
    """Paths where the two documents disagree beyond tolerance."""
    bad = []
    if isinstance(stored, dict) and isinstance(fresh, dict):
        for k in sorted(set(stored) | set(fresh)):
            if k not in stored or k not in fresh:
                bad.append(f"{path}/{k}: missing")
            else:
                bad += compare(stored[k], fresh[k], rel, abs_tol, f"{path}/{k}")
    elif isinstance(stored, list) and isinstance(fresh, list):
        if len(stored) != len(fresh):
            bad.append(f"{path}: length {len(stored)} != {len(fresh)}")
        else:
            for i, (a, b) in enumerate(zip(stored, fresh)):
                bad += compare(a, b, rel, abs_tol, f"{path}/{i}")
    elif isinstance(stored, (int, float)) and isinstance(fresh, (int, float)):
        if not math.isclose(stored, fresh, rel_tol=rel, abs_tol=abs_tol):
            bad.append(f"{path}: {stored!r} != {fresh!r}")
    elif stored != fresh:
        bad.append(f"{path}: {stored!r} != {fresh!r}")
    return bad
