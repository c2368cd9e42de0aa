import json

import pytest

from hybrid_zo.config import ConfigError, ScenarioConfig, parse_config
from hybrid_zo.experiments import builtin_names, builtin_text


@pytest.mark.parametrize("name", builtin_names())
def test_round_trip_builtin(name):
    cfg = parse_config(builtin_text(name))
    again = parse_config(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()


def minimal():
    return {
        "name": "m", "manifold": "circle", "cost": "circle_1_minus_z1",
        "family": {"gains": [0.5, -0.5], "gamma": 1.0},
        "dynamics": {"kind": "first_order"},
        "initial_conditions": {"points": "grid:4"},
        "target": [1.0, 0.0],
    }


def test_defaults_filled():
    cfg = ScenarioConfig.from_dict(minimal())
    assert cfg.family.delta == "auto" and cfg.family.alpha == "square"
    assert cfg.solver.max_t == 50.0 and cfg.outputs.csv and cfg.disturbance.kind == "none"


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["family"].update(beta=2),
    lambda d: d["solver"].__setitem__("step", "fast") if "solver" in d else d.update(solver={"step": "fast"}),
    lambda d: d["dynamics"].update(kind="second_order"),
    lambda d: d["initial_conditions"].update(points="grid:x"),
    lambda d: d.pop("target"),
    lambda d: d["family"].update(delta="big"),
    lambda d: d.update(disturbance={"kind": "adversarial", "amplitude": 0.3}),
    lambda d: d.update(disturbance={"kind": "none", "channels": ["d9"]}),
])
def test_rejections(mutate):
    d = minimal()
    mutate(d)
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(d)


def test_invalid_json():
    with pytest.raises(ConfigError):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config(json.dumps([1, 2]))
