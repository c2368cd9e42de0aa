"""Scenario configuration: one JSON document with a fixed, strict schema.

Every section is a dataclass; ``from_dict`` rejects unknown keys and
``to_dict`` writes every field, so ``parse(serialize(parse(doc)))`` equals
``parse(doc)``.
"""

from __future__ import annotations

import json
from dataclasses import MISSING, dataclass, field, fields
from typing import Optional, Union


class ConfigError(ValueError):
    pass


def _from_dict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    kwargs = {}
    for f in fields(cls):
        if f.name in data:
            kwargs[f.name] = data[f.name]
        elif f.default is MISSING and f.default_factory is MISSING:
            raise ConfigError(f"{where}: missing required key {f.name!r}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _to_dict(obj):
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        out[f.name] = v.to_dict() if hasattr(v, "to_dict") else v
    return out


def _point_list(v, where):
    if not isinstance(v, list) or not all(isinstance(p, list) and all(isinstance(c, (int, float)) for c in p) for p in v):
        raise ConfigError(f"{where}: expected a list of coordinate lists")
    return [[float(c) for c in p] for p in v]


def _opt_point(v, where):
    if v is None:
        return None
    if not isinstance(v, list) or not all(isinstance(c, (int, float)) for c in v):
        raise ConfigError(f"{where}: expected a coordinate list")
    return [float(c) for c in v]


@dataclass
class FamilyConfig:
    gains: list
    gamma: float
    alpha: str = "square"
    delta: Union[float, str] = "auto"
    axes: Optional[list] = None

    def __post_init__(self):
        self.gains = [float(k) for k in self.gains]
        self.gamma = float(self.gamma)
        if isinstance(self.delta, str):
            if self.delta != "auto":
                raise ValueError("delta must be a number or 'auto'")
        else:
            self.delta = float(self.delta)
        if self.axes is not None:
            self.axes = _point_list(self.axes, "family.axes")
            if len(self.axes) != len(self.gains):
                raise ValueError("one axis per gain is required")

    to_dict = _to_dict


DYNAMICS_KINDS = ("first_order", "zeroth_order", "gradient_flow", "single_mode")


@dataclass
class DynamicsConfig:
    kind: str
    eps_a: float = 0.05
    eps_p: float = 0.01
    omega_hat: float = 1.0
    omega_ratios: Optional[list] = None
    chi0: Optional[list] = None
    steps_per_period: int = 20

    def __post_init__(self):
        if self.kind not in DYNAMICS_KINDS:
            raise ValueError(f"dynamics.kind must be one of {DYNAMICS_KINDS}")
        self.eps_a, self.eps_p, self.omega_hat = float(self.eps_a), float(self.eps_p), float(self.omega_hat)
        self.steps_per_period = int(self.steps_per_period)
        if self.omega_ratios is not None:
            ratios = []
            for r in self.omega_ratios:
                if isinstance(r, bool) or not isinstance(r, (int, str)):
                    raise ValueError("omega_ratios entries must be integers or 'p/q' strings")
                ratios.append(r)
            self.omega_ratios = ratios
        if self.chi0 is not None:
            self.chi0 = [float(c) for c in self.chi0]

    to_dict = _to_dict


DISTURBANCE_KINDS = ("none", "constant_tangent", "adversarial")


@dataclass
class DisturbanceConfig:
    kind: str = "none"
    amplitude: float = 0.0
    target: Optional[list] = None
    engagement_radius: float = 1.0
    direction: int = 0
    channels: list = field(default_factory=lambda: ["d3"])

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"disturbance.kind must be one of {DISTURBANCE_KINDS}")
        self.amplitude = float(self.amplitude)
        self.engagement_radius = float(self.engagement_radius)
        self.direction = int(self.direction)
        self.target = _opt_point(self.target, "disturbance.target")
        bad = [c for c in self.channels if c not in ("d1", "d2", "d3", "d4", "d5", "d6")]
        if bad:
            raise ValueError(f"unknown disturbance channels {bad}")
        self.channels = list(self.channels)
        if self.kind == "adversarial" and self.target is None:
            raise ValueError("an adversarial disturbance needs a target")

    to_dict = _to_dict


@dataclass
class SolverSection:
    step: Union[float, str] = 0.05
    max_t: float = 50.0
    max_jumps: int = 100
    boundary_tol: float = 1e-12
    jump_policy: str = "jump_first"
    record_stride: Union[int, str] = 1
    refine_events: bool = False
    seed: int = 0
    convergence_tol: Optional[float] = None
    convergence_hold: float = 1.0

    def __post_init__(self):
        if isinstance(self.step, str):
            if self.step != "auto":
                raise ValueError("solver.step must be a number or 'auto'")
        else:
            self.step = float(self.step)
        if isinstance(self.record_stride, str):
            if self.record_stride != "auto":
                raise ValueError("solver.record_stride must be an integer or 'auto'")
        else:
            self.record_stride = int(self.record_stride)
        self.max_t = float(self.max_t)
        self.max_jumps = int(self.max_jumps)
        self.boundary_tol = float(self.boundary_tol)
        self.seed = int(self.seed)
        if self.jump_policy not in ("jump_first", "flow_first"):
            raise ValueError("solver.jump_policy must be 'jump_first' or 'flow_first'")
        if self.convergence_tol is not None:
            self.convergence_tol = float(self.convergence_tol)
        self.convergence_hold = float(self.convergence_hold)

    to_dict = _to_dict


@dataclass
class InitialConditions:
    points: Union[str, list]
    modes: list = field(default_factory=lambda: [1])
    jitter: float = 0.0

    def __post_init__(self):
        if isinstance(self.points, str):
            if not self.points.startswith("grid:") or not self.points[5:].isdigit() or int(self.points[5:]) < 1:
                raise ValueError("initial_conditions.points must be 'grid:<count>' or a list of points")
        else:
            self.points = _point_list(self.points, "initial_conditions.points")
        self.modes = [int(q) for q in self.modes]
        self.jitter = float(self.jitter)

    to_dict = _to_dict


@dataclass
class Outputs:
    csv: bool = True
    json: bool = True
    svg: bool = True
    directory: str = "out"

    to_dict = _to_dict


@dataclass
class Verdict:
    max_final_distance: Optional[float] = None
    reference: Optional[list] = None  # point distances are measured from; defaults to the target
    min_jumps: Optional[int] = None
    max_jumps: Optional[int] = None
    tail_window: float = 1.0

    def __post_init__(self):
        self.reference = _opt_point(self.reference, "verdict.reference")
        if self.max_final_distance is not None:
            self.max_final_distance = float(self.max_final_distance)
        self.tail_window = float(self.tail_window)

    to_dict = _to_dict


@dataclass
class ScenarioConfig:
    name: str
    manifold: str
    cost: Union[str, dict]
    family: FamilyConfig
    dynamics: DynamicsConfig
    initial_conditions: InitialConditions
    target: list
    solver: SolverSection = field(default_factory=SolverSection)
    disturbance: DisturbanceConfig = field(default_factory=DisturbanceConfig)
    outputs: Outputs = field(default_factory=Outputs)
    verdict: Verdict = field(default_factory=Verdict)
    description: str = ""

    SECTIONS = {
        "family": FamilyConfig, "dynamics": DynamicsConfig, "initial_conditions": InitialConditions,
        "solver": SolverSection, "disturbance": DisturbanceConfig, "outputs": Outputs, "verdict": Verdict,
    }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("a scenario config must be a JSON object")
        data = dict(data)
        for key, sub in cls.SECTIONS.items():
            if key in data:
                data[key] = _from_dict(sub, data[key], key)
        cfg = _from_dict(cls, data, "config")
        cfg.target = _opt_point(cfg.target, "target")
        if cfg.target is None:
            raise ConfigError("config: target is required")
        return cfg

    to_dict = _to_dict

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def parse_config(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return ScenarioConfig.from_dict(data)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
