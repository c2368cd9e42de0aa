"""Scenario assembly, batch runs, sweeps and their verdicts."""

from __future__ import annotations

import functools
import json
import os
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .constants import TOL
from .disturbance import (
    AdversarialSpec, DisturbanceBoundError, DisturbanceProfile, adversarial_tangential, constant_tangent,
    perturb_system,
)
from .first_order import build_H1, build_gradient_flow, build_single_mode_flow, make_state
from .hybrid import (
    Convergence, EscapeError, InfeasibleStartError, SolverConfig, arc_to_csv, arc_to_json, solve_batch,
)
from .manifolds import manifold_from_name
from .plots import arc_panel_data, write_svg
from .switching import LyapunovReport, modes_of
from .warp import (
    DERIVATIVE_ORACLE, cost_from_config, estimate_synergy_gap, fd_gradient, resolve_delta, rotation_family,
    validate_family, warped_cost,
)
from .zeroth_order import DitherParams, FrequencyError, build_H0

OUTPUT_ENV = "HYBRID_ZO_OUTPUT_DIR"

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4


class ScenarioError(RuntimeError):
    def __init__(self, message, exit_code):
        super().__init__(message)
        self.exit_code = exit_code


# -- built-in scenarios -------------------------------------------------------


def builtin_names():
    files = resources.files("hybrid_zo").joinpath("scenarios").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def builtin_text(name):
    return resources.files("hybrid_zo").joinpath("scenarios", f"{name}.json").read_text(encoding="utf-8")


def builtin_config(name):
    return parse_config(builtin_text(name))


def resolve_config(ref):
    """A config from a built-in name, a path, or an already parsed object."""
    if isinstance(ref, ScenarioConfig):
        return ref
    if isinstance(ref, dict):
        return ScenarioConfig.from_dict(ref)
    if not os.path.exists(ref) and ref in builtin_names():
        return builtin_config(ref)
    return load_config(ref)


# -- assembly -----------------------------------------------------------------


def _family_key(cfg: ScenarioConfig):
    f = cfg.family
    return json.dumps([cfg.manifold, cfg.cost, f.gains, f.alpha, f.gamma, f.axes], sort_keys=True)


@functools.lru_cache(maxsize=32)
def _family_and_gap(key):
    manifold_name_, cost_spec, gains, alpha, gamma, axes = json.loads(key)
    manifold = manifold_from_name(manifold_name_)
    cost = cost_from_config(cost_spec, manifold)
    family = rotation_family(cost, gains, gamma, 1.0, alpha=alpha, axes=axes)
    gap = estimate_synergy_gap(family)
    lipschitz = _lipschitz(family)
    return family, gap, lipschitz


def _lipschitz(family):
    """Largest warped-gradient norm over a grid: a Lipschitz estimate for V."""
    z = family.manifold.grid(2048 if family.manifold.dim == 2 else 720)
    worst = 0.0
    for q in range(1, family.n_modes + 1):
        g = fd_gradient(lambda p, q=q: warped_cost(family, q, p), family.manifold, z)
        worst = max(worst, float(np.sqrt((g * g).sum(axis=-1)).max()))
    return worst


@dataclass
class Assembly:
    config: ScenarioConfig
    manifold: object
    family: object
    gap: object
    lipschitz: float
    delta: float
    params: DitherParams = None
    report: object = None


def assemble(cfg: ScenarioConfig) -> Assembly:
    """Family, resolved gap and dither parameters; raises ``ScenarioError``
    with exit code 3 when a certificate fails."""
    try:
        manifold = manifold_from_name(cfg.manifold)
        base, gap, lip = _family_and_gap(_family_key(cfg))
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"cannot build the family: {exc}", EXIT_VALIDATION) from None
    delta = resolve_delta(gap.mu) if cfg.family.delta == "auto" else cfg.family.delta
    family = base.with_delta(delta)
    report = validate_family(family, gap=gap)
    if not report.ok:
        raise ScenarioError("family validation failed: " + "; ".join(report.problems), EXIT_VALIDATION)
    params = None
    if cfg.dynamics.kind == "zeroth_order":
        d = cfg.dynamics
        try:
            params = DitherParams.for_manifold(
                manifold, eps_a=d.eps_a, eps_p=d.eps_p, omega_hat=d.omega_hat,
                **({"ratios": tuple(d.omega_ratios)} if d.omega_ratios is not None else {}),
                chi0=None if d.chi0 is None else tuple(d.chi0), steps_per_period=d.steps_per_period,
            )
            params.check(manifold)
        except FrequencyError as exc:
            raise ScenarioError(str(exc), EXIT_VALIDATION) from None
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"invalid dither parameters: {exc}", EXIT_VALIDATION) from None
    return Assembly(cfg, manifold, family, gap, lip, delta, params, report)


def build_system(asm: Assembly, member_eps_a=None):
    cfg = asm.config
    kind = cfg.dynamics.kind
    tol = cfg.solver.boundary_tol
    if kind == "first_order":
        sys = build_H1(asm.family, boundary_tol=tol, validate=False)
    elif kind == "zeroth_order":
        sys = build_H0(asm.family, asm.params, boundary_tol=tol, validate=False, member_eps_a=member_eps_a)
    elif kind == "gradient_flow":
        sys = build_gradient_flow(asm.family.cost)
    else:
        sys = build_single_mode_flow(asm.family)
    return perturb_system(sys, disturbance_profile(asm, sys.layout))


def disturbance_profile(asm: Assembly, layout):
    dc = asm.config.disturbance
    if dc.kind == "none":
        return DisturbanceProfile()
    if dc.kind == "adversarial":
        spec = AdversarialSpec(tuple(dc.target), dc.amplitude, dc.engagement_radius)
        signal = adversarial_tangential(asm.manifold, spec, layout)
    else:
        signal = constant_tangent(asm.manifold, dc.amplitude, layout, direction=dc.direction)
    return DisturbanceProfile(**{c: signal for c in dc.channels}, d_star=dc.amplitude)


def initial_points(cfg: ScenarioConfig, manifold):
    ic = cfg.initial_conditions
    if isinstance(ic.points, str):
        pts = manifold.grid(int(ic.points[5:]))
    else:
        pts = manifold.check_point(np.array(ic.points, dtype=float), tol=1e-9)
        pts = manifold.project(pts)
    if ic.jitter > 0:
        rng = np.random.default_rng(cfg.solver.seed)
        pts = manifold.exp(pts, manifold.random_tangent(rng, pts, ic.jitter))
    return pts


def initial_states(asm: Assembly, layout):
    """States for every (point, mode) pair, point-major."""
    pts = initial_points(asm.config, asm.manifold)
    modes = asm.config.initial_conditions.modes
    for q in modes:
        if not 1 <= q <= asm.family.n_modes:
            raise ScenarioError(f"initial mode {q} outside 1..{asm.family.n_modes}", EXIT_VALIDATION)
    z = np.repeat(pts, len(modes), axis=0)
    q = np.tile(modes, len(pts))
    extra = {}
    if "chi" in layout:
        extra["chi"] = np.asarray(asm.params.chi0)
    return make_state(layout, z, q, **extra)


def solver_config(asm: Assembly, max_t=None):
    s = asm.config.solver
    if asm.params is not None:
        step = asm.params.step if s.step == "auto" else s.step
        stride = asm.params.steps_per_common_period() if s.record_stride == "auto" else s.record_stride
    else:
        step = 0.05 if s.step == "auto" else s.step
        stride = 1 if s.record_stride == "auto" else s.record_stride
    return SolverConfig(step=step, max_t=s.max_t if max_t is None else max_t, max_jumps=s.max_jumps,
                        boundary_tol=s.boundary_tol, jump_policy=s.jump_policy, record_stride=stride,
                        refine_events=s.refine_events)


# -- diagnostics --------------------------------------------------------------


def flow_slack(asm: Assembly, cfg: SolverConfig, eps_a=None):
    """Allowed increase of V between consecutive flow samples.

    Nominal first-order flows get the numerical slack per step.  A
    tangential disturbance of size d* can raise V at rate at most L d*.
    The zeroth-order flow is only practically decreasing: between
    stroboscopic samples V may move by L times the dither ripple
    ``(2/eps_a) max|phi| eps_p / min(omega)``.
    """
    steps = cfg.record_stride
    slack = TOL.flow_slack * steps
    dc = asm.config.disturbance
    if dc.kind != "none" and "d3" in dc.channels:
        slack += asm.lipschitz * dc.amplitude * cfg.step * steps
    if asm.params is not None:
        eps_a = asm.params.eps_a if eps_a is None else eps_a
        phi_max = float(asm.gap.critical_values[-1])
        ripple = 2.0 * phi_max / eps_a * asm.params.eps_p / float(np.min(asm.params.omegas))
        slack += asm.lipschitz * ripple
    return slack


def arc_diagnostics(asm: Assembly, arc, slack, with_uC=True):
    family = asm.family
    layout = arc.layout
    z = family.manifold.project(layout.get(arc.x, "z"))
    q = modes_of(layout, arc.x)
    if asm.config.dynamics.kind == "gradient_flow":
        f = family.cost
        V = f(z) - asm.gap.min_value
    else:
        f = lambda p: warped_cost(family, q[:, None], p)  # noqa: E731
        V = warped_cost(family, q, z) - asm.gap.min_value
    if with_uC:
        g = fd_gradient(f, family.manifold, z)
        uC = -(g * g).sum(axis=-1)
    else:
        uC = np.full(len(V), np.nan)
    dV = np.diff(V)
    jumped = np.diff(arc.j) > 0
    jump_dV, flow_dV = dV[jumped], dV[~jumped]
    viol = layout.violation(arc.x)
    return LyapunovReport(
        V, uC, jump_dV, flow_dV,
        int(np.sum(flow_dV > slack)),
        int(np.sum(jump_dV > -family.delta + TOL.jump_slack)),
        int(np.sum(viol > TOL.point)), float(viol.max(initial=0.0)),
    )


def tail_distance(manifold, arc, reference, window):
    d = manifold.distance(arc.block("z"), reference)
    return float(d[arc.t >= arc.t[-1] - window].max())


# -- scenario runs ------------------------------------------------------------


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    arcs: list
    runs: list
    summary: dict
    exit_code: int
    files: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


def output_directory(cfg: ScenarioConfig, override=None):
    return override or os.environ.get(OUTPUT_ENV) or cfg.outputs.directory


def simulate(asm: Assembly, member_eps_a=None, max_t=None):
    """Run every initial condition; returns ``(arcs, oracle_calls, seconds)``."""
    sys = build_system(asm, member_eps_a)
    x0 = initial_states(asm, sys.layout)
    if member_eps_a is not None:
        x0 = np.tile(x0, (len(member_eps_a) // len(x0), 1))
    cfg = solver_config(asm, max_t)
    conv = None
    if asm.config.solver.convergence_tol is not None:
        conv = Convergence(asm.manifold, np.asarray(asm.config.target), asm.config.solver.convergence_tol,
                           asm.config.solver.convergence_hold)
    before = DERIVATIVE_ORACLE.count
    t0 = time.perf_counter()
    try:
        arcs = solve_batch(sys, x0, cfg, convergence=conv)
    except (InfeasibleStartError, EscapeError, DisturbanceBoundError) as exc:
        raise ScenarioError(f"solver failure: {exc}", EXIT_SOLVER) from None
    return arcs, DERIVATIVE_ORACLE.count - before, time.perf_counter() - t0, cfg


def _run_records(asm, arcs, cfg, diags):
    target = np.asarray(asm.config.target)
    verdict = asm.config.verdict
    ref = np.asarray(verdict.reference) if verdict.reference is not None else target
    runs = []
    for i, (arc, dg) in enumerate(zip(arcs, diags)):
        zf = arc.block("z")[-1]
        runs.append({
            "index": i,
            "z0": [float(v) for v in arc.block("z")[0]],
            "q0": int(modes_of(arc.layout, arc.x[:1])[0]),
            "z_final": [float(v) for v in zf],
            "q_final": int(modes_of(arc.layout, arc.x[-1:])[0]),
            "t_final": float(arc.t[-1]),
            "jumps": arc.n_jumps,
            "termination": arc.termination.value,
            "final_distance": float(asm.manifold.distance(zf, target)),
            "tail_distance": tail_distance(asm.manifold, arc, target, verdict.tail_window),
            "reference_distance": float(asm.manifold.distance(zf, ref)),
            "flow_lyapunov_violations": dg.flow_violations,
            "jump_decrease_violations": dg.jump_violations,
            "manifold_violations": dg.manifold_violations,
            "max_manifold_violation": dg.worst_manifold,
        })
    return runs


def _verdict(asm, runs, counters):
    v = asm.config.verdict
    problems = []
    for key, n in counters.items():
        if key != "max_manifold_violation" and n:
            problems.append(f"{key}: {n}")
    for r in runs:
        if v.max_final_distance is not None and not r["reference_distance"] < v.max_final_distance:
            problems.append(f"run {r['index']}: distance {r['reference_distance']:.3e} >= {v.max_final_distance}")
        if v.min_jumps is not None and r["jumps"] < v.min_jumps:
            problems.append(f"run {r['index']}: {r['jumps']} jumps < {v.min_jumps}")
        if v.max_jumps is not None and r["jumps"] > v.max_jumps:
            problems.append(f"run {r['index']}: {r['jumps']} jumps > {v.max_jumps}")
    return problems


def _metadata(asm, cfg, index=None):
    meta = {
        "scenario": asm.config.name,
        "manifold": asm.config.manifold,
        "kind": asm.config.dynamics.kind,
        "target": list(asm.config.target),
        "delta": asm.delta,
        "step": cfg.step,
        "record_stride": cfg.record_stride,
        "critical_points": [[float(c) for c in w[1]] for w in asm.gap.witnesses],
        "config": asm.config.to_dict(),
    }
    if index is not None:
        meta["run"] = index
    return meta


def run_scenario(ref, output_dir=None, write=True):
    """Run a scenario config; returns a :class:`ScenarioResult`.

    Parse errors raise ``ConfigError``; certificate failures and solver
    failures are reported through ``exit_code`` (3 and 4).
    """
    cfg = resolve_config(ref)
    try:
        asm = assemble(cfg)
        arcs, oracle_calls, seconds, scfg = simulate(asm)
    except ScenarioError as exc:
        summary = {"scenario": cfg.name, "error": str(exc), "exit_code": exc.exit_code}
        return ScenarioResult(cfg, [], [], summary, exc.exit_code)
    return _finish(asm, arcs, oracle_calls, seconds, scfg, output_dir, write)


def _finish(asm, arcs, oracle_calls, seconds, scfg, output_dir, write, eps_a=None):
    cfg = asm.config
    slack = flow_slack(asm, scfg, eps_a)
    diags = [arc_diagnostics(asm, a, slack, with_uC=cfg.outputs.csv or cfg.outputs.json) for a in arcs]
    runs = _run_records(asm, arcs, scfg, diags)
    counters = {
        "manifold_violations": sum(r["manifold_violations"] for r in runs),
        "flow_lyapunov_violations": sum(r["flow_lyapunov_violations"] for r in runs),
        "jump_decrease_violations": sum(r["jump_decrease_violations"] for r in runs),
        "max_manifold_violation": max((r["max_manifold_violation"] for r in runs), default=0.0),
    }
    problems = _verdict(asm, runs, counters)
    summary = {
        "scenario": cfg.name,
        "kind": cfg.dynamics.kind,
        "resolved_delta": asm.delta,
        "mu_estimate": asm.gap.mu,
        "step": scfg.step,
        "record_stride": scfg.record_stride,
        "flow_slack": slack,
        "derivative_oracle_calls_in_solve": oracle_calls if cfg.dynamics.kind == "zeroth_order" else None,
        "counters": counters,
        "worst_final_distance": max(r["final_distance"] for r in runs),
        "worst_tail_distance": max(r["tail_distance"] for r in runs),
        "worst_reference_distance": max(r["reference_distance"] for r in runs),
        "max_jumps": max(r["jumps"] for r in runs),
        "runs": runs,
        "problems": problems,
        "passed": not problems,
        "runtime_s": round(seconds, 3),
    }
    code = EXIT_OK if not problems else EXIT_VERDICT
    summary["exit_code"] = code
    result = ScenarioResult(cfg, arcs, runs, summary, code, diagnostics=diags)
    if write:
        result.files = write_outputs(asm, result, scfg, output_dir)
    return result


def write_outputs(asm, result, scfg, output_dir=None):
    cfg = asm.config
    out = output_directory(cfg, output_dir)
    os.makedirs(out, exist_ok=True)
    files = []
    for i, (arc, dg) in enumerate(zip(result.arcs, result.diagnostics)):
        stem = os.path.join(out, f"{cfg.name}_{i:03d}")
        if cfg.outputs.csv:
            _write(stem + ".csv", arc_to_csv(arc, dg))
            files.append(stem + ".csv")
        if cfg.outputs.json:
            _write(stem + ".json", arc_to_json(arc, _metadata(asm, scfg, i), dg))
            files.append(stem + ".json")
    if cfg.outputs.svg and result.arcs:
        panels = [arc_panel_data(cfg.manifold, arc.t, arc.block("z"), arc.jump_indices, cfg.target,
                                 _metadata(asm, scfg)["critical_points"]) for arc in result.arcs]
        path = os.path.join(out, f"{cfg.name}.svg")
        write_svg(path, panels, title=cfg.name, manifold=cfg.manifold)
        files.append(path)
    path = os.path.join(out, f"{cfg.name}_summary.json")
    _write(path, json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    files.append(path)
    return files


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- sweeps -------------------------------------------------------------------

SWEEP_AXES = ("eps_a", "eps_p", "d_star")


class SweepError(ValueError):
    pass


@dataclass
class SweepRow:
    value: float
    worst_final_distance: float
    worst_tail_distance: float
    mean_jumps: float
    runtime_s: float
    max_manifold_violation: float
    flagged: bool = False


@dataclass
class SweepReport:
    axis: str
    rows: list
    monotone: bool
    results: list  # one ScenarioResult per value

    def to_csv(self):
        lines = ["value,worst_final_distance,worst_tail_distance,mean_jumps,runtime_s,max_manifold_violation,flagged"]
        for r in self.rows:
            lines.append(
                f"{r.value:.17g},{r.worst_final_distance:.17g},{r.worst_tail_distance:.17g},"
                f"{r.mean_jumps:.17g},{r.runtime_s:.3f},{r.max_manifold_violation:.3e},{int(r.flagged)}"
            )
        return "\n".join(lines) + "\n"


def check_sweep_values(values):
    values = [float(v) for v in values]
    if len(values) < 3:
        raise SweepError("a sweep needs at least three values")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise SweepError("sweep values must be strictly decreasing")
    if any(v <= 0 for v in values):
        raise SweepError("sweep values must be positive")
    return values


def _with_value(cfg: ScenarioConfig, axis, value):
    data = cfg.to_dict()
    data["name"] = f"{cfg.name}_{axis}_{value:g}"
    if axis == "d_star":
        if data["disturbance"]["kind"] == "none":
            raise SweepError("a d_star sweep needs a disturbance in the config")
        data["disturbance"]["amplitude"] = value
    else:
        if data["dynamics"]["kind"] != "zeroth_order":
            raise SweepError(f"an {axis} sweep needs zeroth-order dynamics")
        data["dynamics"][axis] = value
    data["outputs"] = {**data["outputs"], "svg": False}
    return ScenarioConfig.from_dict(data)


def run_sweep(ref, axis, values, output_dir=None, write=True, slack=0.2):
    """Run the scenario at each axis value over the same initial conditions.

    The report flags any value whose worst tail distance exceeds the value
    before it by more than ``slack`` (relative); flags are informative.
    """
    if axis not in SWEEP_AXES:
        raise SweepError(f"unknown sweep axis {axis!r}; known: {SWEEP_AXES}")
    values = check_sweep_values(values)
    cfg = resolve_config(ref)
    configs = [_with_value(cfg, axis, v) for v in values]
    results = []
    if axis == "eps_a":
        # One batch for every amplitude: the step does not depend on eps_a.
        asms = [assemble(c) for c in configs]
        n_ic = len(initial_states(asms[0], build_system(asms[0]).layout))
        member = np.repeat(values, n_ic)
        arcs, calls, seconds, scfg = simulate(asms[0], member_eps_a=member)
        for k, asm in enumerate(asms):
            chunk = arcs[k * n_ic:(k + 1) * n_ic]
            results.append(_finish(asm, chunk, calls, seconds / len(values), scfg, output_dir, write,
                                   eps_a=values[k]))
    else:
        for c in configs:
            results.append(run_scenario(c, output_dir=output_dir, write=write))
    rows = []
    for v, res in zip(values, results):
        if not res.arcs:
            raise ScenarioError(res.summary.get("error", "sweep run failed"), res.exit_code)
        s = res.summary
        rows.append(SweepRow(v, s["worst_final_distance"], s["worst_tail_distance"],
                             float(np.mean([r["jumps"] for r in res.runs])), s["runtime_s"],
                             s["counters"]["max_manifold_violation"]))
    for prev, row in zip(rows, rows[1:]):
        row.flagged = row.worst_tail_distance > (1.0 + slack) * prev.worst_tail_distance
    report = SweepReport(axis, rows, not any(r.flagged for r in rows), results)
    if write:
        out = output_directory(cfg, output_dir)
        os.makedirs(out, exist_ok=True)
        _write(os.path.join(out, f"{cfg.name}_sweep_{axis}.csv"), report.to_csv())
    return report


__all__ = [
    "run_scenario", "run_sweep", "builtin_names", "builtin_config", "resolve_config", "assemble",
    "ScenarioResult", "SweepReport", "SweepError", "ScenarioError", "ConfigError", "OUTPUT_ENV",
]
