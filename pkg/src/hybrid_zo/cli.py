"""Command line front end: ``hybrid-zo run|sweep|plot|validate|derive-fixtures|list``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError
from .experiments import (
    EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_VALIDATION, EXIT_VERDICT, ScenarioError, SweepError, assemble,
    builtin_names, resolve_config, run_scenario, run_sweep,
)


def _load(ref):
    try:
        return resolve_config(ref)
    except FileNotFoundError:
        raise ConfigError(f"no such config file or built-in scenario: {ref}") from None


def _print_summary(summary):
    brief = {k: v for k, v in summary.items() if k != "runs"}
    print(json.dumps(brief, indent=2, sort_keys=True))


def cmd_run(args):
    cfg = _load(args.config)
    result = run_scenario(cfg, output_dir=args.out)
    _print_summary(result.summary)
    for path in result.files if args.verbose else ():
        print(path)
    return result.exit_code


def cmd_sweep(args):
    cfg = _load(args.config)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise SweepError(f"cannot parse sweep values {args.values!r}") from None
    report = run_sweep(cfg, args.axis, values, output_dir=args.out)
    print(report.to_csv(), end="")
    if not report.monotone:
        print("note: worst-case distance is non-monotone beyond the slack band", file=sys.stderr)
    codes = [r.exit_code for r in report.results]
    return max(codes) if codes else EXIT_OK


def cmd_plot(args):
    from .plots import emit_plots

    try:
        for path in emit_plots(args.arcs, out_dir=args.out):
            print(path)
    except FileNotFoundError as exc:
        print(f"error: missing arc file {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_validate(args):
    cfg = _load(args.config)
    asm = assemble(cfg)
    print(json.dumps({
        "scenario": cfg.name, "ok": True, "mu_estimate": asm.gap.mu, "resolved_delta": asm.delta,
        "gains": [w.gain for w in asm.family.warps], "gain_bounds": asm.report.gain_bounds,
    }, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_derive_fixtures(args):
    from importlib import resources

    from .fixtures import FIXTURES_FILE, compare, derive_fixtures, load_fixtures, render

    fresh = derive_fixtures()
    if args.write:
        path = resources.files("hybrid_zo").joinpath(FIXTURES_FILE)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render(fresh))
        print(f"wrote {path}")
        return EXIT_OK
    bad = compare(load_fixtures(), fresh)
    print(render(fresh), end="")
    for line in bad:
        print(f"mismatch {line}", file=sys.stderr)
    return EXIT_VERDICT if bad else EXIT_OK


def cmd_list(args):
    for name in builtin_names():
        print(name)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hybrid-zo", description="Hybrid zeroth-order optimization experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario config or built-in scenario")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config and the environment)")
    r.add_argument("-v", "--verbose", action="store_true", help="list written files")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario across parameter values")
    s.add_argument("config")
    s.add_argument("--axis", required=True, choices=("eps_a", "eps_p", "d_star"))
    s.add_argument("--values", required=True, help="comma separated, strictly decreasing")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_sweep)

    pl = sub.add_parser("plot", help="SVG plots of exported arc JSON files")
    pl.add_argument("arcs", nargs="*")
    pl.add_argument("--out")
    pl.set_defaults(fn=cmd_plot)

    v = sub.add_parser("validate", help="family and frequency checks only")
    v.add_argument("config")
    v.set_defaults(fn=cmd_validate)

    d = sub.add_parser("derive-fixtures", help="recompute derived constants and compare with the stored file")
    d.add_argument("--write", action="store_true", help="overwrite the stored file")
    d.set_defaults(fn=cmd_derive_fixtures)

    ls = sub.add_parser("list", help="names of built-in scenarios")
    ls.set_defaults(fn=cmd_list)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on usage errors
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ConfigError, SweepError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
