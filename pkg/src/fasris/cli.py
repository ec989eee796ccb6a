"""Command-line entry point for running experiment sweeps.

    fasris run --preset fig1 --out fig1.csv
    fasris run --sweep snr_db --values 0,10,20,30 --schemes FAS-NOMA,FAS-OMA \
               --trials 50 --seed 7 --out sweep.csv
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .experiments import SCHEMES, VARIABLES, SweepSpec, preset, run_sweep
from .scenario import ScenarioParseError, ScenarioValidationError, load_config, make_config, parse_config


def _build_parser():
    parser = argparse.ArgumentParser(prog="fasris", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a Monte Carlo sweep and write a CSV")
    run.add_argument("--scenario", help="JSON scenario document (defaults built in)")
    group = run.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=("fig1", "fig2", "fig3", "fig4"))
    group.add_argument("--sweep", choices=VARIABLES, help="sweep variable")
    run.add_argument("--values", help="comma-separated sweep values")
    run.add_argument("--schemes", help=f"comma-separated subset of {','.join(SCHEMES)}")
    run.add_argument("--trials", type=int, help="Monte Carlo trials per sweep point")
    run.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    run.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a scenario field (JSON-encoded value), repeatable",
    )
    run.add_argument(
        "--reoptimize-oma",
        action="store_true",
        help="re-run the optimizer under the time-sharing objective instead of reusing variables",
    )
    return parser


def _apply_overrides(config, pairs):
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ScenarioParseError(f"--set expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    if not overrides:
        return config
    # round-trip through the parser so _db suffixes and validation apply
    merged = dict(overrides)
    probe = parse_config(merged)  # field/type errors surface here
    changes = {k: getattr(probe, k if not k.endswith("_db") else k[:-3]) for k in merged}
    return config.with_changes(**{k.removesuffix("_db"): v for k, v in changes.items()})


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.scenario) if args.scenario else make_config()
        config = _apply_overrides(config, args.set)
        if args.preset:
            spec = preset(args.preset, base=config, out=args.out)
            if args.trials:
                spec = replace(spec, trials=args.trials)
            if args.schemes:
                spec = replace(spec, schemes=tuple(args.schemes.split(",")))
            spec = replace(spec, master_seed=args.seed)
        else:
            if not (args.values and args.schemes and args.trials):
                parser.error("--sweep needs --values, --schemes, and --trials")
            spec = SweepSpec(
                variable=args.sweep,
                values=tuple(float(v) for v in args.values.split(",")),
                schemes=tuple(args.schemes.split(",")),
                trials=args.trials,
                base=config,
                out=args.out,
                master_seed=args.seed,
            )
        result = run_sweep(spec, n_jobs=args.jobs, reoptimize_oma=args.reoptimize_oma)
    except (ScenarioParseError, ScenarioValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(result.rows)} rows to {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
