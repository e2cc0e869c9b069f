"""Command-line experiment harness.

Subcommands: ``gen-data``, ``run``, ``sweep``, ``validate-config``.
Exit codes: 0 success, 2 config error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import yaml

from .errors import ConfigError, DataError, FedSignError
from .experiment import (
    ExperimentConfig,
    gen_data_csv,
    parse_config,
    run_experiment,
    run_sweep,
    write_outputs,
    _atomic_write,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _apply_override(raw: dict, assignment: str):
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, _, value = assignment.partition("=")
    node = raw
    parts = key.strip().split(".")
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = yaml.safe_load(value)


def load_config(path: str, overrides: list[str]) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    for assignment in overrides:
        _apply_override(raw, assignment)
    return parse_config(raw)


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config, args.set or [])
    if cfg.data.source != "synth" or cfg.data.synth is None:
        raise ConfigError("gen-data requires a synth data section")
    text = gen_data_csv(cfg.data.synth, category=cfg.data.csv_filter)
    _atomic_write(args.out, text)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set or [])
    outdir = args.out or cfg.output_dir
    out = run_experiment(cfg)
    write_outputs(cfg, out, output_dir=outdir)
    final = out["summary"].get("final", {})
    print(f"run complete: {cfg.repeats} repeat(s) -> {outdir}")
    if final:
        print(f"final MAPE mean {final['mape']['mean']:.3f}% "
              f"(stddev {final['mape']['stddev']:.3f})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.set or [])
    values = [v for v in (args.values or "").split(",") if v]
    if not values:
        raise ConfigError("sweep requires --values with a nonempty list")
    if args.axis != "protocol":
        values = [float(v) for v in values]
    protocols = [p for p in (args.protocols or "").split(",") if p] or None
    outdir = args.out or cfg.output_dir
    csv_text, summaries = run_sweep(cfg, args.axis, values, protocols, jobs=args.jobs)
    _atomic_write(os.path.join(outdir, "sweep.csv"), csv_text)
    _atomic_write(
        os.path.join(outdir, "sweep_cells.json"),
        json.dumps(summaries, sort_keys=True, indent=2) + "\n",
    )
    print(f"sweep complete: {len(summaries)} cell(s) -> {outdir}/sweep.csv")
    return EXIT_OK


def cmd_validate_config(args) -> int:
    load_config(args.config, args.set or [])
    print("config OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedsign",
        description="Byzantine-robust DP sign-based federated load forecasting simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable, dotted paths)")

    p = sub.add_parser("gen-data", help="write a synthetic load CSV")
    common(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("run", help="run one experiment (all repeats)")
    common(p)
    p.add_argument("--out", help="output directory (defaults to config output_dir)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a sweep over an axis x protocols")
    common(p)
    p.add_argument("--axis", required=True,
                   choices=["compromised_frac", "epsilon", "protocol"])
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--protocols", help="comma-separated protocol list")
    p.add_argument("--out", help="output directory (defaults to config output_dir)")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-config", help="parse and validate a config")
    common(p)
    p.set_defaults(func=cmd_validate_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FedSignError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
