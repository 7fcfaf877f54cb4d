"""Command-line entry point: ``synth``, ``bench``, ``select``, ``diag`` and ``config``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import ConfigError, dump_config, load_config
from .data import DataError
from .harness import ExperimentConfig, export_diagnostics, run_experiment1, run_experiment2
from .synthgen import CalibrationError, GeneratorConfig, export, generate

U64 = 2**64


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < U64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _jobs(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("--jobs must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reject-inference",
                                     description="Reject inference experiments on synthetic or CSV lending data.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "generate a synthetic accepts/rejects/unbiased partition as CSV",
        "bench": "benchmark reject inference strategies (cross-validation plus unbiased bootstraps)",
        "select": "compare accepts AUC, unbiased AUC and kickout as model-selection criteria",
        "diag": "export score-spread and accepts-vs-unbiased AUC diagnostics",
        "config": "print the effective configuration as YAML",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", metavar="PATH", help="YAML configuration file (defaults apply when omitted)")
        p.add_argument("--seed", type=_seed, metavar="U64", help="master seed; overrides the config")
        p.add_argument("--out", metavar="DIR", help="output directory; overrides the config")
        p.add_argument("--jobs", type=_jobs, default=1, metavar="N", help="worker processes (default 1)")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    return cfg


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "config":
            sys.stdout.write(dump_config(cfg))
        elif args.command == "synth":
            if not isinstance(cfg.data, GeneratorConfig):
                raise ConfigError("synth needs a synthetic data source (data.source: synthetic)")
            manifest = export(generate(cfg.data), cfg.out_dir, cfg.data)
            print(json.dumps(manifest["realized"], indent=2, sort_keys=True))
            print(f"wrote {', '.join(manifest['files'])} to {cfg.out_dir}")
        elif args.command == "bench":
            run_experiment1(cfg, jobs=args.jobs)
            with open(f"{cfg.out_dir}/summary_table.txt", encoding="utf-8") as fh:
                sys.stdout.write(fh.read())
        elif args.command == "select":
            rep = run_experiment2(cfg, jobs=args.jobs)
            for a, b in (("accepts_auc", "unbiased_auc"), ("kickout", "unbiased_auc"), ("accepts_auc", "kickout")):
                rho, n = rep.correlations[(a, b)]
                print(f"spearman({a}, {b}) = {_fmt(rho)}  (n={n})")
            for e in rep.selection:
                print(f"selected by {e['criterion']}: {e['variant']}  unbiased AUC {_fmt(e.get('unbiased_auc'))}")
        elif args.command == "diag":
            rep = export_diagnostics(cfg, jobs=args.jobs)
            for model, s in rep.spread.items():
                print(f"{model}: P10 {s['p10']:.4f}  P90 {s['p90']:.4f}  interdecile {s['interdecile']:.4f}")
            print(f"scorer variants: spearman(accepts AUC, unbiased AUC) = {_fmt(rep.variant_rank_correlation)}")
        if args.command in ("bench", "select", "diag"):
            print(f"results in {cfg.out_dir}")
    except (ConfigError, DataError, CalibrationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
