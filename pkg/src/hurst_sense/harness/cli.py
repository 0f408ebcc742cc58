"""hurst-sense <experiment> --config <file> [--seed N] [--out <path>]

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure
(a partial report is still written). The CSV carries only deterministic content;
wall time and provenance go to ``<out>.meta.json``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from ..errors import DivergenceError, FactorizationError, HurstDomainError
from ..report import ExperimentReport
from .batching import ENV_THREADS
from .config import ConfigError, load_config_file, resolve_config
from .experiments import EXPERIMENTS, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    p = _Parser(
        prog="hurst-sense",
        description="Hurst-parameter sensitivity experiments on a shared fBm driver.",
        epilog=f"Set {ENV_THREADS} to override the worker thread count.",
    )
    p.add_argument("experiment", help="one of: " + ", ".join(sorted(EXPERIMENTS)))
    p.add_argument("--config", help="JSON config file (fields default per experiment)")
    p.add_argument("--seed", type=int, help="root seed (overrides the config)")
    p.add_argument("--out", help="CSV output path (overrides the config; stdout when absent)")
    p.add_argument("--n-mc", dest="n_mc", type=int, help="replications (overrides the config)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                   help="override a field, e.g. --set params.eps=0.2 or --set h=[0.6,0.7]")
    p.add_argument("--show-config", action="store_true", help="print the resolved config and exit")
    return p


def _apply_sets(raw, items):
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=JSON, got {item!r}")
        try:
            value = json.loads(val)
        except json.JSONDecodeError:
            value = val
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set {key!r}")
        node[parts[-1]] = value
    return raw


def _emit(rep, cfg, status, wall, message=None):
    text = rep.to_csv_text()
    meta = {**rep.metadata, "status": status, "wall_time_s": wall, "config": cfg.to_dict(),
            "slopes": [s.__dict__ for s in rep.slopes]}
    if message:
        meta["message"] = message
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
        with open(cfg.out + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=float)
    else:
        sys.stdout.write(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = load_config_file(args.config) if args.config else {}
        raw = _apply_sets(raw, args.set)
        cfg = resolve_config(args.experiment, raw, {"seed": args.seed, "out": args.out, "n_mc": args.n_mc})
    except (ConfigError, HurstDomainError) as exc:
        print(f"hurst-sense: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.show_config:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return EXIT_OK

    rep = ExperimentReport(cfg.experiment)
    t0 = time.perf_counter()
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            run_experiment(cfg, rep)
    except (DivergenceError, FactorizationError, FloatingPointError) as exc:
        _emit(rep, cfg, "numerical-failure", time.perf_counter() - t0, str(exc))
        print(f"hurst-sense: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, HurstDomainError) as exc:
        print(f"hurst-sense: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(rep, cfg, "ok", time.perf_counter() - t0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
