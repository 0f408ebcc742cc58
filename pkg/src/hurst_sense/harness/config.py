"""Experiment configuration: JSON schema, defaults, overrides, validation and hashing.

A config file is one JSON object::

    {
      "experiment": "h-compare",          # optional when given on the command line
      "seed": 0,                          # root of the replication seed streams
      "n_mc": 64,                         # Monte Carlo replications (>= 1)
      "grid": {"t_max": 100.0, "n_steps": 1600, "rel_tol": 0.001},
      "h": [0.6],                         # Hurst values
      "h_pairs": [[0.6, 0.5], [0.6, 0.55]],
      "problem": {"name": "ou", "params": {"kappa": 1.0}},
      "tolerances": {"error_floor": 1e-10},
      "params": {"eps": 0.1},             # experiment-specific knobs
      "out": "report.csv"
    }

Missing fields take the experiment's defaults. Unknown fields, unknown parameter
names and out-of-range values raise ConfigError before anything is computed.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

TOP_KEYS = ("experiment", "seed", "n_mc", "grid", "h", "h_pairs", "problem", "tolerances", "params", "out")
GRID_KEYS = ("t_max", "n_steps", "rel_tol")
TOLERANCE_KEYS = ("error_floor", "n_se", "abs_tol")


class ConfigError(ValueError):
    """Invalid experiment configuration (usage error)."""


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    n_mc: int = 1
    grid: dict = field(default_factory=dict)
    h: list = field(default_factory=list)
    h_pairs: list = field(default_factory=list)
    problem: dict | None = None
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str | None = None

    @property
    def t_max(self):
        return self.grid["t_max"]

    @property
    def n_steps(self):
        return self.grid["n_steps"]

    @property
    def rel_tol(self):
        return self.grid["rel_tol"]

    def canonical(self):
        """Everything that determines the numbers (the output path does not)."""
        d = {k: getattr(self, k) for k in TOP_KEYS if k != "out"}
        return json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)

    def config_hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_dict(self):
        return {k: copy.deepcopy(getattr(self, k)) for k in TOP_KEYS}


def load_config_file(fname):
    try:
        with open(fname) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {fname}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {fname} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "problem":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _num(x, what, integer=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{what} must be a number, got {x!r}")
    if integer and (not isinstance(x, int) and not float(x).is_integer()):
        raise ConfigError(f"{what} must be an integer, got {x!r}")
    if not math.isfinite(x):
        raise ConfigError(f"{what} must be finite")
    return int(x) if integer else float(x)


def _hurst(x, what, lo, hi):
    h = _num(x, what)
    if not lo < h < hi:
        raise ConfigError(f"{what}={h} outside ({lo}, {hi})")
    return h


def resolve_config(experiment, raw=None, overrides=None):
    """Merge defaults, file contents and command-line overrides; validate; return ExperimentConfig."""
    from .experiments import EXPERIMENTS

    raw = dict(raw or {})
    unknown = set(raw) - set(TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    name = experiment or raw.get("experiment")
    if name is None:
        raise ConfigError("no experiment given")
    if raw.get("experiment") not in (None, name):
        raise ConfigError(f"config is for {raw['experiment']!r}, command line asks for {name!r}")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    spec = EXPERIMENTS[name]
    merged = _merge(spec.defaults(), raw)
    merged = _merge(merged, {k: v for k, v in (overrides or {}).items() if v is not None})
    merged["experiment"] = name
    return validate(merged, spec)


def validate(d, spec):
    seed = _num(d.get("seed", 0), "seed", integer=True)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must lie in [0, 2^64)")
    n_mc = _num(d.get("n_mc", 1), "n_mc", integer=True)
    if n_mc < 1:
        raise ConfigError("n_mc must be >= 1")
    if n_mc > spec.max_mc:
        raise ConfigError(f"n_mc must be <= {spec.max_mc} for {spec.name}")

    grid = d.get("grid") or {}
    if not isinstance(grid, dict) or set(grid) - set(GRID_KEYS):
        raise ConfigError(f"grid accepts only {GRID_KEYS}")
    t_max = _num(grid.get("t_max", 1.0), "grid.t_max")
    n_steps = _num(grid.get("n_steps", 256), "grid.n_steps", integer=True)
    rel_tol = _num(grid.get("rel_tol", 1e-3), "grid.rel_tol")
    if t_max <= 0 or n_steps < 1 or not 0 < rel_tol < 1:
        raise ConfigError("grid needs t_max > 0, n_steps >= 1, 0 < rel_tol < 1")
    grid = {"t_max": t_max, "n_steps": n_steps, "rel_tol": rel_tol}

    lo, hi = spec.h_range
    hs = d.get("h") or []
    if not isinstance(hs, list):
        hs = [hs]
    hs = [_hurst(h, "h", lo, hi) for h in hs]
    pairs = d.get("h_pairs") or []
    if not isinstance(pairs, list) or any(not isinstance(p, (list, tuple)) or len(p) != 2 for p in pairs):
        raise ConfigError("h_pairs must be a list of [h, h'] pairs")
    pairs = [[_hurst(a, "h_pairs", lo, hi), _hurst(b, "h_pairs", lo, hi)] for a, b in pairs]
    if spec.needs_h and not hs:
        raise ConfigError(f"{spec.name} needs at least one h")
    if spec.needs_pairs and not pairs:
        raise ConfigError(f"{spec.name} needs h_pairs")

    problem = d.get("problem")
    if spec.needs_problem:
        if not isinstance(problem, dict) or "name" not in problem or set(problem) - {"name", "params"}:
            raise ConfigError("problem must be {\"name\": ..., \"params\": {...}}")
        params = problem.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError("problem.params must be an object")
        params = {k: _num(v, f"problem.params.{k}") for k, v in params.items()}
        problem = {"name": str(problem["name"]), "params": params}
        from ..sde.problems import named_problem

        try:
            named_problem(problem["name"], **params)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        except TypeError as exc:
            raise ConfigError(f"bad parameters for problem {problem['name']!r}: {exc}") from None
    elif problem:
        raise ConfigError(f"{spec.name} takes no problem")
    else:
        problem = None

    tol = d.get("tolerances") or {}
    if not isinstance(tol, dict) or set(tol) - set(TOLERANCE_KEYS):
        raise ConfigError(f"tolerances accepts only {TOLERANCE_KEYS}")
    tol = {k: _num(v, f"tolerances.{k}") for k, v in tol.items()}
    if any(v < 0 for v in tol.values()):
        raise ConfigError("tolerances must be nonnegative")

    params = d.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    allowed = spec.defaults()["params"]
    extra = set(params) - set(allowed)
    if extra:
        raise ConfigError(f"unknown params for {spec.name}: {sorted(extra)}")

    out = d.get("out")
    if out is not None:
        out = str(out)
        parent = os.path.dirname(os.path.abspath(out))
        if not os.path.isdir(parent):
            raise ConfigError(f"output directory {parent} does not exist")

    cfg = ExperimentConfig(spec.name, seed, n_mc, grid, hs, pairs, problem, tol, dict(params), out)
    spec.check(cfg)
    return cfg
