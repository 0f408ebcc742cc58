"""The CLI experiments: each fills an ExperimentReport from a validated config.

Defaults reproduce the desk-scale acceptance runs. Experiments append rows as they go,
so a numerical failure part-way leaves a usable partial report.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import ergodic, rough, wiener
from ..fbm.grid import GridSpec, _rng, sample_driver, sample_drivers
from ..fbm.synth import exact_fbm_cholesky, fbm_covariance, synthesize_fbm, truncation_budget
from ..report import ExperimentReport
from ..sde import sensitivity as sens
from ..sde import solvers
from ..sde.law import estimate_law_lipschitz
from ..sde.problems import named_problem
from .batching import map_replications
from .config import ConfigError
from .seeds import seed_stream
from .stats import cov_se, fit_loglog_slope, mean_se

SYNTH_RANGE = (0.05, 0.95)

OBSERVABLES = {
    "identity": lambda x: x,
    "square": lambda x: x * x,
    "tanh": np.tanh,
    "constant": lambda x: np.ones_like(x),
}

SOLVERS = {
    "auto": solvers.solve,
    "additive-reduction": solvers.solve_additive,
    "doss-sussmann": solvers.solve_doss_sussmann,
    "young-euler": solvers.solve_young,
    "lamperti": solvers.solve_lamperti,
}

SENSITIVITIES = {
    "additive-exact": sens.sensitivity_additive,
    "exponential-representation": sens.sensitivity_exponential_scalar,
    "variational-phi": sens.sensitivity_variational,
}


@dataclass(frozen=True)
class Experiment:
    name: str
    run: Callable
    base: dict
    h_range: tuple = SYNTH_RANGE
    needs_h: bool = True
    needs_pairs: bool = False
    needs_problem: bool = False
    max_mc: int = 10**6
    checks: tuple = field(default=())

    def defaults(self):
        d = {"seed": 0, "n_mc": 1, "grid": {"t_max": 1.0, "n_steps": 256, "rel_tol": 1e-3},
             "h": [], "h_pairs": [], "problem": None, "tolerances": {}, "params": {}, "out": None}
        for k, v in self.base.items():
            d[k] = {**d[k], **v} if isinstance(d.get(k), dict) and k != "problem" else v
        return copy.deepcopy(d)

    def check(self, cfg):
        for fn in self.checks:
            fn(cfg)


def _param(cfg, key, spec):
    return cfg.params.get(key, spec.defaults()["params"][key])


def _p(cfg, key):
    return _param(cfg, key, EXPERIMENTS[cfg.experiment])


def _problem(cfg):
    return named_problem(cfg.problem["name"], **cfg.problem["params"])


def _tol(cfg, key, default):
    return cfg.tolerances.get(key, default)


# ------------------------------------------------------------------ parameter checks


def _is_list(cfg, key, kind=float, min_len=1):
    v = _p(cfg, key)
    if not isinstance(v, list) or len(v) < min_len or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ConfigError(f"params.{key} must be a list of at least {min_len} numbers")
    if kind is int and any(not float(x).is_integer() for x in v):
        raise ConfigError(f"params.{key} must hold integers")


def _choices(key, allowed):
    def check(cfg):
        v = _p(cfg, key)
        vals = v if isinstance(v, list) else [v]
        bad = [x for x in vals if x not in allowed]
        if bad or not vals:
            raise ConfigError(f"params.{key} must be from {sorted(allowed)}, got {v!r}")
    return check


def _numbers(*keys, kind=float, min_len=1):
    def check(cfg):
        for k in keys:
            _is_list(cfg, k, kind, min_len)
    return check


def _positive(*keys):
    def check(cfg):
        for k in keys:
            v = _p(cfg, k)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"params.{k} must be a positive number")
    return check


def _levels_divide(cfg):
    n = cfg.n_steps
    levels = [int(x) for x in _p(cfg, "levels")]
    if any(lv < 1 or n % lv for lv in levels):
        raise ConfigError(f"every level must divide grid.n_steps={n}")
    if levels != sorted(set(levels)):
        raise ConfigError("levels must be strictly increasing")


def _young_needs_rough(cfg):
    if "young-euler" in _p(cfg, "schemes") and any(h <= 0.5 for h in cfg.h):
        raise ConfigError("young-euler needs every h > 1/2")


def _sensitivity_needs_rough(cfg):
    rough_only = {"exponential-representation", "variational-phi"}
    if rough_only & set(_p(cfg, "methods")) and any(h <= 0.5 for h in cfg.h):
        raise ConfigError("the exponential and variational sensitivities need every h > 1/2")


def _nodes_on_grid(cfg):
    grid = GridSpec(cfg.t_max, cfg.n_steps)
    try:
        for t in _p(cfg, "nodes"):
            grid.node_index(t)
    except Exception as exc:
        raise ConfigError(str(exc)) from None


def _deltas_in_band(cfg):
    dmax = max(_p(cfg, "deltas"))
    if dmax <= 0 or any(not SYNTH_RANGE[0] < h + s * dmax < SYNTH_RANGE[1] for h in cfg.h for s in (-1, 1)):
        raise ConfigError("h +/- delta must stay inside the synthesis band (0.05, 0.95)")


def _fou_cases(cfg):
    cases = _p(cfg, "cases")
    if not isinstance(cases, list) or not cases:
        raise ConfigError("params.cases must be a list of [kappa, h]")
    for c in cases:
        if not isinstance(c, list) or len(c) != 2 or not c[0] > 0 or not SYNTH_RANGE[0] < c[1] < SYNTH_RANGE[1]:
            raise ConfigError(f"bad fOU case {c!r}")


def _rho_band(cfg):
    rho = _p(cfg, "rho")
    if any(not 1.0 / 3.0 < rho < h for h in cfg.h):
        raise ConfigError("need 1/3 < rho < h for every h")


def _at_most_half(cfg):
    if any(h > 0.5 for h in cfg.h):
        raise ConfigError("law-continuity takes h in (1/3, 1/2]")


def _pieces(cfg):
    p = _p(cfg, "pieces")
    if p is None:
        return
    try:
        f = wiener.StepFunction([tuple(float(x) for x in row) for row in p])
        grid = GridSpec(cfg.t_max, cfg.n_steps)
        for t in list(f.u) + list(f.v):
            grid.node_index(t)
    except Exception as exc:
        raise ConfigError(f"params.pieces: {exc}") from None


# ------------------------------------------------------------------ experiments


def run_fbm_cov(cfg, rep):
    nodes = [float(t) for t in _p(cfg, "nodes")]
    samplers = _p(cfg, "samplers")
    n_se = _tol(cfg, "n_se", 4.0)
    pairs = [(i, j) for i in range(len(nodes)) for j in range(i, len(nodes))]
    for h in cfg.h:
        grid = GridSpec.for_hurst(cfg.t_max, cfg.n_steps, [h], cfg.rel_tol)
        idx = [grid.node_index(t) for t in nodes]
        exact = fbm_covariance(h, np.array(nodes))
        for sampler in samplers:
            if sampler == "mvn":
                budget = truncation_budget(h, grid)[np.ix_(idx, idx)]

                def draw(seeds, grid=grid, h=h):
                    return synthesize_fbm(sample_drivers(seeds, grid), h, sensitivity=False).path[:, idx]
            else:
                budget = np.zeros((len(idx), len(idx)))

                def draw(seeds, grid=grid, h=h):
                    return exact_fbm_cholesky(seeds, grid, h).path[:, idx]

            vals = map_replications(draw, cfg.seed, cfg.n_mc)
            worst = 0.0
            for i, j in pairs:
                c, se = cov_se(vals[:, i], vals[:, j])
                lab = f"{sampler}:s={nodes[i]:g},t={nodes[j]:g}"
                excess = max(abs(c - exact[i, j]) - budget[i, j], 0.0)
                z = excess / se if se > 0 else (0.0 if excess == 0 else math.inf)
                worst = max(worst, z)
                rep.add(lab, "cov", c, se, cfg.n_mc, h=h)
                rep.add(lab, "cov_exact", exact[i, j], 0.0, 0, h=h)
                rep.add(lab, "budget", budget[i, j], 0.0, 0, h=h)
                rep.add(lab, "excess_z", z, float("nan"), cfg.n_mc, h=h)
            rep.add(sampler, "max_excess_z", worst, float("nan"), cfg.n_mc, h=h)
            rep.add(sampler, "within_tolerance", float(worst <= n_se), float("nan"), cfg.n_mc, h=h)


def run_fbm_sensitivity(cfg, rep):
    deltas = [float(d) for d in _p(cfg, "deltas")]
    powers = [int(p) for p in _p(cfg, "moments")]
    for h in cfg.h:
        hs = [h] + [h + s * d for d in deltas for s in (-1, 1)]
        grid = GridSpec.for_hurst(cfg.t_max, cfg.n_steps, hs, cfg.rel_tol)

        def run(seeds, grid=grid, h=h):
            drivers = sample_drivers(seeds, grid)
            b = synthesize_fbm(drivers, h)
            errs = []
            for d in deltas:
                up = synthesize_fbm(drivers, h + d, sensitivity=False).path
                down = synthesize_fbm(drivers, h - d, sensitivity=False).path
                errs.append(np.abs((up - down) / (2 * d) - b.sensitivity).max(axis=-1))
            mom = np.stack([np.abs(b.sensitivity) ** p for p in powers], axis=1)
            return np.stack(errs, axis=-1), mom

        errs, mom = map_replications(run, cfg.seed, cfg.n_mc, chunk=64)
        m, se = mean_se(errs)
        for k, d in enumerate(deltas):
            rep.add(f"delta={d:g}", "fd_error", m[k], se[k], cfg.n_mc, h=h)
        if len(deltas) >= 3 and np.all(m > 0):
            rep.add_slope(fit_loglog_slope(np.column_stack([deltas, m]), f"fd_order:h={h:g}"))
        mm, ms = mean_se(mom)
        for k, p in enumerate(powers):
            j = int(np.argmax(mm[k]))
            rep.add(f"p={p}", "sup_t_moment", mm[k, j], ms[k, j], cfg.n_mc, h=h)


def _closed_linear(problem, b):
    """x0 exp(alpha t + beta B_t) and its H-derivative for the linear problem."""
    a, beta, x0 = (problem.params[k] for k in ("alpha", "beta", "x0"))
    x = x0 * np.exp(a * b.nodes + beta * b.path)
    y = None if b.sensitivity is None else beta * x * b.sensitivity
    return x, y


def _reference_mode(cfg, problem):
    mode = _p(cfg, "reference")
    if mode == "auto":
        mode = "closed-form" if problem.name == "linear" else "finest"
    if mode == "closed-form" and problem.name != "linear":
        raise ConfigError("closed-form reference exists only for the linear problem")
    if mode == "finest" and cfg.n_steps <= max(_p(cfg, "levels")):
        raise ConfigError("a finest-grid reference needs grid.n_steps above every level")
    return mode


def _level_rows(rep, cfg, label, levels, errs, h):
    m, se = mean_se(errs)
    for k, lv in enumerate(levels):
        rep.add(f"{label}:n={lv}", "sup_error", m[k], se[k], cfg.n_mc, h=h)
        if k:
            ratio = m[k - 1] / m[k] if m[k] > 0 else math.inf
            rep.add(f"{label}:n={lv}", "error_ratio", ratio, float("nan"), cfg.n_mc, h=h)
    if len(levels) >= 3 and np.all(m > 0):
        dts = cfg.t_max / np.asarray(levels, float)
        rep.add_slope(fit_loglog_slope(np.column_stack([dts, m]), f"{label}:h={h:g}"))


def run_sde_solve(cfg, rep):
    problem = _problem(cfg)
    levels = [int(x) for x in _p(cfg, "levels")]
    schemes = list(_p(cfg, "schemes"))
    mode = _reference_mode(cfg, problem)
    n = cfg.n_steps
    for h in cfg.h:
        grid = GridSpec.for_hurst(cfg.t_max, n, [h], cfg.rel_tol)

        def run(seeds, grid=grid, h=h):
            b = synthesize_fbm(sample_drivers(seeds, grid), h, sensitivity=False)
            if mode == "closed-form":
                ref, _ = _closed_linear(problem, b)
            else:
                ref = SOLVERS[schemes[0]](problem, b).x
            out = np.empty((len(seeds), len(schemes), len(levels)))
            for i, sc in enumerate(schemes):
                for k, lv in enumerate(levels):
                    f = n // lv
                    x = SOLVERS[sc](problem, b.coarsen(f)).x
                    out[:, i, k] = np.abs(x - ref[..., ::f]).reshape(len(seeds), -1).max(axis=-1)
            return out

        data = map_replications(run, cfg.seed, cfg.n_mc, chunk=64)
        for i, sc in enumerate(schemes):
            _level_rows(rep, cfg, sc, levels, data[:, i, :], h)
    rep.metadata["reference"] = mode


def run_sde_sensitivity(cfg, rep):
    problem = _problem(cfg)
    levels = [int(x) for x in _p(cfg, "levels")]
    methods = list(_p(cfg, "methods"))
    deltas = sorted((float(d) for d in _p(cfg, "deltas")), reverse=True)
    solver = SOLVERS[_p(cfg, "solver")]
    mode = _reference_mode(cfg, problem)
    n = cfg.n_steps
    for h in cfg.h:
        hs = [h] + [h + s * d for d in deltas for s in (-1, 1)]
        grid = GridSpec.for_hurst(cfg.t_max, n, hs, cfg.rel_tol)

        def run(seeds, grid=grid, h=h):
            drivers = sample_drivers(seeds, grid)
            b = synthesize_fbm(drivers, h)
            bs = len(seeds)
            if mode == "closed-form":
                _, ref = _closed_linear(problem, b)
            else:
                x = solver(problem, b)
                ref = SENSITIVITIES[methods[0]](problem, x, b).values[..., 0]
            lev = np.empty((bs, len(methods), len(levels)))
            for k, lv in enumerate(levels):
                f = n // lv
                bc = b.coarsen(f)
                x = solver(problem, bc)
                for i, me in enumerate(methods):
                    y = SENSITIVITIES[me](problem, x, bc).values
                    lev[:, i, k] = np.abs(y[..., 0] - ref[..., ::f]).reshape(bs, -1).max(axis=-1)
            fds = [sens.finite_difference_sensitivity(problem, drivers, h, d, solver).values for d in deltas]
            cauchy = np.stack([np.abs(a - c).reshape(bs, -1).max(axis=-1) for a, c in zip(fds, fds[1:])], -1)
            x = solver(problem, b)
            gap = np.stack([np.abs(fds[-1] - SENSITIVITIES[me](problem, x, b).values).reshape(bs, -1).max(axis=-1)
                            for me in methods], -1)
            return lev, cauchy, gap

        lev, cauchy, gap = map_replications(run, cfg.seed, cfg.n_mc, chunk=64)
        for i, me in enumerate(methods):
            _level_rows(rep, cfg, me, levels, lev[:, i, :], h)
        m, se = mean_se(cauchy)
        for k, d in enumerate(deltas[:-1]):
            rep.add(f"delta={d:g}", "fd_cauchy", m[k], se[k], cfg.n_mc, h=h)
        if len(deltas) >= 4 and np.all(m > 0):
            rep.add_slope(fit_loglog_slope(np.column_stack([deltas[:-1], m]), f"fd_order:h={h:g}"))
        gm, gs = mean_se(gap)
        for i, me in enumerate(methods):
            rep.add(f"{me}:delta={deltas[-1]:g}", "fd_gap", gm[i], gs[i], cfg.n_mc, h=h)
    rep.metadata["reference"] = mode


def run_law_lipschitz(cfg, rep):
    problem = _problem(cfg)
    phi_name = _p(cfg, "phi")
    sub = estimate_law_lipschitz(problem, OBSERVABLES[phi_name], cfg.h_pairs, cfg.t_max, cfg.n_mc, cfg.seed,
                                 cfg.n_steps, _p(cfg, "scheme"), cfg.rel_tol)
    rep.rows.extend(sub.rows)
    rep.metadata.update(sub.metadata)
    if problem.name == "linear" and phi_name == "identity":
        a, beta, x0 = (problem.params[k] for k in ("alpha", "beta", "x0"))
        t = cfg.t_max

        def mean(h):
            return x0 * math.exp(a * t + 0.5 * beta**2 * t ** (2 * h))

        for h1, h2 in cfg.h_pairs:
            q = 0.0 if h1 == h2 else (mean(h1) - mean(h2)) / (h1 - h2)
            rep.add("pair", "exact_diff_quotient", q, 0.0, 0, h=h1, h_prime=h2)
    q = [abs(r["value"]) for r in sub.get("diff_quotient") if r["h"] != r["h_prime"]]
    if len(q) >= 2 and min(q) > 0:
        rep.add("pair", "quotient_spread", max(q) / min(q), float("nan"), cfg.n_mc)


def run_fou_stationary(cfg, rep):
    n_se = _tol(cfg, "n_se", 4.0)
    for kappa, h in _p(cfg, "cases"):
        spec = ergodic.FouSpec(float(kappa), float(h), cfg.t_max, cfg.n_steps, cfg.rel_tol)
        budget, _ = ergodic.fou_terminal_budget(spec)
        target = ergodic.stationary_fou_variance(spec.kappa, spec.h)

        def run(seeds, spec=spec):
            u = ergodic.simulate_fou(spec, sample_drivers(seeds, spec.driver_grid)).x
            return u[:, -2:]

        u = map_replications(run, cfg.seed, cfg.n_mc)
        last = u[:, 1]
        c = last - last.mean()
        var, var_se = mean_se(c * c)
        var *= cfg.n_mc / max(cfg.n_mc - 1, 1)
        lab = f"kappa={spec.kappa:g}"
        z = max(abs(var - target) - budget, 0.0) / var_se if cfg.n_mc > 1 else float("nan")
        rep.add(lab, "variance", var, var_se, cfg.n_mc, h=spec.h)
        rep.add(lab, "target", target, 0.0, 0, h=spec.h)
        rep.add(lab, "budget", budget, 0.0, 0, h=spec.h)
        rep.add(lab, "excess_z", z, float("nan"), cfg.n_mc, h=spec.h)
        rep.add(lab, "within_tolerance", float(z <= n_se), float("nan"), cfg.n_mc, h=spec.h)
        if cfg.n_mc > 2:
            sd = math.sqrt(var)
            rep.add(lab, "skewness", float(np.mean(c**3)) / sd**3, math.sqrt(6.0 / cfg.n_mc), cfg.n_mc, h=spec.h)
            rep.add(lab, "excess_kurtosis", float(np.mean(c**4)) / var**2 - 3.0, math.sqrt(24.0 / cfg.n_mc),
                    cfg.n_mc, h=spec.h)
            rep.add(lab, "lag1_corr", float(np.corrcoef(u[:, 0], u[:, 1])[0, 1]), float("nan"), cfg.n_mc, h=spec.h)
            v0, s0 = mean_se((u[:, 0] - u[:, 0].mean()) ** 2)
            rep.add(lab, "shift_variance_diff", var - v0, math.hypot(var_se, s0), cfg.n_mc, h=spec.h)


def run_ergodic_avg(cfg, rep):
    kappa = float(_p(cfg, "kappa"))
    phi_name = _p(cfg, "phi")
    phi = OBSERVABLES[phi_name]
    for h in cfg.h:
        spec = ergodic.FouSpec(kappa, h, cfg.t_max, cfg.n_steps, cfg.rel_tol)
        grid = spec.driver_grid

        def run(seeds, spec=spec, grid=grid):
            return np.array([ergodic.ergodic_average(ergodic.simulate_fou(spec, sample_driver(s, grid)), phi)
                             for s in seeds])

        vals = map_replications(run, cfg.seed, cfg.n_mc, chunk=1)
        m, se = mean_se(vals)
        var = ergodic.stationary_fou_variance(kappa, h)
        target = {"square": var, "identity": 0.0, "constant": 1.0}.get(phi_name, float("nan"))
        rep.add(phi_name, "time_average", m, se, cfg.n_mc, h=h)
        rep.add(phi_name, "target", target, 0.0, 0, h=h)
        if target != 0 and math.isfinite(target):
            rep.add(phi_name, "rel_error", abs(m / target - 1.0), float("nan"), cfg.n_mc, h=h)
        else:
            rep.add(phi_name, "abs_error", abs(m - target), float("nan"), cfg.n_mc, h=h)
    rep.metadata["kappa"] = kappa


def run_h_compare(cfg, rep):
    dp = ergodic.DissipativeProblem(_problem(cfg), float(_p(cfg, "k_mu")), float(_p(cfg, "kappa_mu")))
    rep.add("monitor", "dissipativity_violation_rate", dp.monitor(seed=cfg.seed % 2**32), float("nan"), 1000)
    cps = _p(cfg, "checkpoints")
    cr = ergodic.compare_across_h(dp, cfg.h_pairs, cfg.t_max, float(_p(cfg, "eps")), cfg.n_mc, cfg.seed,
                                  cfg.n_steps, cps, bool(_p(cfg, "burn")))
    sub = cr.to_report()
    rep.rows.extend(sub.rows)
    rep.slopes.extend(sub.slopes)
    rep.add("all", "moment_ratio_spread", cr.moment_ratio_spread(), float("nan"), cfg.n_mc)
    rep.metadata.update(sub.metadata)


def run_hitting_laplace(cfg, rep):
    sub = ergodic.estimate_hitting_laplace(
        _problem(cfg), float(_p(cfg, "lambda")), cfg.h, float(_p(cfg, "barrier")), cfg.n_mc, cfg.t_max,
        cfg.n_steps, cfg.seed, float(_p(cfg, "ref_h")), cfg.rel_tol,
    )
    rep.rows.extend(sub.rows)
    rep.metadata.update(sub.metadata)
    q = [abs(r["value"]) for r in sub.get("diff_quotient")]
    if len(q) >= 2 and min(q) > 0:
        rep.add("quotient", "quotient_spread", max(q) / min(q), float("nan"), cfg.n_mc)


def _absorb(rep, sub, suffix):
    rep.rows.extend(sub.rows)
    for s in sub.slopes:
        rep.add_slope(type(s)(f"{s.label}{suffix}", s.slope, s.intercept, s.ci_low, s.ci_high, s.stderr))


def run_levy_converge(cfg, rep):
    n_range = [int(n) for n in _p(cfg, "n_range")]
    rho = float(_p(cfg, "rho"))
    for h in cfg.h:
        sub = rough.levy_area_convergence(h, n_range, rho, cfg.n_mc, cfg.seed, int(_p(cfg, "m")), cfg.t_max)
        _absorb(rep, sub, f":h={h:g}")
    if _p(cfg, "smooth_control"):
        sub = rough.smooth_pair_distances(n_range, rho, cfg.t_max)
        for r in sub.rows:
            r["label"] = "smooth:" + r["label"]
        _absorb(rep, sub, ":smooth")
    rep.metadata["rho"] = rho


def run_levy_diverge(cfg, rep):
    n_range = [int(n) for n in _p(cfg, "n_range")]
    for h in cfg.h:
        sub = rough.mixed_area_divergence(h, n_range, cfg.n_mc, cfg.seed, cfg.t_max, bool(_p(cfg, "exact")))
        rep.rows.extend(sub.rows)
        if len(n_range) >= 2:
            for lab in ("mixed", "independent"):
                r = [x["value"] for x in sub.get("exact_ratio") if x["label"].startswith(lab + ":")]
                if r:
                    rep.add(lab, "exact_median_ratio", float(np.median(r)), float("nan"), 0, h=h)
                    rep.add(lab, "exact_min_ratio", float(np.min(r)), float("nan"), 0, h=h)
                    rep.add(lab, "exact_max_ratio", float(np.max(r)), float("nan"), 0, h=h)


def run_law_continuity(cfg, rep):
    h0 = _p(cfg, "h0")
    sub = rough.law_continuity_check(_problem(cfg), cfg.h, cfg.n_mc, cfg.seed, h0, cfg.n_steps, cfg.t_max)
    rep.rows.extend(sub.rows)


def _random_two_piece(cfg):
    rng = _rng(seed_stream(cfg.seed, 2**63))
    n = cfg.n_steps
    cuts = np.sort(rng.choice(np.arange(n + 1), size=3, replace=False))
    vals = rng.standard_normal(2)
    t = cuts * (cfg.t_max / n)
    return wiener.StepFunction([(t[0], t[1], vals[0]), (t[1], t[2], vals[1])])


def run_wiener_norm(cfg, rep):
    pieces = _p(cfg, "pieces")
    if pieces is None:
        f = _random_two_piece(cfg)
    else:
        f = wiener.StepFunction([tuple(float(x) for x in row) for row in pieces])
    ind = wiener.StepFunction.indicator(0.0, cfg.t_max)
    n_se = _tol(cfg, "n_se", 4.0)
    grid = GridSpec(cfg.t_max, cfg.n_steps)
    for h in cfg.h:
        if h < 0.5:
            rep.add("indicator", "norm_formula", wiener.wiener_norm_smallH(ind, h, cfg.t_max), 0.0, 0, h=h)
            formula = wiener.wiener_norm_smallH(f, h, cfg.t_max)
            rep.add("step", "norm_formula", formula, 0.0, 0, h=h)
        rep.add("indicator", "target", cfg.t_max ** (2 * h), 0.0, 0, h=h)
        cov = wiener.wiener_variance_covariance(f, h)
        rep.add("step", "norm_covariance", cov, 0.0, 0, h=h)

        def run(seeds, h=h):
            return wiener.wiener_integral(f, exact_fbm_cholesky(seeds, grid, h))

        vals = map_replications(run, cfg.seed, cfg.n_mc)
        c = vals - vals.mean()
        var, se = mean_se(c * c)
        var *= cfg.n_mc / max(cfg.n_mc - 1, 1)
        rep.add("step", "mc_variance", var, se, cfg.n_mc, h=h)
        if cfg.n_mc > 1:
            z = abs(var - cov) / se
            rep.add("step", "excess_z", z, float("nan"), cfg.n_mc, h=h)
            rep.add("step", "within_tolerance", float(z <= n_se), float("nan"), cfg.n_mc, h=h)
    for k in _p(cfg, "curve_points"):
        hg = np.linspace(0.05, 0.95, int(k))
        curve = np.array([v for _, v in wiener.wiener_variance_curve(f, hg, cfg.t_max)])
        rep.add(f"points={int(k)}", "curve_max_jump", float(np.max(np.abs(np.diff(curve)))), 0.0, 0)
    rep.metadata["pieces"] = [[float(u), float(v), float(x)] for u, v, x in zip(f.u, f.v, f.values)]


# ------------------------------------------------------------------ registry

_LINEAR = {"name": "linear", "params": {"alpha": -0.5, "beta": 0.3, "x0": 1.0}}
_OU = {"name": "ou", "params": {"kappa": 1.0, "x0": 0.0}}

EXPERIMENTS = {
    e.name: e
    for e in [
        Experiment(
            "fbm-cov", run_fbm_cov,
            {"n_mc": 10000, "grid": {"t_max": 1.0, "n_steps": 64}, "h": [0.3, 0.5, 0.75],
             "params": {"nodes": [0.125, 0.25, 0.5, 0.75, 1.0], "samplers": ["mvn", "cholesky"]}},
            checks=(_numbers("nodes"), _nodes_on_grid, _choices("samplers", {"mvn", "cholesky"})),
        ),
        Experiment(
            "fbm-sensitivity", run_fbm_sensitivity,
            {"n_mc": 32, "grid": {"t_max": 1.0, "n_steps": 256}, "h": [0.3, 0.5, 0.75],
             "params": {"deltas": [1e-2, 5e-3, 2.5e-3], "moments": [2, 4]}},
            checks=(_numbers("deltas"), _numbers("moments", kind=int), _deltas_in_band),
        ),
        Experiment(
            "sde-solve", run_sde_solve,
            {"n_mc": 16, "grid": {"t_max": 1.0, "n_steps": 512}, "h": [0.7], "problem": _LINEAR,
             "params": {"levels": [64, 128, 256, 512], "schemes": ["doss-sussmann", "young-euler"],
                        "reference": "auto"}},
            needs_problem=True,
            checks=(_numbers("levels", kind=int), _levels_divide, _choices("schemes", set(SOLVERS)),
                    _choices("reference", {"auto", "closed-form", "finest"}), _young_needs_rough),
        ),
        Experiment(
            "sde-sensitivity", run_sde_sensitivity,
            {"n_mc": 16, "grid": {"t_max": 1.0, "n_steps": 512}, "h": [0.7], "problem": _LINEAR,
             "params": {"levels": [64, 128, 256, 512],
                        "methods": ["exponential-representation", "variational-phi"],
                        "deltas": [1e-2, 5e-3, 2.5e-3, 1.25e-3], "solver": "auto", "reference": "auto"}},
            needs_problem=True,
            checks=(_numbers("levels", kind=int), _levels_divide, _choices("methods", set(SENSITIVITIES)),
                    _numbers("deltas", min_len=2), _deltas_in_band, _choices("solver", set(SOLVERS)),
                    _choices("reference", {"auto", "closed-form", "finest"}), _sensitivity_needs_rough),
        ),
        Experiment(
            "law-lipschitz", run_law_lipschitz,
            {"n_mc": 2000, "grid": {"t_max": 2.0, "n_steps": 128}, "problem": _LINEAR,
             "h_pairs": [[0.7, 0.6], [0.7, 0.65], [0.7, 0.675]],
             "params": {"phi": "identity", "scheme": "auto"}},
            needs_h=False, needs_pairs=True, needs_problem=True,
            checks=(_choices("phi", set(OBSERVABLES)), _choices("scheme", set(SOLVERS))),
        ),
        Experiment(
            "fou-stationary", run_fou_stationary,
            {"n_mc": 10000, "grid": {"t_max": 1.0, "n_steps": 64},
             "params": {"cases": [[1.0, 0.5], [1.0, 0.75], [2.0, 0.6]]}},
            needs_h=False, checks=(_fou_cases,),
        ),
        Experiment(
            "ergodic-avg", run_ergodic_avg,
            {"n_mc": 1, "grid": {"t_max": 500.0, "n_steps": 50000}, "h": [0.5, 0.7],
             "params": {"kappa": 25.0, "phi": "square"}},
            max_mc=256, checks=(_positive("kappa"), _choices("phi", set(OBSERVABLES))),
        ),
        Experiment(
            "h-compare", run_h_compare,
            {"n_mc": 64, "grid": {"t_max": 100.0, "n_steps": 1600}, "problem": _OU,
             "h_pairs": [[0.6, 0.5], [0.6, 0.55], [0.6, 0.65], [0.6, 0.7]],
             "params": {"eps": 0.1, "checkpoints": [10.0, 50.0, 100.0], "burn": False, "k_mu": 1.0,
                        "kappa_mu": 1.0}},
            needs_h=False, needs_pairs=True, needs_problem=True,
            checks=(_numbers("checkpoints"), _positive("k_mu", "kappa_mu")),
        ),
        Experiment(
            "hitting-laplace", run_hitting_laplace,
            {"n_mc": 4000, "grid": {"t_max": 10.0, "n_steps": 2560}, "h": [0.45, 0.5, 0.55], "problem": _OU,
             "params": {"lambda": 1.0, "barrier": 1.0, "ref_h": 0.5}},
            needs_problem=True, checks=(_positive("lambda"),),
        ),
        Experiment(
            "levy-converge", run_levy_converge,
            {"n_mc": 32, "h": [0.75, 0.45],
             "params": {"n_range": [4, 5, 6, 7, 8, 9, 10, 11, 12], "rho": 0.34, "m": 2, "smooth_control": True}},
            checks=(_numbers("n_range", kind=int, min_len=2), _rho_band),
        ),
        Experiment(
            "levy-diverge", run_levy_diverge,
            {"n_mc": 128, "h": [0.5], "params": {"n_range": [6, 7, 8, 9, 10, 11], "exact": True}},
            checks=(_numbers("n_range", kind=int, min_len=2),),
        ),
        Experiment(
            "law-continuity", run_law_continuity,
            {"n_mc": 2000, "grid": {"t_max": 1.0, "n_steps": 256}, "h": [0.5, 0.4, 0.45, 0.475],
             "problem": {"name": "sine-drift", "params": {"x0": 0.0}}, "params": {"h0": 0.5}},
            h_range=(1.0 / 3.0, 0.95), needs_problem=True, checks=(_at_most_half,),
        ),
        Experiment(
            "wiener-norm", run_wiener_norm,
            {"n_mc": 10000, "grid": {"t_max": 1.0, "n_steps": 64}, "h": [0.1, 0.25, 0.4],
             "params": {"pieces": None, "curve_points": [9, 17, 33, 65]}},
            h_range=(0.0, 1.0), checks=(_pieces, _numbers("curve_points", kind=int)),
        ),
    ]
}


def run_experiment(cfg, report=None):
    """Dispatch ``cfg`` to its experiment; rows accumulate in ``report`` (created if absent)."""
    rep = ExperimentReport(cfg.experiment) if report is None else report
    rep.metadata.update({"experiment": cfg.experiment, "seed": cfg.seed, "config_hash": cfg.config_hash()})
    EXPERIMENTS[cfg.experiment].run(cfg, rep)
    return rep
