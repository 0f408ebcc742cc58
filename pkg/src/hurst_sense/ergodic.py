"""Stationary fractional OU, long-run dissipative SDEs, H-comparisons and hitting times."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError
from .fbm.grid import GridSpec, sample_drivers
from .fbm.kernel import check_hurst
from .fbm.synth import FbmBundle, functional_variance, synthesize_fbm
from .harness.batching import map_replications
from .harness.stats import fit_loglog_slope, mean_se
from .report import ExperimentReport
from .sde.problems import SdeProblem
from .sde.solvers import PathSolution, solve

FOU_BURN_TOL = 1e-8


def stationary_fou_variance(kappa, h):
    """E U^2 = Gamma(2H + 1) / (2 kappa^{2H}) for the stationary fractional OU process."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    check_hurst(h)
    return math.gamma(2 * h + 1) / (2 * kappa ** (2 * h))


def _burn_steps(rate, dt, tol):
    return int(math.ceil(math.log(1.0 / tol) / rate / dt))


@dataclass(frozen=True)
class FouSpec:
    """Stationary fOU on [0, t_max] with ``n_steps`` cells, run from zero over a burn-in.

    The driving fBm lives on [0, S + t_max]; time 0 of the output corresponds to S,
    which is a whole number of cells with exp(-kappa S) <= 1e-8.
    """

    kappa: float
    h: float
    t_max: float
    n_steps: int
    rel_tol: float = 1e-3

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        check_hurst(self.h)

    @property
    def dt(self):
        return self.t_max / self.n_steps

    @property
    def n_burn(self):
        return _burn_steps(self.kappa, self.dt, FOU_BURN_TOL)

    @property
    def s_burn(self):
        return self.n_burn * self.dt

    @property
    def driver_grid(self):
        n = self.n_burn + self.n_steps
        return GridSpec.for_hurst(n * self.dt, n, [self.h], self.rel_tol)

    @property
    def grid(self):
        return GridSpec(self.t_max, self.n_steps)

    def weights(self):
        """(decay, gain): U_{k+1} = decay U_k + gain (B_{k+1} - B_k)."""
        x = self.kappa * self.dt
        return math.exp(-x), -math.expm1(-x) / x


def _fou_recursion(spec, incr):
    decay, gain = spec.weights()
    u = np.zeros(incr.shape[:-1])
    out = np.empty(incr.shape[:-1] + (incr.shape[-1] + 1,))
    out[..., 0] = 0.0
    for k in range(incr.shape[-1]):
        u = decay * u + gain * incr[..., k]
        out[..., k + 1] = u
    return out


def simulate_fou(spec, driver):
    """Stationary fOU path on [0, t_max] from cell-averaged exponential weights on fBm increments."""
    dgrid = driver.grid
    if dgrid.n_steps != spec.n_burn + spec.n_steps or not math.isclose(dgrid.dt, spec.dt):
        raise GridError("driver grid does not cover the burn-in plus horizon")
    if math.exp(-spec.kappa * spec.s_burn) > FOU_BURN_TOL:
        raise GridError("burn-in too short for stationarity")
    b = synthesize_fbm(driver, spec.h, sensitivity=False)
    u = _fou_recursion(spec, np.diff(b.path, axis=-1))
    return PathSolution(spec.h, "fou-exponential", spec.grid, u[..., spec.n_burn :, None])


def fou_terminal_budget(spec):
    """|exact variance of the discretized U_T - stationary variance|."""
    decay, gain = spec.weights()
    n = spec.n_burn + spec.n_steps
    r = gain * decay ** np.arange(n - 1, -1, -1)  # U_T = sum_k r_k dB_k
    a = np.zeros(n + 1)
    a[1:] += r
    a[:-1] -= r
    v = functional_variance(spec.h, spec.driver_grid, a)
    return abs(v - stationary_fou_variance(spec.kappa, spec.h)), v


def ergodic_average(path, phi):
    """Trapezoid time average (1/T) int_0^T phi(X_t) dt of a (possibly batched) solution."""
    vals = np.asarray(phi(path.x), float) * np.ones(path.x.shape)
    w = np.full(path.grid.n_steps + 1, path.grid.dt)
    w[0] = w[-1] = 0.5 * path.grid.dt
    if vals.ndim > 1 and vals.shape[-1] != w.size:
        vals = np.moveaxis(vals, -2, -1)
    return vals @ w / path.grid.t_max


@dataclass(frozen=True, eq=False)
class DissipativeProblem:
    """An SdeProblem asserted to satisfy <x - y, mu(x) - mu(y)> <= -kappa_mu |x - y|^2."""

    problem: SdeProblem
    k_mu: float
    kappa_mu: float

    def __post_init__(self):
        if not (self.k_mu > 0 and self.kappa_mu > 0):
            raise ValueError("dissipativity constants must be positive")

    def monitor(self, n_pairs=1000, scale=10.0, seed=0):
        """Fraction of random state pairs violating the one-sided Lipschitz bound."""
        rng = np.random.Generator(np.random.PCG64(seed))
        d = self.problem.d
        x = scale * rng.standard_normal((n_pairs, d))
        y = scale * rng.standard_normal((n_pairs, d))
        lhs = np.sum((x - y) * (self.problem.mu(x) - self.problem.mu(y)), axis=-1)
        rhs = -self.kappa_mu * np.sum((x - y) ** 2, axis=-1)
        return float(np.mean(lhs > rhs + 1e-12 * np.abs(rhs)))


def burn_in_steps(dproblem, dt, tol=1e-6):
    """Cells of burn-in so that exp(-kappa_mu S) <= tol."""
    return _burn_steps(dproblem.kappa_mu, dt, tol)


def simulate_long_run(dproblem, hs, t_max, n_steps, seeds, burn=True, rel_tol=1e-3):
    """Solutions for every h on shared drivers; with ``burn`` the first S_burn is dropped.

    Returns (grid of the kept window, dict h -> states of shape (batch, n + 1, d)).
    """
    dt = t_max / n_steps
    nb = burn_in_steps(dproblem, dt) if burn else 0
    n = nb + n_steps
    grid = GridSpec.for_hurst(n * dt, n, hs, rel_tol)
    drivers = sample_drivers(seeds, grid)
    out = {}
    for h in hs:
        sol = solve(dproblem.problem, synthesize_fbm(drivers, h, sensitivity=False))
        out[h] = sol.states[..., nb:, :]
    return GridSpec(t_max, n_steps), out


@dataclass
class ComparisonReport:
    """H-comparison statistics per pair; ``checkpoints`` index the moment columns."""

    pairs: list
    eps: float
    checkpoints: list
    sup_distance: np.ndarray
    sup_distance_se: np.ndarray
    weighted_sup: np.ndarray
    weighted_sup_se: np.ndarray
    moment: np.ndarray
    moment_se: np.ndarray
    time_avg_sq: np.ndarray
    time_avg_sq_se: np.ndarray
    slopes: dict = field(default_factory=dict)
    n_mc: int = 0

    @property
    def gaps(self):
        return np.array([abs(a - b) for a, b in self.pairs])

    def moment_ratio_spread(self, pair_index=None):
        """max/min over checkpoints of E|X^H_t - X^H'_t|^2 / |H - H'|^2 (worst pair if None)."""
        gaps = self.gaps
        rows = range(len(self.pairs)) if pair_index is None else [pair_index]
        spreads = []
        for i in rows:
            if gaps[i] == 0:
                continue
            r = self.moment[i] / gaps[i] ** 2
            spreads.append(float(r.max() / r.min()))
        return max(spreads) if spreads else 1.0

    def to_report(self, name="h-compare"):
        rep = ExperimentReport(name)
        n = self.n_mc
        for i, (a, b) in enumerate(self.pairs):
            rep.add("pair", "sup_distance", self.sup_distance[i], self.sup_distance_se[i], n, h=a, h_prime=b)
            rep.add("pair", "weighted_sup", self.weighted_sup[i], self.weighted_sup_se[i], n, h=a, h_prime=b)
            rep.add("pair", "time_avg_sq", self.time_avg_sq[i], self.time_avg_sq_se[i], n, h=a, h_prime=b)
            for j, t in enumerate(self.checkpoints):
                rep.add(f"t={t:g}", "second_moment", self.moment[i, j], self.moment_se[i, j], n, h=a, h_prime=b)
        for fit in self.slopes.values():
            rep.add_slope(fit)
        rep.metadata["eps"] = self.eps
        return rep


def compare_across_h(dproblem, h_pairs, t_max, eps=0.1, n_mc=64, root=0, n_steps=None,
                     checkpoints=None, burn=False):
    """Pathwise and mean-square distances between solutions for H and H' on shared drivers."""
    if n_steps is None:
        n_steps = int(round(16 * t_max))
    pairs = [(float(a), float(b)) for a, b in h_pairs]
    hs = sorted({h for p in pairs for h in p})
    dt = t_max / n_steps
    if checkpoints is None:
        checkpoints = [t_max / 10, t_max / 2, t_max]
    idx = [int(round(t / dt)) for t in checkpoints]

    def run(seeds):
        grid, states = simulate_long_run(dproblem, hs, t_max, n_steps, seeds, burn)
        t = grid.nodes
        w = np.full(n_steps + 1, dt)
        w[0] = w[-1] = 0.5 * dt
        res = []
        for a, b in pairs:
            dist = np.linalg.norm(states[a] - states[b], axis=-1)
            sup = dist.max(axis=-1)
            wsup = (dist / (1.0 + t) ** eps).max(axis=-1)
            mom = dist[:, idx] ** 2
            tav = (dist**2) @ w / (1.0 + t_max)
            res.append(np.column_stack([sup, wsup, tav, mom]))
        return np.stack(res, axis=1)

    data = map_replications(run, root, n_mc, chunk=64)
    m, se = mean_se(data)
    k = len(checkpoints)
    rep = ComparisonReport(
        pairs, eps, list(checkpoints), m[:, 0], se[:, 0], m[:, 1], se[:, 1], m[:, 3 : 3 + k], se[:, 3 : 3 + k],
        m[:, 2], se[:, 2], n_mc=n_mc,
    )
    gaps = rep.gaps
    keep = gaps > 0
    if keep.sum() >= 3:
        rep.slopes["weighted_sup"] = fit_loglog_slope(np.column_stack([gaps[keep], rep.weighted_sup[keep]]), "weighted_sup")
        rep.slopes["time_avg_sq"] = fit_loglog_slope(np.column_stack([gaps[keep], rep.time_avg_sq[keep]]), "time_avg_sq")
        rep.slopes["sup_distance"] = fit_loglog_slope(np.column_stack([gaps[keep], rep.sup_distance[keep]]), "sup_distance")
    return rep


def first_hitting_times(x, t, barrier):
    """First node time with x >= barrier along the last axis; inf when never reached."""
    hit = x >= barrier
    any_hit = hit.any(axis=-1)
    first = np.argmax(hit, axis=-1)
    return np.where(any_hit, t[first], np.inf)


def estimate_hitting_laplace(problem, lam, h_list, barrier=1.0, n_mc=2000, t_max=10.0, n_steps=2560,
                             root=0, ref_h=0.5, rel_tol=1e-3):
    """E exp(-lam tau^H) for the first grid crossing of ``barrier``, on shared drivers.

    Paths that stay below the barrier up to t_max contribute 0; the neglected mass is at most
    exp(-lam t_max) and is reported, together with the grid detection scale dt^h.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    x0 = float(problem.x0[0])
    hs = sorted({float(h) for h in h_list} | {float(ref_h)})
    rep = ExperimentReport("hitting-laplace")
    rep.metadata.update({"lambda": lam, "barrier": barrier, "t_max": t_max, "n_steps": n_steps})
    dt = t_max / n_steps
    if x0 >= barrier:
        for h in hs:
            rep.add("laplace", "laplace_transform", 1.0, 0.0 if n_mc > 1 else float("nan"), n_mc, h=h)
        return rep
    grid = GridSpec.for_hurst(t_max, n_steps, hs, rel_tol)
    t = grid.nodes

    def run(seeds):
        drivers = sample_drivers(seeds, grid)
        cols = []
        for h in hs:
            x = solve(problem, synthesize_fbm(drivers, h, sensitivity=False)).x
            cols.append(np.exp(-lam * first_hitting_times(x, t, barrier)))
        return np.stack(cols, axis=-1)

    vals = map_replications(run, root, n_mc, chunk=256)
    col = {h: i for i, h in enumerate(hs)}
    for h in hs:
        m, se = mean_se(vals[:, col[h]])
        rep.add("laplace", "laplace_transform", m, se, n_mc, h=h)
        rep.add("laplace", "detection_scale", dt**h, float("nan"), n_mc, h=h)
    rep.add("laplace", "truncation_bound", math.exp(-lam * t_max), float("nan"), n_mc)
    for h in hs:
        if h == ref_h:
            continue
        m, se = mean_se(vals[:, col[h]] - vals[:, col[ref_h]])
        gap = abs(h - ref_h)
        rep.add("quotient", "diff_quotient", m / (h - ref_h), se / gap, n_mc, h=h, h_prime=ref_h)
    return rep
