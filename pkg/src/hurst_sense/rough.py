"""Dyadic piecewise-linear approximations, second-level areas and rho-Hölder distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import GridError
from .fbm.grid import GridSpec, sample_drivers
from .fbm.synth import synthesis_matrices, synthesize_fbm
from .harness.batching import map_replications
from .harness.seeds import seed_stream
from .harness.stats import fit_loglog_slope, mean_se
from .report import ExperimentReport


@dataclass(frozen=True, eq=False)
class DyadicPath:
    """Values at t_k = k T / 2^n; trailing axis holds components, time is the next-to-last axis."""

    level: int
    values: np.ndarray
    t_max: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[-2] != 2**self.level + 1:
            raise GridError(f"level {self.level} needs {2**self.level + 1} nodes, got {v.shape[-2]}")
        object.__setattr__(self, "values", v)

    @property
    def nodes(self):
        return np.linspace(0.0, self.t_max, 2**self.level + 1)

    @property
    def dt(self):
        return self.t_max / 2**self.level

    def __call__(self, t):
        """Piecewise-linear interpolant (per component)."""
        t = np.asarray(t, float)
        return np.stack([np.interp(t, self.nodes, self.values[..., i]) for i in range(self.values.shape[-1])], -1)

    def refine_to(self, level):
        """Same piecewise-linear path written on the nodes of a finer level."""
        if level < self.level:
            raise GridError("can only refine to a finer level")
        r = 2 ** (level - self.level)
        v = self.values
        frac = np.arange(r) / r
        left = v[..., :-1, None, :]
        right = v[..., 1:, None, :]
        fine = left + (right - left) * frac[:, None]
        fine = fine.reshape(v.shape[:-2] + (-1, v.shape[-1]))
        return DyadicPath(level, np.concatenate([fine, v[..., -1:, :]], axis=-2), self.t_max)


def dyadic_sample(path, n, t_max=None):
    """Restriction of a grid path (array with time on axis 0, or a bundle) to level n."""
    if hasattr(path, "grid"):
        t_max = path.grid.t_max
        vals = np.asarray(path.path if hasattr(path, "path") else path.states)
    else:
        t_max = 1.0 if t_max is None else t_max
        vals = np.asarray(path, float)
    if vals.ndim == 1:
        vals = vals[:, None]
    steps = vals.shape[-2] - 1
    if steps % (2**n):
        raise GridError(f"grid with {steps} steps does not resolve dyadic level {n}")
    return DyadicPath(n, vals[..., :: steps // 2**n, :], t_max)


def _cumulative_area(x, y):
    """C_k = sum_{j < k} (x_j + x_{j+1}) / 2 (y_{j+1} - y_j), with C_0 = 0 (time on axis -1)."""
    inc = 0.5 * (x[..., :-1] + x[..., 1:]) * np.diff(y, axis=-1)
    return np.concatenate([np.zeros(inc.shape[:-1] + (1,)), np.cumsum(inc, axis=-1)], axis=-1)


def levy_area(x, y, s, t):
    """int_s^t (x_u - x_s) dy_u for piecewise-linear x, y on the same level (first components)."""
    if x.level != y.level or x.t_max != y.t_max:
        raise GridError("paths must share the dyadic level")
    i, j = _node(x, s), _node(x, t)
    xv, yv = x.values[..., 0], y.values[..., 0]
    c = _cumulative_area(xv, yv)
    return c[..., j] - c[..., i] - xv[..., i] * (yv[..., j] - yv[..., i])


def _node(p, t):
    k = t / p.dt
    j = int(round(k))
    if abs(k - j) > 1e-9 * max(1.0, k) or not 0 <= j <= 2**p.level:
        raise GridError(f"t={t} is not a node of level {p.level}")
    return j


@dataclass(frozen=True, eq=False)
class RoughLevel:
    first: np.ndarray
    second: np.ndarray
    nodes: tuple


def rough_level(p, s, t):
    """(B^1_{s,t}, B^2_{s,t}) with B^2[i, j] = int_s^t (x^i_u - x^i_s) dx^j_u."""
    i, j = _node(p, s), _node(p, t)
    v = p.values
    m = v.shape[-1]
    first = v[..., j, :] - v[..., i, :]
    second = np.empty(v.shape[:-2] + (m, m))
    for a in range(m):
        for b in range(m):
            c = _cumulative_area(v[..., a], v[..., b])
            second[..., a, b] = c[..., j] - c[..., i] - v[..., i, a] * (v[..., j, b] - v[..., i, b])
    return RoughLevel(first, second, (s, t))


@dataclass(frozen=True)
class HolderDistance:
    rho: float
    d1: float
    d2: float


def _dyadic_pairs(level):
    """Index pairs (i, j) of all dyadic intervals of levels 0..level on the level grid."""
    out_i, out_j = [], []
    for lev in range(level + 1):
        step = 2 ** (level - lev)
        i = np.arange(0, 2**level, step)
        out_i.append(i)
        out_j.append(i + step)
    return np.concatenate(out_i), np.concatenate(out_j)


def _levels_on_pairs(v, i, j):
    m = v.shape[-1]
    first = v[..., j, :] - v[..., i, :]
    second = np.empty(v.shape[:-2] + (i.size, m, m))
    for a in range(m):
        for b in range(m):
            c = _cumulative_area(v[..., a], v[..., b])
            second[..., a, b] = c[..., j] - c[..., i] - v[..., i, a] * (v[..., j, b] - v[..., i, b])
    return first, second


def rho_distance(p, q, rho):
    """Two-level rho-Hölder distance over all dyadic intervals of the finer level.

    d1 = max |P^1 - Q^1| / |t - s|^rho, d2 = max |P^2 - Q^2| / |t - s|^{2 rho} (max norms).
    Batched paths give per-path distances.
    """
    level = max(p.level, q.level)
    pv, qv = p.refine_to(level).values, q.refine_to(level).values
    i, j = _dyadic_pairs(level)
    length = (j - i) * (p.t_max / 2**level)
    p1, p2 = _levels_on_pairs(pv, i, j)
    q1, q2 = _levels_on_pairs(qv, i, j)
    d1 = np.max(np.max(np.abs(p1 - q1), axis=-1) / length**rho, axis=-1)
    d2 = np.max(np.max(np.abs(p2 - q2), axis=(-2, -1)) / length ** (2 * rho), axis=-1)
    return HolderDistance(rho, d1, d2)


def successive_distances(fine, n_range, rho):
    """[(n, d1, d2)] for d_rho(B[n], B[n+1]) from a path sampled at the finest needed level."""
    out = []
    for n in n_range:
        a, b = dyadic_sample(fine, n), dyadic_sample(fine, n + 1)
        d = rho_distance(a, b, rho)
        out.append((n, d.d1, d.d2))
    return out


def levy_area_convergence(h, n_range, rho, n_mc=16, root=0, m=2, t_max=1.0):
    """Cauchy decay of d_rho(B[n], B[n+1]) for m independent fBm components (own drivers)."""
    n_range = list(n_range)
    if not 1.0 / 3.0 < rho < h:
        raise ValueError("need 1/3 < rho < h")
    top = max(n_range) + 1
    grid = GridSpec.for_hurst(t_max, 2**top, [h])

    def run(seeds):
        comps = []
        for c in range(m):
            drivers = sample_drivers([s if c == 0 else seed_stream(s, c) for s in seeds], grid)
            comps.append(synthesize_fbm(drivers, h, sensitivity=False).path)
        fine = np.stack(comps, axis=-1)
        res = successive_distances(fine, n_range, rho)
        return np.stack([np.stack([r[1], r[2]], axis=-1) for r in res], axis=1)

    data = map_replications(run, root, n_mc, chunk=16)
    return _distance_report("levy-converge", data, n_range, h, rho, n_mc)


def _distance_report(name, data, n_range, h, rho, n_mc):
    rep = ExperimentReport(name)
    m, se = mean_se(data)
    for k, n in enumerate(n_range):
        rep.add(f"n={n}", "d1", m[k, 0], se[k, 0], n_mc, h=h)
        rep.add(f"n={n}", "d2", m[k, 1], se[k, 1], n_mc, h=h)
    ratios = m[1:, 1] / m[:-1, 1]
    for k in range(len(ratios)):
        rep.add(f"n={n_range[k + 1]}", "d2_ratio", ratios[k], float("nan"), n_mc, h=h)
    if len(ratios):
        rep.add("all", "d2_median_ratio", float(np.median(ratios)), float("nan"), n_mc, h=h)
    x = 2.0 ** -np.asarray(n_range, float)
    if len(n_range) >= 3:
        rep.add_slope(fit_loglog_slope(np.column_stack([x, m[:, 0]]), "d1_rate"))
        rep.add_slope(fit_loglog_slope(np.column_stack([x, m[:, 1]]), "d2_rate"))
    rep.metadata["rho"] = rho
    return rep


def smooth_pair_distances(n_range, rho, t_max=1.0):
    """Deterministic (sin, cos) pair: report with per-level distances and fitted rates in 2^-n."""
    top = max(n_range) + 1
    t = np.linspace(0.0, t_max, 2**top + 1)
    fine = np.stack([np.sin(t), np.cos(t)], axis=-1)
    res = successive_distances(fine, n_range, rho)
    data = np.array([[[r[1], r[2]] for r in res]])
    return _distance_report("levy-converge-smooth", data, list(n_range), float("nan"), rho, 1)


# ---------------------------------------------------------------- mixed areas


def _level_matrix(level, top):
    """Sparse Q with v' Q w = (1/2) sum_k (v_k + v_{k-1})(w_k - w_{k-1}) on level nodes."""
    n_top = 2**top + 1
    step = 2 ** (top - level)
    idx = np.arange(0, n_top, step)
    a, b = idx[:-1], idx[1:]
    rows = np.concatenate([b, a, b, a])
    cols = np.concatenate([b, b, a, a])
    vals = np.concatenate([np.full(a.size, 0.5), np.full(a.size, 0.5),
                           np.full(a.size, -0.5), np.full(a.size, -0.5)])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n_top, n_top))


def mixed_area_sums(v, w, n_range, top):
    """S_n = (1/2) sum (v_k + v_{k-1})(w_k - w_{k-1}) on each level (time on the last axis)."""
    out = []
    for n in n_range:
        step = 2 ** (top - n)
        vv, ww = v[..., ::step], w[..., ::step]
        out.append(0.5 * np.sum((vv[..., 1:] + vv[..., :-1]) * np.diff(ww, axis=-1), axis=-1))
    return np.stack(out, axis=-1)


def quadratic_form_variance(q, cov_vv, cov_ww, cov_wv):
    """Var(v' Q w) for a centred Gaussian (v, w); ``cov_wv[b, c] = E w_b v_c``."""
    a = q @ (q @ cov_ww).T  # Q Sww Q'
    first = float(np.sum(a * cov_vv))
    if cov_wv is None:
        return first
    b = q @ cov_wv  # Q Swv
    second = float(np.sum(b * b.T))
    return first + second


def exact_mixed_moments(h, n_range, contrast=False, t_max=1.0):
    """Exact mean, variance and second moment of D_n = S_{n+1} - S_n.

    The pair is (B^H, dB^H/dH) from one driver or, with ``contrast``, (B^H, independent B^H).
    Returns a dict of arrays indexed like ``n_range``.
    """
    n_range = list(n_range)
    top = max(n_range) + 1
    grid = GridSpec.for_hurst(t_max, 2**top, [h])
    m, dm = synthesis_matrices(h, grid)
    wid = grid.cell_widths
    cov_ww = (m * wid) @ m.T
    if contrast:
        cov_vv, cov_wv = cov_ww, None
    else:
        cov_vv = (dm * wid) @ dm.T
        cov_wv = (m * wid) @ dm.T
    mean, var = [], []
    for n in n_range:
        q = _level_matrix(n + 1, top) - _level_matrix(n, top)
        var.append(quadratic_form_variance(q, cov_vv, cov_ww, cov_wv))
        # E v'Qw = sum_ab Q_ab E[v_a w_b] = tr(Q Swv)
        mean.append(0.0 if cov_wv is None else float((q @ cov_wv).diagonal().sum()))
    mean, var = np.array(mean), np.array(var)
    return {"mean": mean, "var": var, "second_moment": var + mean**2}


def mixed_area_divergence(h, n_range, n_mc=256, root=0, t_max=1.0, exact=True):
    """Off-diagonal area sums for (B^H, dB^H/dH) and the independent contrast pair.

    With D_n = S_{n+1} - S_n, reports Monte Carlo and exact E D_n^2 (plus mean and variance)
    per level, successive second-moment ratios and the diagonal control |(1/2) sum (w_k + w_{k-1}) dw_k - w_T^2 / 2|.
    """
    n_range = list(n_range)
    top = max(n_range) + 1
    levels = n_range + [top]
    grid = GridSpec.for_hurst(t_max, 2**top, [h])

    def run(seeds):
        drv = sample_drivers(seeds, grid)
        b = synthesize_fbm(drv, h)
        other = sample_drivers([seed_stream(s, 1) for s in seeds], grid)
        w2 = synthesize_fbm(other, h, sensitivity=False).path
        s_mix = mixed_area_sums(b.sensitivity, b.path, levels, top)
        s_ind = mixed_area_sums(w2, b.path, levels, top)
        s_diag = mixed_area_sums(b.path, b.path, levels, top)
        diag_err = np.abs(s_diag - 0.5 * b.path[..., -1:] ** 2).max(axis=-1)
        return np.diff(s_mix, axis=-1), np.diff(s_ind, axis=-1), diag_err

    d_mix, d_ind, diag = map_replications(run, root, n_mc, chunk=64)
    rep = ExperimentReport("levy-diverge")
    rep.add("diagonal", "max_abs_error", float(diag.max()), float("nan"), n_mc, h=h)
    for lab, d in (("mixed", d_mix), ("independent", d_ind)):
        sq_m, sq_se = mean_se(d**2)
        mu, mu_se = mean_se(d)
        for k, n in enumerate(n_range):
            rep.add(f"{lab}:n={n}", "mc_second_moment", sq_m[k], sq_se[k], n_mc, h=h)
            rep.add(f"{lab}:n={n}", "mc_mean", mu[k], mu_se[k], n_mc, h=h)
    if exact:
        for lab, contrast in (("mixed", False), ("independent", True)):
            mom = exact_mixed_moments(h, n_range, contrast, t_max)
            for k, n in enumerate(n_range):
                for key in ("mean", "var", "second_moment"):
                    rep.add(f"{lab}:n={n}", f"exact_{key}", mom[key][k], 0.0, 0, h=h)
            sm = mom["second_moment"]
            for k in range(len(sm) - 1):
                rep.add(f"{lab}:n={n_range[k + 1]}", "exact_ratio", sm[k + 1] / sm[k], 0.0, 0, h=h)
    return rep


# ---------------------------------------------------------------- law continuity


def law_continuity_check(problem, h_list, n_mc=2000, root=0, h0=None, n_steps=256, t_max=1.0,
                         functionals=None):
    """Distribution distances of bounded functionals of X^H against X^{h0} on shared drivers.

    Reports, per h, the Kolmogorov distance of the empirical laws and the mean difference.
    """
    from scipy.stats import ks_2samp

    from .sde.solvers import solve

    h_list = [float(h) for h in h_list]
    h0 = max(h_list) if h0 is None else float(h0)
    hs = sorted(set(h_list) | {h0})
    if functionals is None:
        functionals = {
            "tanh_sup": lambda x: np.tanh(np.abs(x).max(axis=-1)),
            "tanh_terminal": lambda x: np.tanh(x[..., -1]),
        }
    grid = GridSpec.for_hurst(t_max, n_steps, hs)
    names = list(functionals)

    def run(seeds):
        drivers = sample_drivers(seeds, grid)
        cols = []
        for h in hs:
            x = solve(problem, synthesize_fbm(drivers, h, sensitivity=False)).x
            cols.append(np.stack([np.asarray(functionals[k](x), float) * np.ones(x.shape[:-1]) for k in names], -1))
        return np.stack(cols, axis=1)

    vals = map_replications(run, root, n_mc, chunk=256)
    rep = ExperimentReport("law-continuity")
    i0 = hs.index(h0)
    for i, h in enumerate(hs):
        for k, name in enumerate(names):
            a, b = vals[:, i, k], vals[:, i0, k]
            ks = 0.0 if np.array_equal(a, b) else float(ks_2samp(a, b).statistic)
            m, se = mean_se(a - b)
            rep.add(name, "ks_distance", ks, float("nan"), n_mc, h=h, h_prime=h0)
            rep.add(name, "mean_difference", abs(float(m)), float(se), n_mc, h=h, h_prime=h0)
    return rep
