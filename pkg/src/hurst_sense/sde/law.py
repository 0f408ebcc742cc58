"""Common-driver Monte Carlo for H-dependence of laws E phi(X^H_t)."""

from __future__ import annotations

import numpy as np

from ..fbm.grid import GridSpec, sample_drivers
from ..fbm.synth import synthesize_fbm
from ..harness.batching import map_replications
from ..harness.stats import mean_se
from ..report import ExperimentReport
from .solvers import solve


def terminal_values(problem, hs, grid, root, n_mc, scheme="auto", chunk=256):
    """X^H_T for every h in ``hs`` on shared drivers: array (n_mc, len(hs))."""
    hs = [float(h) for h in hs]

    def run(seeds):
        drivers = sample_drivers(seeds, grid)
        cols = [solve(problem, synthesize_fbm(drivers, h, sensitivity=False), scheme).x[..., -1] for h in hs]
        return np.stack(cols, axis=-1)

    return map_replications(run, root, n_mc, chunk)


def estimate_law_lipschitz(problem, phi, h_pairs, t, n_mc, root=0, n_steps=256, scheme="auto", rel_tol=1e-3):
    """|E phi(X^{H1}_t) - E phi(X^{H2}_t)| / |H1 - H2| per pair, with paired standard errors."""
    h_pairs = [(float(a), float(b)) for a, b in h_pairs]
    hs = sorted({h for pair in h_pairs for h in pair})
    grid = GridSpec.for_hurst(t, n_steps, hs, rel_tol)
    xt = terminal_values(problem, hs, grid, root, n_mc, scheme)
    vals = np.asarray(phi(xt), float) * np.ones_like(xt)
    col = {h: i for i, h in enumerate(hs)}
    rep = ExperimentReport("law-lipschitz")
    for h in hs:
        m, se = mean_se(vals[:, col[h]])
        rep.add("mean_phi", "mean_phi", m, se, n_mc, h=h)
    for h1, h2 in h_pairs:
        gap = abs(h1 - h2)
        if gap == 0:
            rep.add("pair", "diff_quotient", 0.0, 0.0 if n_mc > 1 else float("nan"), n_mc, h=h1, h_prime=h2)
            rep.add("pair", "lipschitz_ratio", 0.0, 0.0 if n_mc > 1 else float("nan"), n_mc, h=h1, h_prime=h2)
            continue
        diff = vals[:, col[h1]] - vals[:, col[h2]]
        m, se = mean_se(diff)
        rep.add("pair", "diff_quotient", m / (h1 - h2), se / gap, n_mc, h=h1, h_prime=h2)
        rep.add("pair", "lipschitz_ratio", abs(m) / gap, se / gap, n_mc, h=h1, h_prime=h2)
    rep.metadata.update({"t": t, "n_steps": n_steps, "s_trunc": grid.s_trunc, "n_past": grid.n_past})
    return rep
