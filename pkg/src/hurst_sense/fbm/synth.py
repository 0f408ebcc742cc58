"""fBm and its H-derivative from a shared two-sided driver, plus an exact Gaussian oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.signal import fftconvolve

from ..errors import FactorizationError, GridError, HurstDomainError
from .grid import DriverPath, GridSpec, _rng
from .kernel import (
    check_hurst,
    mvn_constant,
    mvn_constant_derivative,
    past_weights,
    recent_weights,
    weight_matrices,
)

H_MIN, H_MAX = 0.05, 0.95


@dataclass(frozen=True, eq=False)
class FbmBundle:
    """Co-sampled B^H and dB^H/dH at the nodes of [0, T].

    ``path`` and ``sensitivity`` have shape ``(n_steps + 1,)`` or ``(batch, n_steps + 1)``.
    ``sensitivity`` is ``None`` for oracle draws that carry no derivative.
    """

    h: float
    grid: GridSpec
    path: np.ndarray = field(repr=False)
    sensitivity: np.ndarray | None = field(repr=False, default=None)
    driver_seed: object = None

    @property
    def nodes(self):
        return self.grid.nodes

    @property
    def batched(self):
        return self.path.ndim == 2

    def row(self, i):
        """Single-path bundle for batch row ``i``."""
        sens = None if self.sensitivity is None else self.sensitivity[i]
        seed = self.driver_seed[i] if isinstance(self.driver_seed, tuple) else self.driver_seed
        return FbmBundle(self.h, self.grid, self.path[i], sens, seed)

    def coarsen(self, factor):
        """Restriction to every ``factor``-th node (same underlying path, coarser step)."""
        n = self.grid.n_steps
        if factor < 1 or n % factor:
            raise GridError(f"cannot coarsen {n} steps by {factor}")
        g = self.grid
        grid = GridSpec(g.t_max, n // factor, g.s_trunc, g.n_past)
        sens = None if self.sensitivity is None else self.sensitivity[..., ::factor]
        return FbmBundle(self.h, grid, self.path[..., ::factor], sens, self.driver_seed)

    def to_csv(self, fname):
        """Write columns t, B, dB_dH (single path only)."""
        if self.batched:
            raise ValueError("to_csv expects a single path")
        sens = np.full_like(self.path, np.nan) if self.sensitivity is None else self.sensitivity
        data = np.column_stack([self.nodes, self.path, sens])
        np.savetxt(fname, data, delimiter=",", header="t,B,dB_dH", comments="", fmt="%.17g")


def _check_synth_h(h):
    h = check_hurst(h)
    if not (H_MIN < h < H_MAX):
        raise HurstDomainError(f"synthesis needs {H_MIN} < h < {H_MAX}, got {h}")
    return h


_ROW_BLOCK = 2048


def _past_part(h, grid, past, derivative):
    """past @ W_past.T (and the dW_past product) built in blocks of target nodes."""
    n = grid.n_steps
    lead = past.shape[:-1]
    out = np.zeros(lead + (n + 1,))
    dout = np.zeros(lead + (n + 1,)) if derivative else None
    if not grid.n_past:
        return out, dout
    nodes = grid.nodes
    for j0 in range(0, n + 1, _ROW_BLOCK):
        j1 = min(n + 1, j0 + _ROW_BLOCK)
        wp, dwp = past_weights(h, grid, nodes[j0:j1], derivative)
        out[..., j0:j1] = past @ wp.T
        if derivative:
            dout[..., j0:j1] = past @ dwp.T
    return out, dout


def _apply(h, grid, past, recent, derivative):
    n = grid.n_steps
    c, dc = recent_weights(h, grid.dt, n)
    lead = recent.shape[:-1]

    def conv(weights):
        out = np.zeros(lead + (n + 1,))
        out[..., 1:] = fftconvolve(recent, np.broadcast_to(weights, lead + (n,)), axes=-1)[..., :n]
        return out

    pp, dpp = _past_part(h, grid, past, derivative)
    base = conv(c) + pp
    ch = mvn_constant(h)
    path = ch * base
    path[..., 0] = 0.0
    if not derivative:
        return path, None
    sens = mvn_constant_derivative(h) * base + ch * (conv(dc) + dpp)
    sens[..., 0] = 0.0
    return path, sens


def synthesize_fbm(driver, h, sensitivity=True, grid=None):
    """B^H_t = C_H sum_k w_k(t) dB_k and its exact H-derivative on the same driver.

    ``grid`` may be given to assert that the driver lives on a particular grid.
    """
    h = _check_synth_h(h)
    if grid is not None and grid != driver.grid:
        raise GridError("driver grid does not match the requested grid")
    path, sens = _apply(h, driver.grid, driver.past, driver.recent, sensitivity)
    return FbmBundle(h, driver.grid, path, sens, driver.seed)


def synthesis_matrices(h, grid):
    """Matrices M, dM with path = M @ increments and sensitivity = dM @ increments."""
    h = _check_synth_h(h)
    w, dw = weight_matrices(h, grid)
    ch, dch = mvn_constant(h), mvn_constant_derivative(h)
    return ch * w, dch * w + ch * dw


def synthesized_covariance(h, grid, which="path"):
    """Exact covariance of the synthesized node values.

    ``which`` is ``"path"``, ``"sensitivity"`` or ``"joint"`` (blocks ordered path, sensitivity).
    """
    m, dm = synthesis_matrices(h, grid)
    var = grid.cell_widths
    if which == "path":
        mats = m
    elif which == "sensitivity":
        mats = dm
    elif which == "joint":
        mats = np.vstack([m, dm])
    else:
        raise ValueError(f"unknown block {which!r}")
    return (mats * var) @ mats.T


def fbm_covariance(h, s, t=None):
    """(s^{2H} + t^{2H} - |t - s|^{2H}) / 2 on the outer grid of ``s`` and ``t``."""
    check_hurst(h)
    s = np.asarray(s, float)
    t = s if t is None else np.asarray(t, float)
    a, b = np.abs(s)[:, None], np.abs(t)[None, :]
    return 0.5 * (a ** (2 * h) + b ** (2 * h) - np.abs(s[:, None] - t[None, :]) ** (2 * h))


def truncation_budget(h, grid):
    """Elementwise |synthesized - exact| covariance at the nodes (path block)."""
    return np.abs(synthesized_covariance(h, grid) - fbm_covariance(h, grid.nodes))


def _root(cov):
    """Lower factor L with L L' = cov; eigenvalue fallback for near-singular matrices."""
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        pass
    vals, vecs = linalg.eigh(cov)
    scale = np.abs(vals).max()
    if vals.min() < -1e-10 * scale:
        cond = scale / max(abs(vals.min()), np.finfo(float).tiny)
        raise FactorizationError(
            f"fBm covariance is not positive semidefinite: min eigenvalue {vals.min():.3e}, "
            f"max {scale:.3e}, condition {cond:.3e}"
        )
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def exact_fbm_cholesky(seed, grid, h):
    """Exact fBm at the nodes by factorizing the covariance matrix.

    ``seed`` may be a single integer or a sequence of integers (batched output).
    """
    h = check_hurst(h)
    if grid.n_steps > 4096:
        raise GridError("dense oracle supports at most 4096 steps")
    nodes = grid.nodes[1:]
    root = _root(fbm_covariance(h, nodes))
    n = grid.n_steps
    if np.ndim(seed) == 0:
        z = _rng(seed).standard_normal(n)
        tag = int(seed)
    else:
        tag = tuple(int(s) for s in seed)
        z = np.stack([_rng(s).standard_normal(n) for s in tag])
    vals = z @ root.T
    path = np.concatenate([np.zeros(vals.shape[:-1] + (1,)), vals], axis=-1)
    return FbmBundle(h, grid, path, None, tag)


def functional_variance(h, grid, coeffs):
    """Exact variance of sum_j coeffs[j] B^H_{t_j} under the synthesized law (no dense matrices)."""
    h = _check_synth_h(h)
    a = np.asarray(coeffs, float)
    n = grid.n_steps
    if a.shape != (n + 1,):
        raise GridError("coefficients must have one entry per node")
    c, _ = recent_weights(h, grid.dt, n)
    # recent cell k collects sum_{j > k} a_j c_{j-k-1}
    rec = fftconvolve(a[1:][::-1], c)[:n][::-1]
    v = [rec]
    if grid.n_past:
        past = np.zeros(grid.n_past)
        for j0 in range(0, n + 1, _ROW_BLOCK):
            j1 = min(n + 1, j0 + _ROW_BLOCK)
            wp, _ = past_weights(h, grid, grid.nodes[j0:j1], False)
            past += a[j0:j1] @ wp
        v.insert(0, past)
    v = mvn_constant(h) * np.concatenate(v)
    return float(np.sum(v * v * grid.cell_widths))
