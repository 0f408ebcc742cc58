"""Discrete Hölder and Besov-type norms of paths sampled on uniform grids.

Inner integrals use product-trapezoid rules: the norm of the increment is
interpolated linearly between nodes and integrated exactly against the power
weight, so the rules are exact for linear paths.
"""

from __future__ import annotations

import numpy as np


def _values(path, t_max):
    """(values with a trailing component axis, step) for bundles, solutions or arrays."""
    grid = getattr(path, "grid", None)
    if grid is not None:
        vals = getattr(path, "path", None)
        if vals is None:
            vals = path.states
        t_max = grid.t_max
    else:
        vals = path
        t_max = 1.0 if t_max is None else t_max
    vals = np.asarray(vals, float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals, t_max / (vals.shape[0] - 1)


def _pair_norms(vals, k):
    return np.linalg.norm(vals[k] - vals[: k + 1], axis=-1)


def holder_norm_estimate(path, lam, window=None, t_max=None):
    """max ||f(t)|| + max_{s < t} ||f(t) - f(s)|| / |t - s|^lam over grid nodes.

    ``window = (t0, t1)`` restricts both maxima to nodes inside [t0, t1].
    Plain arrays are taken to live on [0, t_max] (default [0, 1]).
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"need 0 <= lam < 1, got {lam}")
    vals, dt = _values(path, t_max)
    if window is not None:
        t = np.arange(vals.shape[0]) * dt
        keep = (t >= window[0] - 1e-12 * dt) & (t <= window[1] + 1e-12 * dt)
        vals = vals[keep]
    sup = np.linalg.norm(vals, axis=-1).max()
    best = 0.0
    n = vals.shape[0]
    lags = np.arange(1, n) * dt
    for k in range(1, n):
        d = _pair_norms(vals, k)[:-1]
        best = max(best, float(np.max(d / lags[:k][::-1] ** lam)))
    return float(sup + best)


def besov_norm_w1(path, alpha, t_max=None):
    """sup_t ( ||f(t)|| + int_0^t ||f(t) - f(s)|| / (t - s)^{1 + alpha} ds )."""
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"need 0 < alpha < 1/2, got {alpha}")
    vals, dt = _values(path, t_max)
    n = vals.shape[0] - 1
    a = np.arange(n) * dt
    b = a + dt
    with np.errstate(divide="ignore"):
        m0 = np.where(a > 0, (a ** -alpha - b ** -alpha) / alpha, 0.0)
    m1 = (b ** (1 - alpha) - a ** (1 - alpha)) / (1 - alpha)
    best = np.linalg.norm(vals[0])
    for k in range(1, n + 1):
        g = _pair_norms(vals, k)[::-1]  # g[m] = ||f(t_k) - f(t_{k-m})||
        near, far = g[:-1], g[1:]  # values at u = a and u = b of each cell
        slope = (far - near) / dt
        terms = near * m0[:k] + slope * (m1[:k] - a[:k] * m0[:k])
        terms[0] = slope[0] * m1[0]
        best = max(best, np.linalg.norm(vals[k]) + terms.sum())
    return float(best)


def besov_norm_w2(path, alpha, t_max=None):
    """sup_{s < t} ( ||g(t) - g(s)|| / (t - s)^{1 - alpha} + int_s^t ||g(y) - g(s)|| / (y - s)^{2 - alpha} dy )."""
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"need 0 < alpha < 1/2, got {alpha}")
    vals, dt = _values(path, t_max)
    n = vals.shape[0] - 1
    a = np.arange(n) * dt
    b = a + dt
    with np.errstate(divide="ignore"):
        p0 = np.where(a > 0, (a ** (alpha - 1) - b ** (alpha - 1)) / (1 - alpha), 0.0)
    p1 = (b**alpha - a**alpha) / alpha
    best = 0.0
    for i in range(n):
        g = np.linalg.norm(vals[i:] - vals[i], axis=-1)  # g[m] at lag m
        near, far = g[:-1], g[1:]
        k = near.size
        slope = (far - near) / dt
        terms = near * p0[:k] + slope * (p1[:k] - a[:k] * p0[:k])
        terms[0] = slope[0] * p1[0]
        total = far / b[:k] ** (1 - alpha) + np.cumsum(terms)
        best = max(best, float(total.max()))
    return float(best)
