"""Mandelbrot-van Ness kernel: normalising constant, cell-averaged weights, tail bounds.

With p = h - 1/2 and q = h + 1/2 the kernel is

    K_h(s, t) = ((t - s)^p - (-s)^p) 1{s < 0} + (t - s)^p 1{0 <= s < t}

and every cell average is a difference of the antiderivative x^q / q. The
H-derivatives use d/dq (x^q / q) = x^q (ln x / q - 1 / q^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from ..errors import HurstDomainError
from .grid import GridSpec


def check_hurst(h, lo=0.0, hi=1.0, what="h"):
    if not (lo < h < hi):
        raise HurstDomainError(f"{what} must lie in ({lo}, {hi}), got {h}")
    return float(h)


def mvn_constant(h):
    """C_H = sqrt(sin(pi h) Gamma(2h + 1)) / Gamma(h + 1/2)."""
    h = check_hurst(h)
    return math.sqrt(math.sin(math.pi * h) * math.gamma(2 * h + 1)) / math.gamma(h + 0.5)


def mvn_constant_derivative(h):
    """dC_H/dH from the logarithmic derivative (digamma form)."""
    h = check_hurst(h)
    dlog = 0.5 * math.pi / math.tan(math.pi * h) + special.digamma(2 * h + 1) - special.digamma(h + 0.5)
    return mvn_constant(h) * dlog


def _ediff(x, t, q):
    """((t + x)^q - x^q) / q for x >= 0, written to avoid cancellation at large x."""
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    xs = np.where(x > 0, x, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.expm1(q * np.log1p(t / xs))
        far = xs**q * m / q
    return np.where(x > 0, far, t**q / q)


def _ediff_dq(x, t, q):
    """d/dq of :func:`_ediff`."""
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    xs = np.where(x > 0, x, 1.0)
    ts = np.where(t > 0, t, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.log1p(t / xs)
        m = np.expm1(q * lg)
        lx = np.log(xs)
        far = xs**q * ((m * lx + (1.0 + m) * lg) / q - m / q**2)
        near = np.where(t > 0, ts**q * (np.log(ts) / q - 1.0 / q**2), 0.0)
    return np.where(x > 0, far, near)


@dataclass(frozen=True, eq=False)
class KernelEval:
    """Cell-averaged kernel values for one target time (past cells first)."""

    c_h: float
    dc_h: float
    weights: np.ndarray
    dweights: np.ndarray | None = None


def recent_weights(h, dt, n):
    """Averages of x^p over [(m-1) dt, m dt] for m = 1..n, and their h-derivatives."""
    q = h + 0.5
    m = np.arange(n, dtype=float)
    e = _ediff(m, 1.0, q)
    de = _ediff_dq(m, 1.0, q)
    scale = dt ** (h - 0.5)
    return scale * e, scale * (math.log(dt) * e + de)


def past_weights(h, grid, t, derivative=True):
    """Past-cell averages of the kernel for target times ``t`` (rows), time-ascending columns.

    Returns (weights, dweights); dweights is None when ``derivative`` is false.
    """
    t = np.atleast_1d(np.asarray(t, float))
    if grid.n_past == 0:
        z = np.zeros((t.size, 0))
        return z, (z.copy() if derivative else None)
    q = h + 0.5
    a = grid.past_distances
    w = np.diff(a)
    if h == 0.5:
        w_mat = np.zeros((t.size, grid.n_past))
    else:
        w_mat = np.diff(_ediff(a[None, :], t[:, None], q), axis=1) / w
    if not derivative:
        return w_mat[:, ::-1], None
    dw_mat = np.diff(_ediff_dq(a[None, :], t[:, None], q), axis=1) / w
    return w_mat[:, ::-1], dw_mat[:, ::-1]


def _row(h, t, grid, derivative):
    check_hurst(h)
    j = grid.node_index(t)
    n = grid.n_steps
    wp, dwp = past_weights(h, grid, grid.nodes[j])
    c, dc = recent_weights(h, grid.dt, n)
    rec = np.zeros(n)
    drec = np.zeros(n)
    # cell k covers [k dt, (k+1) dt); distance index m = j - k
    rec[:j] = c[:j][::-1]
    drec[:j] = dc[:j][::-1]
    weights = np.concatenate([wp[0], rec])
    dweights = np.concatenate([dwp[0], drec]) if derivative else None
    return KernelEval(mvn_constant(h), mvn_constant_derivative(h), weights, dweights)


def kernel_cell_weights(h, t, grid):
    """Per-cell averages of K_h(., t) on every driver cell; ``t`` must be a node."""
    return _row(h, t, grid, derivative=False)


def kernel_derivative_cell_weights(h, t, grid):
    """Same as :func:`kernel_cell_weights`, with the averages of dK_h/dh filled in."""
    return _row(h, t, grid, derivative=True)


@lru_cache(maxsize=64)
def _tail_variances(h, s, t):
    p = h - 0.5
    c, dc = mvn_constant(h), mvn_constant_derivative(h)

    def parts(u):
        x = s * math.exp(u)
        r = t / x
        lg = math.log1p(r)
        em = math.expm1(p * lg)
        k = x**p * em
        dk = x**p * (math.log(x) * em + (1.0 + em) * lg)
        return k, dk, x

    def f_path(u):
        k, _, x = parts(u)
        return (c * k) ** 2 * x

    def f_sens(u):
        k, dk, x = parts(u)
        return (dc * k + c * dk) ** 2 * x

    # integrands decay like exp((2h - 2) u) up to log factors
    u_max = min(80.0 / (2.0 - 2.0 * h), 700.0 - math.log(s))
    opts = dict(epsabs=0.0, epsrel=1e-6, limit=400)
    v1 = integrate.quad(f_path, 0.0, u_max, **opts)[0] if h != 0.5 else 0.0
    v2 = integrate.quad(f_sens, 0.0, u_max, **opts)[0]
    return v1, v2


def tail_variance(h, s_trunc, t):
    """Variance of the part of B^H_t and of dB^H_t/dH carried by the driver on (-inf, -S)."""
    check_hurst(h)
    if s_trunc <= 0:
        raise ValueError("tail variance needs s_trunc > 0")
    return _tail_variances(float(h), float(s_trunc), float(t))


def truncation_depth(h, t_max, rel_tol=1e-3):
    """Smallest S whose neglected tail has std <= rel_tol * t_max**h (path and H-derivative)."""
    check_hurst(h)
    target = (rel_tol * t_max**h) ** 2

    def excess(log_s):
        return math.log(max(tail_variance(h, math.exp(log_s), t_max))) - math.log(target)

    lo = math.log(t_max)
    if excess(lo) <= 0:
        return t_max
    hi = lo
    while excess(hi) > 0:
        lo, hi = hi, hi + math.log(100.0)
    return math.exp(optimize.brentq(excess, lo, hi, xtol=1e-6))


def weight_matrices(h, grid):
    """Dense (n_steps + 1, n_cells) matrices of cell weights and dweights for every node."""
    return _weight_matrices(float(h), grid)


@lru_cache(maxsize=8)
def _weight_matrices(h, grid):
    n = grid.n_steps
    wp, dwp = past_weights(h, grid, grid.nodes)
    c, dc = recent_weights(h, grid.dt, n)
    j = np.arange(n + 1)[:, None]
    k = np.arange(n)[None, :]
    m = j - k
    idx = np.clip(m - 1, 0, n - 1)
    rec = np.where(m >= 1, c[idx], 0.0)
    drec = np.where(m >= 1, dc[idx], 0.0)
    w = np.hstack([wp, rec])
    dw = np.hstack([dwp, drec])
    w.setflags(write=False)
    dw.setflags(write=False)
    return w, dw
