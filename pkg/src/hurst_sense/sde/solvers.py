"""Pathwise solvers: additive reduction, Doss-Sussmann, Lamperti and left-point Young-Euler."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from ..errors import DivergenceError, GridError, HurstDomainError
from ..fbm.grid import GridSpec

BLOWUP = 1e12


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Driving path values ``(..., n_steps + 1, m)`` and, optionally, their H-derivative."""

    grid: GridSpec
    values: np.ndarray
    sensitivity: np.ndarray | None = None
    h: float | None = None

    @property
    def increments(self):
        return np.diff(self.values, axis=-2)

    @property
    def sens_increments(self):
        if self.sensitivity is None:
            raise ValueError("driving path carries no H-derivative")
        return np.diff(self.sensitivity, axis=-2)

    @property
    def batch_shape(self):
        return self.values.shape[:-2]


def as_noise(g, grid=None):
    """Normalize an FbmBundle, a sequence of bundles (one per noise component), a NoisePath
    or a raw array plus ``grid`` into a NoisePath."""
    if isinstance(g, NoisePath):
        return g
    if hasattr(g, "path") and hasattr(g, "grid"):
        sens = None if g.sensitivity is None else np.asarray(g.sensitivity)[..., None]
        return NoisePath(g.grid, np.asarray(g.path)[..., None], sens, g.h)
    if isinstance(g, (list, tuple)) and g and hasattr(g[0], "path"):
        grid0 = g[0].grid
        if any(b.grid != grid0 for b in g) or any(b.h != g[0].h for b in g):
            raise GridError("noise components must share grid and h")
        vals = np.stack([b.path for b in g], axis=-1)
        sens = None
        if all(b.sensitivity is not None for b in g):
            sens = np.stack([b.sensitivity for b in g], axis=-1)
        return NoisePath(grid0, vals, sens, g[0].h)
    if grid is None:
        raise GridError("raw driving arrays need a grid")
    vals = np.asarray(g, float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[-2] != grid.n_steps + 1:
        raise GridError("driving path length does not match the grid")
    return NoisePath(grid, vals)


@dataclass(frozen=True, eq=False)
class PathSolution:
    h: float | None
    scheme: str
    grid: GridSpec
    states: np.ndarray = field(repr=False)

    @property
    def x(self):
        """States with the component axis dropped when d = 1."""
        return self.states[..., 0] if self.states.shape[-1] == 1 else self.states

    @property
    def nodes(self):
        return self.grid.nodes

    def to_csv(self, fname, sensitivity=None):
        """Columns t, X..., and Y... when a SensitivitySolution is given (single path)."""
        if self.states.ndim != 2:
            raise ValueError("to_csv expects a single path")
        cols = [self.nodes, self.states]
        head = ["t"] + [f"X{i}" for i in range(self.states.shape[1])]
        if sensitivity is not None:
            cols.append(sensitivity.values)
            head += [f"Y{i}" for i in range(sensitivity.values.shape[1])]
        np.savetxt(fname, np.column_stack(cols), delimiter=",", header=",".join(head),
                   comments="", fmt="%.17g")


def _guard(x, step):
    if not np.all(np.isfinite(x)) or np.max(np.abs(x), initial=0.0) > BLOWUP:
        raise DivergenceError(f"solution diverged at step {step}", step=step)


def _start(problem, batch_shape):
    return np.broadcast_to(problem.x0, batch_shape + (problem.d,)).astype(float)


def solve_additive(problem, g, grid=None):
    """Constant diffusion Sigma: z = x - Sigma g solves z' = mu(z + Sigma g), integrated by RK4
    with g linear between nodes."""
    if problem.const_sigma is None:
        raise ValueError("additive reduction needs a constant diffusion matrix")
    noise = as_noise(g, grid)
    grid = noise.grid
    sg = noise.values @ problem.const_sigma.T
    n, dt = grid.n_steps, grid.dt
    out = np.empty(noise.batch_shape + (n + 1, problem.d))
    z = _start(problem, noise.batch_shape) - sg[..., 0, :]
    out[..., 0, :] = z + sg[..., 0, :]
    mu = problem.mu
    for k in range(n):
        a, b = sg[..., k, :], sg[..., k + 1, :]
        mid = 0.5 * (a + b)
        k1 = mu(z + a)
        k2 = mu(z + 0.5 * dt * k1 + mid)
        k3 = mu(z + 0.5 * dt * k2 + mid)
        k4 = mu(z + dt * k3 + b)
        z = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x = z + b
        _guard(x, k + 1)
        out[..., k + 1, :] = x
    return PathSolution(noise.h, "additive-reduction", grid, out)


def solve_young(problem, g, grid=None):
    """Left-point Euler: X_{k+1} = X_k + mu(X_k) dt + sigma(X_k) (B_{k+1} - B_k)."""
    noise = as_noise(g, grid)
    if noise.h is not None and noise.h <= 0.5:
        raise HurstDomainError("Young-Euler needs h > 1/2")
    grid = noise.grid
    n, dt = grid.n_steps, grid.dt
    db = noise.increments
    x = _start(problem, noise.batch_shape)
    out = np.empty(noise.batch_shape + (n + 1, problem.d))
    out[..., 0, :] = x
    for k in range(n):
        x = x + problem.mu(x) * dt + np.einsum("...ij,...j->...i", problem.sigma(x), db[..., k, :])
        _guard(x, k + 1)
        out[..., k + 1, :] = x
    return PathSolution(noise.h, "young-euler", grid, out)


def young_integral(f, g, interval=None, t_max=1.0):
    """Left-point sum sum_k f(t_k) (g(t_{k+1}) - g(t_k)) over the nodes in ``interval``.

    ``f`` and ``g`` share a uniform grid on [0, t_max]; time runs along the last axis.
    """
    f = np.asarray(f, float)
    g = np.asarray(g, float)
    n = g.shape[-1] - 1
    f = np.broadcast_to(f, g.shape)
    if interval is None:
        i0, i1 = 0, n
    else:
        grid = GridSpec(t_max, n)
        i0, i1 = grid.node_index(interval[0]), grid.node_index(interval[1])
    return np.sum(f[..., i0:i1] * np.diff(g[..., i0 : i1 + 1], axis=-1), axis=-1)


# ---------------------------------------------------------------- Doss-Sussmann


def _scalar_fields(problem):
    if not problem.is_scalar or problem.scalar is None:
        raise ValueError("this solver needs a scalar problem (d = m = 1)")
    return problem.scalar


def _rk4_flow(sigma, alpha, beta, n_sub):
    step = beta / n_sub
    x = np.array(alpha, float, copy=True)
    for _ in range(n_sub):
        k1 = sigma(x)
        k2 = sigma(x + 0.5 * step * k1)
        k3 = sigma(x + 0.5 * step * k2)
        k4 = sigma(x + step * k3)
        x = x + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def ds_flow(sigma, alpha, beta, tol=1e-13, max_sub=1 << 14):
    """h(alpha, beta) with dh/dbeta = sigma(h), h(alpha, 0) = alpha, by RK4 in beta.

    The substep count doubles until two successive results agree to ``tol`` (relative).
    """
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    n_sub = max(4, int(math.ceil(np.max(np.abs(beta), initial=0.0) / 0.05)))
    prev = _rk4_flow(sigma, alpha, beta, n_sub)
    while True:
        _guard(prev, 0)
        n_sub *= 2
        cur = _rk4_flow(sigma, alpha, beta, n_sub)
        if np.all(np.abs(cur - prev) <= tol * (1.0 + np.abs(cur))) or n_sub >= max_sub:
            return cur
        prev = cur


@lru_cache(maxsize=4)
def _gauss(nq):
    return np.polynomial.legendre.leggauss(nq)


def ds_reduced_drift(problem, x, y, nq=24):
    """f(x, y) = exp(-int_0^y sigma'(h(x, s)) ds) mu(h(x, y)) with Gauss-Legendre in s."""
    sf = _scalar_fields(problem)
    if sf.dsigma is None:
        raise ValueError("reduced drift needs sigma'")
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    nodes, weights = _gauss(nq)
    s = 0.5 * y[..., None] * (nodes + 1.0)
    s = np.concatenate([s, y[..., None]], axis=-1)
    flow = ds_flow(sf.sigma, x[..., None], s)
    integral = 0.5 * y * np.sum(weights * sf.dsigma(flow[..., :-1]), axis=-1)
    return np.exp(-integral) * sf.mu(flow[..., -1])


def _flow_logjac(sf, alpha, beta, n_sub):
    """RK4 for (h, log dh/dalpha): the flow together with log exp(int sigma'(h) ds)."""
    step = beta / n_sub
    x = np.array(alpha, float, copy=True)
    lj = np.zeros_like(x)
    sig, dsig = sf.sigma, sf.dsigma
    for _ in range(n_sub):
        k1, l1 = sig(x), dsig(x)
        x2 = x + 0.5 * step * k1
        k2, l2 = sig(x2), dsig(x2)
        x3 = x + 0.5 * step * k2
        k3, l3 = sig(x3), dsig(x3)
        x4 = x + step * k3
        k4, l4 = sig(x4), dsig(x4)
        x = x + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        lj = lj + step / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
    return x, lj


@dataclass(frozen=True, eq=False)
class DossSussmannAux:
    h_flow: Callable
    d_path: np.ndarray
    f_field: Callable


def _calibrate_substeps(sf, alpha, gmax, tol, max_sub=4096):
    """Smallest power-of-two multiple of the base count whose flow changes by < tol on doubling."""
    if gmax == 0.0:
        return 1
    a = alpha + np.array([-1.0, 0.0, 1.0])[:, None]
    b = np.array([-gmax, gmax])[None, :]
    a, b = np.broadcast_arrays(a, b)
    n_sub = max(2, int(math.ceil(gmax / 0.1)))
    prev = _flow_logjac(sf, a, b, n_sub)
    while n_sub < max_sub:
        cur = _flow_logjac(sf, a, b, 2 * n_sub)
        err = max(np.max(np.abs(cur[0] - prev[0]) / (1.0 + np.abs(cur[0]))), np.max(np.abs(cur[1] - prev[1])))
        if err < tol:
            break
        n_sub, prev = 2 * n_sub, cur
    return n_sub


def solve_doss_sussmann(problem, g, grid=None, flow_tol=1e-12, return_aux=False):
    """X_t = h(D_t, g_t) with D' = f(D, g_t) by RK4 (g linear between nodes).

    The reduced drift uses f = mu(h) / (dh/dalpha). A closed-form flow carried by the problem
    is used when present; otherwise the flow and its log alpha-derivative are integrated
    together by RK4 with a substep count calibrated once per solve so that doubling it
    changes the flow by less than ``flow_tol``.
    """
    sf = _scalar_fields(problem)
    if sf.dsigma is None:
        raise ValueError("Doss-Sussmann needs sigma'")
    noise = as_noise(g, grid)
    grid = noise.grid
    gv = noise.values[..., 0]
    n, dt = grid.n_steps, grid.dt
    if sf.flow is not None:
        flow_jac = sf.flow
    else:
        n_sub = _calibrate_substeps(sf, float(problem.x0[0]), float(np.max(np.abs(gv), initial=0.0)), flow_tol)

        def flow_jac(x, y):
            hx, lj = _flow_logjac(sf, x, y, n_sub)
            return hx, np.exp(lj)

    def f(x, y):
        hx, jac = flow_jac(x, y)
        return sf.mu(hx) / jac

    def flow(x, y):
        return flow_jac(x, y)[0]

    batch = noise.batch_shape
    d = np.broadcast_to(problem.x0[0], batch).astype(float)
    if np.any(gv[..., 0] != 0):
        d = flow(d, -gv[..., 0])
    dpath = np.empty(batch + (n + 1,))
    dpath[..., 0] = d
    for k in range(n):
        a, b = gv[..., k], gv[..., k + 1]
        mid = 0.5 * (a + b)
        k1 = f(d, a)
        k2 = f(d + 0.5 * dt * k1, mid)
        k3 = f(d + 0.5 * dt * k2, mid)
        k4 = f(d + dt * k3, b)
        d = d + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _guard(d, k + 1)
        dpath[..., k + 1] = d
    x = flow(dpath, gv)
    _guard(x, n)
    sol = PathSolution(noise.h, "doss-sussmann", grid, x[..., None])
    if return_aux:
        return sol, DossSussmannAux(flow, dpath, f)
    return sol


# ---------------------------------------------------------------- Lamperti


@dataclass(frozen=True, eq=False)
class LampertiPair:
    F: Callable
    F_inv: Callable
    mu_F: Callable


_PANEL = 0.25
_PANEL_NODES = 16


def lamperti(problem, probe=np.linspace(-1e3, 1e3, 200001)):
    """F = int_0^x du / sigma(u), its inverse and the drift of F(X).

    ``sigma`` must stay above a positive constant; this is checked on ``probe``.
    """
    sf = _scalar_fields(problem)
    sig = sf.sigma
    vals = np.asarray(sig(probe), float)
    lo = float(vals.min())
    if not lo > 1e-8 or not np.all(np.isfinite(vals)):
        raise ValueError("Lamperti transform needs sigma bounded below by a positive constant")
    hi = float(vals.max())
    nodes, weights = _gauss(_PANEL_NODES)

    def F(x):
        x = np.asarray(x, float)
        n_pan = max(1, int(math.ceil(np.max(np.abs(x), initial=0.0) / _PANEL)))
        step = x / n_pan
        j = np.arange(n_pan)
        left = step[..., None] * j
        pts = left[..., None] + 0.5 * step[..., None, None] * (nodes + 1.0)
        return 0.5 * step * np.sum(weights / sig(pts), axis=(-2, -1))

    def F_inv(z, tol=1e-14, max_iter=200):
        z = np.asarray(z, float)
        # F' lies in [1/hi, 1/lo], so the root lies between z lo and z hi
        a = np.minimum(z * lo, z * hi)
        b = np.maximum(z * lo, z * hi)
        x = np.clip(z * sig(np.zeros_like(z)), a, b)
        for _ in range(max_iter):
            r = F(x) - z
            a = np.where(r < 0, x, a)
            b = np.where(r > 0, x, b)
            xn = x - r * sig(x)
            bad = (xn <= a) | (xn >= b)
            xn = np.where(bad, 0.5 * (a + b), xn)
            done = np.abs(xn - x) <= tol * (1.0 + np.abs(x))
            x = xn
            if np.all(done):
                break
        return x

    def mu_F(z):
        x = F_inv(z)
        return sf.mu(x) / sig(x)

    return LampertiPair(F, F_inv, mu_F)


def solve_lamperti(problem, g, grid=None):
    """Solve the additive equation for Z = F(X) and map back with F_inv."""
    pair = lamperti(problem)
    from .problems import SdeProblem

    z0 = float(pair.F(problem.x0[0]))
    zprob = SdeProblem.from_scalar(pair.mu_F, np.ones_like, z0, const_sigma=[[1.0]])
    zsol = solve_additive(zprob, g, grid)
    return PathSolution(zsol.h, "lamperti", zsol.grid, pair.F_inv(zsol.states))


def solve(problem, g, scheme="auto", grid=None):
    """Dispatch: additive reduction for constant diffusion, Doss-Sussmann for other scalar
    problems, Young-Euler otherwise."""
    if scheme == "auto":
        if problem.const_sigma is not None:
            scheme = "additive-reduction"
        elif problem.is_scalar and problem.scalar is not None and problem.scalar.dsigma is not None:
            scheme = "doss-sussmann"
        else:
            scheme = "young-euler"
    table = {
        "additive-reduction": solve_additive,
        "doss-sussmann": solve_doss_sussmann,
        "young-euler": solve_young,
        "lamperti": solve_lamperti,
    }
    if scheme not in table:
        raise ValueError(f"unknown scheme {scheme!r}")
    return table[scheme](problem, g, grid)
