"""Wiener integrals of step functions against fBm and the symmetric epsilon-approximation."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import GridError, HurstDomainError
from .fbm.kernel import check_hurst


@dataclass(frozen=True)
class StepFunction:
    """f = sum_i f_i 1_[u_i, v_i) with disjoint intervals."""

    pieces: tuple

    def __post_init__(self):
        pieces = tuple(sorted((float(u), float(v), float(f)) for u, v, f in self.pieces))
        if not pieces:
            raise ValueError("step function needs at least one piece")
        for u, v, _ in pieces:
            if not u < v:
                raise ValueError(f"empty interval [{u}, {v})")
        for (_, v0, _), (u1, _, _) in zip(pieces, pieces[1:]):
            if u1 < v0:
                raise ValueError("intervals overlap")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def indicator(cls, u, v, value=1.0):
        return cls(((u, v, value),))

    @classmethod
    def from_csv(cls, fname):
        """Rows ``u, v, value``; a header line is skipped if present."""
        rows = []
        with open(fname, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].strip().startswith("#"):
                    continue
                try:
                    rows.append(tuple(float(x) for x in rec[:3]))
                except ValueError:
                    if rows:
                        raise
        return cls(tuple(rows))

    @property
    def u(self):
        return np.array([p[0] for p in self.pieces])

    @property
    def v(self):
        return np.array([p[1] for p in self.pieces])

    @property
    def values(self):
        return np.array([p[2] for p in self.pieces])

    def __call__(self, x):
        x = np.asarray(x, float)
        out = np.zeros_like(x)
        for u, v, f in self.pieces:
            out = np.where((x >= u) & (x < v), f, out)
        return out

    def cells(self, t_max):
        """Partition of [0, t_max] into (left, right, value) including zero gaps."""
        edges = sorted({0.0, float(t_max), *self.u, *self.v})
        if edges[0] < 0 or edges[-1] > t_max:
            raise ValueError("step function leaves [0, t_max]")
        left = np.array(edges[:-1])
        right = np.array(edges[1:])
        return left, right, self(0.5 * (left + right))


def wiener_integral(f, bundle):
    """sum_i f_i (B_{v_i} - B_{u_i}); works on batched bundles along the last axis."""
    grid = bundle.grid
    iu = [grid.node_index(u) for u in f.u]
    iv = [grid.node_index(v) for v in f.v]
    b = np.asarray(bundle.path)
    return (b[..., iv] - b[..., iu]) @ f.values


def wiener_norm_smallH(f, h, t_max):
    """Squared norm ||f||_H^2 for h < 1/2 in closed form for step functions.

    ||f||^2 = H(1 - 2H)/2 int int (f(x) - f(y))^2 |x - y|^{2H - 2}
              + H int f(x)^2 (x^{2H - 1} + (T - x)^{2H - 1}) dx.
    """
    h = check_hurst(h)
    if h >= 0.5:
        raise HurstDomainError(f"closed-form norm needs h < 1/2, got {h}")
    left, right, phi = f.cells(t_max)
    two_h = 2.0 * h

    def big_f(u):
        return u**two_h / ((two_h - 1.0) * two_h)

    a1, a2 = left[:, None], right[:, None]
    b1, b2 = left[None, :], right[None, :]
    upper = np.triu(np.ones((left.size, left.size), bool), 1)
    with np.errstate(invalid="ignore"):
        j = np.where(upper, big_f(np.clip(b2 - a1, 0, None)) - big_f(np.clip(b2 - a2, 0, None))
                     - big_f(np.clip(b1 - a1, 0, None)) + big_f(np.clip(b1 - a2, 0, None)), 0.0)
    diff2 = (phi[:, None] - phi[None, :]) ** 2
    double = 2.0 * np.sum(diff2 * j)
    boundary = 0.5 * np.sum(
        phi**2 * ((right**two_h - left**two_h) + ((t_max - left) ** two_h - (t_max - right) ** two_h))
    )
    return float(0.5 * h * (1.0 - two_h) * double + boundary)


def wiener_variance_covariance(f, h):
    """Var of the integral from fBm increment covariances (any h in (0, 1))."""
    h = check_hurst(h)
    u, v, x = f.u, f.v, f.values
    two_h = 2.0 * h

    def r(s, t):
        return 0.5 * (np.abs(s) ** two_h + np.abs(t) ** two_h - np.abs(t - s) ** two_h)

    cov = (r(v[:, None], v[None, :]) - r(v[:, None], u[None, :])
           - r(u[:, None], v[None, :]) + r(u[:, None], u[None, :]))
    return float(x @ cov @ x)


def wiener_variance_curve(f, h_grid, t_max=None, method="auto"):
    """[(h, Var I^H(f))]; ``auto`` uses the closed-form norm below 1/2 and covariances otherwise."""
    if t_max is None:
        t_max = float(f.v.max())
    out = []
    for h in h_grid:
        if method == "auto" and h < 0.5:
            out.append((float(h), wiener_norm_smallH(f, h, t_max)))
        elif method in ("auto", "covariance"):
            out.append((float(h), wiener_variance_covariance(f, h)))
        else:
            raise ValueError(f"unknown method {method!r}")
    return out


@dataclass(frozen=True, eq=False)
class RvConfig:
    """Symmetric epsilon-approximation setup: U and B on the same grid of [0, t_max]."""

    epsilon: float
    integrand: np.ndarray
    integrator: np.ndarray
    t_max: float
    boundary: str = "zero"

    def __post_init__(self):
        u, b = np.asarray(self.integrand), np.asarray(self.integrator)
        if u.shape[-1] != b.shape[-1]:
            raise GridError("integrand and integrator must share the grid")
        if not 0.0 < self.epsilon < self.t_max / 2:
            raise ValueError(f"need 0 < epsilon < T/2, got {self.epsilon}")
        if self.boundary not in ("zero", "constant"):
            raise ValueError("boundary must be 'zero' or 'constant'")


def russo_vallois_symmetric(cfg):
    """(1/2 eps) int_0^T U_s (B_{s+eps} - B_{s-eps}) ds by the trapezoid rule on the grid.

    Outside [0, T] the integrator is extended by 0 (``boundary="zero"``) or frozen
    at its end values (``boundary="constant"``).
    """
    b = np.asarray(cfg.integrator, float)
    u = np.broadcast_to(np.asarray(cfg.integrand, float), b.shape)
    n = b.shape[-1] - 1
    dt = cfg.t_max / n
    k = cfg.epsilon / dt
    e = int(round(k))
    if e < 1 or abs(k - e) > 1e-9 * max(1.0, k):
        raise GridError(f"epsilon={cfg.epsilon} must be a positive multiple of the step {dt}")
    lead = b.shape[:-1]
    if cfg.boundary == "zero":
        lo, hi = np.zeros(lead + (e,)), np.zeros(lead + (e,))
    else:
        lo = np.repeat(b[..., :1], e, axis=-1)
        hi = np.repeat(b[..., -1:], e, axis=-1)
    ext = np.concatenate([lo, b, hi], axis=-1)
    fwd = ext[..., 2 * e :]
    bwd = ext[..., : n + 1]
    integrand = u * (fwd - bwd)
    w = np.full(n + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return integrand @ w / (2.0 * cfg.epsilon)
