"""Time grids and the two-sided Brownian driver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from ..errors import GridError, HurstDomainError


@dataclass(frozen=True)
class HurstBand:
    """Compact band [a, b] inside (0, 1) with an active value h."""

    a: float
    b: float
    h: float

    def __post_init__(self):
        if not (0.0 < self.a <= self.h <= self.b < 1.0):
            raise HurstDomainError(f"need 0 < a <= h <= b < 1, got a={self.a}, h={self.h}, b={self.b}")


@dataclass(frozen=True)
class GridSpec:
    """Cells of the driver on [-S, T].

    ``[0, t_max]`` is split into ``n_steps`` uniform cells. The past ``[-s_trunc, 0)``
    holds ``n_past`` cells: uniform when ``n_past * dt >= s_trunc``, otherwise
    graded geometrically away from 0 with first width ``dt``. The kernel tail
    decays algebraically, so a uniform past cannot reach the truncation depths
    needed for H > 1/2 at a usable cell count.
    """

    t_max: float
    n_steps: int
    s_trunc: float = 0.0
    n_past: int = 0

    def __post_init__(self):
        if not self.t_max > 0:
            raise GridError(f"t_max must be positive, got {self.t_max}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise GridError(f"n_steps must be a positive integer, got {self.n_steps}")
        if self.s_trunc < 0:
            raise GridError(f"s_trunc must be >= 0, got {self.s_trunc}")
        if self.n_past < 0 or (self.s_trunc > 0) != (self.n_past > 0):
            raise GridError("n_past must be positive exactly when s_trunc > 0")

    @classmethod
    def for_hurst(cls, t_max, n_steps, hs, rel_tol=1e-3, growth=1.05):
        """Grid whose past depth meets the truncation rule for every h in ``hs``.

        The depth S is the smallest one for which the standard deviation of the
        neglected tail of both B^H_T and its H-derivative stays below
        ``rel_tol * t_max**h``.
        """
        from .kernel import truncation_depth

        hs = np.atleast_1d(np.asarray(hs, dtype=float))
        s = max(truncation_depth(float(h), t_max, rel_tol) for h in hs)
        dt = t_max / n_steps
        if s <= n_steps * dt:
            n_past = max(1, math.ceil(s / dt))
        else:
            n_past = math.ceil(math.log1p(s * (growth - 1.0) / dt) / math.log(growth))
        return cls(t_max=float(t_max), n_steps=int(n_steps), s_trunc=float(s), n_past=int(n_past))

    @property
    def dt(self):
        return self.t_max / self.n_steps

    @cached_property
    def nodes(self):
        return np.linspace(0.0, self.t_max, self.n_steps + 1)

    @cached_property
    def past_distances(self):
        """Cell edges of the past as distances from 0, ascending (a_0 = 0, a_n = S)."""
        n, s, dt = self.n_past, self.s_trunc, self.dt
        if n == 0:
            return np.zeros(1)
        if n * dt >= s:
            return np.linspace(0.0, s, n + 1)
        # dt * (r^n - 1) / (r - 1) = s, solved in log form
        def fn(r):
            nl = n * math.log(r)
            return nl + math.log(-math.expm1(-nl)) - math.log(r - 1.0) - math.log(s / dt)

        hi = 1.01
        while fn(hi) < 0:
            hi = 1.0 + 2.0 * (hi - 1.0)
        r = brentq(fn, 1.0 + 1e-12, hi, xtol=1e-15)
        widths = dt * r ** np.arange(n)
        a = np.concatenate([[0.0], np.cumsum(widths)])
        a[-1] = s
        return a

    @cached_property
    def cell_widths(self):
        """Widths of all cells, past first (in increasing time), then [0, T]."""
        past = np.diff(self.past_distances)[::-1] if self.n_past else np.zeros(0)
        return np.concatenate([past, np.full(self.n_steps, self.dt)])

    @property
    def n_cells(self):
        return self.n_past + self.n_steps

    def node_index(self, t):
        """Index of node ``t``; raises GridError if ``t`` is not a node."""
        x = t / self.dt
        j = int(round(x))
        if abs(x - j) > 1e-9 * max(1.0, abs(x)) or not 0 <= j <= self.n_steps:
            raise GridError(f"t={t} is not a node of the grid with dt={self.dt}")
        return j


@dataclass(frozen=True, eq=False)
class DriverPath:
    """Gaussian increments of the two-sided Brownian motion on every cell.

    ``increments`` has shape ``(n_cells,)`` or ``(batch, n_cells)``; past cells
    come first in increasing time order.
    """

    seed: object
    grid: GridSpec
    increments: np.ndarray = field(repr=False)

    def __post_init__(self):
        if np.shape(self.increments)[-1] != self.grid.n_cells:
            raise GridError(
                f"driver has {np.shape(self.increments)[-1]} cells, grid expects {self.grid.n_cells}"
            )

    @property
    def past(self):
        return self.increments[..., : self.grid.n_past]

    @property
    def recent(self):
        return self.increments[..., self.grid.n_past :]

    @property
    def batched(self):
        return np.ndim(self.increments) == 2

    def restricted_path(self):
        """Brownian motion B_t at the nodes of [0, T] (B_0 = 0)."""
        rec = self.recent
        zero = np.zeros(rec.shape[:-1] + (1,))
        return np.concatenate([zero, np.cumsum(rec, axis=-1)], axis=-1)

    def __add__(self, other):
        if other.grid != self.grid:
            raise GridError("cannot add drivers on different grids")
        return DriverPath(None, self.grid, self.increments + other.increments)


def _rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed)))


def sample_driver(seed, grid):
    """Reproducible driver: N(0, width) increments drawn from ``PCG64(seed)``."""
    z = _rng(seed).standard_normal(grid.n_cells)
    return DriverPath(int(seed), grid, z * np.sqrt(grid.cell_widths))


def sample_drivers(seeds, grid):
    """Batch of drivers, row ``i`` identical to ``sample_driver(seeds[i], grid)``."""
    seeds = [int(s) for s in seeds]
    sd = np.sqrt(grid.cell_widths)
    z = np.empty((len(seeds), grid.n_cells))
    for i, s in enumerate(seeds):
        z[i] = _rng(s).standard_normal(grid.n_cells)
    return DriverPath(tuple(seeds), grid, z * sd)
