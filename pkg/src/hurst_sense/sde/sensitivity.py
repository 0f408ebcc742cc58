"""Hurst sensitivities Y = dX/dH along a solved path.

All three solvers march the same left-point representation. Over a cell the
integrating factor is the exponential of the cell's drift and diffusion
increments, and the new noise d(dB/dH) enters at the left node:

    Y_{k+1} = expm(A_k) (Y_k + sigma(X_k) (dB/dH_{k+1} - dB/dH_k)).

With A_k = J_mu(X_k) dt + sum_l d sigma^{.l}(X_k) dB^l_k this unrolls to the
left-point sums of the exponential representations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from ..errors import HurstDomainError
from ..fbm.synth import synthesize_fbm
from .solvers import _guard, as_noise


@dataclass(frozen=True, eq=False)
class SensitivitySolution:
    h: float | None
    grid: object
    values: np.ndarray = field(repr=False)
    method: str = ""

    @property
    def y(self):
        return self.values[..., 0] if self.values.shape[-1] == 1 else self.values


def _check_pair(x_path, noise):
    if x_path.grid != noise.grid:
        raise ValueError("solution and driving path live on different grids")
    if x_path.states.shape[:-1] != noise.values.shape[:-1]:
        raise ValueError("solution and driving path batch shapes differ")


def _march(x_path, noise, gen, noise_term):
    xs = x_path.states
    n, d = xs.shape[-2] - 1, xs.shape[-1]
    dsens = noise.sens_increments
    y = np.zeros(xs.shape[:-2] + (d,))
    out = np.empty_like(xs)
    out[..., 0, :] = 0.0
    for k in range(n):
        xk = xs[..., k, :]
        a = gen(xk, k)
        y = y + noise_term(xk, dsens[..., k, :])
        y = np.einsum("...ij,...j->...i", expm(a), y) if d > 1 else np.exp(a[..., 0, 0])[..., None] * y
        _guard(y, k + 1)
        out[..., k + 1, :] = y
    return out


def sensitivity_additive(problem, x_path, bundle):
    """Y_t = int_0^t exp(int_s^t J_mu(X) dtau) Sigma d(dB/dH)_s for constant Sigma."""
    if problem.mu_jac is None:
        raise ValueError("sensitivity needs the drift Jacobian")
    if problem.const_sigma is None:
        raise ValueError("additive sensitivity needs a constant diffusion matrix")
    noise = as_noise(bundle, x_path.grid)
    _check_pair(x_path, noise)
    dt = noise.grid.dt
    s = problem.const_sigma
    vals = _march(
        x_path, noise,
        lambda x, k: problem.mu_jac(x) * dt,
        lambda x, ds: ds @ s.T,
    )
    return SensitivitySolution(noise.h, noise.grid, vals, "additive-exact")


def sensitivity_exponential_scalar(problem, x_path, bundle):
    """Y_t = int_0^t exp(int_s^t mu'(X) dtau + int_s^t sigma'(X) dB) sigma(X_s) d(dB/dH)_s."""
    noise = as_noise(bundle, x_path.grid)
    if noise.h is not None and noise.h <= 0.5:
        raise HurstDomainError("the exponential representation is only supported for h > 1/2")
    sf = problem.scalar
    if not problem.is_scalar or sf is None or sf.dmu is None or sf.dsigma is None:
        raise ValueError("needs a scalar problem with mu' and sigma'")
    _check_pair(x_path, noise)
    dt = noise.grid.dt
    db = noise.increments[..., 0]
    vals = _march(
        x_path, noise,
        lambda x, k: (sf.dmu(x[..., 0]) * dt + sf.dsigma(x[..., 0]) * db[..., k])[..., None, None],
        lambda x, ds: sf.sigma(x) * ds,
    )
    return SensitivitySolution(noise.h, noise.grid, vals, "exponential-representation")


def sensitivity_variational(problem, x_path, bundle):
    """Forward variational system dY = J_mu Y dt + sum_l (d sigma^{.l}) Y dB^l + sigma d(dB/dH)."""
    noise = as_noise(bundle, x_path.grid)
    if noise.h is not None and noise.h <= 0.5:
        raise HurstDomainError("the variational system is only supported for h > 1/2")
    if not problem.has_jacobians:
        raise ValueError("sensitivity needs drift and diffusion Jacobians")
    _check_pair(x_path, noise)
    dt = noise.grid.dt
    db = noise.increments

    def gen(x, k):
        return problem.mu_jac(x) * dt + np.einsum("...ilk,...l->...ik", problem.sigma_jac(x), db[..., k, :])

    def term(x, ds):
        return np.einsum("...il,...l->...i", problem.sigma(x), ds)

    vals = _march(x_path, noise, gen, term)
    return SensitivitySolution(noise.h, noise.grid, vals, "variational-phi")


def finite_difference_sensitivity(problem, drivers, h, delta, solver):
    """(X^{h+delta} - X^{h-delta}) / (2 delta) on shared drivers (one per noise component)."""
    drivers = drivers if isinstance(drivers, (list, tuple)) else [drivers]

    def solve(hh):
        bundles = [synthesize_fbm(d, hh, sensitivity=False) for d in drivers]
        return solver(problem, bundles if len(bundles) > 1 else bundles[0])

    up, down = solve(h + delta), solve(h - delta)
    vals = (up.states - down.states) / (2.0 * delta)
    return SensitivitySolution(h, up.grid, vals, "finite-difference")
