"""SDE coefficient bundles and the built-in named problems.

Vector fields act on trailing axes so whole Monte Carlo batches are evaluated at once:
``mu: (..., d) -> (..., d)``, ``sigma: (..., d) -> (..., d, m)``,
``mu_jac: (..., d) -> (..., d, d)`` and ``sigma_jac: (..., d) -> (..., d, m, d)``
with ``sigma_jac[..., i, l, k] = d sigma^{il} / d x_k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class ScalarFields:
    """Elementwise scalar coefficients used by the one-dimensional solvers."""

    mu: Callable
    sigma: Callable
    dmu: Optional[Callable] = None
    dsigma: Optional[Callable] = None
    # closed-form diffusion flow (alpha, beta) -> (h, dh/dalpha) with dh/dbeta = sigma(h)
    flow: Optional[Callable] = None


@dataclass(frozen=True, eq=False)
class SdeProblem:
    d: int
    m: int
    x0: np.ndarray
    mu: Callable
    sigma: Callable
    mu_jac: Optional[Callable] = None
    sigma_jac: Optional[Callable] = None
    const_sigma: Optional[np.ndarray] = None
    scalar: Optional[ScalarFields] = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, float))
        if x0.shape != (self.d,):
            raise ValueError(f"x0 must have shape ({self.d},), got {x0.shape}")
        object.__setattr__(self, "x0", x0)
        if self.const_sigma is not None:
            cs = np.asarray(self.const_sigma, float).reshape(self.d, self.m)
            object.__setattr__(self, "const_sigma", cs)

    @property
    def has_jacobians(self):
        return self.mu_jac is not None and self.sigma_jac is not None

    @property
    def is_scalar(self):
        return self.d == 1 and self.m == 1

    @classmethod
    def from_scalar(cls, mu, sigma, x0, dmu=None, dsigma=None, const_sigma=None, name="", params=None,
                    flow=None):
        """Wrap elementwise scalar coefficients into the batched vector form."""
        fields = ScalarFields(mu, sigma, dmu, dsigma, flow)

        def vmu(x):
            return mu(x[..., 0])[..., None]

        def vsigma(x):
            return np.broadcast_to(sigma(x[..., 0]), x.shape[:-1])[..., None, None]

        vjac = None if dmu is None else (lambda x: dmu(x[..., 0])[..., None, None])
        sjac = None
        if dsigma is not None:
            sjac = lambda x: np.broadcast_to(dsigma(x[..., 0]), x.shape[:-1])[..., None, None, None]
        return cls(1, 1, np.array([float(x0)]), vmu, vsigma, vjac, sjac, const_sigma, fields,
                   name, dict(params or {}))


def _zero(x):
    return np.zeros_like(x)


def _one(x):
    return np.ones_like(x)


def _shift_flow(c):
    def flow(a, b):
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        return a + c * b, np.ones_like(a)
    return flow


def linear(alpha, beta, x0=1.0):
    """dX = alpha X dt + beta X dB."""

    def flow(a, b):
        e = np.exp(beta * np.asarray(b, float))
        return a * e, np.broadcast_to(e, np.broadcast(a, e).shape).copy()

    return SdeProblem.from_scalar(
        lambda x: alpha * x, lambda x: beta * x, x0,
        dmu=lambda x: np.full_like(x, alpha), dsigma=lambda x: np.full_like(x, beta),
        name="linear", params={"alpha": alpha, "beta": beta, "x0": x0}, flow=flow,
    )


def ou(kappa, x0=0.0, noise=1.0):
    """dX = -kappa X dt + noise dB."""
    return SdeProblem.from_scalar(
        lambda x: -kappa * x, lambda x: np.full_like(x, noise), x0,
        dmu=lambda x: np.full_like(x, -kappa), dsigma=_zero, const_sigma=[[noise]],
        name="ou", params={"kappa": kappa, "x0": x0, "noise": noise}, flow=_shift_flow(noise),
    )


def sine_drift(x0=0.0):
    """dX = (-X + sin X) dt + dB."""
    return SdeProblem.from_scalar(
        lambda x: -x + np.sin(x), _one, x0,
        dmu=lambda x: -1.0 + np.cos(x), dsigma=_zero, const_sigma=[[1.0]],
        name="sine-drift", params={"x0": x0}, flow=_shift_flow(1.0),
    )


def bounded_multiplicative(x0=0.0):
    """dX = -tanh(X) dt + (1 + 1/(1 + X^2)) dB: bounded smooth coefficients, sigma >= 1."""

    def sigma(x):
        return 1.0 + 1.0 / (1.0 + x * x)

    def dsigma(x):
        return -2.0 * x / (1.0 + x * x) ** 2

    r2 = np.sqrt(2.0)

    def lam(x):  # int_0^x du / sigma(u)
        return x - np.arctan(x / r2) / r2

    def flow(a, b):
        # h = lam^{-1}(lam(a) + b); |lam(x) - x| < pi / (2 sqrt 2) brackets the root
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        z = lam(a) + b
        c = np.pi / (2.0 * r2)
        lo, hi = z - c, z + c
        x = z.copy()
        for _ in range(100):
            r = lam(x) - z
            lo = np.where(r < 0, x, lo)
            hi = np.where(r > 0, x, hi)
            xn = x - r * sigma(x)
            xn = np.where((xn <= lo) | (xn >= hi), 0.5 * (lo + hi), xn)
            done = np.abs(xn - x) <= 1e-15 * (1.0 + np.abs(x))
            x = xn
            if np.all(done):
                break
        return x, sigma(x) / sigma(a)

    return SdeProblem.from_scalar(
        lambda x: -np.tanh(x), sigma, x0,
        dmu=lambda x: -1.0 / np.cosh(x) ** 2, dsigma=dsigma,
        name="bounded-multiplicative", params={"x0": x0}, flow=flow,
    )


def additive(mu, mu_jac, sigma_matrix, x0, name="additive"):
    """Vector problem with constant diffusion matrix."""
    s = np.asarray(sigma_matrix, float)
    d, m = s.shape

    def vsigma(x):
        return np.broadcast_to(s, x.shape[:-1] + (d, m))

    def vsjac(x):
        return np.zeros(x.shape[:-1] + (d, m, d))

    return SdeProblem(d, m, x0, mu, vsigma, mu_jac, vsjac, s, None, name)


NAMED = {
    "linear": linear,
    "ou": ou,
    "sine-drift": sine_drift,
    "bounded-multiplicative": bounded_multiplicative,
}


def named_problem(name, **params):
    """Build a built-in problem; unknown names raise KeyError."""
    try:
        factory = NAMED[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(NAMED)}") from None
    return factory(**params)
