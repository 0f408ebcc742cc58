import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from hurst_sense.errors import GridError, HurstDomainError
from hurst_sense.fbm.grid import GridSpec
from hurst_sense.fbm.kernel import (
    kernel_cell_weights,
    kernel_derivative_cell_weights,
    mvn_constant,
    mvn_constant_derivative,
    tail_variance,
    truncation_depth,
)

# 40-digit mpmath evaluations of sqrt(sin(pi h) Gamma(2h+1)) / Gamma(h+1/2) and its h-derivative
C_ORACLE = {0.75: 1.0696446350319903241, 0.25: 0.64599800374075196761, 0.3: 0.7302829340799229657,
            0.1: 0.35768577342233513605, 0.9: 0.81122064814335251477}
DC_ORACLE = {0.75: -0.68477168373582463307, 0.25: 1.7397677024217591647, 0.3: 1.6302152337677201358,
             0.1: 2.1768732250365308079, 0.9: -3.1901109714717177823}


def test_constant_at_half_is_one():
    assert mvn_constant(0.5) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("h", sorted(C_ORACLE))
def test_constant_matches_high_precision(h):
    assert mvn_constant(h) == pytest.approx(C_ORACLE[h], rel=1e-12, abs=1e-12)
    assert mvn_constant_derivative(h) == pytest.approx(DC_ORACLE[h], rel=1e-10)


def test_constant_075_rounded():
    assert round(mvn_constant(0.75), 4) == 1.0696


def test_live_mpmath_oracle():
    mp.mp.dps = 30
    h = mp.mpf("0.37")
    c = mp.sqrt(mp.sin(mp.pi * h) * mp.gamma(2 * h + 1)) / mp.gamma(h + mp.mpf("0.5"))
    assert mvn_constant(0.37) == pytest.approx(float(c), rel=1e-13)


@pytest.mark.parametrize("h", [0.0, 1.0, -0.2, 1.2])
def test_constant_domain(h):
    with pytest.raises(HurstDomainError):
        mvn_constant(h)
    with pytest.raises(HurstDomainError):
        mvn_constant_derivative(h)


@pytest.mark.parametrize("h", [0.5, 0.3])
def test_derivative_matches_central_differences(h):
    fd = [(mvn_constant(h + e) - mvn_constant(h - e)) / (2 * e) for e in (1e-5, 1e-6)]
    for v in fd:
        assert mvn_constant_derivative(h) == pytest.approx(v, rel=1e-6, abs=1e-6)


@given(st.floats(0.02, 0.98))
def test_derivative_self_consistency(h):
    e = 1e-5
    fd = (mvn_constant(h + e) - mvn_constant(h - e)) / (2 * e)
    assert abs(mvn_constant_derivative(h) - fd) < 1e-6


def test_weights_half_are_indicator_averages():
    grid = GridSpec(1.0, 4)
    w = kernel_cell_weights(0.5, 1.0, grid).weights
    np.testing.assert_allclose(w, 1.0, atol=1e-15)  # cell [0.25, 0.5) is the second entry
    w = kernel_cell_weights(0.5, 0.5, grid).weights
    np.testing.assert_allclose(w, [1, 1, 0, 0], atol=1e-15)


def test_weight_single_cell_closed_form():
    ke = kernel_cell_weights(0.75, 1.0, GridSpec(1.0, 1))
    assert ke.weights[0] == pytest.approx(0.8, abs=1e-14)
    assert ke.c_h == pytest.approx(C_ORACLE[0.75], rel=1e-12)


def test_past_weight_matches_quadrature():
    grid = GridSpec(1.0, 2, 0.5, 1)  # past cell [-0.5, 0)
    w = kernel_cell_weights(0.3, 1.0, grid).weights[0]
    assert w == pytest.approx(-0.47796827568981463724, abs=1e-8)
    p = -0.2
    q = integrate.quad(lambda s: (1 - s) ** p - (-s) ** p, -0.5, 0, limit=200)[0] / 0.5
    assert w == pytest.approx(q, abs=1e-8)


def test_derivative_weight_last_cell_finite():
    grid = GridSpec(1.0, 64)
    dw = kernel_derivative_cell_weights(0.5, 1.0, grid).dweights
    assert np.all(np.isfinite(dw))
    # average of ln(1 - s) over [1 - dt, 1): ln dt - 1
    assert dw[-1] == pytest.approx(math.log(1 / 64) - 1.0, rel=1e-12)


def test_derivative_weight_matches_quadrature():
    dw = kernel_derivative_cell_weights(0.7, 1.0, GridSpec(1.0, 1)).dweights[0]
    q = integrate.quad(lambda s: math.log(1 - s) * (1 - s) ** 0.2, 0, 1, limit=200)[0]
    assert dw == pytest.approx(q, abs=1e-6)
    assert dw == pytest.approx(-1 / 1.44, abs=1e-12)


@pytest.mark.parametrize("h", [0.2, 0.45, 0.5, 0.62, 0.85])
def test_derivative_weights_are_h_derivatives(h):
    grid = GridSpec(2.0, 16, 3.0, 12)
    t = 1.25
    e = 1e-5
    up = kernel_cell_weights(h + e, t, grid).weights
    dn = kernel_cell_weights(h - e, t, grid).weights
    dw = kernel_derivative_cell_weights(h, t, grid).dweights
    fd = (up - dn) / (2 * e)
    np.testing.assert_allclose(dw, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())


def test_weights_reject_non_nodes_and_bad_h():
    grid = GridSpec(1.0, 8)
    with pytest.raises(GridError):
        kernel_cell_weights(0.4, 0.3, grid)
    with pytest.raises(HurstDomainError):
        kernel_cell_weights(1.0, 0.5, grid)


def test_weights_vanish_after_target():
    grid = GridSpec(1.0, 8, 2.0, 8)
    w = kernel_cell_weights(0.7, 0.5, grid).weights
    assert np.all(w[8 + 4 :] == 0.0)


@pytest.mark.parametrize("h", [0.3, 0.75])
def test_tail_variance_matches_direct_quadrature(h):
    s, t = 5.0, 1.0
    p = h - 0.5
    c = mvn_constant(h)
    direct = integrate.quad(lambda x: (c * ((x + t) ** p - x**p)) ** 2, s, np.inf, limit=400)[0]
    assert tail_variance(h, s, t)[0] == pytest.approx(direct, rel=1e-5)


@pytest.mark.parametrize("h", [0.3, 0.5, 0.75])
def test_truncation_depth_meets_rule(h):
    s = truncation_depth(h, 1.0, 1e-3)
    assert max(tail_variance(h, s, 1.0)) <= (1e-3) ** 2 * (1 + 1e-4)
    assert max(tail_variance(h, 0.9 * s, 1.0)) > (1e-3) ** 2
