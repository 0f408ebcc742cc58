import numpy as np
import pytest

from hurst_sense.fbm.grid import GridSpec, sample_driver
from hurst_sense.fbm.regularity import besov_norm_w1, besov_norm_w2, holder_norm_estimate
from hurst_sense.fbm.synth import synthesize_fbm


def test_constant_path():
    assert holder_norm_estimate(np.full(17, -2.5), 0.5) == pytest.approx(2.5)


def test_linear_path_holder():
    t = np.linspace(0, 1, 65)
    assert holder_norm_estimate(t, 0.5) == pytest.approx(2.0, abs=1e-12)


def test_holder_window():
    t = np.linspace(0, 1, 65)
    assert holder_norm_estimate(t, 0.0, window=(0.0, 0.5)) == pytest.approx(1.0)


def test_zero_path_besov():
    z = np.zeros(33)
    assert besov_norm_w1(z, 0.3) == 0.0 and besov_norm_w2(z, 0.3) == 0.0


@pytest.mark.parametrize("n", [16, 128])
def test_linear_path_besov_closed_forms(n):
    t = np.linspace(0, 1, n + 1)
    assert besov_norm_w1(t, 0.25) == pytest.approx(1 + 4 / 3, rel=1e-12)
    # (t-s)^a + (t-s)^a / a at t - s = 1
    assert besov_norm_w2(t, 0.25) == pytest.approx(5.0, rel=1e-12)


def test_parameter_ranges():
    with pytest.raises(ValueError):
        holder_norm_estimate(np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        besov_norm_w1(np.zeros(3), 0.5)


def _fbm(h, n, seed=3):
    g = GridSpec.for_hurst(1.0, n, [h])
    return synthesize_fbm(sample_driver(seed, g), h, sensitivity=False)


def test_holder_refinement_trend():
    # one fine path, restricted to coarser grids
    b = _fbm(0.7, 4096)
    levels = (64, 16, 4, 1)
    stable = [holder_norm_estimate(b.coarsen(f), 0.6) for f in levels]
    rough = [holder_norm_estimate(b.coarsen(f), 0.8) for f in levels]
    assert stable[-1] / stable[0] < 1.25
    assert rough[-1] / rough[0] > 1.5
    assert np.all(np.diff(rough) > 0)


def test_besov_w2_refinement_stable():
    b = _fbm(0.8, 1024)
    vals = [besov_norm_w2(b.coarsen(f), 0.3) for f in (8, 2, 1)]
    assert np.all(np.isfinite(vals))
    assert max(vals) / min(vals) < 1.25
