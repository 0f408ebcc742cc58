import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hurst_sense.errors import FactorizationError, GridError, HurstDomainError
from hurst_sense.fbm.grid import DriverPath, GridSpec, sample_driver, sample_drivers
from hurst_sense.fbm.kernel import tail_variance
from hurst_sense.fbm.synth import (
    _root,
    exact_fbm_cholesky,
    fbm_covariance,
    functional_variance,
    synthesis_matrices,
    synthesize_fbm,
    synthesized_covariance,
    truncation_budget,
)
from hurst_sense.harness.seeds import seed_block


def _grid(n=64, hs=(0.3, 0.75)):
    return GridSpec.for_hurst(1.0, n, list(hs))


def test_half_equals_driver_restriction():
    g = _grid()
    d = sample_driver(3, g)
    b = synthesize_fbm(d, 0.5)
    np.testing.assert_allclose(b.path, d.restricted_path(), atol=1e-13)


def test_starts_at_zero():
    b = synthesize_fbm(sample_driver(4, _grid()), 0.7)
    assert b.path[0] == 0.0 and b.sensitivity[0] == 0.0


def test_zero_driver_gives_zero():
    g = _grid(16)
    b = synthesize_fbm(DriverPath(None, g, np.zeros(g.n_cells)), 0.4)
    assert not b.path.any() and not b.sensitivity.any()


def test_same_driver_reproduces_bundle():
    g = _grid(32)
    a = synthesize_fbm(sample_driver(9, g), 0.62)
    b = synthesize_fbm(sample_driver(9, g), 0.62)
    assert np.array_equal(a.path, b.path) and np.array_equal(a.sensitivity, b.sensitivity)


@given(st.integers(0, 2**32), st.integers(0, 2**32), st.floats(0.1, 0.9))
def test_linear_in_driver(s1, s2, h):
    g = GridSpec.for_hurst(1.0, 32, [0.1, 0.9])
    x, y = sample_driver(s1, g), sample_driver(s2, g)
    bx, by, bxy = synthesize_fbm(x, h), synthesize_fbm(y, h), synthesize_fbm(x + y, h)
    scale = 1 + np.abs(bxy.path).max() + np.abs(bxy.sensitivity).max()
    assert np.abs(bxy.path - bx.path - by.path).max() < 1e-12 * scale
    assert np.abs(bxy.sensitivity - bx.sensitivity - by.sensitivity).max() < 1e-12 * scale


def test_batched_matches_matrices():
    g = _grid(16)
    d = sample_drivers([1, 2, 3], g)
    b = synthesize_fbm(d, 0.35)
    m, dm = synthesis_matrices(0.35, g)
    np.testing.assert_allclose(b.path, d.increments @ m.T, atol=1e-12)
    np.testing.assert_allclose(b.sensitivity, d.increments @ dm.T, atol=1e-11)
    np.testing.assert_array_equal(b.row(1).path, b.path[1])


def test_grid_mismatch():
    d = sample_driver(0, _grid(16))
    with pytest.raises(GridError):
        synthesize_fbm(d, 0.5, grid=GridSpec(1.0, 16))


@pytest.mark.parametrize("h", [0.05, 0.95, 0.02, 1.0])
def test_band_edges_rejected(h):
    with pytest.raises(HurstDomainError):
        synthesize_fbm(sample_driver(0, _grid(8)), h)


def test_var_b1_at_half():
    g = _grid(16)
    b = synthesize_fbm(sample_drivers(seed_block(5, 0, 10_000), g), 0.5, sensitivity=False)
    x = b.path[:, -1]
    se = np.sqrt(2.0 / x.size)
    assert abs(np.mean(x**2) - 1.0) < 4 * se


def test_cov_075_within_budget():
    g = _grid(32)
    b = synthesize_fbm(sample_drivers(seed_block(8, 0, 10_000), g), 0.75, sensitivity=False)
    idx = [8, 16, 32]
    x = b.path[:, idx]
    emp = x.T @ x / x.shape[0]
    exact = fbm_covariance(0.75, g.nodes[idx])
    se = np.sqrt((emp**2 + np.outer(np.diag(emp), np.diag(emp))) / x.shape[0])
    budget = truncation_budget(0.75, g)[np.ix_(idx, idx)]
    assert np.all(np.abs(emp - exact) <= 4 * se + budget)


@pytest.mark.parametrize("h", [0.3, 0.75])
def test_exact_covariance_close_to_fbm(h):
    # the synthesized law differs from fBm only by truncation and cell averaging
    g = _grid(64)
    assert truncation_budget(h, g).max() < 0.02
    assert synthesized_covariance(h, g)[-1, -1] == pytest.approx(1.0, abs=0.02)


def test_functional_variance_matches_dense():
    g = _grid(32)
    a = np.random.default_rng(1).standard_normal(33)
    dense = a @ synthesized_covariance(0.42, g) @ a
    assert functional_variance(0.42, g, a) == pytest.approx(dense, rel=1e-10)


def test_joint_covariance_blocks():
    g = _grid(8)
    j = synthesized_covariance(0.6, g, "joint")
    np.testing.assert_allclose(j[:9, :9], synthesized_covariance(0.6, g), atol=1e-14)
    np.testing.assert_allclose(j[9:, 9:], synthesized_covariance(0.6, g, "sensitivity"), atol=1e-14)


def test_sensitivity_moments_bounded_across_h():
    g = GridSpec.for_hurst(1.0, 32, [0.3, 0.8])
    d = sample_drivers(seed_block(2, 0, 2000), g)
    n = d.increments.shape[0]
    for h in np.linspace(0.3, 0.8, 6):
        s = synthesize_fbm(d, h).sensitivity[:, 1:]
        var = np.diag(synthesized_covariance(h, g, "sensitivity"))[1:]
        m2, m4 = np.mean(s**2, axis=0), np.mean(s**4, axis=0)
        # Gaussian: E s^4 = 3 var^2, Var(s^2) = 2 var^2
        assert np.all(np.abs(m2 - var) < 4 * np.sqrt(2 / n) * var)
        assert np.all(np.abs(m4 - 3 * var**2) < 4 * np.sqrt(96 / n) * var**2)
        assert var.max() < 10.0


def test_coarsen():
    g = _grid(16)
    b = synthesize_fbm(sample_driver(1, g), 0.7)
    c = b.coarsen(4)
    assert c.grid.n_steps == 4
    np.testing.assert_array_equal(c.path, b.path[::4])
    with pytest.raises(GridError):
        b.coarsen(3)


def test_to_csv(tmp_path):
    b = synthesize_fbm(sample_driver(1, _grid(4)), 0.7)
    f = tmp_path / "p.csv"
    b.to_csv(f)
    data = np.loadtxt(f, delimiter=",", skiprows=1)
    assert open(f).readline().strip() == "t,B,dB_dH"
    np.testing.assert_array_equal(data[:, 1], b.path)


def test_cholesky_half_increments_iid():
    g = GridSpec(1.0, 32)
    b = exact_fbm_cholesky(seed_block(0, 0, 4000), g, 0.5)
    inc = np.diff(b.path, axis=1)
    emp = inc.T @ inc / inc.shape[0]
    se = np.sqrt(2.0 / inc.shape[0]) * g.dt
    assert np.all(np.abs(np.diag(emp) - g.dt) < 4.5 * se)
    off = emp[~np.eye(32, dtype=bool)]
    assert np.all(np.abs(off) < 4.5 * g.dt / np.sqrt(inc.shape[0]))


@pytest.mark.parametrize("h", [0.25, 0.8])
def test_cholesky_terminal_variance(h):
    b = exact_fbm_cholesky(seed_block(6, 0, 10_000), GridSpec(2.0, 16), h)
    x = b.path[:, -1]
    target = 2.0 ** (2 * h)
    assert abs(np.mean(x**2) - target) < 4 * np.sqrt(2.0 / x.size) * target
    assert b.sensitivity is None


def test_covariance_psd():
    c = fbm_covariance(0.3, GridSpec(1.0, 256).nodes[1:])
    np.testing.assert_allclose(c, c.T)
    vals = np.linalg.eigvalsh(c)
    assert vals.min() >= -1e-10 * np.abs(vals).max()


def test_factorization_error_reports_condition():
    with pytest.raises(FactorizationError, match="condition"):
        _root(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_eigen_fallback_for_singular():
    c = np.ones((3, 3))
    r = _root(c)
    np.testing.assert_allclose(r @ r.T, c, atol=1e-12)


def test_dense_limit():
    with pytest.raises(GridError):
        exact_fbm_cholesky(0, GridSpec(1.0, 4097), 0.5)


def test_tail_budget_in_covariance():
    g = _grid(16)
    # at t = T the only differences are the truncated tail and past-cell averaging
    tv = tail_variance(0.75, g.s_trunc, 1.0)[0]
    assert tv <= (1e-3) ** 2 * 1.0001
