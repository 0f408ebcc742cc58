import numpy as np
import pytest

from hurst_sense.errors import HurstDomainError
from hurst_sense.fbm.grid import GridSpec, sample_driver, sample_drivers
from hurst_sense.fbm.synth import synthesize_fbm
from hurst_sense.harness.seeds import seed_block
from hurst_sense.sde.problems import SdeProblem, additive, bounded_multiplicative, linear, ou, sine_drift
from hurst_sense.sde.sensitivity import (
    finite_difference_sensitivity,
    sensitivity_additive,
    sensitivity_exponential_scalar,
    sensitivity_variational,
)
from hurst_sense.sde.solvers import solve, solve_additive, solve_doss_sussmann, solve_young


def _setup(h, n, seed=1, hs=None, t_max=1.0):
    g = GridSpec.for_hurst(t_max, n, hs or [h])
    d = sample_driver(seed, g)
    return d, synthesize_fbm(d, h)


def test_zero_drift_sensitivity_is_fbm_derivative():
    _, b = _setup(0.4, 64)
    prob = additive(lambda x: np.zeros_like(x), lambda x: np.zeros(x.shape + (1,)), [[1.0]], [0.0])
    y = sensitivity_additive(prob, solve_additive(prob, b), b)
    np.testing.assert_allclose(y.y, b.sensitivity, atol=1e-15)
    assert y.values[0, 0] == 0.0


def test_ou_sensitivity_matches_representation_sum():
    kappa = 1.3
    _, b = _setup(0.35, 128)
    prob = ou(kappa)
    y = sensitivity_additive(prob, solve_additive(prob, b), b).y
    t = b.nodes
    ds = np.diff(b.sensitivity)
    # Y_{t_k} = sum_{j<k} exp(-kappa (t_k - t_j)) dS_j
    ref = np.array([np.sum(np.exp(-kappa * (t[k] - t[:k])) * ds[:k]) for k in range(t.size)])
    np.testing.assert_allclose(y, ref, atol=1e-10)


def test_additive_fd_order_two():
    d, b = _setup(0.35, 128, hs=[0.3, 0.4])
    prob = sine_drift()
    # successive central differences on one discretization converge at order 2
    deltas = np.array([1e-2, 5e-3, 2.5e-3, 1.25e-3])
    fd = [finite_difference_sensitivity(prob, d, 0.35, dl, solve_additive).y for dl in deltas]
    cauchy = [np.abs(a - c).max() for a, c in zip(fd, fd[1:])]
    slope = np.polyfit(np.log(deltas[:-1]), np.log(cauchy), 1)[0]
    assert 1.5 <= slope <= 2.5


def test_additive_fd_gap_shrinks_with_step():
    prob = sine_drift()
    gaps = []
    for n in (128, 1024):
        g = GridSpec.for_hurst(1.0, n, [0.34, 0.36])
        d = sample_drivers(seed_block(9, 0, 8), g)
        b = synthesize_fbm(d, 0.35)
        y = sensitivity_additive(prob, solve_additive(prob, b), b).y
        fd = finite_difference_sensitivity(prob, d, 0.35, 1e-3, solve_additive).y
        gaps.append(np.mean(np.abs(fd - y).max(axis=1) / np.abs(fd).max(axis=1)))
    assert gaps[1] < gaps[0] and gaps[1] < 0.05


def test_additive_needs_jacobian():
    _, b = _setup(0.6, 16)
    prob = additive(lambda x: -x, None, [[1.0]], [0.0])
    with pytest.raises(ValueError):
        sensitivity_additive(prob, solve_additive(prob, b), b)


def test_exponential_unit_sigma_is_additive():
    _, b = _setup(0.7, 128)
    prob = sine_drift()
    x = solve_additive(prob, b)
    np.testing.assert_allclose(sensitivity_exponential_scalar(prob, x, b).values,
                               sensitivity_additive(prob, x, b).values, atol=1e-15)


def test_exponential_linear_closed_form_under_refinement():
    # the cell exponentials are exact for linear coefficients; what remains is the path error
    _, b = _setup(0.7, 512, seed=3)
    prob = linear(-0.5, 0.3)
    errs = []
    for f in (16, 8, 4, 2):
        c = b.coarsen(f)
        x = solve_doss_sussmann(prob, c)
        y = sensitivity_exponential_scalar(prob, x, c).y
        errs.append(np.abs(y - 0.3 * x.x * c.sensitivity).max())
    assert np.all(np.array(errs[:-1]) / errs[1:] >= 1.5)


def test_exponential_fd_within_five_percent():
    d, b = _setup(0.75, 1024, seed=2, hs=[0.74, 0.76])
    prob = bounded_multiplicative(x0=0.2)
    x = solve_doss_sussmann(prob, b)
    y = sensitivity_exponential_scalar(prob, x, b).y
    fd = finite_difference_sensitivity(prob, d, 0.75, 1e-3, solve_doss_sussmann).y
    assert np.abs(y - fd).max() < 0.05 * np.abs(fd).max()


def test_exponential_rejects_small_h():
    _, b = _setup(0.5, 16)
    prob = linear(-0.5, 0.3)
    with pytest.raises(HurstDomainError):
        sensitivity_exponential_scalar(prob, solve_doss_sussmann(prob, b), b)
    with pytest.raises(HurstDomainError):
        sensitivity_variational(prob, solve_doss_sussmann(prob, b), b)


@pytest.mark.parametrize("prob", [linear(-0.5, 0.3), bounded_multiplicative(0.4)])
def test_variational_equals_exponential(prob):
    _, b = _setup(0.7, 256, seed=4)
    x = solve_doss_sussmann(prob, b)
    np.testing.assert_allclose(sensitivity_variational(prob, x, b).values,
                               sensitivity_exponential_scalar(prob, x, b).values, atol=1e-8)


def test_variational_constant_sigma_matrix_is_additive():
    _, b1 = _setup(0.7, 128, seed=1)
    _, b2 = _setup(0.7, 128, seed=2)
    a = np.array([[-1.0, 0.4], [-0.3, -0.8]])
    prob = additive(lambda x: x @ a.T + 0.1 * np.sin(x), lambda x: a + 0.1 * np.cos(x)[..., None] * np.eye(2),
                    [[1.0, 0.2], [0.0, 0.7]], [0.5, -0.2])
    x = solve_additive(prob, [b1, b2])
    np.testing.assert_allclose(sensitivity_variational(prob, x, [b1, b2]).values,
                               sensitivity_additive(prob, x, [b1, b2]).values, atol=1e-13)


def _coupled():
    def mu(x):
        return np.stack([-x[..., 0] + 0.5 * np.sin(x[..., 1]), -0.7 * x[..., 1] + 0.3 * x[..., 0]], axis=-1)

    def mu_jac(x):
        j = np.zeros(x.shape[:-1] + (2, 2))
        j[..., 0, 0] = -1.0
        j[..., 0, 1] = 0.5 * np.cos(x[..., 1])
        j[..., 1, 0] = 0.3
        j[..., 1, 1] = -0.7
        return j

    def sigma(x):
        s = np.zeros(x.shape[:-1] + (2, 2))
        s[..., 0, 0] = 0.4 * np.cos(x[..., 1])
        s[..., 0, 1] = 0.2
        s[..., 1, 0] = 0.1 * x[..., 0]
        s[..., 1, 1] = 0.5
        return s

    def sigma_jac(x):
        j = np.zeros(x.shape[:-1] + (2, 2, 2))
        j[..., 0, 0, 1] = -0.4 * np.sin(x[..., 1])
        j[..., 1, 0, 0] = 0.1
        return j

    return SdeProblem(2, 2, [0.5, -0.3], mu, sigma, mu_jac, sigma_jac, name="coupled")


def test_variational_coupled_fd():
    g = GridSpec.for_hurst(1.0, 1024, [0.79, 0.81])
    d1, d2 = sample_driver(5, g), sample_driver(6, g)
    bs = [synthesize_fbm(d1, 0.8), synthesize_fbm(d2, 0.8)]
    prob = _coupled()
    x = solve_young(prob, bs)
    y = sensitivity_variational(prob, x, bs).values
    fd = finite_difference_sensitivity(prob, [d1, d2], 0.8, 1e-3, solve_young).values
    assert np.abs(y - fd).max() < 0.05 * np.abs(fd).max()


def test_variational_needs_jacobians():
    _, b = _setup(0.7, 16)
    prob = SdeProblem.from_scalar(lambda x: -x, lambda x: x, 1.0)
    with pytest.raises(ValueError):
        sensitivity_variational(prob, solve_young(prob, b), b)


def test_sensitivity_csv_columns(tmp_path):
    _, b = _setup(0.7, 8)
    prob = linear(-0.5, 0.3)
    x = solve(prob, b)
    y = sensitivity_exponential_scalar(prob, x, b)
    f = tmp_path / "xy.csv"
    x.to_csv(f, y)
    assert open(f).readline().strip() == "t,X0,Y0"
