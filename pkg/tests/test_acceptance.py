"""End-to-end acceptance criteria, each run through the experiment harness at its stated tolerance.

Every check records a verdict; the session summary prints one PASS/FAIL line per criterion.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import json
import math
from functools import lru_cache

import pytest

from acceptance_log import record
from hurst_sense.harness.config import resolve_config
from hurst_sense.harness.experiments import EXPERIMENTS, run_experiment
from small_configs import SMALL

pytestmark = pytest.mark.slow

TITLES = {
    "covariance": "fBm covariance within 4 SE (MvN and Cholesky)",
    "fbm_sensitivity": "central differences in H converge to the sensitivity at order 2",
    "linear_sde": "linear SDE closed form: error ratios >= 1.5 per halving",
    "additive_lipschitz": "additive Lipschitz-in-H slope in [0.8, 1.2]",
    "fou_variance": "fOU stationary variance within 4 SE + budget",
    "ergodic_average": "ergodic average of x^2 within 5%",
    "long_time_comparison": "long-time H comparison slopes and bounded moment ratios",
    "levy_dichotomy": "Levy-area dichotomy for (W, dW/dH) vs independent pair",
    "wiener_norm": "Wiener norm identity and two-piece variance",
    "hitting_trend": "hitting-time difference quotients stable within factor 2",
    "determinism": "byte-identical reruns of every experiment",
}


def check(crit, part, ok, detail):
    record(crit, TITLES[crit], part, ok, detail)
    assert ok, detail


@lru_cache(maxsize=None)
def _run(name, raw=None):
    cfg = resolve_config(name, json.loads(raw) if raw else {})
    return run_experiment(cfg)


def run(name, **raw):
    return _run(name, json.dumps(raw, sort_keys=True) if raw else None)


def slope(rep, label):
    (s,) = [s for s in rep.slopes if s.label == label]
    return s.slope


# ------------------------------------------------------------ covariance


@pytest.mark.parametrize("sampler", ["mvn", "cholesky"])
def test_covariance(sampler):
    rep = run("fbm-cov")
    for h in (0.3, 0.5, 0.75):
        z = rep.value("max_excess_z", label=sampler, h=h)
        n_cells = len([r for r in rep.get("cov", h=h) if r["label"].startswith(sampler + ":")])
        check("covariance", f"{sampler}:h={h}", z <= 4.0 and n_cells == 15,
              f"{sampler} h={h}: worst excess |cov - exact| over {n_cells} node pairs = {z:.2f} SE (<= 4)")


# ------------------------------------------------------------ fbm sensitivity


def test_sensitivity_is_derivative():
    rep = run("fbm-sensitivity")
    for h in (0.3, 0.5, 0.75):
        s = slope(rep, f"fd_order:h={h:g}")
        check("fbm_sensitivity", f"h={h}", 1.5 <= s <= 2.5, f"h={h}: central-difference error slope {s:.3f} in [1.5, 2.5]")


# ------------------------------------------------------------ linear sde


def _ratios(rep, scheme):
    return [r["value"] for r in rep.get("error_ratio") if r["label"].startswith(scheme + ":")]


def test_doss_sussmann():
    r = _ratios(run("sde-solve"), "doss-sussmann")
    check("linear_sde", "doss-sussmann", len(r) == 3 and min(r) >= 1.5,
          f"Doss-Sussmann sup-error ratios {[round(x, 2) for x in r]} all >= 1.5")


@pytest.mark.xfail(strict=True, reason="Young-Euler converges at order 2H-1, ratio 2^0.4 ~ 1.32 at h=0.7")
def test_young_euler():
    r = _ratios(run("sde-solve"), "young-euler")
    check("linear_sde", "young-euler", len(r) == 3 and min(r) >= 1.5,
          f"Young-Euler sup-error ratios {[round(x, 2) for x in r]} all >= 1.5")


def test_sensitivity():
    rep = run("sde-sensitivity")
    for method in ("exponential-representation", "variational-phi"):
        r = _ratios(rep, method)
        check("linear_sde", method, len(r) == 3 and min(r) >= 1.5,
              f"{method} sensitivity sup-error ratios vs beta X dB/dH {[round(x, 2) for x in r]} all >= 1.5")


# ------------------------------------------------------------ additive lipschitz


def test_additive_lipschitz():
    rep = run("h-compare", grid={"t_max": 1.0, "n_steps": 256},
              problem={"name": "ou", "params": {"kappa": 1.0, "x0": 0.0}},
              h_pairs=[[0.45, 0.65], [0.5, 0.6], [0.525, 0.575], [0.5375, 0.5625]],
              params={"eps": 0.0, "checkpoints": [0.25, 0.5, 1.0]})
    s = slope(rep, "sup_distance")
    check("additive_lipschitz", "slope", 0.8 <= s <= 1.2, f"sup_(t<=1)|X^H - X^H'| vs gap slope {s:.3f} in [0.8, 1.2]")


# ------------------------------------------------------------ fou variance


def test_fou_variance():
    rep = run("fou-stationary")
    for kappa, h in ((1.0, 0.5), (1.0, 0.75), (2.0, 0.6)):
        lab = f"kappa={kappa:g}"
        z = rep.value("excess_z", label=lab, h=h)
        v = rep.value("variance", label=lab, h=h)
        t = rep.value("target", label=lab, h=h)
        check("fou_variance", f"{lab},h={h}", z <= 4.0, f"kappa={kappa:g} h={h}: Var {v:.4f} vs {t:.4f}, excess {z:.2f} SE (<= 4)")
    t = rep.value("target", label="kappa=1", h=0.5)
    check("fou_variance", "brownian-target", t == 0.5, f"kappa=1 h=0.5 target {t!r} == 0.5")


# ------------------------------------------------------------ ergodic average


def test_ergodic_average():
    rep = run("ergodic-avg")
    for h in (0.5, 0.7):
        e = rep.value("rel_error", h=h)
        check("ergodic_average", f"h={h}", e <= 0.05, f"h={h}: T=500 time average of x^2 relative error {e:.4f} (<= 0.05)")


# ------------------------------------------------------------ long time comparison


def test_long_time_comparison():
    rep = run("h-compare")
    w = slope(rep, "weighted_sup")
    check("long_time_comparison", "weighted", w >= 0.8, f"weighted pathwise slope {w:.3f} (>= 0.8)")
    a = slope(rep, "time_avg_sq")
    check("long_time_comparison", "time-avg", a >= 1.5, f"time-averaged squared distance slope {a:.3f} (>= 1.5)")
    sp = rep.value("moment_ratio_spread")
    check("long_time_comparison", "ratio", sp <= 5.0, f"moment ratio max/min over checkpoints {sp:.3f} (<= 5)")


# ------------------------------------------------------------ levy dichotomy


def test_levy_dichotomy():
    rep = run("levy-diverge", params={"n_range": list(range(6, 13)), "exact": True})
    lo = rep.value("exact_min_ratio", label="mixed", h=0.5)
    check("levy_dichotomy", "mixed", lo >= 0.9, f"(W, dW/dH) second-moment ratios min {lo:.4f} over n=6..12 (>= 0.9)")
    hi = rep.value("exact_max_ratio", label="independent", h=0.5)
    check("levy_dichotomy", "independent", hi <= 0.7, f"independent second-moment ratios max {hi:.4f} (<= 0.7)")
    d = rep.value("max_abs_error", label="diagonal", h=0.5)
    check("levy_dichotomy", "diagonal", d <= 1e-12, f"diagonal area vs (dW)^2/2 max error {d:.2e} (<= 1e-12)")


# ------------------------------------------------------------ wiener norm


def test_wiener_norm():
    rep = run("wiener-norm")
    for h in (0.1, 0.25, 0.4):
        v = rep.value("norm_formula", label="indicator", h=h)
        check("wiener_norm", f"indicator:h={h}", abs(v - 1.0) <= 1e-10, f"h={h}: ||1_[0,1)||^2 = {v!r} (|.-1| <= 1e-10)")
        z = rep.value("excess_z", label="step", h=h)
        check("wiener_norm", f"step:h={h}", z <= 4.0, f"h={h}: two-piece formula vs Cholesky MC variance {z:.2f} SE (<= 4)")


# ------------------------------------------------------------ hitting trend


def test_hitting_trend():
    rep = run("hitting-laplace")
    q = [r["value"] for r in rep.get("diff_quotient")]
    sp = rep.value("quotient_spread")
    check("hitting_trend", "spread", len(q) == 2 and sp <= 2.0 and math.copysign(1, q[0]) == math.copysign(1, q[1]),
          f"difference quotients {[round(x, 4) for x in q]} spread {sp:.3f} (<= 2, same sign)")


# ------------------------------------------------------------ determinism


@pytest.mark.parametrize("name", sorted(EXPERIMENTS))
def test_determinism(name):
    cfg = resolve_config(name, SMALL[name])
    a = run_experiment(cfg).to_csv_text().encode()
    b = run_experiment(cfg).to_csv_text().encode()
    check("determinism", name, a == b and a.count(b"\n") > 1, f"{name}: rerun CSV identical ({len(a)} bytes)")


def test_default_config_rerun():
    cfg = resolve_config("fbm-cov", {})
    a = run_experiment(cfg).to_csv_text()
    check("determinism", "fbm-cov-default", a == run("fbm-cov").to_csv_text(), "fbm-cov default config rerun identical")
