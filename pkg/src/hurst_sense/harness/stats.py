"""Small statistics helpers: log-log fits and Monte Carlo summaries."""

from __future__ import annotations

import numpy as np
from scipy import stats

from ..report import SlopeFit


def fit_loglog_slope(points, label="", level=0.95):
    """Least squares of ln y on ln x; returns a SlopeFit with a t-based CI for the slope."""
    pts = np.asarray(points, float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive x and y")
    lx, ly = np.log(x), np.log(y)
    res = stats.linregress(lx, ly)
    dof = len(lx) - 2
    se = float(res.stderr) if dof > 0 else 0.0
    if not np.isfinite(se):
        se = 0.0
    q = stats.t.ppf(0.5 + level / 2, dof) if dof > 0 else 0.0
    return SlopeFit(label, float(res.slope), float(res.intercept), float(res.slope - q * se),
                    float(res.slope + q * se), se)


def mean_se(x, axis=0):
    """Sample mean and its standard error (NaN when only one sample)."""
    x = np.asarray(x, float)
    n = x.shape[axis]
    m = x.mean(axis=axis)
    if n < 2:
        return m, np.full_like(m, np.nan)
    return m, x.std(axis=axis, ddof=1) / np.sqrt(n)


def cov_se(a, b):
    """Sample covariance of paired zero-or-nonzero-mean samples and its standard error."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = a.size
    da, db = a - a.mean(), b - b.mean()
    prod = da * db
    c = prod.sum() / (n - 1)
    return c, prod.std(ddof=1) / np.sqrt(n)
