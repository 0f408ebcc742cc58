"""Monte Carlo experiment reports and their fixed CSV layout."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

COLUMNS = ("label", "h", "h_prime", "statistic", "value", "std_err", "n")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.17g" % x


@dataclass(frozen=True)
class SlopeFit:
    label: str
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    stderr: float


@dataclass
class ExperimentReport:
    """Rows of estimates plus fitted slopes; ``std_err`` is NaN where unavailable (n = 1)."""

    name: str
    rows: list = field(default_factory=list)
    slopes: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, label, statistic, value, std_err=float("nan"), n=1, h=float("nan"), h_prime=float("nan")):
        self.rows.append(
            {"label": label, "h": h, "h_prime": h_prime, "statistic": statistic,
             "value": float(value), "std_err": float(std_err), "n": int(n)}
        )

    def add_slope(self, fit):
        self.slopes.append(fit)

    def get(self, statistic, label=None, h=None, h_prime=None):
        """All rows matching the filters."""
        out = []
        for r in self.rows:
            if r["statistic"] != statistic:
                continue
            if label is not None and r["label"] != label:
                continue
            if h is not None and not _close(r["h"], h):
                continue
            if h_prime is not None and not _close(r["h_prime"], h_prime):
                continue
            out.append(r)
        return out

    def value(self, statistic, **kw):
        rows = self.get(statistic, **kw)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {statistic!r} {kw}")
        return rows[0]["value"]

    def slope(self, label):
        for s in self.slopes:
            if s.label == label:
                return s
        raise KeyError(label)

    def all_rows(self):
        rows = list(self.rows)
        for s in self.slopes:
            base = {"label": s.label, "h": float("nan"), "h_prime": float("nan")}
            rows.append({**base, "statistic": "slope", "value": s.slope, "std_err": s.stderr, "n": 0})
            rows.append({**base, "statistic": "intercept", "value": s.intercept, "std_err": float("nan"), "n": 0})
            rows.append({**base, "statistic": "slope_ci_low", "value": s.ci_low, "std_err": float("nan"), "n": 0})
            rows.append({**base, "statistic": "slope_ci_high", "value": s.ci_high, "std_err": float("nan"), "n": 0})
        return rows

    def to_csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.all_rows():
            w.writerow([_fmt(r[c]) for c in COLUMNS])
        return buf.getvalue()

    def write_csv(self, fname):
        with open(fname, "w", newline="") as fh:
            fh.write(self.to_csv_text())


def _close(a, b):
    if isinstance(a, float) and math.isnan(a):
        return isinstance(b, float) and math.isnan(b)
    return abs(float(a) - float(b)) < 1e-12
