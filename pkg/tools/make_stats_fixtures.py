"""Freeze reference statistics for the in-package stats module.

Run once with SciPy installed (``pip install .[fixtures]``); the output is
committed and never regenerated by the test suite.
"""
import json
import pathlib

import numpy as np
from scipy import stats

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "ztbench" / "data" / "stats_fixtures.json"


def _samples(rng):
    yield "normal_small", rng.normal(0, 1, 8), rng.normal(0.5, 1, 9)
    yield "normal_30", rng.normal(0.94, 0.005, 30), rng.normal(0.65, 0.02, 30)
    yield "unequal_var", rng.normal(10, 1, 15), rng.normal(11, 4, 25)
    yield "skewed", rng.lognormal(0, 1, 20), rng.lognormal(0.3, 1, 22)
    yield "uniform", rng.uniform(0, 1, 12), rng.uniform(0.2, 1.2, 12)
    yield "ties", rng.integers(0, 5, 18).astype(float), rng.integers(1, 6, 16).astype(float)
    yield "bimodal", np.r_[np.zeros(15), np.ones(15)] + rng.normal(0, 1e-3, 30), rng.normal(0.5, 0.3, 30)
    yield "exponential", rng.exponential(1.0, 40), rng.exponential(1.5, 35)
    yield "n4_n5", rng.normal(0, 1, 4), rng.normal(1, 1, 5)
    yield "close_means", rng.normal(0.4, 0.04, 30), rng.normal(0.41, 0.04, 30)
    yield "large", rng.normal(0, 1, 200), rng.standard_t(3, 180)
    yield "n3", rng.normal(0, 1, 3), rng.normal(2, 1, 3)


def main():
    rng = np.random.default_rng(20240601)
    cases = []
    for name, a, b in _samples(rng):
        a, b = [float(v) for v in a], [float(v) for v in b]
        sw_a, sw_b = stats.shapiro(a), stats.shapiro(b)
        wt = stats.ttest_ind(a, b, equal_var=False)
        mw = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                                use_continuity=True)
        cases.append({
            "name": name, "a": a, "b": b,
            "shapiro_a": [float(sw_a.statistic), float(sw_a.pvalue)],
            "shapiro_b": [float(sw_b.statistic), float(sw_b.pvalue)],
            "welch": [float(wt.statistic), float(wt.pvalue)],
            "mann_whitney": [float(mw.statistic), float(mw.pvalue)],
            "pearson": float(stats.pearsonr(a[: min(len(a), len(b))],
                                            b[: min(len(a), len(b))]).statistic),
        })
    OUT.write_text(json.dumps({"generator": f"scipy {__import__('scipy').__version__}",
                               "cases": cases}, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
