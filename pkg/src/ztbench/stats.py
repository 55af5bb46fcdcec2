"""Hypothesis tests and effect sizes used to compare engines across runs.

Pure Python plus ``math``; results are checked against frozen reference values
computed once with SciPy (``data/stats_fixtures.json``).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from statistics import NormalDist
from typing import Optional, Sequence

_NORMAL = NormalDist()


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    test: str
    statistic: float
    p_value: float
    effect_size: Optional[float] = None
    effect_name: Optional[str] = None
    significant: Optional[bool] = None
    df: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _mean(x: Sequence[float]) -> float:
    return math.fsum(x) / len(x)


def _var(x: Sequence[float]) -> float:
    m = _mean(x)
    return math.fsum((v - m) ** 2 for v in x) / (len(x) - 1)


def _require(x: Sequence[float], n_min: int, name: str = "sample") -> list:
    x = [float(v) for v in x]
    if len(x) < n_min:
        raise StatsError(f"{name} needs at least {n_min} observations, got {len(x)}")
    if not all(math.isfinite(v) for v in x):
        raise StatsError(f"{name} contains non-finite values")
    return x


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# --- Shapiro-Wilk (Royston 1995, algorithm AS R94) -------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(c: Sequence[float], x: float) -> float:
    r = 0.0
    for coef in reversed(c):
        r = r * x + coef
    return r


def _sw_coefficients(n: int) -> list:
    if n == 3:
        return [-math.sqrt(0.5), 0.0, math.sqrt(0.5)]
    m = [_NORMAL.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)]
    ssm = math.fsum(v * v for v in m)
    rsn = 1.0 / math.sqrt(n)
    a = [0.0] * n
    an = _poly(_C1, rsn) + m[-1] / math.sqrt(ssm)
    if n > 5:
        an1 = _poly(_C2, rsn) + m[-2] / math.sqrt(ssm)
        phi = (ssm - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * an ** 2 - 2 * an1 ** 2)
        i1 = 2
        a[-1], a[-2] = an, an1
    else:
        phi = (ssm - 2 * m[-1] ** 2) / (1 - 2 * an ** 2)
        i1 = 1
        a[-1] = an
    for i in range(i1, n - i1):
        a[n - 1 - i] = m[n - 1 - i] / math.sqrt(phi)
    for i in range(n // 2):
        a[i] = -a[n - 1 - i]
    if n % 2:
        a[n // 2] = 0.0
    return a


def shapiro_wilk(x: Sequence[float]) -> TestResult:
    """W statistic and p-value. Raises on n < 3, n > 5000 or zero range."""
    x = sorted(_require(x, 3))
    n = len(x)
    if n > 5000:
        raise StatsError("Shapiro-Wilk supports at most 5000 observations")
    if x[-1] - x[0] <= 0.0:
        raise StatsError("Shapiro-Wilk undefined for a constant sample")
    a = _sw_coefficients(n)
    m = _mean(x)
    ssq = math.fsum((v - m) ** 2 for v in x)
    w = math.fsum(ai * xi for ai, xi in zip(a, x)) ** 2 / ssq
    w = min(w, 1.0)
    if n == 3:
        p = max(0.0, (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75))))
        return TestResult("shapiro_wilk", w, min(p, 1.0))
    w1 = math.log(1.0 - w) if w < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if w1 >= gamma:
            return TestResult("shapiro_wilk", w, 1e-99)
        y = -math.log(gamma - w1)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        y = w1
        mu = _poly(_C5, ln)
        sigma = math.exp(_poly(_C6, ln))
    if y == -math.inf:
        return TestResult("shapiro_wilk", w, 1.0)
    return TestResult("shapiro_wilk", w, normal_sf((y - mu) / sigma))


# --- Student t via the regularized incomplete beta function ----------------------

def _betacf(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
           + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(lbt) * _betacf(a, b, x) / a
    return 1.0 - math.exp(lbt) * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    return betainc(0.5 * df, 0.5, df / (df + t * t))


def welch_t(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Welch's unequal-variance t test (two-sided); effect size is Cohen's d."""
    a = _require(a, 2, "sample a")
    b = _require(b, 2, "sample b")
    va, vb = _var(a) / len(a), _var(b) / len(b)
    se2 = va + vb
    diff = _mean(a) - _mean(b)
    if se2 == 0.0:
        if diff == 0.0:
            raise StatsError("Welch t undefined: both samples constant and equal")
        t, df, p = math.copysign(math.inf, diff), float(len(a) + len(b) - 2), 0.0
    else:
        t = diff / math.sqrt(se2)
        fa, fb = va / se2, vb / se2  # ratios avoid underflow in the squared terms
        df = 1.0 / (fa * fa / (len(a) - 1) + fb * fb / (len(b) - 1))
        p = t_two_sided_p(t, df)
    return TestResult("welch_t", t, p, cohens_d(a, b), "cohens_d", df=df)


# --- Mann-Whitney U ------------------------------------------------------------

def _midranks(values: Sequence[float]) -> tuple:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        r = 0.5 * (i + j) + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = r
        if j > i:
            ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """Two-sided U test, normal approximation with tie and continuity correction.

    The statistic is U for sample ``a``; the effect size is the rank-biserial
    correlation ``1 - 2U/(n_a n_b)`` (positive when ``a`` tends to be smaller).
    """
    a = _require(a, 1, "sample a")
    b = _require(b, 1, "sample b")
    na, nb = len(a), len(b)
    ranks, ties = _midranks(a + b)
    u = math.fsum(ranks[:na]) - na * (na + 1) / 2.0
    n = na + nb
    tie_term = math.fsum(t ** 3 - t for t in ties)
    var = na * nb / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    mu = na * nb / 2.0
    if var <= 0.0:
        p = 1.0
    else:
        z = (abs(u - mu) - 0.5) / math.sqrt(var)
        p = min(1.0, 2.0 * normal_sf(max(z, 0.0)) if z > 0 else 1.0)
    return TestResult("mann_whitney_u", u, p, rank_biserial(u, na, nb), "rank_biserial")


def rank_biserial(u: float, na: int, nb: int) -> float:
    return 1.0 - 2.0 * u / (na * nb)


# --- effect sizes and corrections ------------------------------------------------

def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """(mean_a - mean_b) over the pooled sample standard deviation."""
    a = _require(a, 2, "sample a")
    b = _require(b, 2, "sample b")
    na, nb = len(a), len(b)
    pooled = ((na - 1) * _var(a) + (nb - 1) * _var(b)) / (na + nb - 2)
    diff = _mean(a) - _mean(b)
    if pooled == 0.0:
        if diff == 0.0:
            raise StatsError("Cohen's d undefined: both samples constant and equal")
        return math.copysign(math.inf, diff)
    return diff / math.sqrt(pooled)


def bonferroni_threshold(m: int, family_alpha: float = 0.05) -> float:
    if not (0.0 < family_alpha < 1.0):
        raise StatsError("alpha must lie in (0, 1)")
    if m < 1:
        raise StatsError("family size must be >= 1")
    return family_alpha / m


def bonferroni(p_values: Sequence[float], family_alpha: float = 0.05) -> list:
    """Per-test significance flags: ``p < family_alpha / m``."""
    p_values = list(p_values)
    if not p_values:
        raise StatsError("no p-values to correct")
    threshold = bonferroni_threshold(len(p_values), family_alpha)
    return [p < threshold for p in p_values]


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    x = _require(x, 2, "x")
    y = _require(y, 2, "y")
    if len(x) != len(y):
        raise StatsError("pearson_r needs equal-length vectors")
    mx, my = _mean(x), _mean(y)
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("pearson_r undefined for a constant vector")
    if x == y:
        return 1.0
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def coeff_variation(x: Sequence[float]) -> float:
    """Sample standard deviation over the mean."""
    x = _require(x, 2)
    m = _mean(x)
    if m == 0.0:
        raise StatsError("coefficient of variation undefined for zero mean")
    return math.sqrt(_var(x)) / abs(m)


# --- engine comparison protocol -------------------------------------------------

def is_normal(x: Sequence[float], alpha: float = 0.05) -> bool:
    """Shapiro-Wilk verdict; constant samples are treated as non-normal."""
    x = list(x)
    if len(x) < 3 or max(x) == min(x):
        return False
    return shapiro_wilk(x).p_value >= alpha


def compare_samples(a: Sequence[float], b: Sequence[float], alpha: float = 0.05,
                    threshold: Optional[float] = None) -> dict:
    """Welch when both samples look normal, otherwise Mann-Whitney; Cohen's d either way."""
    a, b = list(a), list(b)
    normal_a, normal_b = is_normal(a, alpha), is_normal(b, alpha)
    if normal_a and normal_b:
        res = welch_t(a, b)
    else:
        res = mann_whitney_u(a, b)
    try:
        d = cohens_d(a, b)
    except StatsError:
        d = 0.0
    thr = alpha if threshold is None else threshold
    return {
        "test": res.test, "statistic": res.statistic, "p_value": res.p_value,
        "effect_size": res.effect_size, "effect_name": res.effect_name,
        "cohens_d": d, "normal_a": normal_a, "normal_b": normal_b,
        "significant": res.p_value < thr,
    }


# --- frozen oracle fixtures ----------------------------------------------------

STAT_TOL = 1e-6
P_TOL = 1e-3


def load_fixtures(path=None) -> dict:
    import json
    if path is None:
        from importlib.resources import files
        return json.loads(files("ztbench").joinpath("data/stats_fixtures.json").read_text())
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def run_fixture_suite(path=None) -> list:
    """Check every frozen case; returns ``(case, check, ok, stat_err, p_err)`` rows."""
    rows = []
    for case in load_fixtures(path)["cases"]:
        a, b = case["a"], case["b"]
        checks = [
            ("shapiro_a", shapiro_wilk(a), case["shapiro_a"]),
            ("shapiro_b", shapiro_wilk(b), case["shapiro_b"]),
            ("welch", welch_t(a, b), case["welch"]),
            ("mann_whitney", mann_whitney_u(a, b), case["mann_whitney"]),
        ]
        for label, got, (stat, p) in checks:
            se = abs(got.statistic - stat)
            pe = abs(got.p_value - p)
            rows.append((case["name"], label, se <= STAT_TOL and pe <= P_TOL, se, pe))
        k = min(len(a), len(b))
        re = abs(pearson_r(a[:k], b[:k]) - case["pearson"])
        rows.append((case["name"], "pearson", re <= STAT_TOL, re, 0.0))
    return rows
