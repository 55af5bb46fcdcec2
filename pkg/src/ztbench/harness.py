"""Single runs, Monte Carlo batches, OFAT sensitivity, and empirical comparison.

Run ``i`` draws ``events_per_run`` events from a generator seeded with
``base_seed + i``; every selected engine sees that identical stream. The
``n_events``/``base_seed`` fields of ``GeneratorConfig`` are superseded by the
run-level values.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

from . import stats
from .config import RunConfig
from .metrics import HEADLINE, SCALARS, MetricParams, RunMetrics, brute_force_metrics, run_metrics
from .policy import DecisionLog, run_stream
from .scenarios import generate_stream
from .trust import ConfigError


def metric_params(config: RunConfig) -> MetricParams:
    g = config.generator
    return MetricParams(service_weights=g.service_weights, service_names=g.service_names,
                        window_len=config.policy.ital_window,
                        epsilon=config.policy.adaptation.epsilon)


def run_engines(config: RunConfig, run_index: int, engines: Optional[Sequence[str]] = None,
                backend: Optional[str] = None) -> dict:
    """Paired run: ``{engine: (RunMetrics, DecisionLog)}`` over one shared stream."""
    if not 0 <= run_index < config.runs:
        raise ConfigError(f"run_index {run_index} outside [0, {config.runs})")
    g = config.generator
    stream = generate_stream(g, config.seed_for(run_index), config.events_per_run)
    params = metric_params(config)
    out = {}
    for engine in engines or config.engines:
        log = run_stream(engine, stream, config.policy, config.baseline_rules,
                         g.service_weights, g.challenge_pass_legit, g.challenge_pass_attacker,
                         backend=backend)
        out[engine] = (run_metrics(log, params), log)
    return out


def run_once(config: RunConfig, run_index: int, engine: str,
             backend: Optional[str] = None) -> tuple:
    """``(RunMetrics, DecisionLog)`` of one engine on run ``run_index``."""
    return run_engines(config, run_index, (engine,), backend)[engine]


def oracle_check(log: DecisionLog, metrics: RunMetrics, params: MetricParams) -> list:
    """Mismatches between streaming metrics and a brute-force pass over the records."""
    bf = brute_force_metrics(log.records(), params, len(log.stream))
    c = metrics.counts
    problems = []
    for key in ("incidents", "auto_handled", "acf_total", "acf_confirmed", "ital_windows"):
        if bf[key] != c[key]:
            problems.append(f"{key}: streaming {c[key]} != oracle {bf[key]}")
    acc = log.accumulators
    for s, n in bf["service_total"].items():
        if int(acc["service_total"][s]) != n or int(acc["service_valid"][s]) != bf["service_valid"].get(s, 0):
            problems.append(f"service {s} counts differ")
    for key in ("tii", "sae", "sae_star", "ital", "acf"):
        if abs(getattr(metrics, key) - bf[key]) > 1e-12:
            problems.append(f"{key}: streaming {getattr(metrics, key)!r} != oracle {bf[key]!r}")
    return problems


def _worker(args) -> tuple:
    config, run_index, check = args
    res = run_engines(config, run_index)
    params = metric_params(config)
    out = {}
    for engine, (m, log) in res.items():
        out[engine] = (m, oracle_check(log, m, params) if check else None)
    return run_index, out


def thread_cap() -> int:
    env = os.environ.get("ZTBENCH_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"ZTBENCH_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("ZTBENCH_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


# --- aggregation ---------------------------------------------------------------------

def summarize(values: Sequence[float]) -> dict:
    """mean, sample std (0 for a single run), min, max over the non-missing values."""
    v = [x for x in values if x is not None]
    if not v:
        return {"n": 0, "mean": None, "std": None, "min": None, "max": None}
    mean = math.fsum(v) / len(v)
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in v) / (len(v) - 1)) if len(v) > 1 else 0.0
    return {"n": len(v), "mean": mean, "std": std, "min": min(v), "max": max(v)}


@dataclass
class AggregateReport:
    engines: tuple
    runs: dict                         # engine -> [RunMetrics] ordered by run index
    seeds: list
    oracle_problems: dict = field(default_factory=dict)

    def values(self, engine: str, metric: str) -> list:
        return [getattr(m, metric) for m in self.runs[engine]]

    @property
    def summary(self) -> dict:
        return {e: {k: summarize(self.values(e, k)) for k in SCALARS} for e in self.engines}

    def mean(self, engine: str, metric: str) -> Optional[float]:
        return summarize(self.values(engine, metric))["mean"]

    @property
    def per_service_tii(self) -> dict:
        out = {}
        for e in self.engines:
            names = sorted({s for m in self.runs[e] for s in m.per_service_tii})
            out[e] = {s: summarize([m.per_service_tii.get(s) for m in self.runs[e]]) for s in names}
        return out

    @property
    def per_scenario(self) -> dict:
        out = {}
        for e in self.engines:
            tot: dict = {}
            for m in self.runs[e]:
                for scen, counts in m.per_scenario.items():
                    slot = tot.setdefault(scen, {})
                    for a, n in counts.items():
                        slot[a] = slot.get(a, 0) + n
            out[e] = {k: tot[k] for k in sorted(tot)}
        return out

    def to_dict(self, include_runs: bool = True) -> dict:
        d = {
            "schema_version": "1",
            "engines": list(self.engines),
            "n_runs": len(self.seeds),
            "seeds": list(self.seeds),
            "summary": self.summary,
            "per_service_tii": self.per_service_tii,
            "per_scenario": self.per_scenario,
        }
        if include_runs:
            d["runs"] = {e: [m.to_dict() for m in self.runs[e]] for e in self.engines}
        return d


def monte_carlo(config: RunConfig, threads: Optional[int] = None,
                oracle: bool = False) -> AggregateReport:
    """All runs of ``config`` for every selected engine, ordered by run index.

    ``threads`` defaults to ``ZTBENCH_THREADS`` (else the core count); the result
    does not depend on it. ``oracle=True`` also recomputes each run's metrics by
    brute force and records any disagreement in ``oracle_problems``.
    """
    n = config.runs
    threads = min(thread_cap() if threads is None else threads, n)
    jobs = [(config, i, oracle) for i in range(n)]
    if threads <= 1:
        results = [_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_worker, jobs))
    results.sort(key=lambda r: r[0])
    runs = {e: [r[1][e][0] for r in results] for e in config.engines}
    problems = {}
    if oracle:
        for idx, res in results:
            for e, (_, p) in res.items():
                if p:
                    problems[f"{e}/{idx}"] = p
    return AggregateReport(engines=config.engines, runs=runs,
                           seeds=[config.seed_for(i) for i in range(n)],
                           oracle_problems=problems)


# --- engine comparison -----------------------------------------------------------------

def compare_engines(report: AggregateReport, metrics: Sequence[str] = HEADLINE,
                    alpha: float = 0.05, family_alpha: float = 0.05) -> dict:
    """Per headline metric: Shapiro-Wilk gate, then Welch or Mann-Whitney, Bonferroni."""
    if set(report.engines) != {"baseline", "securebank"}:
        raise ConfigError("engine comparison needs both baseline and securebank runs")
    threshold = stats.bonferroni_threshold(len(metrics), family_alpha)
    out = {"schema_version": "1", "alpha_normality": alpha, "family_alpha": family_alpha,
           "family_size": len(metrics), "bonferroni_threshold": threshold, "tests": {}}
    for k in metrics:
        base = report.values("baseline", k)
        sb = report.values("securebank", k)
        shap = {}
        for name, sample in (("baseline", base), ("securebank", sb)):
            try:
                r = stats.shapiro_wilk(sample)
                shap[name] = {"w": r.statistic, "p_value": r.p_value}
            except stats.StatsError as exc:
                shap[name] = {"w": None, "p_value": None, "note": str(exc)}
        res = stats.compare_samples(sb, base, alpha=alpha, threshold=threshold)
        res["shapiro"] = shap
        res["mean_baseline"] = math.fsum(base) / len(base)
        res["mean_securebank"] = math.fsum(sb) / len(sb)
        out["tests"][k] = res
    return out


# --- OFAT sensitivity --------------------------------------------------------------------

def _set_eta(field_name):
    def setter(cfg: RunConfig, v) -> RunConfig:
        ad = replace(cfg.policy.adaptation, **{field_name: float(v)})
        return replace(cfg, policy=replace(cfg.policy, adaptation=ad))
    return setter


def _set_policy(field_name, cast=float):
    return lambda cfg, v: replace(cfg, policy=replace(cfg.policy, **{field_name: cast(v)}))


def _set_generator(field_name, cast=float):
    return lambda cfg, v: replace(cfg, generator=replace(cfg.generator, **{field_name: cast(v)}))


PARAMETERS: Mapping[str, Callable] = {
    "eta_identity": _set_eta("eta_identity"),
    "eta_device": _set_eta("eta_device"),
    "eta_context": _set_eta("eta_context"),
    "theta_block": _set_policy("theta_block"),
    "theta_stepup": _set_policy("theta_stepup"),
    "amount_cap": _set_policy("amount_cap"),
    "acf_autonomy_floor": _set_policy("acf_autonomy_floor"),
    "lock_events": _set_policy("lock_events", int),
    "attack_probability": _set_generator("attack_probability"),
}

DEFAULT_GRID = {
    "eta_identity": [0.05, 0.15, 0.30],
    "theta_stepup": [0.5, 0.6, 0.7],
    "attack_probability": [0.02, 0.05, 0.10],
}


@dataclass
class SensitivityReport:
    base_runs: int
    parameters: dict       # name -> [{"value": v, "means": {engine: {metric: mean}}}]
    cv: dict               # name -> {engine: {metric: cv or None}}

    def to_dict(self) -> dict:
        return {"schema_version": "1", "runs_per_point": self.base_runs,
                "parameters": self.parameters, "cv": self.cv}


def sensitivity_ofat(base: RunConfig, grid: Mapping[str, Sequence[float]] = DEFAULT_GRID,
                     runs: Optional[int] = None, metrics: Sequence[str] = HEADLINE,
                     threads: Optional[int] = None) -> SensitivityReport:
    """Vary one parameter at a time from ``base``; CV of each metric's mean across the grid."""
    if not grid:
        raise ConfigError("sensitivity grid is empty")
    for name, values in grid.items():
        if name not in PARAMETERS:
            raise ConfigError(f"unknown sensitivity parameter {name!r}; "
                              f"known: {', '.join(sorted(PARAMETERS))}")
        if not values:
            raise ConfigError(f"no values for sensitivity parameter {name!r}")
    if runs is not None:
        base = replace(base, runs=runs)
    points: dict = {}
    cvs: dict = {}
    for name, values in grid.items():
        rows = []
        for v in values:
            cfg = PARAMETERS[name](base, v)
            rep = monte_carlo(cfg, threads=threads)
            rows.append({"value": v, "means": {
                e: {k: rep.mean(e, k) for k in metrics} for e in cfg.engines}})
        points[name] = rows
        cvs[name] = {}
        for e in base.engines:
            cvs[name][e] = {}
            for k in metrics:
                series = [r["means"][e][k] for r in rows]
                if len(series) < 2 or any(x is None for x in series):
                    cvs[name][e][k] = None
                elif all(x == series[0] for x in series):
                    cvs[name][e][k] = 0.0 if series[0] != 0 else None
                else:
                    try:
                        cvs[name][e][k] = stats.coeff_variation(series)
                    except stats.StatsError:
                        cvs[name][e][k] = None
    return SensitivityReport(base_runs=base.runs, parameters=points, cv=cvs)


# --- simulated vs. empirical ------------------------------------------------------------

def _metric_table(side) -> dict:
    """Accept an AggregateReport (means) or ``{engine: RunMetrics | {metric: value}}``."""
    if isinstance(side, AggregateReport):
        return {e: {k: side.mean(e, k) for k in SCALARS} for e in side.engines}
    out = {}
    for e, m in side.items():
        out[e] = m.to_dict() if isinstance(m, RunMetrics) else dict(m)
    return out


def compare_empirical(sim, empirical, metrics: Sequence[str] = HEADLINE) -> dict:
    """Pearson r over (engine, metric) pairs plus a signed error table."""
    a = _metric_table(sim)
    b = _metric_table(empirical)
    if set(a) != set(b):
        raise ConfigError("simulated and empirical sides report different engines")
    keys = [(e, k) for e in sorted(a) for k in metrics
            if a[e].get(k) is not None and b[e].get(k) is not None]
    if len(keys) < 2:
        raise stats.StatsError("correlation undefined: fewer than 2 paired points")
    x = [a[e][k] for e, k in keys]
    y = [b[e][k] for e, k in keys]
    r = stats.pearson_r(x, y)
    errors = {}
    for (e, k), xs, ys in zip(keys, x, y):
        errors.setdefault(e, {})[k] = {
            "simulated": xs, "empirical": ys, "abs_error": ys - xs,
            "rel_error": (ys - xs) / xs if xs != 0 else None}
    return {"schema_version": "1", "pearson_r": r, "n_points": len(keys),
            "metrics": list(metrics), "errors": errors}


def run_empirical(dataset, config: RunConfig, seed: Optional[int] = None) -> dict:
    """Both engines over an ingested transaction file: ``{engine: RunMetrics}``."""
    from .scenarios import DATASET_SERVICES, ingest_dataset

    gen = replace(config.generator, service_zones=DATASET_SERVICES,
                  amount_cap=config.policy.amount_cap)
    data = ingest_dataset(dataset, DATASET_SERVICES, gen,
                          seed=config.base_seed if seed is None else seed)
    params = MetricParams(service_weights=data.service_weights,
                          service_names=data.service_names,
                          window_len=config.policy.ital_window,
                          epsilon=config.policy.adaptation.epsilon)
    out = {}
    for engine in config.engines:
        log = run_stream(engine, data.stream, config.policy, config.baseline_rules,
                         data.service_weights, gen.challenge_pass_legit,
                         gen.challenge_pass_attacker)
        out[engine] = run_metrics(log, params)
    return out
