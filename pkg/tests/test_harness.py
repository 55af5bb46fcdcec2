import math

import numpy as np
import pytest

from ztbench.config import RunConfig, config_from_dict, config_to_dict, load_config
from ztbench.harness import (compare_empirical, compare_engines, metric_params, monte_carlo,
                             oracle_check, run_engines, run_once, sensitivity_ofat, summarize,
                             thread_cap)
from ztbench.metrics import SCALARS
from ztbench.report import dumps
from ztbench.stats import StatsError
from ztbench.trust import ConfigError

SMALL = RunConfig(runs=4, events_per_run=800)


def test_run_once_deterministic():
    a, _ = run_once(SMALL, 0, "baseline")
    b, _ = run_once(SMALL, 0, "baseline")
    assert a == b


def test_zero_events_rejected():
    with pytest.raises(ConfigError):
        RunConfig(events_per_run=0)
    with pytest.raises(ConfigError):
        RunConfig(runs=0)


def test_run_index_range():
    with pytest.raises(ConfigError):
        run_once(SMALL, 4, "baseline")


def test_paired_streams():
    res = run_engines(SMALL, 1)
    lb, ls = res["baseline"][1], res["securebank"][1]
    assert lb.stream is ls.stream or lb.stream.content_equal(ls.stream)
    assert np.array_equal(lb.stream.attack, ls.stream.attack)
    assert len(lb) == 800


def test_oracle_agrees_on_small_runs():
    for i in range(SMALL.runs):
        for m, log in run_engines(SMALL, i).values():
            assert oracle_check(log, m, metric_params(SMALL)) == []


def test_single_run_std_zero():
    rep = monte_carlo(RunConfig(runs=1, events_per_run=500), threads=1)
    for e in rep.engines:
        for k in SCALARS:
            s = rep.summary[e][k]
            if s["n"]:
                assert s["std"] == 0.0


def test_report_cardinality_and_means():
    rep = monte_carlo(SMALL, threads=1)
    for e in rep.engines:
        assert len(rep.runs[e]) == SMALL.runs
        vals = rep.values(e, "tii")
        assert abs(rep.summary[e]["tii"]["mean"] - sum(vals) / len(vals)) <= 1e-12
        sd = float(np.std(vals, ddof=1))
        assert abs(rep.summary[e]["tii"]["std"] - sd) <= 1e-12


def test_summarize():
    s = summarize([1.0, 2.0, 3.0])
    assert s == {"n": 3, "mean": 2.0, "std": 1.0, "min": 1.0, "max": 3.0}
    assert summarize([None])["mean"] is None


def test_parallel_equals_serial():
    serial = monte_carlo(SMALL, threads=1)
    par = monte_carlo(SMALL, threads=2)
    assert dumps(serial.to_dict()) == dumps(par.to_dict())


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("ZTBENCH_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("ZTBENCH_THREADS", "zero")
    with pytest.raises(ConfigError):
        thread_cap()


def test_compare_engines_shape():
    rep = monte_carlo(SMALL, threads=1)
    out = compare_engines(rep)
    assert set(out["tests"]) == {"tii", "sae", "ital"}
    assert round(out["bonferroni_threshold"], 6) == 0.016667
    for t in out["tests"].values():
        assert 0.0 <= t["p_value"] <= 1.0


# --- sensitivity -----------------------------------------------------------------------

def test_sensitivity_identical_grid_cv_zero():
    rep = sensitivity_ofat(RunConfig(runs=2, events_per_run=300),
                           {"eta_identity": [0.15, 0.15]}, threads=1)
    for e, cvs in rep.cv["eta_identity"].items():
        for k, cv in cvs.items():
            assert cv in (0.0, None)
    assert rep.cv["eta_identity"]["securebank"]["tii"] == 0.0


def test_sensitivity_varies():
    rep = sensitivity_ofat(RunConfig(runs=2, events_per_run=400),
                           {"attack_probability": [0.02, 0.2]}, threads=1)
    for e in ("baseline", "securebank"):
        assert rep.cv["attack_probability"][e]["tii"] > 0
    assert len(rep.parameters["attack_probability"]) == 2


def test_sensitivity_errors():
    with pytest.raises(ConfigError):
        sensitivity_ofat(SMALL, {})
    with pytest.raises(ConfigError, match="unknown"):
        sensitivity_ofat(SMALL, {"warp_factor": [1, 2]})


# --- empirical comparison ------------------------------------------------------------------

def test_compare_empirical_examples():
    sim = {"baseline": {"tii": 0.9, "sae": 0.1, "ital": 0.0},
           "securebank": {"tii": 0.8, "sae": 0.4, "ital": 0.05}}
    same = compare_empirical(sim, sim)
    assert same["pearson_r"] == 1.0
    assert all(v["abs_error"] == 0 for e in same["errors"].values() for v in e.values())
    anti = {e: {k: -v for k, v in m.items()} for e, m in sim.items()}
    assert compare_empirical(sim, anti)["pearson_r"] == pytest.approx(-1.0, abs=1e-12)
    x = {"baseline": {"tii": 1.0, "sae": 2.0, "ital": 3.0}}
    y = {"baseline": {"tii": 2.0, "sae": 4.0, "ital": 6.0}}
    assert compare_empirical(x, y)["pearson_r"] == pytest.approx(1.0, abs=1e-12)


def test_compare_empirical_too_few_points():
    with pytest.raises(StatsError, match="correlation undefined"):
        compare_empirical({"b": {"tii": 1.0}}, {"b": {"tii": 2.0}})
    with pytest.raises(ConfigError):
        compare_empirical({"a": {"tii": 1.0}}, {"b": {"tii": 1.0}})


# --- config -----------------------------------------------------------------------------

def test_config_round_trip(tmp_path):
    cfg = RunConfig(runs=3, events_per_run=10)
    assert config_from_dict(config_to_dict(cfg)) == cfg
    p = tmp_path / "c.json"
    p.write_text('{"run": {"runs": 5}, "policy": {"theta_stepup": 0.65}}')
    loaded = load_config(str(p), events_per_run=77)
    assert loaded.runs == 5 and loaded.events_per_run == 77
    assert loaded.policy.theta_stepup == 0.65


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        config_from_dict({"run": {"laps": 3}})
    with pytest.raises(ConfigError):
        config_from_dict({"policy": {"theta_stepup": 0.2}})
