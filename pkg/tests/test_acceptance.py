"""Acceptance criteria, each at its stated tolerance.

Every test prints exactly one ``ACCEPTANCE <n> PASS|FAIL`` line (visible with
``pytest -v`` or ``-s``) before asserting.
"""
import io
import json
import math
import time
from statistics import median

import numpy as np
import pytest

from ztbench import stats
from ztbench.cli import main
from ztbench.config import RunConfig
from ztbench.harness import compare_empirical, compare_engines, monte_carlo
from ztbench.metrics import Action
from ztbench.policy import EngineState, PolicyConfig, securebank_decide
from ztbench.scenarios import (DatasetCalibration, GeneratorConfig, calibration_summary,
                               generate_stream, read_dataset)
from ztbench.trust import (EntityId, EntityKind, TrustState, TrustWeights, composite_trust,
                           update_trust)

from conftest import make_event

# reference aggregate values (30 runs, mean) reported for the original system
REFERENCE = {"tii": (0.9408, 0.6493), "sae": (0.0064, 0.4337), "ital": (0.0013, 0.0576)}
N_CASES = 10_000
MC_ARGS = ["monte-carlo", "--runs", "30", "--events", "5000", "--seed", "42", "-q"]


@pytest.fixture
def verdict(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return _report


@pytest.fixture(scope="module")
def oracle_report():
    return monte_carlo(RunConfig(), oracle=True)


@pytest.fixture(scope="module")
def cli_bundles(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    timings = {}
    for name, extra in (("serial_a", ["--threads", "1"]), ("serial_b", ["--threads", "1"]),
                        ("parallel", ["--threads", "4"])):
        d = root / name
        t0 = time.perf_counter()
        code = main(MC_ARGS + ["--out-dir", str(d)] + extra)
        timings[name] = time.perf_counter() - t0
        assert code == 0
    return root, timings


def test_criterion_1_directional(oracle_report, cli_bundles, verdict):
    rep = oracle_report
    tests = compare_engines(rep)["tests"]
    m = {k: (rep.mean("baseline", k), rep.mean("securebank", k)) for k in ("tii", "sae", "ital")}
    checks = [
        m["sae"][1] >= 10 * m["sae"][0],
        m["ital"][1] >= 5 * m["ital"][0],
        m["tii"][1] < m["tii"][0],
    ]
    for k in ("tii", "sae", "ital"):
        t = tests[k]
        checks += [t["p_value"] < 0.001, t["p_value"] < 0.0167, t["significant"]]
    checks += [abs(tests["sae"]["cohens_d"]) > 2.0, abs(tests["ital"]["cohens_d"]) > 2.0]
    runtime = cli_bundles[1]["serial_a"]
    checks.append(runtime <= 300.0)
    detail = "; ".join(
        f"{k.upper()} base={m[k][0]:.4f} sb={m[k][1]:.4f} (ref {REFERENCE[k][0]}->{REFERENCE[k][1]}) "
        f"{tests[k]['test']} p={tests[k]['p_value']:.2e} d={tests[k]['cohens_d']:.2f}"
        for k in ("tii", "sae", "ital")) + f"; serial runtime {runtime:.1f}s"
    verdict(1, all(checks), detail)


def test_criterion_2_metric_oracle(oracle_report, verdict):
    problems = oracle_report.oracle_problems
    n = sum(len(v) for v in oracle_report.runs.values())
    verdict(2, not problems, f"{n} engine-runs checked against brute force, "
                             f"{sum(len(p) for p in problems.values())} mismatches")


def test_criterion_3_stats_fixtures(verdict):
    rows = stats.run_fixture_suite()
    cases = {r[0] for r in rows}
    bad = [r for r in rows if not r[2]]
    thr = stats.bonferroni_threshold(3, 0.05)
    max_se = max(r[3] for r in rows)
    max_pe = max(r[4] for r in rows)
    ok = not bad and len(cases) >= 10 and round(thr, 6) == 0.016667
    verdict(3, ok, f"{len(rows) - len(bad)}/{len(rows)} checks over {len(cases)} cases, "
                   f"max stat err {max_se:.1e}, max p err {max_pe:.1e}, threshold {thr:.6f}")


def test_criterion_4_determinism(cli_bundles, verdict):
    root, _ = cli_bundles
    same_csv = (root / "serial_a" / "aggregate.csv").read_bytes() == \
        (root / "serial_b" / "aggregate.csv").read_bytes()
    files = ("aggregate.csv", "aggregate.json", "stat_tests.json")
    par = all((root / "serial_a" / f).read_bytes() == (root / "parallel" / f).read_bytes()
              for f in files)
    man_a = json.loads((root / "serial_a" / "manifest.json").read_text())
    man_p = json.loads((root / "parallel" / "manifest.json").read_text())
    hashes = man_a["files"] == man_p["files"]
    verdict(4, same_csv and par and hashes,
            f"repeat aggregate.csv identical={same_csv}; parallel==serial bundle={par and hashes}")


def test_criterion_5_dataset(tmp_path, verdict):
    out = tmp_path / "synthetic_10k.csv"
    assert main(["gen-dataset", "--n", "10000", "--seed", "7", "--out", str(out), "-q"]) == 0
    recs = [r for _, r in read_dataset(str(out))]
    s = calibration_summary(recs)
    shares = DatasetCalibration().scenario_share
    class_ok = all(abs(s["scenarios"].get(k, 0) - 350 * v) <= 1 for k, v in shares.items())
    mean_ok = abs(s["amount_mean"] - 352.07) <= 0.1 * 352.07
    med_ok = abs(s["amount_median"] - 94.22) <= 0.1 * 94.22
    ok = s["fraud"] == 350 and len(recs) == 10000 and class_ok and mean_ok and med_ok
    verdict(5, ok, f"fraud={s['fraud']} classes={s['scenarios']} mean={s['amount_mean']:.2f} "
                   f"median={s['amount_median']:.2f}")


def test_criterion_6_empirical(tmp_path, cli_bundles, verdict):
    root, _ = cli_bundles
    data = tmp_path / "d.csv"
    assert main(["gen-dataset", "--n", "10000", "--seed", "7", "--out", str(data), "-q"]) == 0
    out = tmp_path / "emp"
    assert main(["empirical", "--dataset", str(data), "--sim",
                 str(root / "serial_a" / "aggregate.json"), "--out-dir", str(out), "-q"]) == 0
    emp = json.loads((out / "empirical.json").read_text())
    b, s = emp["metrics"]["baseline"], emp["metrics"]["securebank"]
    order = s["sae"] > b["sae"] and s["ital"] > b["ital"] and s["tii"] < b["tii"]
    self_r = compare_empirical(emp["metrics"], emp["metrics"])["pearson_r"]
    r = emp["comparison"]["pearson_r"]
    verdict(6, order and self_r == 1.0 and -1.0 <= r <= 1.0,
            f"TII {b['tii']:.4f}->{s['tii']:.4f}, SAE {b['sae']:.4f}->{s['sae']:.4f}, "
            f"ITAL {b['ital']:.4f}->{s['ital']:.4f}; r(sim, emp)={r:.4f}; self r={self_r}")


def test_criterion_7_latency(verdict):
    events = []
    seed = 0
    while len(events) < 100_000:
        events.extend(generate_stream(GeneratorConfig(), 1000 + seed, 25_000))
        seed += 1
    cfg = PolicyConfig()
    trust = TrustState()
    state = EngineState.for_services(GeneratorConfig().service_weights)
    t0 = time.perf_counter()
    for ev in events:
        securebank_decide(ev, trust, cfg, state)
    per = (time.perf_counter() - t0) / len(events)
    verdict(7, per < 1e-3, f"{per * 1e3:.4f} ms per decision over {len(events)} decisions")


def _trust(i, d, c):
    ts = TrustState()
    ts.set(EntityId(EntityKind.USER, 0), i)
    ts.set(EntityId(EntityKind.DEVICE, 0), d)
    ts.set(EntityId(EntityKind.CONTEXT, 0), c)
    return ts


def test_criterion_8_trust_properties(verdict):
    rng = np.random.default_rng(2024)
    w = TrustWeights()
    cfg = PolicyConfig()
    fails = {"range": 0, "convergence": 0, "theta_monotone": 0, "action_monotone": 0}

    for _ in range(N_CASES):
        x, s, eta = rng.random(), rng.random(), rng.uniform(1e-6, 1.0)
        v = update_trust(x, s, eta)
        scores = rng.random(4)
        th = composite_trust(w, *scores)
        if not (0.0 <= v <= 1.0 and -1e-12 <= th <= 1.0 + 1e-12):
            fails["range"] += 1

    for _ in range(N_CASES):
        x, eta = rng.random(), rng.uniform(1e-3, 1.0)
        s = float(rng.integers(0, 2))
        limit = 1.0 - s
        prev = x
        for _ in range(5):
            nxt = update_trust(prev, s, eta)
            if abs(abs(nxt - limit) - (1 - eta) * abs(prev - limit)) > 1e-12:
                fails["convergence"] += 1
                break
            prev = nxt

    for _ in range(N_CASES):
        scores = rng.random(4)
        k = int(rng.integers(0, 4))
        worse = scores.copy()
        worse[k] = rng.uniform(scores[k], 1.0) if k == 2 else rng.uniform(0.0, scores[k])
        if composite_trust(w, *worse) > composite_trust(w, *scores):
            fails["theta_monotone"] += 1

    for _ in range(N_CASES):
        i, d, c, r = rng.random(4)
        amount = float(rng.uniform(0, 6000))
        sig = tuple(rng.random(3))
        k = int(rng.integers(0, 4))
        vals = [i, d, c, r]
        worse = list(vals)
        worse[k] = rng.uniform(vals[k], 1.0) if k == 3 else rng.uniform(0.0, vals[k])
        ev_a = make_event(amount=amount, risk=vals[3], s=sig)
        ev_b = make_event(amount=amount, risk=worse[3], s=sig)
        a = securebank_decide(ev_a, _trust(*vals[:3]), cfg, EngineState.for_services([1.0])).action
        b = securebank_decide(ev_b, _trust(*worse[:3]), cfg, EngineState.for_services([1.0])).action
        if b < a:
            fails["action_monotone"] += 1

    verdict(8, not any(fails.values()),
            f"{N_CASES} cases per property; failures {fails}")
