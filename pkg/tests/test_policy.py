import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_event
from ztbench import kernels
from ztbench.metrics import Action
from ztbench.policy import (BaselineRules, EngineState, PolicyConfig, autonomy_gate,
                            baseline_decide, run_stream, securebank_decide, select_runbook)
from ztbench.scenarios import GeneratorConfig, generate_stream
from ztbench.trust import ConfigError, EntityId, EntityKind, TrustState

CFG = PolicyConfig()
RULES = BaselineRules()


def trust_with(i, d, c):
    ts = TrustState()
    ts.set(EntityId(EntityKind.USER, 0), i)
    ts.set(EntityId(EntityKind.DEVICE, 0), d)
    ts.set(EntityId(EntityKind.CONTEXT, 0), c)
    return ts


def decide(ev, ts, config=CFG):
    return securebank_decide(ev, ts, config, EngineState.for_services([1.0]))


# --- baseline ----------------------------------------------------------------------

def test_baseline_examples():
    assert baseline_decide(make_event(amount=10, region=3), RULES).action == Action.ALLOW
    r = baseline_decide(make_event(amount=20000, region=3), RULES)
    assert r.action == Action.BLOCK and r.automated
    assert baseline_decide(make_event(amount=5, region=14), RULES).action == Action.BLOCK


def test_baseline_block_precedes_stepup():
    rules = BaselineRules(stepup_rules=frozenset({(0, 14), (0, 3)}))
    assert baseline_decide(make_event(region=14), rules).action == Action.BLOCK
    r = baseline_decide(make_event(region=3), rules)
    assert r.action == Action.STEP_UP and not r.automated


def test_baseline_trust_freeze():
    stream = generate_stream(GeneratorConfig(n_users=20, n_devices=30), 3, 400)
    ts = TrustState(prior=0.8)
    log = run_stream("baseline", stream, CFG, RULES, GeneratorConfig().service_weights, trust=ts)
    assert np.all(ts.identity == 0.8) and np.all(ts.device == 0.8) and np.all(ts.context == 0.8)
    assert np.array_equal(log.identity_before, log.identity_after)


# --- securebank ----------------------------------------------------------------------

def test_securebank_examples():
    assert decide(make_event(risk=0.1), trust_with(0.9, 0.9, 0.9)).action == Action.ALLOW
    r = decide(make_event(amount=0.0, risk=0.5), trust_with(0.5, 0.5, 0.5))
    assert r.band == 1 and 0.4 <= r.theta < 0.6 and r.action == Action.STEP_UP
    r = decide(make_event(amount=5000, risk=0.3, s=(1.0, 0, 0)), trust_with(0.7, 0.7, 0.7))
    assert r.band == 4 and r.theta == pytest.approx(0.7) and r.action == Action.BLOCK


def test_securebank_band3_escalates():
    # L = 0.5 -> 0.25, peak 0.5 -> 0.15, E -> 0.2: FTS 0.6, band 3
    r = decide(make_event(amount=2500, risk=0.1, s=(0.5, 0, 0)), trust_with(0.9, 0.9, 0.9))
    assert r.band == 3 and r.action == Action.STEP_UP


def test_securebank_updates_trust():
    ts = trust_with(0.8, 0.8, 0.8)
    r = decide(make_event(s=(1.0, 0.5, 0.0)), ts)
    assert r.identity_before == 0.8
    assert r.identity_after == pytest.approx(0.85 * 0.8)
    assert ts.get(EntityId(EntityKind.DEVICE, 0)) == pytest.approx(0.9 * 0.8 + 0.1 * 0.5)
    assert ts.get(EntityId(EntityKind.CONTEXT, 0)) == pytest.approx(0.9 * 0.8 + 0.1)


def test_securebank_missing_config():
    with pytest.raises(ConfigError):
        securebank_decide(make_event(), TrustState(), None, EngineState.for_services([1.0]))


def test_securebank_deterministic():
    ev = make_event(amount=700, risk=0.4, s=(0.3, 0.2, 0.6))
    a = decide(ev, trust_with(0.6, 0.7, 0.5))
    b = decide(ev, trust_with(0.6, 0.7, 0.5))
    assert a == b


def test_lock_after_automated_top_band_block():
    state = EngineState.for_services([1.0])
    ts = TrustState()
    cfg = PolicyConfig(lock_events=2)
    hot = make_event(t=0, amount=5000, s=(1.0, 0, 0), attack=0)
    assert securebank_decide(hot, ts, cfg, state).action == Action.BLOCK
    assert state.locks[0] == 2
    calm = [make_event(t=k, risk=0.0) for k in (1, 2, 3)]
    recs = [securebank_decide(e, ts, cfg, state) for e in calm]
    assert [r.action for r in recs[:2]] == [Action.BLOCK, Action.BLOCK]
    assert all(r.confirmed_correct is None for r in recs[:2])
    assert state.acf_total == 1


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
       st.floats(0, 6000), st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)),
       st.integers(0, 3), st.floats(0, 1))
def test_action_monotone(i, d, c, r, amount, s, which, delta):
    vals = [i, d, c, r]
    worse = list(vals)
    if which == 3:
        worse[3] = min(1.0, r + delta)
    else:
        worse[which] = max(0.0, vals[which] - delta)
    a = decide(make_event(amount=amount, risk=vals[3], s=s), trust_with(*vals[:3])).action
    b = decide(make_event(amount=amount, risk=worse[3], s=s), trust_with(*worse[:3])).action
    assert b >= a


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_top_band_always_blocks(i, d, c, r, s):
    ev = make_event(amount=5000, risk=r, s=(max(s, 0.9), 0, 0))
    assert decide(ev, trust_with(i, d, c)).action == Action.BLOCK


def test_service_override_thresholds():
    cfg = PolicyConfig(service_overrides={0: (0.1, 0.2)})
    r = decide(make_event(amount=0.0, risk=0.5), trust_with(0.5, 0.5, 0.5), cfg)
    assert r.action == Action.ALLOW


def test_policy_config_validation():
    with pytest.raises(ConfigError):
        PolicyConfig(theta_block=0.7, theta_stepup=0.6)
    with pytest.raises(ConfigError):
        PolicyConfig(fts_weights=(0.5, 0.5, 0.5))
    with pytest.raises(ConfigError):
        PolicyConfig(band_thresholds=(0.5, 0.4, 0.9))
    with pytest.raises(ConfigError):
        BaselineRules(amount_limit=0)


# --- runbooks and gate ---------------------------------------------------------------

def test_select_runbook():
    assert select_runbook(1).actions == ("log_only",)
    assert select_runbook(2).actions == ("enhanced_monitoring", "step_up_auth")
    assert select_runbook(3).actions == ("transaction_hold", "session_terminate")
    assert select_runbook(4).actions == ("account_lock", "regulatory_notify", "ticket_create")
    with pytest.raises(ValueError):
        select_runbook(5)
    with pytest.raises(ValueError):
        select_runbook(0)


def test_runbook_total_for_any_band_count():
    for k in range(2, 8):
        for b in range(1, k + 1):
            assert select_runbook(b, k).actions


def test_autonomy_gate():
    assert autonomy_gate(0.95, 4, 0.9)
    assert not autonomy_gate(0.5, 4, 0.9)
    assert autonomy_gate(0.0, 1, 0.9)
    assert autonomy_gate(0.0, 2, 0.9)


def test_running_acf_prior():
    st_ = EngineState.for_services([1.0])
    assert st_.running_acf() == 1.0
    st_.acf_total, st_.acf_confirmed = 10, 0
    assert st_.running_acf() == 0.0
    assert st_.running_acf(10.0) == 0.5


# --- kernel route ---------------------------------------------------------------------

def _stream(seed=11, n=3000):
    return generate_stream(GeneratorConfig(), seed, n)


FIELDS = ("action", "theta", "fts", "band", "automated", "confirmed", "identity_before",
          "identity_after", "challenge_passed", "locked")


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernel not built")
@pytest.mark.parametrize("engine", ["baseline", "securebank"])
def test_cython_matches_python(engine):
    s = _stream()
    w = GeneratorConfig().service_weights
    a = run_stream(engine, s, CFG, RULES, w, backend="cython")
    b = run_stream(engine, s, CFG, RULES, w, backend="python")
    for f in FIELDS:
        assert np.array_equal(getattr(a, f), getattr(b, f)), f
    for k in a.accumulators:
        assert np.all(np.asarray(a.accumulators[k]) == np.asarray(b.accumulators[k])), k


@pytest.mark.parametrize("engine", ["baseline", "securebank"])
def test_kernel_matches_reference_decide(engine):
    s = _stream(5, 2000)
    w = GeneratorConfig().service_weights
    log = run_stream(engine, s, CFG, RULES, w)
    ts = TrustState(prior=CFG.prior)
    state = EngineState.for_services(w)
    for i, ev in enumerate(s):
        if engine == "securebank":
            r = securebank_decide(ev, ts, CFG, state)
        else:
            r = baseline_decide(ev, RULES, ts, CFG, state)
        k = log.record(i)
        assert r.action == k.action and r.band == k.band and r.automated == k.automated
        assert r.confirmed_correct == k.confirmed_correct
        assert r.theta == pytest.approx(k.theta, abs=1e-12)
        assert r.identity_after == pytest.approx(k.identity_after, abs=1e-12)
        assert r.challenge_passed == k.challenge_passed


def test_run_stream_rejects_unknown_engine():
    with pytest.raises(ValueError):
        run_stream("nope", _stream(1, 10), CFG, RULES, (1.0,) * 5)


def test_pure_python_env_selects_fallback():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-c", "from ztbench import kernels; print(kernels.BACKEND)"],
                         env={"ZTBENCH_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
