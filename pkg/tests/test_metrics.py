import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ztbench.events import ScenarioKind
from ztbench.metrics import (Action, DecisionRecord, ServiceCounts, acf, ass, confusion_from_counts,
                             confusion_metrics, delta_identity, fts, ital, risk_band, sae,
                             sae_star, tii, trp)
from ztbench.trust import ConfigError

TAU = (0.25, 0.5, 0.75)


def rec(action, attack=False, t=0):
    return DecisionRecord(time_index=t, user=0, device=0, service=0,
                          scenario=ScenarioKind.CREDENTIAL_COMPROMISE if attack else None,
                          action=Action(action), theta=0.5, fts=0.1, band=1, automated=False)


@pytest.mark.parametrize("a,b,want", [(0.8, 0.4, 0.5), (0.7, 0.7, 0.0), (0.0, 0.0, 0.0)])
def test_delta_identity(a, b, want):
    assert delta_identity(a, b, 1e-6) == pytest.approx(want, abs=1e-15)


def test_ital_examples():
    traj = {0: [(0, 0.8), (1, 0.6), (2, 0.4)]}
    assert ital(traj, [(0, 0)], window_len=3) == pytest.approx(0.5)
    assert ital(traj, [], window_len=3) == 0.0
    two = {0: [(0, 0.8), (1, 0.4)], 1: [(0, 1.0), (1, 0.9)]}
    assert ital(two, [(0, 0), (1, 0)], window_len=2) == pytest.approx(0.3)
    with pytest.raises(ValueError, match="no trajectories"):
        ital({}, [])
    with pytest.raises(ValueError):
        ital(traj, [], window_len=1)


def test_ital_window_truncates_at_end():
    traj = {0: [(0, 1.0), (1, 0.9), (2, 0.5)]}
    # window of 10 truncated to the last point
    assert ital(traj, [(0, 1)], window_len=10) == pytest.approx((0.9 - 0.5) / 0.9)


def test_tii_examples():
    assert tii([ServiceCounts(10, 10, 1)]) == 1.0
    assert tii([ServiceCounts(10, 10, 1), ServiceCounts(5, 10, 2)]) == pytest.approx(2 / 3)
    assert tii([ServiceCounts(0, 10, 1), ServiceCounts(0, 3, 2)]) == 0.0
    with pytest.raises(ValueError, match="no transactions"):
        tii([ServiceCounts(0, 0, 1)])
    with pytest.raises(ValueError):
        ServiceCounts(5, 4)


def test_sae_acf_star():
    assert sae(100, 43) == 0.43
    assert sae(100, 0) == 0.0 and sae(0, 0) == 0.0
    with pytest.raises(ValueError):
        sae(1, 2)
    assert acf(50, 45) == pytest.approx(0.9)
    assert acf(50, 50) == 1.0 and acf(0, 0) == 0.0
    with pytest.raises(ValueError):
        acf(1, 2)
    assert sae_star(0.43, 1.0) == 0.43
    assert sae_star(0.43, 0.9) == pytest.approx(0.387)
    assert sae_star(0.0, 0.7) == 0.0


def test_fts_examples():
    assert fts(0, 0, 0) == 0.0
    assert fts(1, 1, 1) == pytest.approx(1.0)
    assert fts(0.4, 0.5, 0.3) == pytest.approx(0.41)
    with pytest.raises(ConfigError):
        fts(0.1, 0.1, 0.1, 0.5, 0.5, 0.5)


def test_risk_band_examples_and_boundaries():
    assert risk_band(0.0, TAU) == 1
    assert risk_band(0.41, TAU) == 2
    assert risk_band(0.75, TAU) == 4
    for k, tau in enumerate(TAU, start=2):
        assert risk_band(tau, TAU) == k
        assert risk_band(tau - 1e-12, TAU) == k - 1
    assert risk_band(1.0, TAU) == 4
    with pytest.raises(ConfigError):
        risk_band(0.3, (0.5, 0.25))


def test_trp_ass():
    assert trp(1000, 0.2, 100) == pytest.approx(2.0)
    assert trp(0, 0.7, 3) == 0.0
    assert trp(500, 1.0, 500) == 1.0
    with pytest.raises(ValueError):
        trp(1, 1, 0)
    assert ass(5, 5) == 1.0 and ass(0, 5) == 0.0 and ass(3, 5) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        ass(6, 5)


def test_confusion_examples():
    perfect = [rec(Action.BLOCK, True), rec(Action.ALLOW), rec(Action.ALLOW)]
    c = confusion_metrics(perfect)
    assert (c.precision, c.recall, c.f1) == (1.0, 1.0, 1.0)
    none_flagged = [rec(Action.ALLOW, True), rec(Action.ALLOW)]
    c = confusion_metrics(none_flagged)
    assert c.recall == 0.0 and c.precision is None
    c = confusion_from_counts(tp=5, fp=15, tn=0, fn=5)
    assert c.precision == 0.25 and c.recall == 0.5
    assert c.f1 == pytest.approx(1 / 3, abs=1e-12)
    with pytest.raises(ValueError):
        confusion_metrics([])


# --- properties --------------------------------------------------------------------

counts = st.tuples(st.integers(0, 50), st.integers(0, 50), st.floats(0.1, 5.0))


@settings(max_examples=300, deadline=None)
@given(st.lists(counts, min_size=1, max_size=6))
def test_tii_range_and_equal_weights(cs):
    sc = [ServiceCounts(min(a, b), max(a, b), w) for a, b, w in cs]
    if sum(c.n_total for c in sc) == 0:
        return
    assert 0.0 <= tii(sc) <= 1.0
    eq = [ServiceCounts(c.n_valid, c.n_total, 1.0) for c in sc]
    assert tii(eq) == sum(c.n_valid for c in sc) / sum(c.n_total for c in sc)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 1000))
def test_ratio_range(a, b):
    lo, hi = sorted((a, b))
    assert 0.0 <= sae(hi, lo) <= 1.0
    assert 0.0 <= acf(hi, lo) <= 1.0


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_fts_range_and_band_total(l, p, e):
    f = fts(l, p, e)
    assert 0.0 <= f <= 1.0 + 1e-12
    assert risk_band(f, TAU) in (1, 2, 3, 4)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 200), st.integers(0, 200), st.integers(0, 200), st.integers(0, 200))
def test_f1_harmonic(tp, fp, tn, fn):
    c = confusion_from_counts(tp, fp, tn, fn)
    if c.precision is not None and c.recall is not None and c.precision + c.recall > 0:
        assert abs(c.f1 - 2 * c.precision * c.recall / (c.precision + c.recall)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=20), st.integers(-1000, 1000),
       st.integers(2, 12))
def test_ital_time_shift_invariant(scores, shift, w):
    traj = {3: [(t, s) for t, s in enumerate(scores)]}
    moved = {3: [(t + shift, s) for t, s in enumerate(scores)]}
    attacks = [(3, t) for t in range(0, len(scores), 2)]
    assert ital(traj, attacks, w) == ital(moved, [(u, t + shift) for u, t in attacks], w)
