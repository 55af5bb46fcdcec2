"""Policy decision points: the static rule baseline and the adaptive SecureBank PDP.

``baseline_decide`` and ``securebank_decide`` are the per-event reference
implementations. :func:`run_stream` pushes a whole :class:`EventStream`
through the compiled (or pure-Python) kernel and returns a columnar
:class:`DecisionLog`; the two routes are checked against each other in the
test suite.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .events import N_CHANNELS, Event, EventStream, ScenarioKind
from .metrics import (Action, DecisionRecord, check_band_thresholds, check_fts_weights,
                      risk_band)
from .trust import (DEFAULT_PRIOR, AdaptationParams, ConfigError, EntityKind, TrustState,
                    TrustWeights, composite_trust, update_trust)

RUNBOOK_ACTIONS = (
    "log_only", "enhanced_monitoring", "step_up_auth", "transaction_hold",
    "account_lock", "session_terminate", "regulatory_notify", "ticket_create",
)

_RUNBOOKS = {
    1: ("log_only",),
    2: ("enhanced_monitoring", "step_up_auth"),
    3: ("transaction_hold", "session_terminate"),
    4: ("account_lock", "regulatory_notify", "ticket_create"),
}


@dataclass(frozen=True)
class RunbookAction:
    band: int
    actions: tuple
    autonomous: bool


def select_runbook(band: int, n_bands: int = 4) -> RunbookAction:
    """Deterministic response template for a risk band.

    With more than four bands the extra middle bands reuse the band-3 template;
    the top band always gets the band-4 template.
    """
    if not (1 <= band <= n_bands):
        raise ValueError(f"band {band} outside [1, {n_bands}]")
    if band == n_bands and n_bands >= 4:
        key = 4
    else:
        key = min(band, 3)
    return RunbookAction(band, _RUNBOOKS[key], autonomous=band <= 2)


def autonomy_gate(running_acf: float, band: int, floor: float) -> bool:
    """Low bands always run autonomously; higher bands need ACF at or above ``floor``."""
    return running_acf >= floor or band <= 2


@dataclass(frozen=True)
class PolicyConfig:
    theta_block: float = 0.40
    theta_stepup: float = 0.60
    weights: TrustWeights = field(default_factory=TrustWeights)
    adaptation: AdaptationParams = field(default_factory=AdaptationParams)
    fts_weights: tuple = (0.5, 0.3, 0.2)
    band_thresholds: tuple = (0.25, 0.5, 0.75)
    amount_cap: float = 5000.0
    acf_autonomy_floor: float = 0.8
    acf_prior_weight: float = 10.0
    lock_events: int = 5
    prior: float = DEFAULT_PRIOR
    ital_window: int = 10
    service_overrides: Mapping[int, tuple] = field(default_factory=dict)

    def __post_init__(self):
        _check_thetas(self.theta_block, self.theta_stepup)
        for s, (tb, ts) in self.service_overrides.items():
            _check_thetas(tb, ts, f"service {s}: ")
        check_fts_weights(*self.fts_weights)
        check_band_thresholds(self.band_thresholds)
        if not self.amount_cap > 0:
            raise ConfigError("amount_cap must be positive")
        if not (0.0 <= self.acf_autonomy_floor <= 1.0):
            raise ConfigError("acf_autonomy_floor must lie in [0, 1]")
        if not self.acf_prior_weight >= 0.0:
            raise ConfigError("acf_prior_weight must be non-negative")
        if self.lock_events < 0:
            raise ConfigError("lock_events must be non-negative")
        if self.ital_window < 2:
            raise ConfigError("ital_window must be >= 2")
        if not (0.0 <= self.prior <= 1.0):
            raise ConfigError("prior must lie in [0, 1]")

    @property
    def n_bands(self) -> int:
        return len(self.band_thresholds) + 1

    def thresholds_for(self, service: int) -> tuple:
        return self.service_overrides.get(service, (self.theta_block, self.theta_stepup))


def _check_thetas(tb, ts, prefix=""):
    if not (0.0 <= tb < ts <= 1.0):
        raise ConfigError(f"{prefix}need 0 <= theta_block < theta_stepup <= 1, got {tb}, {ts}")


@dataclass(frozen=True)
class BaselineRules:
    amount_limit: float = 10000.0
    blocked_regions: frozenset = frozenset({14})
    stepup_rules: frozenset = frozenset()  # (channel, region) pairs

    def __post_init__(self):
        if not self.amount_limit > 0:
            raise ConfigError("amount_limit must be positive")


@dataclass
class EngineState:
    """Mutable per-run state beside the trust scores: exposures, ACF tally, locks."""

    exposure: Sequence[float]
    pass_legit: float = 1.0
    pass_attacker: float = 0.0
    acf_total: int = 0
    acf_confirmed: int = 0
    locks: dict = field(default_factory=dict)

    @classmethod
    def for_services(cls, service_weights: Sequence[float], **kw) -> "EngineState":
        top = max(service_weights)
        return cls(exposure=tuple(w / top for w in service_weights), **kw)

    def running_acf(self, prior_weight: float = 0.0) -> float:
        """Cumulative ACF so far, shrunk toward 1.0 by ``prior_weight`` pseudo-actions."""
        den = float(self.acf_total) + prior_weight
        return (float(self.acf_confirmed) + prior_weight) / den if den > 0 else 1.0

    def challenge_passed(self, event: Event, action: Action) -> bool:
        if action != Action.STEP_UP:
            return False
        rate = self.pass_attacker if event.attack is not None else self.pass_legit
        return event.challenge_draw < rate


def event_fts(event: Event, config: PolicyConfig, state: EngineState) -> float:
    t = event.transaction
    loss = min(t.amount / config.amount_cap, 1.0)
    a, b, g = config.fts_weights
    return a * loss + b * event.anomaly.peak() + g * state.exposure[t.service.index]


def _record(event, action, theta, fts_value, band, automated, confirmed, before, after,
            passed, adaptive) -> DecisionRecord:
    return DecisionRecord(
        time_index=event.time_index, user=event.user.index, device=event.device.index,
        service=event.transaction.service.index, scenario=event.attack, action=Action(action),
        theta=theta, fts=fts_value, band=band, automated=automated,
        confirmed_correct=confirmed, identity_before=before, identity_after=after,
        challenge_passed=passed, adaptive=adaptive, amount=event.transaction.amount,
        risk=event.transaction.normalized_risk)


def _tally(state: EngineState, event: Event, action: Action, automated: bool) -> Optional[bool]:
    if action == Action.ALLOW or not automated:
        return None
    correct = event.attack is not None or action == Action.STEP_UP
    state.acf_total += 1
    state.acf_confirmed += correct
    return correct


def baseline_decide(event: Event, rules: BaselineRules,
                    trust: Optional[TrustState] = None,
                    config: Optional[PolicyConfig] = None,
                    state: Optional[EngineState] = None) -> DecisionRecord:
    """Static rules: hard blocks first, then step-up rules, else allow. Never touches trust."""
    t = event.transaction
    if t.amount > rules.amount_limit or t.geolocation in rules.blocked_regions:
        action, automated = Action.BLOCK, True
    elif (int(t.channel), t.geolocation) in rules.stepup_rules:
        action, automated = Action.STEP_UP, False
    else:
        action, automated = Action.ALLOW, False

    config = config or PolicyConfig()
    trust = trust if trust is not None else TrustState(prior=config.prior)
    state = state or EngineState.for_services([1.0] * (t.service.index + 1))
    identity = trust.get(event.user)
    theta = composite_trust(config.weights, identity, trust.get(event.device),
                            t.normalized_risk, trust.get(event.context))
    f = event_fts(event, config, state)
    band = risk_band(f, config.band_thresholds)
    confirmed = _tally(state, event, action, automated)
    return _record(event, action, theta, f, band, automated, confirmed, identity, identity,
                   state.challenge_passed(event, action), adaptive=False)


def securebank_decide(event: Event, trust: TrustState, config: PolicyConfig,
                      state: EngineState) -> DecisionRecord:
    """Adaptive PDP decision for one event; updates ``trust`` and ``state`` in place."""
    if config is None:
        raise ConfigError("missing policy configuration")
    t = event.transaction
    I = trust.get(event.user)
    D = trust.get(event.device)
    C = trust.get(event.context)
    theta = composite_trust(config.weights, I, D, t.normalized_risk, C)
    f = event_fts(event, config, state)
    band = risk_band(f, config.band_thresholds)
    top = config.n_bands

    user = event.user.index
    locked = state.locks.get(user, 0) > 0
    if locked:
        action = Action.BLOCK
        state.locks[user] -= 1
    else:
        tb, ts = config.thresholds_for(t.service.index)
        if theta < tb:
            action = Action.BLOCK
        elif theta < ts:
            action = Action.STEP_UP
        else:
            action = Action.ALLOW
        if band >= 3 and action < Action.BLOCK:
            action = Action(action + 1)
        if band == top:
            action = Action.BLOCK

    automated = autonomy_gate(state.running_acf(config.acf_prior_weight), band, config.acf_autonomy_floor)
    # lock-enforced blocks carry out an earlier decision and are not tallied again
    confirmed = None if locked else _tally(state, event, action, automated)
    if automated and action == Action.BLOCK and band == top:
        # account_lock from the top-band runbook
        state.locks[user] = config.lock_events

    ad = config.adaptation
    s = event.anomaly
    after = update_trust(I, s.s_user, ad.eta_identity)
    trust.set(event.user, after)
    trust.set(event.device, update_trust(D, s.s_device, ad.eta_device))
    trust.set(event.context, update_trust(C, s.s_context, ad.eta_context))
    return _record(event, action, theta, f, band, automated, confirmed, I, after,
                   state.challenge_passed(event, action), adaptive=True)


# --- kernel route ----------------------------------------------------------------

@dataclass
class DecisionLog:
    """Columnar decisions of one engine over one stream, plus streaming counters."""

    engine: str
    stream: EventStream
    action: np.ndarray
    theta: np.ndarray
    fts: np.ndarray
    band: np.ndarray
    automated: np.ndarray
    confirmed: np.ndarray
    identity_before: np.ndarray
    identity_after: np.ndarray
    challenge_passed: np.ndarray
    locked: np.ndarray
    accumulators: dict

    @property
    def adaptive(self) -> np.ndarray:
        return np.full(len(self.stream), self.engine == "securebank")

    def __len__(self):
        return len(self.stream)

    def record(self, i: int) -> DecisionRecord:
        st = self.stream
        attack = int(st.attack[i])
        conf = int(self.confirmed[i])
        return DecisionRecord(
            time_index=int(st.time_index[i]), user=int(st.user[i]), device=int(st.device[i]),
            service=int(st.service[i]),
            scenario=None if attack < 0 else ScenarioKind(attack),
            action=Action(int(self.action[i])), theta=float(self.theta[i]),
            fts=float(self.fts[i]), band=int(self.band[i]), automated=bool(self.automated[i]),
            confirmed_correct=None if conf < 0 else bool(conf),
            identity_before=float(self.identity_before[i]),
            identity_after=float(self.identity_after[i]),
            challenge_passed=bool(self.challenge_passed[i]),
            adaptive=self.engine == "securebank",
            amount=float(st.amount[i]), risk=float(st.risk[i]))

    def records(self) -> list:
        return [self.record(i) for i in range(len(self))]


ENGINES = ("baseline", "securebank")
N_REGIONS_MAX = 64


def run_stream(engine: str, stream: EventStream, config: PolicyConfig, rules: BaselineRules,
               service_weights: Sequence[float], pass_legit: float = 1.0,
               pass_attacker: float = 0.0, trust: Optional[TrustState] = None,
               backend: Optional[str] = None) -> DecisionLog:
    """Run one engine over ``stream`` through the kernel."""
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    n = len(stream)
    n_services = len(service_weights)
    if n and int(stream.service.max()) >= n_services:
        raise ValueError("stream references a service outside the configured zones")
    n_regions = max(N_REGIONS_MAX, int(stream.region.max()) + 1 if n else 0)
    if trust is None:
        trust = TrustState(prior=config.prior)
    if n:
        trust.ensure(EntityKind.USER, int(stream.user.max()))
        trust.ensure(EntityKind.DEVICE, int(stream.device.max()))
        trust.ensure(EntityKind.CONTEXT, int(stream.context.max()))
    lock = np.zeros(trust.identity.shape[0], dtype=np.int32)

    top = max(service_weights)
    exposure = np.array([w / top for w in service_weights], dtype=np.float64)
    tb = np.empty(n_services)
    ts = np.empty(n_services)
    for s in range(n_services):
        tb[s], ts[s] = config.thresholds_for(s)
    blocked = np.zeros(n_regions, dtype=np.uint8)
    for r in rules.blocked_regions:
        if 0 <= r < n_regions:
            blocked[r] = 1
    stepup = np.zeros(N_CHANNELS * n_regions, dtype=np.uint8)
    for ch, r in rules.stepup_rules:
        stepup[int(ch) * n_regions + int(r)] = 1

    out = dict(
        action=np.zeros(n, np.int8), theta=np.zeros(n), fts=np.zeros(n),
        band=np.zeros(n, np.int8), automated=np.zeros(n, np.uint8),
        confirmed=np.zeros(n, np.int8), identity_before=np.zeros(n),
        identity_after=np.zeros(n), challenge_passed=np.zeros(n, np.uint8),
        locked=np.zeros(n, np.uint8))
    service_valid = np.zeros(n_services, np.int64)
    service_total = np.zeros(n_services, np.int64)
    counters = np.zeros(6)
    ad = config.adaptation
    kernels.run_engine(
        kernels.SECUREBANK if engine == "securebank" else kernels.BASELINE,
        stream.user, stream.device, stream.context, stream.service, stream.amount,
        stream.channel, stream.region, stream.risk, stream.s_user, stream.s_device,
        stream.s_context, stream.attack, stream.challenge_u,
        trust.identity, trust.device, trust.context, lock,
        config.weights.as_tuple(), (ad.eta_identity, ad.eta_device, ad.eta_context),
        tuple(config.fts_weights), np.asarray(config.band_thresholds, dtype=np.float64),
        exposure, tb, ts, float(config.amount_cap), float(config.acf_autonomy_floor),
        float(config.acf_prior_weight),
        int(config.lock_events), int(config.ital_window), float(ad.epsilon),
        float(rules.amount_limit), blocked, stepup, n_regions,
        float(pass_legit), float(pass_attacker),
        out["action"], out["theta"], out["fts"], out["band"], out["automated"],
        out["confirmed"], out["identity_before"], out["identity_after"],
        out["challenge_passed"], out["locked"], service_valid, service_total, counters,
        backend=backend)
    out["automated"] = out["automated"].astype(bool)
    out["challenge_passed"] = out["challenge_passed"].astype(bool)
    out["locked"] = out["locked"].astype(bool)
    acc = {
        "service_valid": service_valid, "service_total": service_total,
        "incidents": int(counters[0]), "auto_handled": int(counters[1]),
        "acf_total": int(counters[2]), "acf_confirmed": int(counters[3]),
        "ital_sum": float(counters[4]), "ital_windows": int(counters[5]),
    }
    return DecisionLog(engine=engine, stream=stream, accumulators=acc, **out)


def with_overrides(config: PolicyConfig, **changes) -> PolicyConfig:
    return replace(config, **changes)
