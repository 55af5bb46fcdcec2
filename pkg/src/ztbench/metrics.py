"""Scorecard metrics over decision logs and identity-trust trajectories.

Two independent routes produce a run's scorecard:

* :func:`run_metrics` combines the counters the engine kernel accumulates
  while it streams events with vectorised passes over the columnar log;
* :func:`brute_force_metrics` walks :class:`DecisionRecord` objects one at a
  time and rebuilds every count and trajectory from scratch.

The two must agree exactly on counts and to within 1e-12 on ratios.
"""
from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .events import NO_ATTACK, ScenarioKind


class Action(enum.IntEnum):
    ALLOW = 0
    STEP_UP = 1
    BLOCK = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class DecisionRecord:
    time_index: int
    user: int
    device: int
    service: int
    scenario: Optional[ScenarioKind]
    action: Action
    theta: float
    fts: float
    band: int
    automated: bool
    confirmed_correct: Optional[bool] = None
    identity_before: float = 0.0
    identity_after: float = 0.0
    challenge_passed: bool = False
    adaptive: bool = False
    amount: float = 0.0
    risk: float = 0.0

    @property
    def is_attack(self) -> bool:
        return self.scenario is not None


@dataclass(frozen=True)
class ServiceCounts:
    n_valid: int
    n_total: int
    weight: float = 1.0

    def __post_init__(self):
        if not (0 <= self.n_valid <= self.n_total):
            raise ValueError(f"need 0 <= n_valid <= n_total, got {self.n_valid}/{self.n_total}")
        if not self.weight > 0:
            raise ValueError(f"service weight must be positive, got {self.weight!r}")


HEADLINE = ("tii", "sae", "ital")
SCALARS = ("tii", "sae", "sae_star", "ital", "acf", "trp", "ass",
           "precision", "recall", "f1", "fpr", "fnr")


@dataclass
class RunMetrics:
    tii: float
    sae: float
    sae_star: float
    ital: float
    acf: float
    trp: float
    ass: float
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    fpr: Optional[float]
    fnr: Optional[float]
    per_service_tii: dict = field(default_factory=dict)
    per_scenario: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    HEADLINE = HEADLINE
    SCALARS = SCALARS

    def scalar(self, name: str) -> Optional[float]:
        return getattr(self, name)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunMetrics":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


# --- scalar metric definitions ------------------------------------------------

def delta_identity(i_start: float, i_end: float, epsilon: float = 1e-6) -> float:
    """Relative identity-trust drop over a window; positive when trust fell."""
    for v in (i_start, i_end):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"identity score out of [0, 1]: {v!r}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return (i_start - i_end) / max(i_start, epsilon)


def ital(trajectories: Mapping[int, Sequence[tuple[int, float]]],
         attack_events: Iterable[tuple[int, int]],
         window_len: int = 10, epsilon: float = 1e-6) -> float:
    """Mean ``delta_identity`` over windows anchored at attack events.

    ``trajectories`` maps user -> [(time_index, identity score), ...] in time
    order; ``attack_events`` holds ``(user, time_index)`` pairs, each of which
    must be a point on that user's trajectory. A window covers ``window_len``
    consecutive trajectory points starting at the attack, truncated at the
    trajectory's last point.
    """
    if not trajectories:
        raise ValueError("no trajectories")
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    positions = {u: {t: k for k, (t, _) in enumerate(traj)}
                 for u, traj in trajectories.items()}
    total = 0.0
    n = 0
    for user, t in attack_events:
        traj = trajectories[user]
        k0 = positions[user][t]
        k1 = min(k0 + window_len - 1, len(traj) - 1)
        total += delta_identity(traj[k0][1], traj[k1][1], epsilon)
        n += 1
    return total / n if n else 0.0


def tii(counts: Iterable[ServiceCounts]) -> float:
    num = 0.0
    den = 0.0
    for c in counts:
        num += c.weight * c.n_valid
        den += c.weight * c.n_total
    if den == 0:
        raise ValueError("no transactions")
    return num / den


def sae(total_incidents: int, auto_handled: int) -> float:
    if not (0 <= auto_handled <= total_incidents):
        raise ValueError(f"auto_handled ({auto_handled}) exceeds total incidents ({total_incidents})")
    return auto_handled / total_incidents if total_incidents else 0.0


def acf(total_actions: int, confirmed_correct: int, mu: float = 1.0) -> float:
    if not (0 <= confirmed_correct <= total_actions):
        raise ValueError(f"confirmed ({confirmed_correct}) exceeds total actions ({total_actions})")
    return mu * confirmed_correct / total_actions if total_actions else 0.0


def sae_star(sae_value: float, acf_value: float) -> float:
    return sae_value * acf_value


def fts(loss: float, exploit_prob: float, exposure: float,
        alpha: float = 0.5, beta: float = 0.3, gamma: float = 0.2) -> float:
    """Financial threat score from normalised loss, exploit probability and exposure."""
    check_fts_weights(alpha, beta, gamma)
    for name, v in (("loss", loss), ("exploit_prob", exploit_prob), ("exposure", exposure)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} out of [0, 1]: {v!r}")
    return alpha * loss + beta * exploit_prob + gamma * exposure


def check_fts_weights(alpha: float, beta: float, gamma: float) -> None:
    from .trust import ConfigError

    if min(alpha, beta, gamma) < 0:
        raise ConfigError("FTS weights must be non-negative")
    if abs(alpha + beta + gamma - 1.0) > 1e-9:
        raise ConfigError(f"FTS weights must sum to 1, got {alpha + beta + gamma!r}")


def check_band_thresholds(thresholds: Sequence[float]) -> None:
    from .trust import ConfigError

    for a, b in zip(thresholds, thresholds[1:]):
        if not a < b:
            raise ConfigError(f"band thresholds must be strictly increasing: {list(thresholds)}")
    if any(not (0.0 < t < 1.0) for t in thresholds):
        raise ConfigError(f"band thresholds must lie in (0, 1): {list(thresholds)}")


def risk_band(fts_value: float, thresholds: Sequence[float] = (0.25, 0.5, 0.75)) -> int:
    """Band ``k`` such that ``tau[k-1] <= fts < tau[k]`` (1-based, half-open)."""
    check_band_thresholds(thresholds)
    band = 1
    for tau in thresholds:
        if fts_value >= tau:
            band += 1
    return band


def trp(volume: float, mean_risk: float, window_duration: float, delta: float = 1.0) -> float:
    if window_duration <= 0:
        raise ValueError("window duration must be positive")
    return delta * volume * mean_risk / window_duration


def ass(zones_adaptive: int, zones_total: int, lambda_norm: float = 1.0) -> float:
    if zones_total <= 0:
        raise ValueError("zones_total must be positive")
    if not (0 <= zones_adaptive <= zones_total):
        raise ValueError(f"zones_adaptive ({zones_adaptive}) exceeds zones_total ({zones_total})")
    return lambda_norm * zones_adaptive / zones_total


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    fpr: Optional[float]
    fnr: Optional[float]


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def confusion_from_counts(tp: int, fp: int, tn: int, fn: int) -> Confusion:
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    f1 = None
    if p is not None and r is not None:
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return Confusion(tp, fp, tn, fn, p, r, f1, _ratio(fp, fp + tn), _ratio(fn, fn + tp))


def confusion_metrics(records: Sequence[DecisionRecord]) -> Confusion:
    """Flagged (step-up or block) versus attack annotation."""
    if not records:
        raise ValueError("no decision records")
    tp = fp = tn = fn = 0
    for rec in records:
        flagged = rec.action != Action.ALLOW
        if rec.is_attack:
            tp += flagged
            fn += not flagged
        else:
            fp += flagged
            tn += not flagged
    return confusion_from_counts(tp, fp, tn, fn)


# --- run-level scorecards --------------------------------------------------------

@dataclass(frozen=True)
class MetricParams:
    service_weights: tuple
    service_names: tuple
    window_len: int = 10
    epsilon: float = 1e-6
    mu: float = 1.0
    delta: float = 1.0
    lambda_norm: float = 1.0


def _scenario_label(code: int) -> str:
    return ScenarioKind(code).label


def run_metrics(log, params: MetricParams) -> RunMetrics:
    """Scorecard from the kernel's streaming counters plus the columnar log."""
    acc = log.accumulators
    weights = params.service_weights
    per_service = {}
    for s, name in enumerate(params.service_names):
        n_tot = int(acc["service_total"][s])
        if n_tot:
            per_service[name] = tii([ServiceCounts(int(acc["service_valid"][s]), n_tot, weights[s])])
    tii_value = tii(ServiceCounts(int(acc["service_valid"][s]), int(acc["service_total"][s]), weights[s])
                    for s in range(len(weights)))
    sae_value = sae(int(acc["incidents"]), int(acc["auto_handled"]))
    acf_value = acf(int(acc["acf_total"]), int(acc["acf_confirmed"]), params.mu)
    n_windows = int(acc["ital_windows"])
    ital_value = float(acc["ital_sum"]) / n_windows if n_windows else 0.0

    stream = log.stream
    is_attack = stream.attack >= 0
    flagged = log.action != Action.ALLOW
    conf = confusion_from_counts(
        int(np.count_nonzero(flagged & is_attack)), int(np.count_nonzero(flagged & ~is_attack)),
        int(np.count_nonzero(~flagged & ~is_attack)), int(np.count_nonzero(~flagged & is_attack)))

    n = len(stream)
    trp_value = trp(float(stream.amount.sum()), float(stream.risk.mean()) if n else 0.0,
                    float(n), params.delta)
    adaptive_zones = np.unique(stream.service[log.adaptive & flagged]).size
    ass_value = ass(int(adaptive_zones), len(weights), params.lambda_norm)

    per_scenario = {}
    for code in np.unique(stream.attack[is_attack]):
        sel = stream.attack == code
        per_scenario[_scenario_label(int(code))] = {
            a.label: int(np.count_nonzero(log.action[sel] == a)) for a in Action}

    return RunMetrics(
        tii=tii_value, sae=sae_value, sae_star=sae_star(sae_value, acf_value),
        ital=ital_value, acf=acf_value, trp=trp_value, ass=ass_value,
        precision=conf.precision, recall=conf.recall, f1=conf.f1, fpr=conf.fpr, fnr=conf.fnr,
        per_service_tii=per_service, per_scenario=per_scenario,
        counts={
            "events": n, "attacks": int(np.count_nonzero(is_attack)),
            "incidents": int(acc["incidents"]), "auto_handled": int(acc["auto_handled"]),
            "acf_total": int(acc["acf_total"]), "acf_confirmed": int(acc["acf_confirmed"]),
            "ital_windows": n_windows,
            "tp": conf.tp, "fp": conf.fp, "tn": conf.tn, "fn": conf.fn,
        },
    )


def trajectories_from_records(records: Sequence[DecisionRecord], end_time: int):
    """Per-user (time, identity-in-force) points plus one closing point at ``end_time``."""
    traj = defaultdict(list)
    last = {}
    for rec in records:
        traj[rec.user].append((rec.time_index, rec.identity_before))
        last[rec.user] = rec.identity_after
    for user, score in last.items():
        traj[user].append((end_time, score))
    return dict(traj)


def brute_force_metrics(records: Sequence[DecisionRecord], params: MetricParams,
                        end_time: Optional[int] = None) -> dict:
    """Recompute TII, SAE, SAE*, ITAL, ACF and their counts record by record."""
    valid = defaultdict(int)
    total = defaultdict(int)
    incidents = handled = 0
    a_total = a_ok = 0
    for rec in records:
        total[rec.service] += 1
        if not rec.is_attack and (rec.action == Action.ALLOW
                                  or (rec.action == Action.STEP_UP and rec.challenge_passed)):
            valid[rec.service] += 1
        if rec.is_attack:
            incidents += 1
            if rec.automated and rec.action != Action.ALLOW:
                handled += 1
        if rec.confirmed_correct is not None:
            a_total += 1
            a_ok += bool(rec.confirmed_correct)
    tii_value = tii(ServiceCounts(valid[s], total[s], params.service_weights[s]) for s in sorted(total))
    sae_value = sae(incidents, handled)
    acf_value = acf(a_total, a_ok, params.mu)
    if end_time is None:
        end_time = max(r.time_index for r in records) + 1
    traj = trajectories_from_records(records, end_time)
    attacks = [(r.user, r.time_index) for r in records if r.is_attack]
    ital_value = ital(traj, attacks, params.window_len, params.epsilon)
    return {
        "tii": tii_value, "sae": sae_value, "sae_star": sae_star(sae_value, acf_value),
        "ital": ital_value, "acf": acf_value,
        "service_valid": dict(valid), "service_total": dict(total),
        "incidents": incidents, "auto_handled": handled,
        "acf_total": a_total, "acf_confirmed": a_ok, "ital_windows": len(attacks),
    }

