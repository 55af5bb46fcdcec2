"""Synthetic population, benign/adversarial event streams, and transaction datasets.

Everything here is a pure function of its seed. Simulation runs draw from
``numpy.random.Generator`` (PCG64); run ``i`` of a batch is seeded with
``base_seed + i``.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field, fields
from datetime import datetime, timedelta
from statistics import NormalDist
from typing import Iterable, Mapping, Optional, Sequence, TextIO, Union

import numpy as np

from .events import (N_CHANNELS, SIMULATION_SCENARIOS, AnomalySignals, Channel, EventStream,
                     ScenarioKind, context_index)
from .trust import ConfigError

log = logging.getLogger(__name__)

SIM_ZONES = (
    ("payment_processing", 0.7),
    ("settlement_clearing", 1.0),
    ("risk_analytics", 0.6),
    ("customer_identity", 0.5),
    ("administration", 0.9),
)

DATASET_SERVICES = (
    ("payments", 0.7),
    ("settlement", 1.0),
    ("risk_analytics", 0.6),
    ("aml", 0.9),
    ("customer_identity", 0.5),
    ("administration", 0.9),
    ("cards", 0.6),
    ("lending", 0.7),
    ("treasury", 1.0),
)

# normalized-risk lookup tables
CHANNEL_RISK = {Channel.WEB: 0.2, Channel.MOBILE: 0.1, Channel.API: 0.6,
                Channel.ATM: 0.3, Channel.POS: 0.2}
N_HOME_REGIONS = 10


def region_risk(region: int) -> float:
    if region < N_HOME_REGIONS:
        return 0.1
    if region < 13:
        return 0.5
    return 1.0


def normalized_risk(amount: float, channel: int, region: int, amount_cap: float) -> float:
    """R = clip(0.5 * min(amount/cap, 1) + 0.3 * channel_risk + 0.2 * region_risk)."""
    r = (0.5 * min(amount / amount_cap, 1.0) + 0.3 * CHANNEL_RISK[Channel(channel)]
         + 0.2 * region_risk(region))
    return min(1.0, max(0.0, r))


# (min, max) attack events bound to one campaign victim
CAMPAIGN_LENGTH = {
    ScenarioKind.CREDENTIAL_COMPROMISE: (2, 4),
    ScenarioKind.INSIDER_LATERAL: (2, 4),
    ScenarioKind.API_ABUSE: (3, 6),
    ScenarioKind.MONEY_LAUNDERING: (3, 8),
    ScenarioKind.SESSION_HIJACK: (1, 3),
    ScenarioKind.CARD_THEFT: (1, 3),
    ScenarioKind.SYNTHETIC_IDENTITY: (1, 2),
}

# primary / secondary anomaly channel per scenario
_SIGNATURE = {
    ScenarioKind.CREDENTIAL_COMPROMISE: ("user", "device"),
    ScenarioKind.INSIDER_LATERAL: ("context", "user"),
    ScenarioKind.API_ABUSE: ("context", "user"),
    ScenarioKind.MONEY_LAUNDERING: ("user", "context"),
    ScenarioKind.SESSION_HIJACK: ("device", "user"),
    ScenarioKind.CARD_THEFT: ("device", "user"),
    ScenarioKind.SYNTHETIC_IDENTITY: ("user", "context"),
}


@dataclass(frozen=True)
class GeneratorConfig:
    n_users: int = 500
    n_devices: int = 800
    n_events: int = 5000
    attack_probability: float = 0.05
    base_seed: int = 42
    scenario_mix: Mapping[str, float] = field(
        default_factory=lambda: {k.label: 0.2 for k in SIMULATION_SCENARIOS})
    service_zones: tuple = SIM_ZONES
    n_regions: int = 15
    amount_cap: float = 5000.0
    benign_anomaly: tuple = (2.0, 8.0)
    attack_anomaly: tuple = (6.0, 2.0)
    secondary_anomaly: tuple = (2.0, 5.0)
    laundering_anomaly: tuple = (4.0, 4.0)
    employee_fraction: float = 0.1
    compromised_device_fraction: float = 0.0625
    challenge_pass_legit: float = 1.0
    challenge_pass_attacker: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.attack_probability <= 1.0):
            raise ConfigError("attack_probability must lie in [0, 1]")
        total = sum(self.scenario_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"scenario_mix must sum to 1, got {total!r}")
        for label, p in self.scenario_mix.items():
            ScenarioKind.from_label(label)
            if p < 0:
                raise ConfigError(f"negative scenario probability for {label}")
        if self.n_users <= 0 or self.n_devices <= 0 or self.n_events < 0:
            raise ConfigError("n_users and n_devices must be positive, n_events non-negative")
        if not self.service_zones:
            raise ConfigError("at least one service zone required")
        if any(w <= 0 for _, w in self.service_zones):
            raise ConfigError("service criticality weights must be positive")
        if self.n_regions <= N_HOME_REGIONS:
            raise ConfigError(f"n_regions must exceed {N_HOME_REGIONS}")
        for name in ("challenge_pass_legit", "challenge_pass_attacker"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1]")

    @property
    def service_weights(self) -> tuple:
        return tuple(w for _, w in self.service_zones)

    @property
    def service_names(self) -> tuple:
        return tuple(n for n, _ in self.service_zones)


# --- population --------------------------------------------------------------------

@dataclass
class Population:
    home_region: np.ndarray
    is_employee: np.ndarray
    spend_mu: np.ndarray
    channels: list            # per-user preferred channels
    zones: list               # per-user home zones
    devices: list             # per-user owned devices
    device_owner: np.ndarray
    device_posture: np.ndarray
    compromised: np.ndarray   # device ids reachable by attackers
    employees: np.ndarray

    @property
    def n_users(self) -> int:
        return int(self.home_region.shape[0])

    @property
    def n_devices(self) -> int:
        return int(self.device_owner.shape[0])

    def same_as(self, other: "Population") -> bool:
        arrays = ("home_region", "is_employee", "spend_mu", "device_owner",
                  "device_posture", "compromised", "employees")
        return (all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
                and self.channels == other.channels and self.zones == other.zones
                and self.devices == other.devices)


_CUSTOMER_CHANNELS = (Channel.WEB, Channel.MOBILE, Channel.ATM, Channel.POS)
_EMPLOYEE_CHANNELS = (Channel.WEB, Channel.API)


def _zone_index(config: GeneratorConfig, *names: str) -> list:
    idx = {n: i for i, n in enumerate(config.service_names)}
    found = [idx[n] for n in names if n in idx]
    return found or list(range(len(config.service_zones)))


def build_population(config: GeneratorConfig, stream_seed: int) -> Population:
    if config.n_devices < config.n_users:
        raise ConfigError(f"n_devices ({config.n_devices}) < n_users ({config.n_users}): "
                          "every user needs a device")
    rng = np.random.default_rng([stream_seed, 0])
    nu, nd = config.n_users, config.n_devices
    home = rng.integers(0, N_HOME_REGIONS, size=nu)
    employee = rng.random(nu) < config.employee_fraction
    spend_mu = math.log(94.22) + rng.normal(0.0, 0.25, size=nu)

    customer_zones = _zone_index(config, "payment_processing", "customer_identity")
    employee_zones = _zone_index(config, "settlement_clearing", "risk_analytics",
                                 "payment_processing")
    channels, zones = [], []
    for u in range(nu):
        if employee[u]:
            channels.append([int(c) for c in _EMPLOYEE_CHANNELS])
            zones.append(list(employee_zones))
        else:
            k = int(rng.integers(1, 3))
            picks = rng.choice(len(_CUSTOMER_CHANNELS), size=k, replace=False)
            channels.append(sorted(int(_CUSTOMER_CHANNELS[j]) for j in picks))
            zones.append(list(customer_zones))

    owner = np.empty(nd, dtype=np.int64)
    owner[:nu] = np.arange(nu)
    owner[nu:] = rng.integers(0, nu, size=nd - nu)
    devices = [[] for _ in range(nu)]
    for d in range(nd):
        devices[int(owner[d])].append(d)
    posture = rng.beta(8.0, 2.0, size=nd)
    n_comp = max(1, int(round(config.compromised_device_fraction * nd)))
    compromised = np.sort(rng.choice(nd, size=n_comp, replace=False))
    employees = np.flatnonzero(employee)
    if employees.size == 0:
        employees = np.array([0])
    return Population(home, employee, spend_mu, channels, zones, devices, owner, posture,
                      compromised, employees)


# --- scenario signatures ---------------------------------------------------------------

def _beta(rng, shape) -> float:
    return float(rng.beta(shape[0], shape[1]))


def _foreign_weights(k: int) -> np.ndarray:
    # attack origins skew to moderately risky regions; the last (sanctioned) one is rare
    w = np.linspace(1.0, 0.3, k)
    w[-1] = 0.1
    return w / w.sum()


def inject_scenario(kind: ScenarioKind, rng: np.random.Generator,
                    config: GeneratorConfig = GeneratorConfig(),
                    population: Optional[Population] = None, victim: int = 0,
                    chain_position: int = 0) -> tuple:
    """Anomaly signals and transaction attribute overrides for one attack event.

    Returns ``(AnomalySignals, overrides)`` where ``overrides`` may set
    ``device``, ``service``, ``channel``, ``region`` and ``amount``. Attribute
    overrides need a ``population``; without one only the signals are
    meaningful.
    """
    kind = ScenarioKind(kind)
    primary, secondary = _SIGNATURE[kind]
    sig = {"user": _beta(rng, config.benign_anomaly),
           "device": _beta(rng, config.benign_anomaly),
           "context": _beta(rng, config.benign_anomaly)}
    if kind is ScenarioKind.MONEY_LAUNDERING:
        sig[primary] = min(1.0, _beta(rng, config.laundering_anomaly) + 0.05 * chain_position)
    else:
        sig[primary] = _beta(rng, config.attack_anomaly)
    sig[secondary] = _beta(rng, config.secondary_anomaly)
    signals = AnomalySignals(sig["user"], sig["device"], sig["context"])

    cap = config.amount_cap
    foreign = np.arange(N_HOME_REGIONS, config.n_regions)
    ov: dict = {}
    if kind is ScenarioKind.CREDENTIAL_COMPROMISE:
        ov["region"] = int(rng.choice(foreign, p=_foreign_weights(foreign.size)))
        ov["amount"] = float(rng.lognormal(math.log(0.4 * cap), 0.6))
        ov["channel"] = int(rng.choice([Channel.WEB, Channel.MOBILE]))
        ov["service"] = int(rng.choice(_zone_index(config, "payment_processing",
                                                   "settlement_clearing")))
    elif kind is ScenarioKind.INSIDER_LATERAL:
        ov["amount"] = float(rng.lognormal(math.log(1500.0), 0.8))
        ov["channel"] = int(rng.choice([Channel.WEB, Channel.API]))
    elif kind is ScenarioKind.API_ABUSE:
        ov["channel"] = int(Channel.API)
        ov["amount"] = float(rng.lognormal(math.log(20.0), 0.5))
        ov["service"] = int(rng.choice(_zone_index(config, "payment_processing",
                                                   "customer_identity")))
    elif kind is ScenarioKind.MONEY_LAUNDERING:
        ov["amount"] = float(0.1 * cap * rng.uniform(0.2, 0.95))
        ov["channel"] = int(rng.choice([Channel.WEB, Channel.MOBILE, Channel.API]))
        ov["service"] = int(rng.choice(_zone_index(config, "payment_processing",
                                                   "settlement_clearing")))
    elif kind is ScenarioKind.SESSION_HIJACK:
        ov["region"] = int(rng.integers(0, N_HOME_REGIONS))
        ov["amount"] = float(rng.lognormal(math.log(1200.0), 0.8))
    elif kind is ScenarioKind.CARD_THEFT:
        ov["channel"] = int(rng.choice([Channel.ATM, Channel.POS]))
        ov["amount"] = float(rng.lognormal(math.log(500.0), 0.8))
    else:  # synthetic identity
        ov["amount"] = float(rng.lognormal(math.log(1500.0), 0.7))
        ov["channel"] = int(rng.choice([Channel.WEB, Channel.MOBILE]))

    if population is not None:
        if kind in (ScenarioKind.CREDENTIAL_COMPROMISE, ScenarioKind.CARD_THEFT,
                    ScenarioKind.SYNTHETIC_IDENTITY):
            ov["device"] = int(rng.choice(population.compromised))
        else:
            ov["device"] = int(rng.choice(population.devices[victim]))
        if kind is ScenarioKind.INSIDER_LATERAL:
            own = set(population.zones[victim])
            outside = [z for z in range(len(config.service_zones)) if z not in own]
            ov["service"] = int(rng.choice(outside or list(own)))
        if kind is ScenarioKind.SESSION_HIJACK and ov["region"] == population.home_region[victim]:
            ov["region"] = int((ov["region"] + 1) % N_HOME_REGIONS)
    return signals, ov


def benign_signals(rng: np.random.Generator, config: GeneratorConfig) -> AnomalySignals:
    a = config.benign_anomaly
    return AnomalySignals(_beta(rng, a), _beta(rng, a), _beta(rng, a))


# --- event streams ---------------------------------------------------------------------

class ScenarioGenerator:
    """Stateful per-run event source.

    Attack annotation is an independent Bernoulli(attack_probability) draw per
    event. An attack event of kind ``k`` joins the open campaign of that kind
    when there is one (same victim account, next chain position) and otherwise
    opens a new campaign with a fresh victim.
    """

    def __init__(self, config: GeneratorConfig, seed: int,
                 population: Optional[Population] = None):
        self.config = config
        self.population = population or build_population(config, seed)
        self.rng = np.random.default_rng([seed, 1])
        self.t = 0
        labels = list(config.scenario_mix)
        self._kinds = [ScenarioKind.from_label(l) for l in labels]
        self._mix = np.array([config.scenario_mix[l] for l in labels], dtype=np.float64)
        self._campaigns: dict = {}

    def _campaign(self, kind: ScenarioKind, user: int) -> tuple:
        rng = self.rng
        camp = self._campaigns.get(kind)
        if camp is None or camp[1] <= 0:
            if kind is ScenarioKind.INSIDER_LATERAL:
                user = int(rng.choice(self.population.employees))
            lo, hi = CAMPAIGN_LENGTH[kind]
            camp = [user, int(rng.integers(lo, hi + 1)), 0]
            self._campaigns[kind] = camp
        victim, _, position = camp
        camp[1] -= 1
        camp[2] += 1
        return victim, position

    def next_event(self) -> dict:
        cfg, pop, rng = self.config, self.population, self.rng
        t = self.t
        self.t += 1
        user = int(rng.integers(0, pop.n_users))
        is_attack = bool(rng.random() < cfg.attack_probability)
        challenge_u = float(rng.random())
        attack = -1
        if is_attack:
            kind = self._kinds[int(rng.choice(len(self._kinds), p=self._mix))]
            user, position = self._campaign(kind, user)
            signals, ov = inject_scenario(kind, rng, cfg, pop, user, position)
            attack = int(kind)
        else:
            signals, ov = benign_signals(rng, cfg), {}

        device = ov.get("device")
        if device is None:
            device = int(rng.choice(pop.devices[user]))
        service = ov.get("service")
        if service is None:
            service = int(rng.choice(pop.zones[user]))
        channel = ov.get("channel")
        if channel is None:
            channel = int(rng.choice(pop.channels[user]))
        region = ov.get("region")
        if region is None:
            home = int(pop.home_region[user])
            region = home if rng.random() < 0.95 else int(rng.integers(0, N_HOME_REGIONS))
        amount = ov.get("amount")
        if amount is None:
            amount = float(rng.lognormal(pop.spend_mu[user], 1.5))
        return dict(
            time_index=t, user=user, device=device, context=context_index(region, channel),
            service=service, txn_id=t + 1, amount=amount, channel=channel, region=region,
            risk=normalized_risk(amount, channel, region, cfg.amount_cap),
            s_user=signals.s_user, s_device=signals.s_device, s_context=signals.s_context,
            attack=attack, challenge_u=challenge_u)

    def stream(self, n_events: Optional[int] = None) -> EventStream:
        n = self.config.n_events if n_events is None else n_events
        rows = [self.next_event() for _ in range(n)]
        cols = {k: [r[k] for r in rows] for k in rows[0]} if rows else _empty_columns()
        return EventStream(**cols)


def _empty_columns() -> dict:
    from .events import COLUMN_NAMES
    return {k: [] for k in COLUMN_NAMES}


def generate_stream(config: GeneratorConfig, seed: int, n_events: Optional[int] = None) -> EventStream:
    return ScenarioGenerator(config, seed).stream(n_events)


# --- calibrated transaction dataset --------------------------------------------------

CSV_HEADER = ("transaction_id", "timestamp", "user_id", "device_id", "service", "channel",
              "geolocation", "amount", "fraud_flag", "fraud_scenario")


@dataclass(frozen=True)
class TransactionRecord:
    transaction_id: int
    timestamp: str
    user_id: str
    device_id: str
    service: str
    channel: str
    geolocation: int
    amount: float
    fraud_flag: int
    fraud_scenario: str

    def __post_init__(self):
        if bool(self.fraud_flag) != bool(self.fraud_scenario):
            raise ValueError("fraud_scenario must be non-empty iff fraud_flag = 1")

    def row(self) -> list:
        return [str(self.transaction_id), self.timestamp, self.user_id, self.device_id,
                self.service, self.channel, str(self.geolocation), f"{self.amount:.2f}",
                str(self.fraud_flag), self.fraud_scenario]


@dataclass(frozen=True)
class DatasetCalibration:
    n_reference: int = 10000
    fraud_rate: float = 0.035
    scenario_share: Mapping[str, float] = field(default_factory=lambda: {
        "credential_compromise": 0.214, "insider_lateral": 0.186, "api_abuse": 0.157,
        "money_laundering": 0.171, "session_hijack": 0.143, "card_theft": 0.080,
        "synthetic_identity": 0.049})
    amount_mean: float = 352.07
    amount_median: float = 94.22
    n_users: int = 1000
    n_devices: int = 1033
    compromised_devices: int = 65
    services: tuple = DATASET_SERVICES
    n_regions: int = 15
    start: str = "2023-01-01T00:00:00"
    span_days: int = 547
    amount_cap: float = 5000.0

    @property
    def lognormal_params(self) -> tuple:
        mu = math.log(self.amount_median)
        sigma = math.sqrt(2.0 * math.log(self.amount_mean / self.amount_median))
        return mu, sigma


def largest_remainder(total: int, shares: Sequence[float]) -> list:
    """Integer apportionment of ``total`` by ``shares`` (Hamilton's method)."""
    s = sum(shares)
    quotas = [total * x / s for x in shares]
    counts = [int(math.floor(q)) for q in quotas]
    order = sorted(range(len(shares)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def stratified_lognormal(n: int, mu: float, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """One lognormal draw per probability stratum ``[k/n, (k+1)/n)``, shuffled."""
    inv = NormalDist().inv_cdf
    u = (np.arange(n) + rng.random(n)) / n
    u = np.clip(u, 1e-12, 1 - 1e-12)
    z = np.array([inv(float(x)) for x in u])
    out = np.exp(mu + sigma * z)
    rng.shuffle(out)
    return out


def _scaled(count: int, n: int, ref: int) -> int:
    return max(1, int(round(count * n / ref)))


def generate_dataset(n: int, seed: int,
                     calibration: DatasetCalibration = DatasetCalibration()) -> list:
    """Synthetic transaction records matching the calibration profile."""
    if n < 100:
        raise ValueError("dataset size must be at least 100 records")
    cal = calibration
    rng = np.random.default_rng([seed, 7])
    n_users = _scaled(cal.n_users, n, cal.n_reference)
    n_devices = max(n_users, _scaled(cal.n_devices, n, cal.n_reference))
    n_comp = min(n_devices, _scaled(cal.compromised_devices, n, cal.n_reference))
    services = [name for name, _ in cal.services]
    svc_w = np.array([w for _, w in cal.services])
    svc_p = svc_w / svc_w.sum()

    owner = np.concatenate([np.arange(n_users), rng.integers(0, n_users, n_devices - n_users)])
    devices_of = [[] for _ in range(n_users)]
    for d, u in enumerate(owner):
        devices_of[int(u)].append(d)
    home = rng.integers(0, N_HOME_REGIONS, n_users)
    pref = [sorted(int(c) for c in rng.choice(N_CHANNELS, size=int(rng.integers(1, 3)),
                                               replace=False)) for _ in range(n_users)]
    compromised = rng.choice(n_devices, size=n_comp, replace=False)

    # device-covering rows first so every user and device appears when n >= n_devices
    n_cover = min(n, n_devices)
    dev = np.empty(n, dtype=np.int64)
    dev[:n_cover] = rng.permutation(n_devices)[:n_cover]
    usr = np.empty(n, dtype=np.int64)
    usr[:n_cover] = owner[dev[:n_cover]]
    rest_users = rng.integers(0, n_users, n - n_cover)
    usr[n_cover:] = rest_users
    dev[n_cover:] = [devices_of[int(u)][int(rng.integers(0, len(devices_of[int(u)])))]
                     for u in rest_users]

    amounts = np.round(stratified_lognormal(n, *cal.lognormal_params, rng), 2)
    amounts = np.maximum(amounts, 0.01)
    channel = np.array([pref[int(u)][int(rng.integers(0, len(pref[int(u)])))] for u in usr])
    region = np.where(rng.random(n) < 0.95, home[usr], rng.integers(0, N_HOME_REGIONS, n))
    service = rng.choice(len(services), size=n, p=svc_p)

    n_fraud = int(round(cal.fraud_rate * n))
    labels = list(cal.scenario_share)
    counts = largest_remainder(n_fraud, [cal.scenario_share[l] for l in labels])
    pool = np.arange(n_cover, n) if n - n_cover >= n_fraud else np.arange(n)
    fraud_rows = rng.choice(pool, size=n_fraud, replace=False)
    scen = np.array([l for l, c in zip(labels, counts) for _ in range(c)], dtype=object)
    rng.shuffle(scen)
    scenario = np.full(n, "", dtype=object)
    scenario[fraud_rows] = scen

    ml_limit = 0.1 * cal.amount_cap
    small_benign = [i for i in rng.permutation(n)
                    if not scenario[i] and amounts[i] < ml_limit]
    gen_cfg = GeneratorConfig(amount_cap=cal.amount_cap, n_regions=cal.n_regions,
                              service_zones=tuple(cal.services), n_users=n_users,
                              n_devices=n_devices)
    svc_index = {name: i for i, name in enumerate(services)}
    for i in fraud_rows:
        kind = ScenarioKind.from_label(scenario[i])
        _, ov = inject_scenario(kind, rng, gen_cfg)
        if "channel" in ov:
            channel[i] = ov["channel"]
        if "region" in ov:
            region[i] = ov["region"]
        if kind in (ScenarioKind.CREDENTIAL_COMPROMISE, ScenarioKind.CARD_THEFT,
                    ScenarioKind.SYNTHETIC_IDENTITY, ScenarioKind.SESSION_HIJACK):
            dev[i] = compromised[int(rng.integers(0, n_comp))]
        if kind is ScenarioKind.INSIDER_LATERAL:
            service[i] = svc_index.get("administration", service[i])
        elif kind is ScenarioKind.MONEY_LAUNDERING:
            service[i] = svc_index.get("aml", service[i])
            if amounts[i] >= ml_limit and small_benign:
                j = small_benign.pop()
                amounts[i], amounts[j] = amounts[j], amounts[i]
        elif kind is ScenarioKind.API_ABUSE:
            service[i] = svc_index.get("payments", service[i])

    order = rng.permutation(n)
    start = datetime.fromisoformat(cal.start)
    offsets = np.sort(rng.integers(0, cal.span_days * 86400, n))
    width_u = max(4, len(str(n_users)))
    width_d = max(4, len(str(n_devices)))
    records = []
    for k, i in enumerate(order):
        ts = (start + timedelta(seconds=int(offsets[k]))).isoformat()
        records.append(TransactionRecord(
            transaction_id=k + 1, timestamp=ts, user_id=f"U{int(usr[i]) + 1:0{width_u}d}",
            device_id=f"D{int(dev[i]) + 1:0{width_d}d}", service=services[int(service[i])],
            channel=Channel(int(channel[i])).name.lower(), geolocation=int(region[i]),
            amount=float(amounts[i]), fraud_flag=int(bool(scenario[i])),
            fraud_scenario=str(scenario[i])))
    return records


def calibration_summary(records: Sequence[TransactionRecord], device_fraud_share: float = 0.2) -> dict:
    amounts = np.array([r.amount for r in records])
    fraud = [r for r in records if r.fraud_flag]
    by_scenario: dict = {}
    for r in fraud:
        by_scenario[r.fraud_scenario] = by_scenario.get(r.fraud_scenario, 0) + 1
    dev_total: dict = {}
    dev_fraud: dict = {}
    for r in records:
        dev_total[r.device_id] = dev_total.get(r.device_id, 0) + 1
        dev_fraud[r.device_id] = dev_fraud.get(r.device_id, 0) + r.fraud_flag
    compromised = sum(1 for d, c in dev_fraud.items()
                      if c and c / dev_total[d] >= device_fraud_share)
    return {
        "records": len(records), "fraud": len(fraud),
        "fraud_rate": len(fraud) / len(records) if records else 0.0,
        "amount_mean": float(amounts.mean()), "amount_median": float(np.median(amounts)),
        "amount_std": float(amounts.std(ddof=1)),
        "users": len({r.user_id for r in records}), "devices": len(dev_total),
        "compromised_devices": compromised,
        "services": len({r.service for r in records}),
        "channels": len({r.channel for r in records}),
        "regions": len({r.geolocation for r in records}),
        "scenarios": dict(sorted(by_scenario.items())),
    }


def write_dataset(records: Iterable[TransactionRecord], out: Union[str, os.PathLike, TextIO]) -> None:
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())

    if hasattr(out, "write"):
        _write(out)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            _write(fh)


# --- ingestion ----------------------------------------------------------------------

class DatasetError(ValueError):
    """Schema or content violation in a transaction CSV."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


def read_dataset(source: Union[str, os.PathLike, TextIO]) -> list:
    """Parse and validate a transaction CSV into records (file order)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError("empty file") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise DatasetError(f"bad header {header!r}; expected {','.join(CSV_HEADER)}", row=1)
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise DatasetError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", row=lineno)
        try:
            rec = TransactionRecord(
                transaction_id=int(row[0]), timestamp=row[1],
                user_id=row[2], device_id=row[3], service=row[4], channel=row[5],
                geolocation=int(row[6]), amount=float(row[7]), fraud_flag=int(row[8]),
                fraud_scenario=row[9])
            datetime.fromisoformat(rec.timestamp)
        except ValueError as exc:
            raise DatasetError(str(exc), row=lineno) from None
        if rec.fraud_flag not in (0, 1):
            raise DatasetError(f"fraud_flag must be 0 or 1, got {rec.fraud_flag}", row=lineno)
        if rec.amount < 0 or not math.isfinite(rec.amount):
            raise DatasetError(f"invalid amount {row[7]!r}", row=lineno)
        if rec.fraud_flag:
            try:
                ScenarioKind.from_label(rec.fraud_scenario)
            except ValueError as exc:
                raise DatasetError(str(exc), row=lineno) from None
        records.append((lineno, rec))
    if not records:
        raise DatasetError("no data rows")
    return records


@dataclass
class IngestedDataset:
    records: list
    stream: EventStream
    user_ids: list
    device_ids: list
    service_names: tuple
    service_weights: tuple


def ingest_dataset(source, services: Sequence[tuple] = DATASET_SERVICES,
                   config: Optional[GeneratorConfig] = None, seed: int = 0) -> IngestedDataset:
    """Map a transaction CSV onto an event stream.

    Records are ordered by timestamp (stable); anomaly signals are synthesized
    from each record's scenario signature with an RNG keyed on
    ``(seed, transaction_id)``.
    """
    config = config or GeneratorConfig(service_zones=tuple(services))
    numbered = read_dataset(source)
    stamps = [datetime.fromisoformat(r.timestamp) for _, r in numbered]
    if any(b < a for a, b in zip(stamps, stamps[1:])):
        log.warning("dataset timestamps out of order; reordering %d records", len(numbered))
        order = sorted(range(len(numbered)), key=lambda i: stamps[i])
        numbered = [numbered[i] for i in order]

    svc_index = {name: i for i, (name, _) in enumerate(services)}
    channel_index = {c.name.lower(): int(c) for c in Channel}
    users: dict = {}
    devices: dict = {}
    cols = {k: [] for k in ("time_index", "user", "device", "context", "service", "txn_id",
                            "amount", "channel", "region", "risk", "s_user", "s_device",
                            "s_context", "attack", "challenge_u")}
    for t, (lineno, r) in enumerate(numbered):
        if r.service not in svc_index:
            raise DatasetError(f"unknown service {r.service!r}", row=lineno)
        if r.channel not in channel_index:
            raise DatasetError(f"unknown channel {r.channel!r}", row=lineno)
        if not (0 <= r.geolocation < max(config.n_regions, 1)):
            raise DatasetError(f"geolocation {r.geolocation} outside [0, {config.n_regions})",
                               row=lineno)
        u = users.setdefault(r.user_id, len(users))
        d = devices.setdefault(r.device_id, len(devices))
        ch = channel_index[r.channel]
        rng = np.random.default_rng([seed, r.transaction_id])
        if r.fraud_flag:
            kind = ScenarioKind.from_label(r.fraud_scenario)
            signals, _ = inject_scenario(kind, rng, config)
            attack = int(kind)
        else:
            signals = benign_signals(rng, config)
            attack = -1
        for k, v in (("time_index", t), ("user", u), ("device", d),
                     ("context", context_index(r.geolocation, ch)),
                     ("service", svc_index[r.service]), ("txn_id", r.transaction_id),
                     ("amount", r.amount), ("channel", ch), ("region", r.geolocation),
                     ("risk", normalized_risk(r.amount, ch, r.geolocation, config.amount_cap)),
                     ("s_user", signals.s_user), ("s_device", signals.s_device),
                     ("s_context", signals.s_context), ("attack", attack),
                     ("challenge_u", float(rng.random()))):
            cols[k].append(v)
    return IngestedDataset(
        records=[r for _, r in numbered], stream=EventStream(**cols),
        user_ids=list(users), device_ids=list(devices),
        service_names=tuple(n for n, _ in services),
        service_weights=tuple(w for _, w in services))


def record_fields() -> tuple:
    return tuple(f.name for f in fields(TransactionRecord))
