"""Event types and the columnar event stream shared by both decision engines."""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .trust import EntityId, EntityKind


class Channel(enum.IntEnum):
    WEB = 0
    MOBILE = 1
    API = 2
    ATM = 3
    POS = 4


N_CHANNELS = len(Channel)


class ScenarioKind(enum.IntEnum):
    CREDENTIAL_COMPROMISE = 0
    INSIDER_LATERAL = 1
    API_ABUSE = 2
    MONEY_LAUNDERING = 3
    SESSION_HIJACK = 4
    CARD_THEFT = 5
    SYNTHETIC_IDENTITY = 6

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "ScenarioKind":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown fraud scenario {label!r}") from None


SIMULATION_SCENARIOS = tuple(ScenarioKind)[:5]
NO_ATTACK = -1


def context_index(region: int, channel: int) -> int:
    """Contexts are (region, channel) pairs."""
    return int(region) * N_CHANNELS + int(channel)


@dataclass(frozen=True)
class AnomalySignals:
    s_user: float
    s_device: float
    s_context: float

    def __post_init__(self):
        for v in (self.s_user, self.s_device, self.s_context):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"anomaly signal out of [0, 1]: {v!r}")

    def peak(self) -> float:
        return max(self.s_user, self.s_device, self.s_context)


@dataclass(frozen=True)
class Transaction:
    id: int
    amount: float
    service: EntityId
    channel: Channel
    geolocation: int
    normalized_risk: float

    def __post_init__(self):
        if self.amount < 0:
            raise ValueError(f"amount must be non-negative, got {self.amount!r}")
        if not (0.0 <= self.normalized_risk <= 1.0):
            raise ValueError(f"normalized_risk out of [0, 1]: {self.normalized_risk!r}")


@dataclass(frozen=True)
class Event:
    time_index: int
    user: EntityId
    device: EntityId
    context: EntityId
    transaction: Transaction
    anomaly: AnomalySignals
    attack: Optional[ScenarioKind] = None
    challenge_draw: float = 0.5


_COLUMNS = (
    ("time_index", np.int64), ("user", np.int32), ("device", np.int32),
    ("context", np.int32), ("service", np.int32), ("txn_id", np.int64),
    ("amount", np.float64), ("channel", np.int8), ("region", np.int16),
    ("risk", np.float64), ("s_user", np.float64), ("s_device", np.float64),
    ("s_context", np.float64), ("attack", np.int8), ("challenge_u", np.float64),
)
COLUMN_NAMES = tuple(name for name, _ in _COLUMNS)


class EventStream:
    """Struct-of-arrays event stream; ``attack`` holds -1 for benign events."""

    def __init__(self, **columns):
        n = None
        for name, dtype in _COLUMNS:
            arr = np.ascontiguousarray(columns.pop(name), dtype=dtype)
            if n is None:
                n = arr.shape[0]
            elif arr.shape != (n,):
                raise ValueError(f"column {name} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)
        if columns:
            raise TypeError(f"unknown columns: {sorted(columns)}")
        if n and np.any(np.diff(self.time_index) <= 0):
            raise ValueError("time_index must be strictly increasing")

    def __len__(self) -> int:
        return int(self.time_index.shape[0])

    @property
    def n_attacks(self) -> int:
        return int(np.count_nonzero(self.attack >= 0))

    def columns(self) -> dict:
        return {name: getattr(self, name) for name in COLUMN_NAMES}

    def event(self, i: int) -> Event:
        attack = int(self.attack[i])
        return Event(
            time_index=int(self.time_index[i]),
            user=EntityId(EntityKind.USER, int(self.user[i])),
            device=EntityId(EntityKind.DEVICE, int(self.device[i])),
            context=EntityId(EntityKind.CONTEXT, int(self.context[i])),
            transaction=Transaction(
                id=int(self.txn_id[i]),
                amount=float(self.amount[i]),
                service=EntityId(EntityKind.SERVICE, int(self.service[i])),
                channel=Channel(int(self.channel[i])),
                geolocation=int(self.region[i]),
                normalized_risk=float(self.risk[i]),
            ),
            anomaly=AnomalySignals(float(self.s_user[i]), float(self.s_device[i]),
                                   float(self.s_context[i])),
            attack=None if attack < 0 else ScenarioKind(attack),
            challenge_draw=float(self.challenge_u[i]),
        )

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self.event(i)

    @classmethod
    def from_events(cls, events: Sequence[Event]) -> "EventStream":
        cols = {name: [] for name in COLUMN_NAMES}
        for e in events:
            t = e.transaction
            for name, value in (
                ("time_index", e.time_index), ("user", e.user.index),
                ("device", e.device.index), ("context", e.context.index),
                ("service", t.service.index), ("txn_id", t.id), ("amount", t.amount),
                ("channel", int(t.channel)), ("region", t.geolocation),
                ("risk", t.normalized_risk), ("s_user", e.anomaly.s_user),
                ("s_device", e.anomaly.s_device), ("s_context", e.anomaly.s_context),
                ("attack", NO_ATTACK if e.attack is None else int(e.attack)),
                ("challenge_u", e.challenge_draw),
            ):
                cols[name].append(value)
        return cls(**cols)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for name in COLUMN_NAMES:
            h.update(name.encode())
            h.update(getattr(self, name).astype(getattr(self, name).dtype.newbyteorder("<")).tobytes())
        return h.hexdigest()

    def content_equal(self, other: "EventStream") -> bool:
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in COLUMN_NAMES)
