"""Trust model: composite trust score and exponential-smoothing adaptation.

Identity, device and context scores live in ``[0, 1]``. Every write goes
through :func:`clip`, so a :class:`TrustState` can never hold an
out-of-range value.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_PRIOR = 0.8


class EntityKind(str, enum.Enum):
    USER = "user"
    DEVICE = "device"
    CONTEXT = "context"
    SERVICE = "service"


@dataclass(frozen=True, order=True)
class EntityId:
    kind: EntityKind
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"entity index must be non-negative, got {self.index}")


class ConfigError(ValueError):
    """Raised for invalid model or policy parameters."""


def _check_unit(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class TrustWeights:
    """Weights of the composite trust score (identity, device, inverse risk, context)."""

    w_identity: float = 0.30
    w_device: float = 0.25
    w_risk: float = 0.25
    w_context: float = 0.20

    def __post_init__(self):
        ws = self.as_tuple()
        if any(w < 0 or not math.isfinite(w) for w in ws):
            raise ConfigError(f"trust weights must be finite and non-negative: {ws}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ConfigError(f"trust weights must sum to 1, got {sum(ws)!r}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w_identity, self.w_device, self.w_risk, self.w_context)

    @classmethod
    def normalized(cls, w_identity, w_device, w_risk, w_context) -> "TrustWeights":
        total = w_identity + w_device + w_risk + w_context
        if total <= 0:
            raise ConfigError("weights must have a positive sum")
        return cls(w_identity / total, w_device / total, w_risk / total, w_context / total)


@dataclass(frozen=True)
class AdaptationParams:
    eta_identity: float = 0.15
    eta_device: float = 0.10
    eta_context: float = 0.10
    epsilon: float = 1e-6

    def __post_init__(self):
        for name in ("eta_identity", "eta_device", "eta_context"):
            _check_eta(getattr(self, name), name)
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon!r}")


def _check_eta(eta: float, name: str = "eta") -> None:
    if not (0.0 < eta <= 1.0):
        raise ConfigError(f"{name} must lie in (0, 1], got {eta!r}")


def clip(x: float) -> float:
    """Saturate ``x`` to ``[0, 1]``."""
    if not math.isfinite(x):
        raise ValueError("non-finite trust value")
    return min(1.0, max(0.0, x))


def g_map(s: float) -> float:
    """Map an anomaly score to a trust target: benign (0) -> 1, anomalous (1) -> 0."""
    _check_unit("anomaly score", s)
    return 1.0 - s


def update_trust(current: float, anomaly: float, eta: float) -> float:
    """One exponential-smoothing step toward ``g_map(anomaly)``."""
    _check_eta(eta)
    _check_unit("trust score", current)
    return clip((1.0 - eta) * current + eta * g_map(anomaly))


def composite_trust(weights: TrustWeights, identity: float, device: float,
                    txn_risk: float, context: float) -> float:
    for name, v in (("identity", identity), ("device", device),
                    ("txn_risk", txn_risk), ("context", context)):
        _check_unit(name, v)
    return (weights.w_identity * identity + weights.w_device * device
            + weights.w_risk * (1.0 - txn_risk) + weights.w_context * context)


class TrustState:
    """Per-entity identity/device/context scores.

    Storage is one float array per kind, indexed by entity index and grown on
    demand; unseen entities read as ``prior``. Single writer per run.
    """

    _KINDS = (EntityKind.USER, EntityKind.DEVICE, EntityKind.CONTEXT)

    def __init__(self, n_users: int = 0, n_devices: int = 0, n_contexts: int = 0,
                 prior: float = DEFAULT_PRIOR):
        _check_unit("prior", prior)
        self.prior = prior
        self.identity = np.full(n_users, prior)
        self.device = np.full(n_devices, prior)
        self.context = np.full(n_contexts, prior)

    def _array(self, kind: EntityKind) -> np.ndarray:
        if kind is EntityKind.USER:
            return self.identity
        if kind is EntityKind.DEVICE:
            return self.device
        if kind is EntityKind.CONTEXT:
            return self.context
        raise KeyError(f"no trust score for {kind}")

    def ensure(self, kind: EntityKind, index: int) -> np.ndarray:
        arr = self._array(kind)
        if index >= arr.shape[0]:
            grown = np.full(max(index + 1, 2 * arr.shape[0]), self.prior)
            grown[: arr.shape[0]] = arr
            if kind is EntityKind.USER:
                self.identity = grown
            elif kind is EntityKind.DEVICE:
                self.device = grown
            else:
                self.context = grown
            arr = grown
        return arr

    def get(self, entity: EntityId) -> float:
        arr = self._array(entity.kind)
        if entity.index >= arr.shape[0]:
            return self.prior
        return float(arr[entity.index])

    def set(self, entity: EntityId, value: float) -> None:
        self.ensure(entity.kind, entity.index)[entity.index] = clip(value)

    def snapshot(self) -> "TrustState":
        other = TrustState(prior=self.prior)
        other.identity = self.identity.copy()
        other.device = self.device.copy()
        other.context = self.context.copy()
        return other

    def __eq__(self, other):
        if not isinstance(other, TrustState):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in (
            (self.identity, other.identity), (self.device, other.device),
            (self.context, other.context)))
