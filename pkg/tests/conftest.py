import numpy as np
import pytest

from ztbench.events import AnomalySignals, Channel, Event, ScenarioKind, Transaction
from ztbench.trust import EntityId, EntityKind


def make_event(t=0, user=0, device=0, context=0, service=0, amount=10.0, channel=Channel.WEB,
               region=0, risk=0.1, s=(0.0, 0.0, 0.0), attack=None, challenge=0.5):
    return Event(
        time_index=t,
        user=EntityId(EntityKind.USER, user),
        device=EntityId(EntityKind.DEVICE, device),
        context=EntityId(EntityKind.CONTEXT, context),
        transaction=Transaction(id=t + 1, amount=amount,
                                service=EntityId(EntityKind.SERVICE, service),
                                channel=Channel(channel), geolocation=region,
                                normalized_risk=risk),
        anomaly=AnomalySignals(*s),
        attack=None if attack is None else ScenarioKind(attack),
        challenge_draw=challenge,
    )


@pytest.fixture
def event_factory():
    return make_event


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
