"""Discrete-time work queue: Q(t+1) = max(Q(t) + a - b, 0)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, EmptyTrace

SERVICE_KINDS = ("constant", "seeded-uniform")


@dataclass(frozen=True)
class QueueState:
    backlog: float = 0.0
    t: int = 0

    def __post_init__(self):
        if not self.backlog >= 0:
            raise ValueError(f"backlog must be non-negative, got {self.backlog!r}")


def advance(q: QueueState, a: float, b: float) -> QueueState:
    """Enqueue ``a`` work-units, serve up to ``b``, step one slot."""
    if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
        raise ValueError(f"arrivals and service must be finite and >= 0, got a={a!r}, b={b!r}")
    return QueueState(max(q.backlog + a - b, 0.0), q.t + 1)


@dataclass(frozen=True)
class ServiceModel:
    """Per-slot service capacity b(t).

    ``seeded-uniform`` draws b * (1 + u), u ~ U[-jitter, jitter], from a
    generator keyed on ``(seed, t)`` so any slot can be sampled on its own.
    """

    kind: str = "constant"
    rate: float = 8.0
    jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SERVICE_KINDS:
            raise ConfigInvalid(f"unknown service model {self.kind!r}; expected one of {SERVICE_KINDS}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ConfigInvalid(f"service rate must be positive and finite, got {self.rate!r}")
        if not 0 <= self.jitter < 1:
            raise ConfigInvalid(f"jitter must lie in [0, 1), got {self.jitter!r}")

    @property
    def mean(self):
        return self.rate


def service_sample(model: ServiceModel, t: int) -> float:
    if model.kind == "constant" or model.jitter == 0:
        return float(model.rate)
    rng = np.random.default_rng([model.seed & 0xFFFFFFFFFFFFFFFF, t])
    u = rng.uniform(-model.jitter, model.jitter)
    return float(model.rate * (1.0 + u))


def running_average_backlog(backlogs) -> float:
    """Mean of Q(0), ..., Q(t-1): the finite-horizon delay-constraint value."""
    values = list(backlogs)
    if not values:
        raise EmptyTrace("cannot average an empty backlog trace")
    return math.fsum(values) / len(values)
