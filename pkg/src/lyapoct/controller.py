"""Per-slot drift-plus-penalty depth selection.

Each slot picks the octree depth d in R that maximizes

    V * quality(d) - Q(t) * workload(d)

where Q(t) is the current backlog. Larger V favors quality, smaller V
favors draining the queue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigInvalid, DepthOutOfRange, EmptyCandidateSet
from .octree import DepthSummary, QualityModel, WorkloadModel, quality, workload
from .queue_model import QueueState

TIE_BREAKS = ("lowest-depth", "highest-depth")


@dataclass(frozen=True)
class ControllerConfig:
    V: float = 1000.0
    depths: tuple = (5, 6, 7)
    quality_model: QualityModel = field(default_factory=QualityModel)
    workload_model: WorkloadModel = field(default_factory=WorkloadModel)
    tie_break: str = "lowest-depth"

    def __post_init__(self):
        depths = tuple(sorted(set(int(d) for d in self.depths)))
        if not depths:
            raise EmptyCandidateSet("candidate depth set is empty")
        if depths[0] < 1:
            raise ConfigInvalid(f"candidate depths must be positive, got {depths}")
        object.__setattr__(self, "depths", depths)
        if not (self.V >= 0 and math.isfinite(self.V)):
            raise ConfigInvalid(f"V must be finite and >= 0, got {self.V!r}")
        if self.tie_break not in TIE_BREAKS:
            raise ConfigInvalid(f"unknown tie-break {self.tie_break!r}; expected one of {TIE_BREAKS}")


@dataclass(frozen=True)
class Candidate:
    depth: int
    quality: float
    workload: float
    score: float


@dataclass(frozen=True)
class Decision:
    depth: int
    score: float
    per_candidate: tuple = ()
    # objective evaluations spent producing this decision
    evaluations: int = 0

    @property
    def candidate(self) -> Candidate:
        return next(c for c in self.per_candidate if c.depth == self.depth)


def _validate(summary, cfg):
    if not cfg.depths:
        raise EmptyCandidateSet("candidate depth set is empty")
    if cfg.depths[-1] > summary.max_depth:
        raise DepthOutOfRange(
            f"candidate depth {cfg.depths[-1]} exceeds summary max depth {summary.max_depth}"
        )


def decide(q: QueueState, summary: DepthSummary, cfg: ControllerConfig) -> Decision:
    _validate(summary, cfg)
    accept_equal = cfg.tie_break == "highest-depth"
    best_d = None
    best = -math.inf
    evaluated = []
    for d in cfg.depths:
        p = quality(summary, d, cfg.quality_model)
        a = workload(summary, d, cfg.workload_model)
        score = cfg.V * p - q.backlog * a
        evaluated.append(Candidate(d, p, a, score))
        if best_d is None or score > best or (accept_equal and score == best):
            best, best_d = score, d
    return Decision(best_d, best, tuple(evaluated), len(evaluated))


def decide_oracle(q: QueueState, summary: DepthSummary, cfg: ControllerConfig) -> Decision:
    """Brute-force reference for :func:`decide`: score all, then filter."""
    _validate(summary, cfg)
    table = {}
    for d in cfg.depths:
        p = quality(summary, d, cfg.quality_model)
        a = workload(summary, d, cfg.workload_model)
        table[d] = (p, a, cfg.V * p - q.backlog * a)
    top = max(s for _, _, s in table.values())
    winners = [d for d, (_, _, s) in table.items() if s == top]
    d_star = min(winners) if cfg.tie_break == "lowest-depth" else max(winners)
    rows = tuple(Candidate(d, *table[d]) for d in sorted(table))
    return Decision(d_star, top, rows, len(rows))
