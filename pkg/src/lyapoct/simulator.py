"""Closed-loop simulation of depth control against the work queue.

One slot: observe Q(t), choose a depth (controller or fixed), enqueue the
frame's workload at that depth, serve b(t), advance. Frames cycle when the
sequence is shorter than the horizon.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

from .controller import ControllerConfig, decide
from .errors import ConfigInvalid, RegimeInvalid
from .octree import DepthSummary, build_summary, quality, workload
from .pointcloud_io import generate_synthetic_cloud, read_ply
from .queue_model import QueueState, ServiceModel, advance, running_average_backlog, service_sample

TRACE_COLUMNS = ("t", "frame_id", "q_before", "d_star", "quality", "arrivals", "service", "q_after", "score")


@dataclass(frozen=True)
class FrameSource:
    """Where frames come from: a PLY file/directory or a synthetic generator."""

    kind: str = "synthetic"
    path: Optional[str] = None
    count: int = 20000
    seed: int = 1
    distribution: str = "clustered"

    def __post_init__(self):
        if self.kind not in ("synthetic", "ply"):
            raise ConfigInvalid(f"unknown frame source kind {self.kind!r}")
        if self.kind == "ply" and not self.path:
            raise ConfigInvalid("ply frame source needs a path")
        if self.kind == "synthetic" and self.count < 1:
            raise ConfigInvalid(f"synthetic frame count must be >= 1, got {self.count}")

    @classmethod
    def parse(cls, text: str) -> "FrameSource":
        """Accept ``synthetic:count=N,seed=S[,distribution=D]`` or a path."""
        if not text.startswith("synthetic"):
            return cls(kind="ply", path=text)
        params = {}
        _, _, rest = text.partition(":")
        for item in filter(None, rest.split(",")):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigInvalid(f"bad synthetic frame parameter {item!r}")
            params[key.strip()] = value.strip()
        unknown = set(params) - {"count", "seed", "distribution"}
        if unknown:
            raise ConfigInvalid(f"unknown synthetic frame parameters {sorted(unknown)}")
        try:
            kwargs = {k: (v if k == "distribution" else int(v)) for k, v in params.items()}
            return cls(kind="synthetic", **kwargs)
        except ValueError as exc:
            raise ConfigInvalid(f"bad synthetic frame spec {text!r}: {exc}") from None

    def describe(self) -> str:
        if self.kind == "ply":
            return str(self.path)
        return f"synthetic:count={self.count},seed={self.seed},distribution={self.distribution}"

    def files(self):
        """PLY files in frame order (lexicographic within a directory)."""
        if self.kind != "ply":
            return []
        p = Path(self.path)
        if p.is_dir():
            files = sorted((f for f in p.iterdir() if f.suffix.lower() == ".ply"), key=lambda f: f.name)
            if not files:
                raise FileNotFoundError(f"no .ply files in {p}")
            return files
        if not p.exists():
            raise FileNotFoundError(f"no such frame input {p}")
        return [p]

    def load(self):
        if self.kind == "synthetic":
            return [generate_synthetic_cloud(self.count, self.seed, self.distribution)]
        return [read_ply(f) for f in self.files()]


def summarize_frames(frames, max_depth: int):
    """DepthSummary per distinct frame; already-built summaries pass through."""
    if isinstance(frames, FrameSource):
        frames = frames.load()
    out = []
    cache = {}
    for f in frames:
        if isinstance(f, DepthSummary):
            out.append(f)
            continue
        key = id(f)
        if key not in cache:
            cache[key] = build_summary(f, max_depth)
        out.append(cache[key])
    if not out:
        raise ConfigInvalid("frame sequence is empty")
    return tuple(out)


@dataclass(frozen=True)
class Policy:
    kind: str = "proposed"
    fixed_d: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("proposed", "fixed-depth"):
            raise ConfigInvalid(f"unknown policy {self.kind!r}")
        if self.kind == "fixed-depth" and self.fixed_d is None:
            raise ConfigInvalid("fixed-depth policy needs fixed_d")

    @classmethod
    def fixed(cls, d):
        return cls("fixed-depth", int(d))

    def label(self):
        return "proposed" if self.kind == "proposed" else f"fixed:{self.fixed_d}"


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 1000
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    service: ServiceModel = field(default_factory=ServiceModel)
    frames: Union[FrameSource, Sequence] = field(default_factory=FrameSource)
    policy: Policy = field(default_factory=Policy)
    # overrides service.seed when set
    seed: Optional[int] = None
    # octree depth used for summaries; defaults to max of the candidate set
    max_depth: Optional[int] = None

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigInvalid(f"horizon must be a positive integer, got {self.horizon!r}")
        if self.policy.kind == "fixed-depth" and self.policy.fixed_d not in self.controller.depths:
            raise ConfigInvalid(
                f"fixed depth {self.policy.fixed_d} not in candidate set {self.controller.depths}"
            )
        if self.max_depth is not None and self.max_depth < self.controller.depths[-1]:
            raise ConfigInvalid(
                f"max_depth {self.max_depth} is below the deepest candidate {self.controller.depths[-1]}"
            )

    @property
    def summary_depth(self):
        return self.max_depth if self.max_depth is not None else self.controller.depths[-1]

    @property
    def effective_service(self) -> ServiceModel:
        if self.seed is None:
            return self.service
        return replace(self.service, seed=int(self.seed))


class TraceRecord(NamedTuple):
    t: int
    frame_id: str
    q_before: float
    d_star: int
    quality: float
    arrivals: float
    service: float
    q_after: float
    score: float


@dataclass(frozen=True)
class Trace:
    records: tuple
    policy: str = "proposed"

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    @property
    def backlogs(self):
        """Q(0), ..., Q(T-1)."""
        return self.column("q_before")

    @property
    def time_average_quality(self):
        return math.fsum(self.column("quality")) / len(self.records)

    @property
    def time_average_backlog(self):
        return running_average_backlog(self.backlogs)

    @property
    def final_backlog(self):
        return self.records[-1].q_after

    def stats(self):
        return {
            "policy": self.policy,
            "horizon": len(self.records),
            "time_average_quality": self.time_average_quality,
            "time_average_backlog": self.time_average_backlog,
            "final_backlog": self.final_backlog,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.records:
            writer.writerow([
                r.t, r.frame_id, repr(r.q_before), r.d_star, repr(r.quality),
                repr(r.arrivals), repr(r.service), repr(r.q_after), repr(r.score),
            ])
        return buf.getvalue()


def run(cfg: SimConfig, summaries=None) -> Trace:
    """Simulate ``cfg.horizon`` slots. ``summaries`` skips frame loading."""
    if summaries is None:
        summaries = summarize_frames(cfg.frames, cfg.summary_depth)
    summaries = tuple(summaries)
    if not summaries:
        raise ConfigInvalid("frame sequence is empty")
    shallowest = min(s.max_depth for s in summaries)
    if cfg.controller.depths[-1] > shallowest:
        raise ConfigInvalid(
            f"candidate depth {cfg.controller.depths[-1]} exceeds frame summary depth {shallowest}"
        )

    ctl = cfg.controller
    service = cfg.effective_service
    fixed = cfg.policy.kind == "fixed-depth"
    q = QueueState(0.0, 0)
    records = []
    for t in range(cfg.horizon):
        summary = summaries[t % len(summaries)]
        if fixed:
            d = cfg.policy.fixed_d
            p = quality(summary, d, ctl.quality_model)
            a = workload(summary, d, ctl.workload_model)
            score = ctl.V * p - q.backlog * a
        else:
            decision = decide(q, summary, ctl)
            d, score = decision.depth, decision.score
            chosen = decision.candidate
            p, a = chosen.quality, chosen.workload
        b = service_sample(service, t)
        nxt = advance(q, a, b)
        records.append(TraceRecord(t, summary.frame_id, q.backlog, d, p, a, b, nxt.backlog, score))
        q = nxt
    return Trace(tuple(records), cfg.policy.label())


class Comparison(NamedTuple):
    fixed_min: Trace
    fixed_max: Trace
    proposed: Trace


def regime_rates(cfg: SimConfig, summaries):
    """(a_min, mean service, a_max) averaged over the frame sequence."""
    ctl = cfg.controller
    lo, hi = ctl.depths[0], ctl.depths[-1]
    a_min = math.fsum(workload(s, lo, ctl.workload_model) for s in summaries) / len(summaries)
    a_max = math.fsum(workload(s, hi, ctl.workload_model) for s in summaries) / len(summaries)
    return a_min, cfg.service.mean, a_max


def compare_policies(cfg: SimConfig, summaries=None) -> Comparison:
    """Run min-depth, max-depth and proposed policies on identical inputs.

    Raises RegimeInvalid unless a(min depth) < mean service < a(max depth).
    """
    if summaries is None:
        summaries = summarize_frames(cfg.frames, cfg.summary_depth)
    a_min, b_mean, a_max = regime_rates(cfg, summaries)
    if not a_min < b_mean < a_max:
        raise RegimeInvalid(a_min, b_mean, a_max)
    depths = cfg.controller.depths
    return Comparison(
        fixed_min=run(replace(cfg, policy=Policy.fixed(depths[0])), summaries),
        fixed_max=run(replace(cfg, policy=Policy.fixed(depths[-1])), summaries),
        proposed=run(replace(cfg, policy=Policy()), summaries),
    )
