"""Queue-stable octree depth control for point-cloud visualization."""

__version__ = "0.1.0"

from .controller import ControllerConfig, Decision, decide, decide_oracle
from .octree import DepthSummary, QualityModel, WorkloadModel, build_summary, downsample, quality, workload
from .pointcloud_io import (
    BoundingCube,
    Point3,
    PointCloud,
    bounding_cube,
    generate_synthetic_cloud,
    parse_ply,
    read_ply,
    write_ply,
)
from .queue_model import QueueState, ServiceModel, advance, running_average_backlog, service_sample
from .simulator import FrameSource, Policy, SimConfig, Trace, TraceRecord, compare_policies, run

__all__ = [
    "BoundingCube", "ControllerConfig", "Decision", "DepthSummary", "FrameSource", "Point3",
    "PointCloud", "Policy", "QualityModel", "QueueState", "ServiceModel", "SimConfig", "Trace",
    "TraceRecord", "WorkloadModel", "advance", "bounding_cube", "build_summary", "compare_policies",
    "decide", "decide_oracle", "downsample", "generate_synthetic_cloud", "parse_ply", "quality",
    "read_ply", "run", "running_average_backlog", "service_sample", "workload", "write_ply",
]
