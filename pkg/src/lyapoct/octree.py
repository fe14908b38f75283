"""Octree voxelization: per-depth occupancy, centroid downsampling, and the
quality / workload models evaluated on occupancy counts.

Voxels are addressed by Morton codes, so the cell of a point at depth ``d``
is its depth-``D`` code shifted right by ``3 * (D - d)`` bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, DepthOutOfRange, EmptyCloud
from .pointcloud_io import BoundingCube, PointCloud, bounding_cube

MAX_DEPTH = 21  # 3 * 21 = 63 bits of interleaved coordinates

QUALITY_KINDS = ("voxel-ratio", "log-voxel")
WORKLOAD_KINDS = ("voxel-count", "points-per-voxel-cost")


def _spread_bits(v):
    """Insert two zero bits between each of the low 21 bits of ``v``."""
    v = v.astype(np.uint64) & np.uint64(0x1FFFFF)
    v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
    return v


def cell_indices(xyz, cube: BoundingCube, depth: int):
    """Integer (N, 3) grid indices of each point on the 2^depth grid.

    Points on the far faces of the cube are clamped into the last cell.
    """
    unit = (np.asarray(xyz, dtype=np.float64) - np.asarray(cube.origin)) / cube.side
    idx = np.floor(unit * float(2 ** depth)).astype(np.int64)
    return np.clip(idx, 0, 2 ** depth - 1)


def morton_codes(xyz, cube: BoundingCube, depth: int):
    ijk = cell_indices(xyz, cube, depth)
    return (
        (_spread_bits(ijk[:, 0]) << np.uint64(2))
        | (_spread_bits(ijk[:, 1]) << np.uint64(1))
        | _spread_bits(ijk[:, 2])
    )


def _check_depth(depth, upper=MAX_DEPTH, lower=0):
    if isinstance(depth, bool) or int(depth) != depth or not lower <= depth <= upper:
        raise DepthOutOfRange(f"depth {depth!r} outside [{lower}, {upper}]")


@dataclass(frozen=True)
class DepthSummary:
    """Occupied-voxel counts of one frame for depths 0..max_depth."""

    max_depth: int
    occupied: tuple
    total_points: int
    cube: BoundingCube
    frame_id: str = ""

    def __post_init__(self):
        occ = tuple(int(v) for v in self.occupied)
        object.__setattr__(self, "occupied", occ)
        if len(occ) != self.max_depth + 1:
            raise ValueError(f"need {self.max_depth + 1} occupancy counts, got {len(occ)}")
        if self.total_points < 1 or occ[0] != 1:
            raise ValueError("summary must describe a non-empty cloud (occupied[0] == 1)")
        for d in range(1, len(occ)):
            if not occ[d - 1] <= occ[d] <= min(8 * occ[d - 1], self.total_points):
                raise ValueError(f"occupancy counts violate octree bounds at depth {d}: {occ}")

    def count(self, d):
        _check_depth(d, self.max_depth)
        return self.occupied[d]


def build_summary(cloud: PointCloud, max_depth: int, frame_id: str | None = None) -> DepthSummary:
    if len(cloud) == 0:
        raise EmptyCloud("cannot summarize an empty cloud")
    _check_depth(max_depth, MAX_DEPTH, 1)
    cube = bounding_cube(cloud)
    codes = np.sort(morton_codes(cloud.xyz, cube, max_depth))
    occupied = []
    for d in range(max_depth + 1):
        prefix = codes >> np.uint64(3 * (max_depth - d))
        occupied.append(1 + int(np.count_nonzero(prefix[1:] != prefix[:-1])))
    return DepthSummary(
        max_depth=max_depth,
        occupied=tuple(occupied),
        total_points=len(cloud),
        cube=cube,
        frame_id=cloud.source_name if frame_id is None else frame_id,
    )


def downsample(cloud: PointCloud, depth: int) -> PointCloud:
    """One centroid per occupied voxel at ``depth``, in Morton order.

    Colors, when present, are averaged and rounded.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot downsample an empty cloud")
    _check_depth(depth, MAX_DEPTH, 1)
    cube = bounding_cube(cloud)
    codes = morton_codes(cloud.xyz, cube, depth)
    order = np.argsort(codes, kind="stable")
    sorted_codes = codes[order]
    starts = np.flatnonzero(np.r_[True, sorted_codes[1:] != sorted_codes[:-1]])
    counts = np.diff(np.r_[starts, len(order)])

    xyz = np.add.reduceat(cloud.xyz[order], starts, axis=0) / counts[:, None]
    # keep each centroid inside its own (closed) cell despite summation rounding
    cell = cell_indices(cloud.xyz[order][starts], cube, depth)
    size = cube.side / 2 ** depth
    lo = np.asarray(cube.origin) + cell * size
    xyz = np.clip(xyz, lo, lo + size)

    rgb = None
    if cloud.has_color:
        sums = np.add.reduceat(cloud.rgb[order].astype(np.float64), starts, axis=0)
        rgb = np.rint(sums / counts[:, None]).astype(np.uint8)
    name = f"{cloud.source_name}@d{depth}" if cloud.source_name else f"d{depth}"
    return PointCloud(xyz, rgb, name)


@dataclass(frozen=True)
class QualityModel:
    kind: str = "voxel-ratio"

    def __post_init__(self):
        if self.kind not in QUALITY_KINDS:
            raise ConfigInvalid(f"unknown quality model {self.kind!r}; expected one of {QUALITY_KINDS}")


@dataclass(frozen=True)
class WorkloadModel:
    kind: str = "voxel-count"
    # work-units per voxel
    scale: float = 1e-3

    def __post_init__(self):
        if self.kind not in WORKLOAD_KINDS:
            raise ConfigInvalid(f"unknown workload model {self.kind!r}; expected one of {WORKLOAD_KINDS}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ConfigInvalid(f"workload scale must be positive and finite, got {self.scale!r}")


def quality(summary: DepthSummary, d: int, model: QualityModel = QualityModel()) -> float:
    """Normalized visual quality in [0, 1]; 1.0 at the summary's max depth."""
    n = summary.count(d)
    top = summary.occupied[-1]
    if model.kind == "voxel-ratio":
        return n / top
    if top == 1:
        return 1.0
    return math.log(n) / math.log(top)


def workload(summary: DepthSummary, d: int, model: WorkloadModel = WorkloadModel()) -> float:
    """Work-units enqueued by rendering the frame at depth ``d``."""
    n = summary.count(d)
    if model.kind == "voxel-count":
        return model.scale * n
    return model.scale * summary.total_points * (n / summary.occupied[-1])
