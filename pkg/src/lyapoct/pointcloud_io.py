"""PLY reading/writing, synthetic clouds and the octree root cube.

Only ``ascii 1.0`` and ``binary_little_endian 1.0`` bodies are accepted.
Coordinates are held as float64 regardless of the on-disk scalar kind.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .errors import BadScalar, EmptyCloud, MalformedHeader, TruncatedBody

ASCII = "ascii-1.0"
BINARY_LE = "binary-little-endian-1.0"

_FORMATS = {
    "ascii": ASCII,
    "binary_little_endian": BINARY_LE,
}

# PLY scalar names -> little-endian numpy dtype codes
SCALAR_KINDS = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
}

_COLOR_NAMES = (("red", "green", "blue"), ("r", "g", "b"), ("diffuse_red", "diffuse_green", "diffuse_blue"))


class Point3(NamedTuple):
    x: float
    y: float
    z: float
    r: Optional[int] = None
    g: Optional[int] = None
    b: Optional[int] = None


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An ordered, immutable set of 3D points with optional RGB colors.

    ``xyz`` is an (N, 3) float64 array, ``rgb`` an (N, 3) uint8 array or None.
    """

    xyz: np.ndarray
    rgb: Optional[np.ndarray] = None
    source_name: str = ""

    def __post_init__(self):
        xyz = np.array(self.xyz, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(xyz)):
            raise ValueError("point coordinates must be finite")
        xyz.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        if self.rgb is not None:
            rgb = np.array(self.rgb)
            if rgb.shape != xyz.shape:
                raise ValueError(f"rgb shape {rgb.shape} does not match xyz shape {xyz.shape}")
            if rgb.size and (rgb.min() < 0 or rgb.max() > 255):
                raise ValueError("color channels must lie in [0, 255]")
            rgb = rgb.astype(np.uint8)
            rgb.setflags(write=False)
            object.__setattr__(self, "rgb", rgb)

    @classmethod
    def from_points(cls, points, source_name=""):
        """Build from an iterable of Point3 (or plain 3-/6-tuples)."""
        pts = [Point3(*p) for p in points]
        xyz = np.array([(p.x, p.y, p.z) for p in pts], dtype=np.float64).reshape(-1, 3)
        rgb = None
        if pts and all(p.r is not None for p in pts):
            rgb = np.array([(p.r, p.g, p.b) for p in pts])
        return cls(xyz, rgb, source_name)

    def __len__(self):
        return self.xyz.shape[0]

    def __iter__(self) -> Iterator[Point3]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i) -> Point3:
        x, y, z = (float(v) for v in self.xyz[i])
        if self.rgb is None:
            return Point3(x, y, z)
        r, g, b = (int(v) for v in self.rgb[i])
        return Point3(x, y, z, r, g, b)

    @property
    def has_color(self):
        return self.rgb is not None

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        if self.has_color != other.has_color:
            return False
        if not np.array_equal(self.xyz, other.xyz):
            return False
        return self.rgb is None or np.array_equal(self.rgb, other.rgb)

    def allclose(self, other, atol=1e-6):
        """Point-for-point equality with a coordinate tolerance."""
        if len(self) != len(other) or self.has_color != other.has_color:
            return False
        if not np.allclose(self.xyz, other.xyz, rtol=0.0, atol=atol):
            return False
        return self.rgb is None or np.array_equal(self.rgb, other.rgb)

    __hash__ = None


@dataclass(frozen=True)
class PlyProperty:
    name: str
    kind: str
    # element-count scalar kind for list properties, else None
    count_kind: Optional[str] = None

    @property
    def is_list(self):
        return self.count_kind is not None


@dataclass(frozen=True)
class PlyElement:
    name: str
    count: int
    properties: tuple = ()

    def has_lists(self):
        return any(p.is_list for p in self.properties)


@dataclass(frozen=True)
class PlyHeader:
    format: str
    vertex_count: int
    properties: tuple
    comments: tuple = ()
    elements: tuple = field(default=(), repr=False)
    body_offset: int = field(default=0, repr=False)
    header_lines: int = field(default=0, repr=False)

    @property
    def vertex_element(self) -> PlyElement:
        return next(e for e in self.elements if e.name == "vertex")


@dataclass(frozen=True)
class BoundingCube:
    """Axis-aligned cube given by its minimum corner and side length."""

    origin: tuple
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ValueError(f"cube side must be positive, got {self.side}")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "side", float(self.side))

    def contains(self, xyz):
        """Boolean mask of which rows of ``xyz`` lie inside the closed cube."""
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        lo = np.asarray(self.origin)
        return np.all((xyz >= lo) & (xyz <= lo + self.side), axis=1)


def parse_header(data: bytes) -> PlyHeader:
    """Decode the header of a PLY byte string."""
    if not data.startswith(b"ply") or data[3:4] not in (b"\n", b"\r"):
        raise MalformedHeader("missing 'ply' magic line", 1, "line")

    fmt = None
    comments = []
    elements = []
    pos = 0
    lineno = 0
    while True:
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise MalformedHeader("header is not terminated by end_header", lineno + 1, "line")
        raw = data[pos:nl]
        pos = nl + 1
        lineno += 1
        try:
            line = raw.decode("ascii").strip()
        except UnicodeDecodeError:
            raise MalformedHeader("non-ASCII header line", lineno, "line") from None
        if lineno == 1:
            continue
        if line == "end_header":
            break
        if not line:
            continue
        words = line.split()
        key = words[0]
        if key == "format":
            if len(words) != 3 or words[2] != "1.0":
                raise MalformedHeader(f"bad format line {line!r}", lineno, "line")
            if words[1] not in _FORMATS:
                raise MalformedHeader(f"unsupported format {words[1]!r}", lineno, "line")
            fmt = _FORMATS[words[1]]
        elif key in ("comment", "obj_info"):
            comments.append(line[len(key):].strip())
        elif key == "element":
            if len(words) != 3:
                raise MalformedHeader(f"bad element line {line!r}", lineno, "line")
            try:
                count = int(words[2])
            except ValueError:
                raise MalformedHeader(f"bad element count {words[2]!r}", lineno, "line") from None
            if count < 0:
                raise MalformedHeader("negative element count", lineno, "line")
            elements.append([words[1], count, []])
        elif key == "property":
            if not elements:
                raise MalformedHeader("property before any element", lineno, "line")
            if len(words) == 3 and words[1] in SCALAR_KINDS:
                prop = PlyProperty(words[2], words[1])
            elif (len(words) == 5 and words[1] == "list"
                  and words[2] in SCALAR_KINDS and words[3] in SCALAR_KINDS):
                prop = PlyProperty(words[4], words[3], words[2])
            else:
                raise MalformedHeader(f"bad property line {line!r}", lineno, "line")
            elements[-1][2].append(prop)
        else:
            raise MalformedHeader(f"unknown header keyword {key!r}", lineno, "line")

    if fmt is None:
        raise MalformedHeader("no format line", lineno, "line")
    elems = tuple(PlyElement(n, c, tuple(p)) for n, c, p in elements)
    vertex = [e for e in elems if e.name == "vertex"]
    if not vertex:
        raise MalformedHeader("no vertex element", lineno, "line")
    vertex = vertex[0]
    names = {p.name for p in vertex.properties if not p.is_list}
    if not {"x", "y", "z"} <= names:
        raise MalformedHeader("vertex element lacks x, y, z properties", lineno, "line")
    return PlyHeader(
        format=fmt,
        vertex_count=vertex.count,
        properties=tuple((p.name, p.kind) for p in vertex.properties),
        comments=tuple(comments),
        elements=elems,
        body_offset=pos,
        header_lines=lineno,
    )


def _color_columns(names):
    for triple in _COLOR_NAMES:
        if all(n in names for n in triple):
            return triple
    return None


def _check_finite(xyz, locate):
    bad = ~np.all(np.isfinite(xyz), axis=1)
    if bad.any():
        i = int(np.argmax(bad))
        raise BadScalar(f"non-finite coordinate in vertex {i}", *locate(i))


def _assemble(columns, header, source_name, locate):
    xyz = np.column_stack([np.asarray(columns[n], dtype=np.float64) for n in "xyz"]) \
        if header.vertex_count else np.zeros((0, 3))
    _check_finite(xyz, locate)
    rgb = None
    triple = _color_columns(columns)
    if triple is not None:
        rgb = np.column_stack([np.asarray(columns[n]) for n in triple]) \
            if header.vertex_count else np.zeros((0, 3), dtype=np.uint8)
        if rgb.size and (rgb.min() < 0 or rgb.max() > 255):
            i = int(np.argmax((rgb < 0).any(axis=1) | (rgb > 255).any(axis=1)))
            raise BadScalar(f"color out of [0, 255] in vertex {i}", *locate(i))
    return PointCloud(xyz, rgb, source_name)


# -- binary ------------------------------------------------------------------

def _fixed_dtype(element):
    return np.dtype([(f"p{i}", SCALAR_KINDS[p.kind]) for i, p in enumerate(element.properties)])


def _walk_list_records(data, pos, element, keep=False):
    """Step over records of an element with list properties one at a time."""
    rows = []
    for r in range(element.count):
        row = {}
        for p in element.properties:
            if p.is_list:
                ct = np.dtype(SCALAR_KINDS[p.count_kind])
                if pos + ct.itemsize > len(data):
                    raise TruncatedBody(f"{element.name} record {r} of {element.count} truncated", pos)
                n = int(np.frombuffer(data, ct, 1, pos)[0])
                pos += ct.itemsize
                if n < 0:
                    raise BadScalar(f"negative list length in {element.name} record {r}", pos - ct.itemsize)
            else:
                n = 1
            vt = np.dtype(SCALAR_KINDS[p.kind])
            need = n * vt.itemsize
            if pos + need > len(data):
                raise TruncatedBody(f"{element.name} record {r} of {element.count} truncated", pos)
            if keep and not p.is_list:
                row[p.name] = np.frombuffer(data, vt, 1, pos)[0]
            pos += need
        if keep:
            rows.append(row)
    return pos, rows


def _parse_binary(data, header, source_name):
    pos = header.body_offset
    for element in header.elements:
        if element.name != "vertex":
            if element.has_lists():
                pos, _ = _walk_list_records(data, pos, element)
            else:
                size = _fixed_dtype(element).itemsize * element.count
                if pos + size > len(data):
                    raise TruncatedBody(f"{element.name} element truncated", len(data))
                pos += size
            continue

        n = element.count
        if element.has_lists():
            start = pos
            pos, rows = _walk_list_records(data, pos, element, keep=True)
            names = [p.name for p in element.properties if not p.is_list]
            columns = {k: np.array([row[k] for row in rows]) for k in names}
            return _assemble(columns, header, source_name, lambda i: (start, "byte"))

        dt = _fixed_dtype(element)
        avail = (len(data) - pos) // dt.itemsize if dt.itemsize else n
        if avail < n:
            raise TruncatedBody(
                f"vertex element declares {n} records, body holds {avail}",
                pos + avail * dt.itemsize,
            )
        rec = np.frombuffer(data, dt, n, pos)
        columns = {p.name: rec[f"p{i}"] for i, p in enumerate(element.properties)}
        start = pos
        return _assemble(columns, header, source_name,
                         lambda i: (start + i * dt.itemsize, "byte"))
    raise MalformedHeader("no vertex element")  # unreachable: parse_header checks


# -- ascii -------------------------------------------------------------------

def _parse_ascii(data, header, source_name):
    lines = data[header.body_offset:].split(b"\n")
    if lines and not lines[-1]:
        lines.pop()
    first_line = header.header_lines + 1
    idx = 0

    def next_record(what, r, total):
        nonlocal idx
        while idx < len(lines) and not lines[idx].strip():
            idx += 1
        if idx >= len(lines):
            raise TruncatedBody(f"{what} declares {total} records, body ends at record {r}",
                                first_line + idx, "line")
        line = lines[idx]
        idx += 1
        return line, first_line + idx - 1

    for element in header.elements:
        if element.name != "vertex":
            for r in range(element.count):
                next_record(element.name, r, element.count)
            continue

        props = element.properties
        if not element.has_lists():
            fast = _ascii_fixed_block(lines, idx, element)
            if fast is not None:
                start = first_line + idx
                return _assemble(fast, header, source_name, lambda i: (start + i, "line"))
        columns = {p.name: [] for p in props if not p.is_list}
        linenos = []
        for r in range(element.count):
            line, lineno = next_record("vertex element", r, element.count)
            linenos.append(lineno)
            tokens = line.split()
            t = 0
            for p in props:
                if p.is_list:
                    if t >= len(tokens):
                        raise BadScalar("missing list length", lineno, "line")
                    try:
                        n = int(tokens[t])
                    except ValueError:
                        raise BadScalar(f"bad list length {tokens[t]!r}", lineno, "line") from None
                    t += 1 + n
                    continue
                if t >= len(tokens):
                    raise BadScalar(f"missing value for property {p.name!r}", lineno, "line")
                try:
                    value = float(tokens[t])
                except ValueError:
                    raise BadScalar(f"unparsable {p.kind} {tokens[t]!r} for {p.name!r}",
                                    lineno, "line") from None
                columns[p.name].append(value)
                t += 1
            if t > len(tokens):
                raise BadScalar("list runs past end of record", lineno, "line")
        return _assemble(columns, header, source_name, lambda i: (linenos[i], "line"))
    raise MalformedHeader("no vertex element")


def _ascii_fixed_block(lines, idx, element):
    """Vectorized read of a list-free vertex block, or None to fall back.

    Only taken when the next ``count`` lines are all non-blank and each holds
    exactly one token per property; the slow path handles everything else
    and produces positioned errors.
    """
    n, k = element.count, len(element.properties)
    if n == 0:
        return {p.name: np.zeros(0) for p in element.properties}
    block = lines[idx:idx + n]
    if len(block) < n:
        return None
    try:
        values = np.loadtxt(io.BytesIO(b"\n".join(block)), dtype=np.float64,
                            comments=None, ndmin=2)
    except ValueError:
        return None
    if values.shape != (n, k):
        return None
    return {p.name: values[:, i] for i, p in enumerate(element.properties)}


def parse_ply(data: bytes, source_name: str = "") -> PointCloud:
    """Parse PLY bytes into a PointCloud in file order.

    Extra vertex properties and non-vertex elements are skipped; anything
    after the last needed record is ignored.
    """
    data = bytes(data)
    header = parse_header(data)
    if header.format == BINARY_LE:
        return _parse_binary(data, header, source_name)
    return _parse_ascii(data, header, source_name)


def read_ply(path) -> PointCloud:
    from pathlib import Path

    path = Path(path)
    return parse_ply(path.read_bytes(), source_name=path.stem)


def write_ply(cloud: PointCloud, format: str = BINARY_LE) -> bytes:
    """Serialize ``cloud`` as PLY (double coordinates, uchar colors)."""
    if format in ("ascii", ASCII):
        fmt_word = "ascii"
    elif format in ("binary", "binary_little_endian", BINARY_LE):
        fmt_word = "binary_little_endian"
    else:
        raise ValueError(f"unsupported PLY format {format!r}")

    head = ["ply", f"format {fmt_word} 1.0"]
    if cloud.source_name:
        head.append(f"comment source {cloud.source_name}")
    head += [f"element vertex {len(cloud)}",
             "property double x", "property double y", "property double z"]
    if cloud.has_color:
        head += ["property uchar red", "property uchar green", "property uchar blue"]
    head.append("end_header")
    out = ("\n".join(head) + "\n").encode("ascii")

    if fmt_word == "binary_little_endian":
        fields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8")]
        if cloud.has_color:
            fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
        rec = np.empty(len(cloud), dtype=fields)
        rec["x"], rec["y"], rec["z"] = cloud.xyz.T
        if cloud.has_color:
            rec["red"], rec["green"], rec["blue"] = cloud.rgb.T
        return out + rec.tobytes()

    rows = []
    for i in range(len(cloud)):
        vals = [repr(float(v)) for v in cloud.xyz[i]]
        if cloud.has_color:
            vals += [str(int(v)) for v in cloud.rgb[i]]
        rows.append(" ".join(vals))
    body = "".join(r + "\n" for r in rows)
    return out + body.encode("ascii")


def generate_synthetic_cloud(count: int, seed: int = 0, distribution: str = "uniform") -> PointCloud:
    """Seeded random cloud inside the unit cube.

    ``uniform`` samples the cube uniformly; ``clustered`` draws from eight
    Gaussian blobs and clips to the cube.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    if distribution in ("uniform", "uniform-in-unit-cube"):
        xyz = rng.random((count, 3))
    elif distribution == "clustered":
        k = 8
        centers = rng.uniform(0.15, 0.85, size=(k, 3))
        spread = rng.uniform(0.02, 0.08, size=k)
        which = rng.integers(0, k, size=count)
        xyz = centers[which] + rng.normal(size=(count, 3)) * spread[which, None]
        xyz = np.clip(xyz, 0.0, 1.0)
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    return PointCloud(xyz, None, f"synthetic-{distribution}-n{count}-s{seed}")


def bounding_cube(cloud: PointCloud) -> BoundingCube:
    """Smallest cube containing the cloud, centred on its bounding box.

    A cloud with zero extent gets a unit cube centred on its single location.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot bound an empty cloud")
    lo = cloud.xyz.min(axis=0)
    hi = cloud.xyz.max(axis=0)
    extent = hi - lo
    side = float(extent.max())
    if side == 0.0:
        side = 1.0
    origin = np.minimum(lo - (side - extent) / 2.0, lo)
    # centring can round the far face inward by an ulp
    while np.any(origin + side < hi):
        side = float(np.nextafter(side, np.inf))
    return BoundingCube(tuple(origin), side)
