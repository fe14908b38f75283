import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lyapoct.errors import BadScalar, EmptyCloud, MalformedHeader, TruncatedBody
from lyapoct.pointcloud_io import (
    ASCII,
    BINARY_LE,
    Point3,
    PointCloud,
    bounding_cube,
    generate_synthetic_cloud,
    parse_header,
    parse_ply,
    write_ply,
)
from oracles import brute_force_occupancy, header_vertex_count

TRIANGLE_ASCII = b"""ply
format ascii 1.0
comment hand built
element vertex 3
property float x
property float y
property float z
end_header
0 0 0
1 0 0
0 1 0
"""


def eight_i_frame(n, seed=0, with_faces=False):
    """Binary file laid out like an 8i voxelized frame: float xyz + uchar rgb."""
    rng = np.random.default_rng(seed)
    xyz = rng.integers(0, 1024, size=(n, 3)).astype(np.float32)
    rgb = rng.integers(0, 256, size=(n, 3)).astype(np.uint8)
    head = [
        "ply", "format binary_little_endian 1.0",
        "comment Version 2, Copyright 2017, 8i Labs, Inc.",
        "comment frame_to_world_scale 0.181731",
        f"element vertex {n}",
        "property float x", "property float y", "property float z",
        "property uchar red", "property uchar green", "property uchar blue",
    ]
    if with_faces:
        head += ["element face 2", "property list uchar int vertex_indices"]
    head.append("end_header")
    body = b"".join(struct.pack("<fff3B", *p, *c) for p, c in zip(xyz.tolist(), rgb.tolist()))
    if with_faces:
        body += struct.pack("<B3i", 3, 0, 1, 2) + struct.pack("<B3i", 3, 1, 2, 0)
    return ("\n".join(head) + "\n").encode() + body, xyz, rgb


def test_ascii_triangle_in_order():
    cloud = parse_ply(TRIANGLE_ASCII)
    assert len(cloud) == 3
    assert list(cloud) == [Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0)]


def test_header_fields():
    h = parse_header(TRIANGLE_ASCII)
    assert h.format == ASCII
    assert h.vertex_count == 3
    assert h.properties == (("x", "float"), ("y", "float"), ("z", "float"))
    assert h.comments == ("hand built",)


def test_binary_copy_of_triangle_parses_identically(triangle):
    assert parse_ply(write_ply(triangle, BINARY_LE)) == parse_ply(TRIANGLE_ASCII)


def test_8i_style_frame_matches_header_count():
    data, xyz, rgb = eight_i_frame(500, seed=4)
    cloud = parse_ply(data)
    assert len(cloud) == header_vertex_count(data) == 500
    np.testing.assert_array_equal(cloud.xyz, xyz.astype(np.float64))
    np.testing.assert_array_equal(cloud.rgb, rgb)


def test_faces_after_vertices_are_ignored():
    data, xyz, _ = eight_i_frame(20, with_faces=True)
    cloud = parse_ply(data)
    assert len(cloud) == 20
    np.testing.assert_array_equal(cloud.xyz, xyz)


def test_elements_before_vertex_are_skipped():
    data = b"""ply
format ascii 1.0
element camera 2
property float fov
element vertex 2
property float x
property float intensity
property float y
property list uchar int tags
property float z
end_header
60
75
1 0.5 2 2 7 8 3
4 0.5 5 0 6
"""
    cloud = parse_ply(data)
    np.testing.assert_array_equal(cloud.xyz, [[1, 2, 3], [4, 5, 6]])


def test_binary_elements_with_lists_before_vertex():
    head = (b"ply\nformat binary_little_endian 1.0\n"
            b"element face 1\nproperty list uchar int idx\n"
            b"element vertex 1\nproperty double x\nproperty double y\nproperty double z\n"
            b"end_header\n")
    body = struct.pack("<B2i", 2, 9, 9) + struct.pack("<3d", 0.5, 1.5, 2.5)
    cloud = parse_ply(head + body)
    assert list(cloud) == [Point3(0.5, 1.5, 2.5)]


def test_trailing_bytes_ignored():
    data, xyz, _ = eight_i_frame(10)
    assert parse_ply(data + b"garbage" * 3) == parse_ply(data)
    assert len(parse_ply(TRIANGLE_ASCII + b"9 9 9\n")) == 3


@pytest.mark.parametrize("data,exc", [
    (b"plx\nformat ascii 1.0\nend_header\n", MalformedHeader),
    (b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\n"
     b"property float y\nproperty float z\nend_header\n", MalformedHeader),
    (b"ply\nformat ascii 1.0\nelement face 0\nend_header\n", MalformedHeader),
    (b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n", MalformedHeader),
    (b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n", MalformedHeader),
    (b"ply\nformat ascii 1.0\nelement vertex 1\nproperty quux x\nend_header\n", MalformedHeader),
])
def test_malformed_headers(data, exc):
    with pytest.raises(exc):
        parse_ply(data)


def test_truncated_ascii_reports_line():
    with pytest.raises(TruncatedBody) as info:
        parse_ply(TRIANGLE_ASCII.replace(b"0 1 0\n", b""))
    assert info.value.unit == "line"
    assert info.value.position == 11


def test_truncated_binary_reports_byte_offset():
    data, _, _ = eight_i_frame(10)
    with pytest.raises(TruncatedBody) as info:
        parse_ply(data[:-5])
    assert info.value.unit == "byte"
    # nine whole 15-byte records survive
    assert info.value.position == parse_header(data).body_offset + 9 * 15


def test_bad_scalar_reports_line():
    with pytest.raises(BadScalar) as info:
        parse_ply(TRIANGLE_ASCII.replace(b"1 0 0", b"1 zero 0"))
    assert info.value.position == 10


def test_non_finite_coordinate_rejected():
    with pytest.raises(BadScalar):
        parse_ply(TRIANGLE_ASCII.replace(b"1 0 0", b"nan 0 0"))


def test_parse_is_deterministic():
    data, _, _ = eight_i_frame(50)
    assert parse_ply(data) == parse_ply(bytes(data))


def test_empty_cloud_writes_valid_ply():
    empty = PointCloud(np.zeros((0, 3)))
    for fmt in (ASCII, BINARY_LE):
        data = write_ply(empty, fmt)
        assert parse_header(data).vertex_count == 0
        assert len(parse_ply(data)) == 0


def test_ascii_round_trip_triangle(triangle):
    assert parse_ply(write_ply(triangle, "ascii")).allclose(triangle, atol=1e-6)


def test_binary_round_trip_is_bit_identical():
    cloud = PointCloud(np.random.default_rng(11).normal(size=(1000, 3)) * 1e3)
    data = write_ply(cloud, BINARY_LE)
    again = parse_ply(data)
    # compare coordinate payloads byte for byte
    assert again.xyz.tobytes() == cloud.xyz.tobytes()
    offset = parse_header(data).body_offset
    assert data[offset:] == np.ascontiguousarray(cloud.xyz, dtype="<f8").tobytes()


def test_colors_survive_round_trip():
    rng = np.random.default_rng(2)
    cloud = PointCloud(rng.random((30, 3)), rng.integers(0, 256, size=(30, 3)))
    for fmt in ("ascii", "binary"):
        assert parse_ply(write_ply(cloud, fmt)).allclose(cloud)


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(0, 40), st.just(3)), elements=finite),
       st.booleans())
def test_round_trip_property(xyz, colored):
    rgb = (np.arange(xyz.size).reshape(xyz.shape) % 256) if colored else None
    cloud = PointCloud(xyz, rgb)
    assert parse_ply(write_ply(cloud, BINARY_LE)) == cloud
    assert parse_ply(write_ply(cloud, ASCII)).allclose(cloud, atol=1e-6)


def test_synthetic_single_point():
    cloud = generate_synthetic_cloud(1, seed=123)
    assert len(cloud) == 1
    assert np.all((cloud.xyz >= 0) & (cloud.xyz <= 1))


@pytest.mark.parametrize("dist", ["uniform", "clustered"])
def test_synthetic_is_deterministic(dist):
    assert generate_synthetic_cloud(100, 7, dist) == generate_synthetic_cloud(100, 7, dist)
    assert generate_synthetic_cloud(100, 7, dist) != generate_synthetic_cloud(100, 8, dist)


@pytest.mark.parametrize("dist", ["uniform", "clustered"])
def test_synthetic_inside_unit_cube(dist):
    xyz = generate_synthetic_cloud(5000, 3, dist).xyz
    assert xyz.min() >= 0.0 and xyz.max() <= 1.0


def test_uniform_fills_all_octants():
    cloud = generate_synthetic_cloud(10000, seed=1)
    cube = bounding_cube(cloud)
    assert brute_force_occupancy(cloud.xyz, cube.origin, cube.side, 1) == 8


def test_synthetic_rejects_zero_count():
    with pytest.raises(ValueError):
        generate_synthetic_cloud(0)


def test_bounding_cube_two_points():
    cube = bounding_cube(PointCloud(np.array([[0.0, 0, 0], [1, 0, 0]])))
    assert cube.side == 1.0
    assert cube.contains([[0, 0, 0], [1, 0, 0]]).all()
    # centred on the bounding box along the flat axes
    assert cube.origin == (0.0, -0.5, -0.5)


def test_bounding_cube_degenerate(single_point):
    cube = bounding_cube(single_point)
    assert cube.side == 1.0
    assert cube.origin == (4.5, 4.5, 4.5)


def test_bounding_cube_empty():
    with pytest.raises(EmptyCloud):
        bounding_cube(PointCloud(np.zeros((0, 3))))


def test_bounding_cube_contains_random_cloud():
    cloud = PointCloud(np.random.default_rng(5).normal(size=(100, 3)) * 7 + 3)
    cube = bounding_cube(cloud)
    assert cube.contains(cloud.xyz).all()
    assert cube.side == pytest.approx((cloud.xyz.max(0) - cloud.xyz.min(0)).max(), rel=1e-15)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)), elements=finite))
def test_bounding_cube_property(xyz):
    cloud = PointCloud(xyz)
    cube = bounding_cube(cloud)
    assert cube.contains(xyz).all()
    extent = (xyz.max(0) - xyz.min(0)).max()
    if extent == 0:
        assert cube.side == 1.0
    else:
        assert cube.side == pytest.approx(extent, rel=1e-12)


def test_irregular_ascii_layout_matches_clean_layout():
    messy = TRIANGLE_ASCII.replace(b"1 0 0\n", b"\n  1   0\t0  \n\n").replace(b"\n", b"\r\n")
    assert parse_ply(messy) == parse_ply(TRIANGLE_ASCII)
