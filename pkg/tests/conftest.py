import numpy as np
import pytest

from lyapoct.pointcloud_io import PointCloud


@pytest.fixture
def octant_cloud():
    """One point in the middle of each octant of the unit cube."""
    corners = [(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)]
    xyz = np.array(corners, dtype=float) * 0.5 + 0.25
    return PointCloud(xyz, source_name="octants")


@pytest.fixture
def single_point():
    return PointCloud(np.array([[5.0, 5.0, 5.0]]), source_name="single")


@pytest.fixture
def triangle():
    return PointCloud(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]), source_name="tri")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(RESULTS):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
