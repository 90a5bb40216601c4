import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from esm_icp.geometry import RigidTransform, euler_to_rotation
from esm_icp.pcio import (
    OFF_HEADER_LINES,
    PCD_HEADER_LINES,
    CloudFormatError,
    UnsupportedEncodingError,
    VoxelFilterParams,
    convert,
    infer_format,
    read_cloud,
    read_transform,
    voxel_downsample,
    voxel_keys,
    write_cloud,
    write_transform,
)

from conftest import AIRPLANE, BUNNY

TWO_POINT_PCD = """\
# .PCD v0.7 - Point Cloud Data file format
VERSION 0.7
FIELDS x y z
SIZE 4 4 4
TYPE F F F
COUNT 1 1 1
WIDTH 2
HEIGHT 1
VIEWPOINT 0 0 0 1 0 0 0
POINTS 2
DATA ascii
0 0 0
1 2 3
"""

# Voxel count of the bunny fixture at leaf 0.01, from the dictionary oracle below
# (origin-anchored cells, floor(p / leaf)); recorded once.
BUNNY_LEAF_001_REFERENCE = 762


def write(path, text):
    path.write_text(text)
    return str(path)


def dict_voxel_oracle(points, leaf):
    inv = 1.0 / leaf
    cells = {}
    for p in points.tolist():
        key = tuple(math.floor(c * inv) for c in p)
        cells.setdefault(key, []).append(p)
    return {k: np.mean(v, axis=0) for k, v in cells.items()}


def test_two_point_pcd(tmp_path):
    pts = read_cloud(write(tmp_path / "a.pcd", TWO_POINT_PCD))
    assert np.array_equal(pts, [[0, 0, 0], [1, 2, 3]])


def test_pcd_extra_fields_and_counts(tmp_path):
    text = TWO_POINT_PCD.replace("FIELDS x y z", "FIELDS rgb x y z normal") \
        .replace("SIZE 4 4 4", "SIZE 4 4 4 4 4").replace("TYPE F F F", "TYPE F F F F F") \
        .replace("COUNT 1 1 1", "COUNT 1 1 1 1 3") \
        .replace("0 0 0\n1 2 3", "9 0 0 0 7 7 7\n9 1 2 3 7 7 7")
    assert np.array_equal(read_cloud(write(tmp_path / "b.pcd", text)), [[0, 0, 0], [1, 2, 3]])


def test_pcd_count_mismatch(tmp_path):
    with pytest.raises(CloudFormatError, match="parse error"):
        read_cloud(write(tmp_path / "c.pcd", TWO_POINT_PCD.replace("POINTS 2", "POINTS 3")))
    with pytest.raises(CloudFormatError, match=r"c2.pcd:\d+"):
        read_cloud(write(tmp_path / "c2.pcd", TWO_POINT_PCD.replace("COUNT 1 1 1", "COUNT 1 1")))


def test_pcd_errors_carry_line_numbers(tmp_path):
    bad = TWO_POINT_PCD.replace("1 2 3", "1 two 3")
    with pytest.raises(CloudFormatError, match=r"d.pcd:13:"):
        read_cloud(write(tmp_path / "d.pcd", bad))
    short = TWO_POINT_PCD.replace("1 2 3", "1 2")
    with pytest.raises(CloudFormatError, match=r":13:"):
        read_cloud(write(tmp_path / "e.pcd", short))
    with pytest.raises(CloudFormatError, match="DATA"):
        read_cloud(write(tmp_path / "f.pcd", "VERSION 0.7\nFIELDS x y z\nPOINTS 1\n"))
    with pytest.raises(CloudFormatError, match="non-finite"):
        read_cloud(write(tmp_path / "g.pcd", TWO_POINT_PCD.replace("1 2 3", "1 nan 3")))


def test_binary_pcd_rejected(tmp_path):
    for enc in ("binary", "binary_compressed"):
        with pytest.raises(UnsupportedEncodingError, match="unsupported encoding"):
            read_cloud(write(tmp_path / f"{enc}.pcd", TWO_POINT_PCD.replace("DATA ascii", f"DATA {enc}")))


def test_off_fixture(tmp_path):
    text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
    pts = read_cloud(write(tmp_path / "t.off", text))
    assert pts.shape == (3, 3) and np.array_equal(pts[1], [1, 0, 0])
    glued = "OFF3 1 0\n# comment\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
    assert np.array_equal(read_cloud(write(tmp_path / "g.off", glued)), pts)


def test_off_errors(tmp_path):
    with pytest.raises(CloudFormatError, match=":1:"):
        read_cloud(write(tmp_path / "a.off", "PLY\n1 0 0\n0 0 0\n"))
    with pytest.raises(CloudFormatError, match="expected 3 vertices"):
        read_cloud(write(tmp_path / "b.off", "OFF\n3 0 0\n0 0 0\n"))


def test_xyz_reader(tmp_path):
    pts = read_cloud(write(tmp_path / "a.xyz", "# header\n1 2 3\n\n4 5 6\n"))
    assert np.array_equal(pts, [[1, 2, 3], [4, 5, 6]])
    with pytest.raises(CloudFormatError, match=":2:"):
        read_cloud(write(tmp_path / "b.xyz", "1 2 3\n1 2 3 4\n"))


def test_infer_format():
    assert infer_format("a.PCD") == "pcd" and infer_format("x.txt") == "xyz"
    assert infer_format("whatever.bin", "off") == "off"
    with pytest.raises(ValueError):
        infer_format("a.ply")


@pytest.mark.parametrize("ext", ["pcd", "off", "xyz"])
def test_round_trip_exact(tmp_path, ext):
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(500, 3)) * 10.0 ** rng.integers(-8, 8, size=(500, 1))
    path = tmp_path / f"cloud.{ext}"
    write_cloud(pts, path)
    assert np.array_equal(read_cloud(path), pts)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.just(3)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)),
       st.sampled_from(["pcd", "off", "xyz"]))
def test_round_trip_property(tmp_path_factory, pts, ext):
    path = tmp_path_factory.mktemp("rt") / f"c.{ext}"
    write_cloud(pts, path)
    back = read_cloud(path)
    assert np.array_equal(back, pts)


def test_write_to_missing_directory(tmp_path):
    with pytest.raises(OSError):
        write_cloud([[0, 0, 0]], tmp_path / "nope" / "a.pcd")


def test_line_counts(tmp_path):
    pts = np.random.default_rng(0).normal(size=(10_000, 3))
    for ext, header in (("pcd", PCD_HEADER_LINES), ("off", OFF_HEADER_LINES), ("xyz", 0)):
        path = tmp_path / f"big.{ext}"
        write_cloud(pts, path)
        assert len(path.read_text().splitlines()) == header + 10_000


def test_convert(tmp_path):
    pts = np.random.default_rng(2).normal(size=(40, 3))
    write_cloud(pts, tmp_path / "a.xyz")
    assert convert(tmp_path / "a.xyz", tmp_path / "b.pcd") == 40
    convert(tmp_path / "b.pcd", tmp_path / "c.xyz")
    assert (tmp_path / "a.xyz").read_text() == (tmp_path / "c.xyz").read_text()
    assert convert(AIRPLANE, tmp_path / "air.pcd") == len(read_cloud(AIRPLANE))
    convert(tmp_path / "b.pcd", tmp_path / "d.pcd")
    assert np.array_equal(read_cloud(tmp_path / "d.pcd"), read_cloud(tmp_path / "b.pcd"))


def test_fixtures_load():
    bunny = read_cloud(BUNNY)
    assert bunny.shape == (50_000, 3)
    air = read_cloud(AIRPLANE)
    assert 1000 <= len(air) <= 2000
    assert np.linalg.norm(air, axis=1).max() == pytest.approx(1.0)


def test_transform_file_round_trip(tmp_path):
    T = RigidTransform(euler_to_rotation((0.3, -1.2, 2.0)), (1e-9, 123.456, -7))
    write_transform(T, tmp_path / "t.txt")
    lines = (tmp_path / "t.txt").read_text().splitlines()
    assert len(lines) == 4 and all(len(line.split()) == 4 for line in lines)
    back = read_transform(tmp_path / "t.txt")
    assert np.array_equal(back.matrix(), T.matrix())
    (tmp_path / "bad.txt").write_text("1 0 0\n")
    with pytest.raises(CloudFormatError):
        read_transform(tmp_path / "bad.txt")


def test_voxel_params_validation():
    for bad in (0.0, -1.0, math.nan, math.inf):
        with pytest.raises(ValueError):
            VoxelFilterParams(bad)
    with pytest.raises(ValueError):
        VoxelFilterParams(1.0, "center")


def test_huge_leaf_gives_global_centroid():
    bunny = read_cloud(BUNNY)
    out = voxel_downsample(bunny, VoxelFilterParams(1e9, "min-corner"))
    assert out.shape == (1, 3)
    assert np.abs(out[0] - bunny.mean(axis=0)).max() < 1e-12
    shifted = bunny + 5.0  # entirely inside one origin-anchored cell
    out = voxel_downsample(shifted, 1e9)
    assert out.shape == (1, 3)


def test_distinct_voxels_keep_points(rng):
    pts = (rng.permutation(1000)[:200, None] * [1.0, 3.0, 7.0]) + 0.5
    out = voxel_downsample(pts, VoxelFilterParams(0.5))
    assert len(out) == len(pts)
    assert np.array_equal(np.sort(out, axis=0), np.sort(pts, axis=0))


@pytest.mark.parametrize("anchor", ["origin", "min-corner"])
def test_voxel_invariants(anchor):
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(5000, 3))
    params = VoxelFilterParams(0.37, anchor)
    out = voxel_downsample(pts, params)
    assert len(out) <= len(pts)
    base = pts.min(axis=0) if anchor == "min-corner" else 0.0
    cells = np.floor((out - base) / 0.37)
    lo, hi = base + cells * 0.37, base + (cells + 1) * 0.37
    assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)
    assert len(np.unique(cells, axis=0)) == len(out)
    # Ordered by voxel index, x fastest.
    order = np.lexsort((cells[:, 0], cells[:, 1], cells[:, 2]))
    assert np.array_equal(order, np.arange(len(out)))
    if anchor == "origin":
        assert np.array_equal(voxel_keys(out, params), cells)


def test_voxel_matches_dict_oracle():
    bunny = read_cloud(BUNNY)
    for leaf in (0.01, 0.03, 0.06):
        ref = dict_voxel_oracle(bunny, leaf)
        out = voxel_downsample(bunny, leaf)
        assert len(out) == len(ref)
        keys = voxel_keys(out, VoxelFilterParams(leaf))
        for key, p in zip(map(tuple, keys), out):
            assert np.abs(ref[key] - p).max() < 1e-12


def test_bunny_leaf_001_within_two_percent_of_reference():
    n = len(voxel_downsample(read_cloud(BUNNY), 0.01))
    assert abs(n - BUNNY_LEAF_001_REFERENCE) <= 0.02 * BUNNY_LEAF_001_REFERENCE


def test_bunny_leaf_006_about_21():
    assert abs(len(voxel_downsample(read_cloud(BUNNY), 0.06)) - 21) <= 3


def test_tiny_leaf_rejected():
    with pytest.raises(ValueError):
        voxel_downsample([[1e6, 0, 0]], 1e-12)
