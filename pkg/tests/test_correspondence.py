import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from esm_icp.correspondence import build_index, find_correspondences
from esm_icp.geometry import GeometryError, apply_transform, euler_to_rotation, RigidTransform
from esm_icp.pcio import read_cloud, voxel_downsample

from conftest import BUNNY, brute_force_nn


def test_single_point_target():
    index = build_index([[1.0, 2.0, 3.0]])
    corr = find_correspondences(np.random.default_rng(0).normal(size=(20, 3)), index)
    assert np.array_equal(corr.index, np.zeros(20))


def test_two_point_target():
    corr = find_correspondences([[0.9, 0, 0]], build_index([[0, 0, 0], [1, 0, 0]]))
    assert corr.index[0] == 1
    assert corr.distance[0] == pytest.approx(0.1)


def test_empty_target_rejected():
    with pytest.raises(GeometryError):
        build_index(np.empty((0, 3)))


def test_source_equals_target(rng):
    pts = rng.normal(size=(300, 3))
    corr = find_correspondences(pts, build_index(pts))
    assert np.array_equal(corr.index, np.arange(300))
    assert np.array_equal(corr.distance, np.zeros(300))


def test_tie_goes_to_lowest_index():
    target = np.zeros((10, 3))
    target[:] = [5.0, 5.0, 5.0]
    target[3] = [1.0, 0.0, 0.0]
    target[7] = [-1.0, 0.0, 0.0]
    corr = find_correspondences([[0.0, 0.0, 0.0]], build_index(target))
    assert corr.index[0] == 3


def test_duplicates_are_kept_and_lowest_wins():
    target = np.array([[9, 9, 9], [1, 1, 1], [0, 0, 0], [1, 1, 1], [1, 1, 1]], dtype=float)
    index = build_index(target)
    assert len(index) == 5
    corr = find_correspondences([[1.1, 1, 1], [0.1, 0, 0]], index)
    assert corr.index.tolist() == [1, 2]


def test_many_equidistant_candidates():
    # Twelve target points on a sphere around the query, in shuffled order.
    rng = np.random.default_rng(3)
    dirs = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]] * 2, dtype=float)
    target = np.vstack([np.full((5, 3), 10.0), dirs[rng.permutation(12)]])
    corr = find_correspondences([[0.0, 0.0, 0.0]], build_index(target))
    assert corr.index[0] == 5


def test_grid_ties_match_oracle():
    g = np.arange(6, dtype=float)
    target = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    queries = np.stack(np.meshgrid(g + 0.5, g, g - 0.5, indexing="ij"), -1).reshape(-1, 3)
    corr = find_correspondences(queries, build_index(target))
    idx, dist = brute_force_nn(queries, target)
    assert np.array_equal(corr.index, idx)
    assert np.array_equal(corr.distance, dist)


def test_500_uniform_points_match_oracle():
    rng = np.random.default_rng(500)
    target, queries = rng.uniform(size=(500, 3)), rng.uniform(size=(500, 3))
    corr = find_correspondences(queries, build_index(target))
    idx, dist = brute_force_nn(queries, target)
    assert np.array_equal(corr.index, idx)
    assert np.allclose(corr.distance, dist, rtol=0, atol=1e-15)


def test_1000_points_ten_seeds_match_oracle():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        target = rng.normal(size=(1000, 3))
        queries = rng.normal(size=(1000, 3)) * 1.2
        corr = find_correspondences(queries, build_index(target))
        idx, _ = brute_force_nn(queries, target)
        assert np.array_equal(corr.index, idx), seed


def test_bunny_against_rotated_copy_matches_oracle():
    bunny = voxel_downsample(read_cloud(BUNNY), 0.01)
    moved = apply_transform(bunny, RigidTransform(euler_to_rotation((0.1, -0.2, 0.3)), (0.01, 0, 0)))
    corr = find_correspondences(bunny, build_index(moved))
    idx, dist = brute_force_nn(bunny, moved)
    assert np.array_equal(corr.index, idx)
    assert np.allclose(corr.distance, dist, rtol=0, atol=1e-15)


def test_determinism(rng):
    target, queries = rng.integers(0, 4, size=(200, 3)).astype(float), rng.integers(0, 4, size=(50, 3)) + 0.5
    a = find_correspondences(queries, build_index(target))
    b = find_correspondences(queries.copy(), build_index(target.copy()))
    assert np.array_equal(a.index, b.index) and np.array_equal(a.distance, b.distance)


small = st.integers(-3, 3).map(float)


@settings(max_examples=150, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 40), st.just(3)), elements=small),
       arrays(np.float64, st.tuples(st.integers(1, 20), st.just(3)), elements=small))
def test_integer_lattice_property(target, queries):
    # Integer coordinates make exact ties common.
    corr = find_correspondences(queries, build_index(target))
    idx, dist = brute_force_nn(queries, target)
    assert np.array_equal(corr.index, idx)
    assert np.array_equal(corr.distance, dist)
    assert len(corr) == len(queries)
