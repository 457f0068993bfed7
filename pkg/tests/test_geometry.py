import numpy as np
import pytest

from nnradius.errors import ParameterError, RangeError, ShapeError
from nnradius.geometry import Metric, PointSet, counting_process, \
    cube_support_distance, distances, knn_radii, knn_radius, \
    knn_radius_sorted, leave_one_out_radii, leave_one_out_radius, \
    radius_profile

from . import datasets


def test_pointset_validation():
    ps = PointSet.from_array(datasets.LINE_POINTS)
    assert (ps.n, ps.d) == (5, 1)
    assert not ps.points.flags.writeable
    assert ps.prefix(2).points.ravel().tolist() == [0.0, 1.0]

    with pytest.raises(ShapeError):
        PointSet.from_array([])
    with pytest.raises(ShapeError):
        PointSet.from_array([0.0, float("inf")])
    with pytest.raises(RangeError):
        ps.prefix(6)


def test_metric_parse():
    assert Metric.parse("Euclidean") is Metric.EUCLIDEAN
    assert Metric.parse(" manhattan ") is Metric.MANHATTAN
    assert str(Metric.MANHATTAN) == "manhattan"
    with pytest.raises(ParameterError):
        Metric.parse("chebyshev")


def test_radius_small_examples():
    ps = PointSet.from_array(datasets.LINE_POINTS)
    assert knn_radius(ps, [2.0], 1) == 1.0
    assert knn_radius(ps, [2.0], 3) == 2.0
    assert knn_radius(ps, [2.0], 5) == 8.0

    square = PointSet.from_array(datasets.SQUARE_POINTS)
    assert knn_radius(square, [0.5, 0.5], 4) == pytest.approx(np.sqrt(0.5))
    assert knn_radius(square, [0.0, 0.0], 3, Metric.MANHATTAN) == 1.0
    assert knn_radius(square, [0.0, 0.0], 4, Metric.MANHATTAN) == 2.0


def test_radius_with_ties():
    ps = PointSet.from_array(datasets.TIED_POINTS)
    assert knn_radius(ps, [0.0], 1) == 1.0
    assert knn_radius(ps, [0.0], 2) == 1.0
    assert knn_radius(ps, [0.0], 3) == 2.0
    assert knn_radius(ps, [0.0], 4) == 2.0
    assert counting_process(ps, [0.0], 1.0) == 2
    assert counting_process(ps, [0.0], 2.0) == 4


def test_rank_bounds():
    ps = PointSet.from_array(datasets.LINE_POINTS)
    with pytest.raises(RangeError):
        knn_radius(ps, [0.0], 0)
    with pytest.raises(RangeError):
        knn_radius(ps, [0.0], 6)
    with pytest.raises(ShapeError):
        knn_radius(ps, [0.0, 1.0], 1)
    with pytest.raises(RangeError):
        counting_process(ps, [0.0], -1.0)


def test_partition_matches_sort():
    rng = np.random.default_rng(11)
    for trial in range(200):
        n = int(rng.integers(1, 300))
        d = int(rng.integers(1, 6))
        ps = PointSet.from_array(rng.random((n, d)))
        x = rng.random(d)
        k = int(rng.integers(1, n + 1))
        metric = Metric.MANHATTAN if trial % 3 == 0 else Metric.EUCLIDEAN

        assert knn_radius(ps, x, k, metric) == \
            knn_radius_sorted(ps, x, k, metric)


def test_duality():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        n = int(rng.integers(1, 200))
        d = int(rng.integers(1, 5))
        data = rng.random((n, d))
        if rng.random() < 0.3:
            # coarse grid produces ties
            data = np.round(data * 4.0) / 4.0
        ps = PointSet.from_array(data)
        x = rng.random(d)
        k = int(rng.integers(1, n + 1))
        dists = distances(ps, x)
        r = float(rng.choice(dists)) if rng.random() < 0.5 \
            else float(rng.random())

        assert (counting_process(ps, x, r) < k) == (knn_radius(ps, x, k) > r)


def test_radius_monotone_in_k():
    rng = np.random.default_rng(2)
    ps = PointSet.from_array(rng.random((400, 3)))
    profile = radius_profile(ps, [0.5, 0.5, 0.5])

    assert np.all(np.diff(profile.sorted_dists) >= 0)
    assert profile.radius(1) == knn_radius(ps, [0.5, 0.5, 0.5], 1)
    with pytest.raises(RangeError):
        profile.radius(401)


def test_radius_monotone_in_n():
    rng = np.random.default_rng(3)
    ps = PointSet.from_array(rng.random((500, 2)))
    x = [0.3, 0.7]
    radii = [knn_radius(ps.prefix(n), x, 5) for n in range(5, 501, 5)]

    assert all(a >= b for a, b in zip(radii, radii[1:]))


def test_knn_radii_matches_profile():
    rng = np.random.default_rng(7)
    ps = PointSet.from_array(rng.random((300, 3)))
    queries = rng.random((25, 3))
    for metric in Metric:
        block = knn_radii(ps, queries, 10, metric, chunk=7)
        for i, q in enumerate(queries):
            expect = radius_profile(ps, q, metric).sorted_dists[:10]
            assert block[i].tolist() == expect.tolist()

    full = knn_radii(ps, queries, 300)
    assert full.shape == (25, 300)


def test_leave_one_out():
    rng = np.random.default_rng(13)
    ps = PointSet.from_array(rng.random((200, 2)))
    tree = leave_one_out_radii(ps, 4)
    exact = [leave_one_out_radius(ps, i, 4) for i in range(ps.n)]

    assert np.allclose(tree, exact, rtol=1e-12, atol=0.0)

    with pytest.raises(RangeError):
        leave_one_out_radius(ps, 0, 200)


def test_leave_one_out_duplicates():
    ps = PointSet.from_array(datasets.TIED_POINTS)
    assert leave_one_out_radius(ps, 2, 1) == 0.0
    assert leave_one_out_radii(ps, 1)[2] == 0.0


def test_cube_support_distance():
    assert cube_support_distance([0.5, 0.5]) == 0.0
    assert cube_support_distance([2.0]) == 1.0
    assert cube_support_distance([-3.0, 1.0, 5.0]) == pytest.approx(5.0)


def test_translation_invariance():
    rng = np.random.default_rng(17)
    data = rng.random((250, 3))
    x = rng.random(3)
    shift = np.array([10.0, -3.5, 0.125])
    moved = PointSet.from_array(data + shift)
    ps = PointSet.from_array(data)
    for k in (1, 5, 250):
        assert knn_radius(moved, x + shift, k) == \
            pytest.approx(knn_radius(ps, x, k), rel=1e-12)
