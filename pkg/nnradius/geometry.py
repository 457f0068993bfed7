""" Nearest-neighbor radii and local counts

The k-NN radius ``R_{n,k}(x)`` is the k-th smallest entry of the multiset of
distances from ``x`` to the sample, so it is unique even when the identity of
the k-th neighbor is not. The local count ``N_n(x, r)`` counts sample points
in the *closed* ball of radius ``r``. Both are computed from the same distance
vector, which makes the duality

    ``N_n(x, r) < k``  if and only if  ``R_{n,k}(x) > r``

hold exactly in floating point.

>>> ps = PointSet.from_array([0.0, 1.0])
>>> knn_radius(ps, [0.3], 2)
0.7
"""

import enum
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree

from nnradius.errors import ParameterError, RangeError, ShapeError


@enum.unique
class Metric(enum.IntEnum):
    """ Distance used between points

    .. py:attribute:: EUCLIDEAN

       L2 norm. The default, and the only metric used by theory checks.

    .. py:attribute:: MANHATTAN

       L1 norm
    """

    EUCLIDEAN = 1
    MANHATTAN = 2

    def __str__(self):
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> 'Metric':
        """ Convert from command-line spelling

        :param text: ``euclidean`` or ``manhattan``, in any case
        :return: Matching metric
        """
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ParameterError(
                f"unknown {cls.__name__.lower()} {text!r}") from None

    @property
    def minkowski_p(self) -> int:
        """ Exponent of the equivalent Minkowski norm """
        return 2 if self is Metric.EUCLIDEAN else 1


class PointSet(NamedTuple):
    """ An immutable set of n points in d dimensions

    Use :py:meth:`PointSet.from_array` to construct instances; it validates
    the input and freezes the underlying array.

    .. py:attribute:: points

        Read-only ``(n, d)`` float64 array
    """
    points: np.ndarray

    @classmethod
    def from_array(cls, data) -> 'PointSet':
        """ Validate and freeze an array of points

        :param data: ``(n, d)`` array-like, or a 1-D array of n scalars
        :return: A point set backed by a private read-only copy
        """
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(
                f"expected a non-empty (n, d) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ShapeError("point coordinates must be finite")
        arr.setflags(write=False)
        return cls(arr)

    @property
    def n(self) -> int:
        """ Number of points """
        return self.points.shape[0]

    @property
    def d(self) -> int:
        """ Ambient dimension """
        return self.points.shape[1]

    def prefix(self, n: int) -> 'PointSet':
        """ The first ``n`` points, in order

        :param n: Prefix length, ``1 <= n <= self.n``
        :return: A point set sharing storage with this one
        """
        if not 1 <= n <= self.n:
            raise RangeError(f"prefix length {n} outside [1, {self.n}]")
        return PointSet(self.points[:n])


class RadiusProfile(NamedTuple):
    """ All k-NN radii of one query point

    .. py:attribute:: query

        Query point, length d

    .. py:attribute:: sorted_dists

        Nondecreasing distances; entry ``k - 1`` is ``R_{n,k}(query)``
    """
    query: np.ndarray
    sorted_dists: np.ndarray

    def radius(self, k: int) -> float:
        """ The k-NN radius for 1-indexed ``k`` """
        if not 1 <= k <= len(self.sorted_dists):
            raise RangeError(
                f"k={k} outside [1, {len(self.sorted_dists)}]")
        return float(self.sorted_dists[k - 1])


def distances(ps: PointSet, x, metric: Metric = Metric.EUCLIDEAN) \
        -> np.ndarray:
    """ Distances from every sample point to ``x``

    Coordinates are accumulated left to right and, for the Euclidean metric,
    the square root is taken once at the end.

    :param ps: Sample
    :param x: Query point of length ``ps.d``
    :param metric: Distance to use
    :return: Length-n array of distances, in sample order
    """
    query = _as_query(ps, x)
    diff = ps.points - query
    if metric is Metric.MANHATTAN:
        acc = np.abs(diff[:, 0])
        for j in range(1, ps.d):
            acc += np.abs(diff[:, j])
        return acc

    acc = diff[:, 0] * diff[:, 0]
    for j in range(1, ps.d):
        acc += diff[:, j] * diff[:, j]
    return np.sqrt(acc)


def knn_radius(ps: PointSet, x, k: int,
               metric: Metric = Metric.EUCLIDEAN) -> float:
    """ Distance from ``x`` to its k-th nearest sample point

    Uses partial selection, which returns the same order statistic as a full
    sort.

    :param ps: Sample
    :param x: Query point
    :param k: Neighbor rank, ``1 <= k <= ps.n``
    :param metric: Distance to use
    :return: ``R_{n,k}(x)``
    """
    _check_rank(k, ps.n)
    dists = distances(ps, x, metric)
    return float(np.partition(dists, k - 1)[k - 1])


def knn_radius_sorted(ps: PointSet, x, k: int,
                      metric: Metric = Metric.EUCLIDEAN) -> float:
    """ Reference k-NN radius computed by sorting all n distances

    :py:func:`knn_radius` must agree with this bit for bit.
    """
    _check_rank(k, ps.n)
    return float(np.sort(distances(ps, x, metric))[k - 1])


def radius_profile(ps: PointSet, x,
                   metric: Metric = Metric.EUCLIDEAN) -> RadiusProfile:
    """ Every k-NN radius of ``x`` at once

    :param ps: Sample
    :param x: Query point
    :param metric: Distance to use
    :return: Profile whose entry ``k - 1`` is ``R_{n,k}(x)``
    """
    query = _as_query(ps, x)
    dists = np.sort(distances(ps, query, metric))
    dists.setflags(write=False)
    return RadiusProfile(query, dists)


def knn_radii(ps: PointSet, queries, kmax: int,
              metric: Metric = Metric.EUCLIDEAN,
              chunk: int = None) -> np.ndarray:
    """ The ``kmax`` smallest distances for many queries

    Row ``i`` equals ``radius_profile(ps, queries[i]).sorted_dists[:kmax]``
    exactly.

    :param ps: Sample
    :param queries: ``(m, d)`` array of query points
    :param kmax: Number of leading radii to keep, ``1 <= kmax <= ps.n``
    :param metric: Distance to use
    :param chunk: Queries processed per block, bounding peak memory;
                  about a million distances per block if omitted
    :return: ``(m, kmax)`` array with nondecreasing rows
    """
    _check_rank(kmax, ps.n)
    qs = np.asarray(queries, dtype=np.float64)
    if qs.ndim == 1:
        qs = qs.reshape(-1, ps.d)
    if qs.shape[1] != ps.d:
        raise ShapeError(
            f"queries have dimension {qs.shape[1]}, sample has {ps.d}")

    chunk = chunk or max(1, (1 << 20) // ps.n)
    out = np.empty((qs.shape[0], kmax))
    for start in range(0, qs.shape[0], chunk):
        block = qs[start:start + chunk]
        acc = None
        for j in range(ps.d):
            diff = ps.points[np.newaxis, :, j] - block[:, j, np.newaxis]
            term = np.abs(diff) if metric is Metric.MANHATTAN \
                else diff * diff
            if acc is None:
                acc = term
            else:
                acc += term
        if metric is Metric.EUCLIDEAN:
            acc = np.sqrt(acc)
        if kmax < ps.n:
            acc = np.partition(acc, kmax - 1, axis=1)[:, :kmax]
        out[start:start + chunk] = np.sort(acc, axis=1)
    return out


def counting_process(ps: PointSet, x, r: float,
                     metric: Metric = Metric.EUCLIDEAN) -> int:
    """ Number of sample points in the closed ball ``B(x, r)``

    :param ps: Sample
    :param x: Query point
    :param r: Radius, nonnegative
    :param metric: Distance to use
    :return: ``N_n(x, r)``
    """
    if not r >= 0:
        raise RangeError(f"radius must be nonnegative, got {r}")
    return int(np.count_nonzero(distances(ps, x, metric) <= r))


def leave_one_out_radius(ps: PointSet, i: int, k: int,
                         metric: Metric = Metric.EUCLIDEAN) -> float:
    """ k-NN radius of sample point ``i`` among the other n - 1 points

    :param ps: Sample
    :param i: Zero-based index of the query point
    :param k: Neighbor rank, ``1 <= k <= ps.n - 1``
    :param metric: Distance to use
    :return: Radius excluding the point itself
    """
    if not 0 <= i < ps.n:
        raise RangeError(f"index {i} outside [0, {ps.n})")
    _check_rank(k, ps.n - 1)
    dists = np.delete(distances(ps, ps.points[i], metric), i)
    return float(np.partition(dists, k - 1)[k - 1])


def leave_one_out_radii(ps: PointSet, k: int,
                        metric: Metric = Metric.EUCLIDEAN) -> np.ndarray:
    """ Leave-one-out k-NN radius of every sample point

    Uses a k-d tree. Each point is its own nearest neighbor at distance zero,
    so the answer is column ``k`` of a ``k + 1`` neighbor query. This holds
    even when the sample has duplicates, whose radii then come out as zero.

    :param ps: Sample
    :param k: Neighbor rank, ``1 <= k <= ps.n - 1``
    :param metric: Distance to use
    :return: Length-n array of radii
    """
    return leave_one_out_neighbor_radii(ps, k, metric)[:, k - 1]


def leave_one_out_neighbor_radii(ps: PointSet, kmax: int,
                                 metric: Metric = Metric.EUCLIDEAN) \
        -> np.ndarray:
    """ Leave-one-out radii of ranks 1 to ``kmax`` for every point

    :param ps: Sample
    :param kmax: Largest neighbor rank, ``1 <= kmax <= ps.n - 1``
    :param metric: Distance to use
    :return: ``(n, kmax)`` array; column ``j`` holds rank ``j + 1``
    """
    _check_rank(kmax, ps.n - 1)
    tree = cKDTree(ps.points)
    dists, _ = tree.query(ps.points, k=kmax + 1, p=metric.minkowski_p)
    dists = np.asarray(dists, dtype=np.float64).reshape(ps.n, kmax + 1)
    return dists[:, 1:]


def cube_support_distance(x: Sequence[float]) -> float:
    """ Euclidean distance from ``x`` to the unit cube ``[0, 1]^d``

    :param x: Query point
    :return: ``r_x``; zero when ``x`` is inside the cube
    """
    query = np.asarray(x, dtype=np.float64).ravel()
    return float(np.linalg.norm(query - np.clip(query, 0.0, 1.0)))


def _as_query(ps: PointSet, x) -> np.ndarray:
    query = np.asarray(x, dtype=np.float64).ravel()
    if query.shape[0] != ps.d:
        raise ShapeError(
            f"query has dimension {query.shape[0]}, sample has {ps.d}")
    return query


def _check_rank(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise RangeError(f"k={k} outside [1, {n}]")
