""" Moment, slope, entropy and PCA estimators

Sums that feed reported averages use :py:func:`math.fsum`, which is exactly
rounded, so results do not depend on the order replications finish in.
"""

import math
from typing import NamedTuple, Sequence, Tuple

import numpy as np
from scipy.special import digamma as _digamma
from scipy.special import gammaln
from twisted.logger import Logger

from nnradius.errors import (DegenerateSampleError, DomainError,
                             InsufficientDataError, ParameterError,
                             RangeError, ShapeError, SingularityError)
from nnradius.geometry import (Metric, PointSet, leave_one_out_neighbor_radii,
                               leave_one_out_radii)


_log = Logger()


class SlopeFit(NamedTuple):
    """ Ordinary least-squares line ``y = intercept + slope * x``

    .. py:attribute:: slope

    .. py:attribute:: intercept

    .. py:attribute:: r2

        Coefficient of determination, in ``[0, 1]``

    .. py:attribute:: n_points

        Number of fitted points
    """
    slope: float
    intercept: float
    r2: float
    n_points: int

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member


class EntropyReport(NamedTuple):
    """ Entropy estimates for one sample, in nats

    .. py:attribute:: h_hat_oracle

        Estimate on the true latent sample

    .. py:attribute:: h_hat_pca

        Estimate on the top ``s`` PCA coordinates of the observations

    .. py:attribute:: h_hat_ambient

        Estimate on the raw observations with the ambient volume correction

    .. py:attribute:: h_true

        ``(s / 2) log(2 pi e)``
    """
    h_hat_oracle: float
    h_hat_pca: float
    h_hat_ambient: float
    h_true: float
    s: int
    rho: float
    n: int
    k: int

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member


class PcaModel(NamedTuple):
    """ Principal components of a sample

    .. py:attribute:: mean

        Sample mean, length d

    .. py:attribute:: components

        ``(q, d)`` orthonormal rows, by decreasing explained variance. The
        largest-magnitude entry of each row is positive.

    .. py:attribute:: eigenvalues

        Variances along the components, nonincreasing
    """
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray


class Standardized(NamedTuple):
    """ Output of :py:func:`standardize`

    .. py:attribute:: data

    .. py:attribute:: means

    .. py:attribute:: stds

        Scale applied to each column; 1 for flagged columns

    .. py:attribute:: flagged

        Indices of constant columns, which are centered but not scaled
    """
    data: PointSet
    means: np.ndarray
    stds: np.ndarray
    flagged: Tuple[int, ...]

    def apply(self, data) -> np.ndarray:
        """ Standardize other data with these statistics """
        return (np.asarray(data, dtype=np.float64) - self.means) / self.stds


def moment_estimate(radii: Sequence[float], p: float) -> float:
    """ Monte Carlo estimate of ``E[R^p]``

    :param radii: Nonnegative radii
    :param p: Moment order, positive
    :return: Mean of ``r^p``
    """
    arr = np.asarray(radii, dtype=np.float64).ravel()
    if arr.size == 0:
        raise RangeError("moment of an empty sample")
    if not p > 0:
        raise ParameterError(f"moment order must be positive, got {p}")
    return math.fsum(np.power(arr, p)) / arr.size


def slope_fit(log_kn: Sequence[float], log_m: Sequence[float]) -> SlopeFit:
    """ Fit ``log M = a + b log(k/n)`` by least squares

    :param log_kn: Regressor values
    :param log_m: Response values, same length
    :return: Fitted line
    """
    x = np.asarray(log_kn, dtype=np.float64).ravel()
    y = np.asarray(log_m, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ShapeError(f"{x.size} regressors but {y.size} responses")
    if x.size < 2:
        raise InsufficientDataError("a line needs at least two points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise RangeError("slope fit inputs must be finite")

    x_mean = math.fsum(x) / x.size
    y_mean = math.fsum(y) / y.size
    dx = x - x_mean
    dy = y - y_mean
    sxx = math.fsum(dx * dx)
    if sxx == 0.0:
        raise SingularityError("regressor has zero variance")
    slope = math.fsum(dx * dy) / sxx
    intercept = y_mean - slope * x_mean

    ss_tot = math.fsum(dy * dy)
    residual = y - (intercept + slope * x)
    ss_res = math.fsum(residual * residual)
    r2 = 1.0 if ss_tot == 0.0 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return SlopeFit(slope, intercept, r2, int(x.size))


def digamma(x: float) -> float:
    """ The digamma function ``psi(x)`` for ``x > 0`` """
    if not x > 0:
        raise DomainError(f"digamma needs a positive argument, got {x}")
    return float(_digamma(x))


def log_unit_ball_volume(s: int) -> float:
    """ Log volume of the Euclidean unit ball in ``s`` dimensions """
    return 0.5 * s * math.log(math.pi) - float(gammaln(0.5 * s + 1.0))


def gaussian_entropy(s: int) -> float:
    """ Differential entropy of ``N(0, I_s)`` in nats """
    return 0.5 * s * math.log(2.0 * math.pi * math.e)


def kl_entropy(ps: PointSet, k: int, s: int) -> float:
    """ Kozachenko-Leonenko entropy estimate in nats

    ``psi(n) - psi(k) + log V_s + (s / n) sum_i log R_i``, where ``R_i`` is
    the Euclidean leave-one-out k-NN radius of point ``i`` and ``V_s`` the
    volume of the unit ball.

    :param ps: Sample in its ``s``-dimensional representation
    :param k: Neighbor rank, ``1 <= k <= n - 1``
    :param s: Dimension used for the volume correction; must equal ``ps.d``
    :return: Entropy estimate
    """
    if ps.d != s:
        raise ShapeError(f"sample has dimension {ps.d}, estimator uses {s}")
    if not 1 <= k <= ps.n - 1:
        raise RangeError(f"k={k} outside [1, {ps.n - 1}]")

    radii = leave_one_out_radii(ps, k, Metric.EUCLIDEAN)
    zero = int(np.count_nonzero(radii <= 0.0))
    if zero:
        raise DegenerateSampleError(
            f"{zero} points have a zero leave-one-out {k}-NN radius", zero)
    return (digamma(ps.n) - digamma(k) + log_unit_ball_volume(s)
            + s * math.fsum(np.log(radii)) / ps.n)


def embed_kl(latent: PointSet, projected: PointSet, observed: PointSet,
             k: int, s: int, rho: float = 0.0) -> EntropyReport:
    """ Compare entropy estimates from three views of one sample

    :param latent: True ``s``-dimensional sample
    :param projected: Top ``s`` PCA coordinates of ``observed``
    :param observed: Ambient observations; volume-corrected in their own
                     dimension
    :param k: Neighbor rank
    :param s: Latent dimension
    :param rho: AR coefficient, recorded only
    :return: Estimates next to the true entropy of ``N(0, I_s)``
    """
    return EntropyReport(kl_entropy(latent, k, s),
                         kl_entropy(projected, k, s),
                         kl_entropy(observed, k, observed.d),
                         gaussian_entropy(s), s, rho, latent.n, k)


def mle_intrinsic_dimension(ps: PointSet, k: int) -> float:
    """ Levina-Bickel maximum-likelihood intrinsic dimension

    Per-point inverse estimates are averaged before inverting, which is
    less biased than averaging the per-point dimensions.

    :param ps: Sample
    :param k: Neighborhood size, ``2 <= k <= n - 1``
    :return: Estimated intrinsic dimension
    """
    if not 2 <= k <= ps.n - 1:
        raise RangeError(f"k={k} outside [2, {ps.n - 1}]")
    radii = leave_one_out_neighbor_radii(ps, k)
    if np.any(radii <= 0.0):
        raise DegenerateSampleError("sample has coincident points")
    log_ratio = np.log(radii[:, -1:] / radii[:, :-1])
    inverse = np.sum(log_ratio, axis=1) / (k - 1)
    return ps.n / math.fsum(inverse)


def pca_fit(data: PointSet, q: int) -> PcaModel:
    """ Fit the top ``q`` principal components

    :param data: Sample with ``n >= 2``
    :param q: Number of components, ``1 <= q <= d``
    :return: Fitted model
    """
    if data.n < 2:
        raise InsufficientDataError("PCA needs at least two points")
    if not 1 <= q <= data.d:
        raise ParameterError(f"q={q} outside [1, {data.d}]")

    mean = data.points.mean(axis=0)
    centered = data.points - mean
    cov = centered.T @ centered / (data.n - 1)
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1][:q]
    components = vectors[:, order].T
    pivot = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(q), pivot])
    components = components * signs[:, np.newaxis]
    return PcaModel(mean, components, np.maximum(values[order], 0.0))


def pca_project(model: PcaModel, data, top: int) -> PointSet:
    """ Coordinates along the first ``top`` components

    :param model: Fitted model
    :param data: Sample or ``(n, d)`` array
    :param top: Number of coordinates, ``1 <= top <= q``
    :return: ``(n, top)`` point set
    """
    if not 1 <= top <= model.components.shape[0]:
        raise ParameterError(
            f"top={top} outside [1, {model.components.shape[0]}]")
    points = data.points if isinstance(data, PointSet) else \
        np.atleast_2d(np.asarray(data, dtype=np.float64))
    if points.shape[1] != model.mean.shape[0]:
        raise ShapeError(f"data has dimension {points.shape[1]}, model has "
                         f"{model.mean.shape[0]}")
    return PointSet.from_array((points - model.mean)
                               @ model.components[:top].T)


def pca_reconstruct(model: PcaModel, projected: PointSet) -> np.ndarray:
    """ Map projected coordinates back to the original space """
    top = projected.d
    return projected.points @ model.components[:top] + model.mean


def standardize(data: PointSet) -> Standardized:
    """ Center and scale each column to zero mean and unit variance

    Variances use the ``1/n`` normalisation. Constant columns are centered,
    left unscaled and reported in ``flagged``.

    :param data: Sample with ``n >= 2``
    :return: Standardized data and the statistics used
    """
    if data.n < 2:
        raise InsufficientDataError("standardization needs two points")
    means = data.points.mean(axis=0)
    centered = data.points - means
    stds = np.sqrt(np.mean(centered * centered, axis=0))
    constant = stds <= 1e-12 * np.maximum(1.0, np.abs(means))
    flagged = tuple(int(j) for j in np.flatnonzero(constant))
    if flagged:
        _log.warn("constant columns {columns} left unscaled",
                  columns=flagged)
    stds = np.where(constant, 1.0, stds)
    return Standardized(PointSet.from_array(centered / stds), means, stds,
                        flagged)
