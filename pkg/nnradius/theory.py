""" Monte Carlo checks of the k-NN radius bounds

The checks run at fixed, desk-scale sample sizes and record empirical
quantities next to the corresponding closed-form bounds:

* :py:func:`tail_check` measures ``P(R_{n,k}(x) > 2^j r_*)`` on a dyadic
  grid of radii;
* :py:func:`moment_sandwich_check` estimates ``E[R^p]`` over a grid of
  ``(n, k)`` and fits the log-log slope against ``p / s``;
* :py:func:`lower_bound_check` tests ``E[R^p] >= (1/2) (k / (2 c_+ n))^{p/s}``,
  which needs no mixing assumption;
* :py:func:`as_convergence_check` follows ``R_{n,k(n)}(x)`` along nested
  prefixes of one sequence;
* :py:func:`bernstein_check` compares the tail of a bounded centered sum
  with the Bernstein-type bound for mixing sequences.

Constants that the bounds only assert to exist (``c_0`` and ``C`` of the tail
bound) are plain parameters used for reporting. Pass/fail margins are three
Monte Carlo standard errors.
"""

from abc import ABC, abstractmethod
import math
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from twisted.logger import Logger

from nnradius import streams
from nnradius.errors import ConfigurationError, ParameterError, RangeError
from nnradius.estimators import (SlopeFit, log_unit_ball_volume,
                                 moment_estimate, slope_fit)
from nnradius.generators import Family, SequenceSpec, generate
from nnradius.geometry import (Metric, cube_support_distance, distances,
                               knn_radius)
from nnradius.pool import map_ordered


_log = Logger()

MARGIN_SE = 3.0
""" Standard errors separating an estimate from a bound """

_UNIFORM_FAMILIES = (Family.IID_UNIFORM, Family.LSS, Family.HMM,
                     Family.GP_FFT)


class MassProfile(NamedTuple):
    """ Local mass constants of the marginal law at a query point

    ``c_minus r^s <= mu(B(x, r)) <= c_plus r^s`` for ``0 < r <= r0``, and the
    support has diameter at most ``diameter``.
    """
    s: float
    c_minus: float
    c_plus: float
    r0: float
    diameter: float

    def validate(self) -> None:
        """ Raise :py:class:`ConfigurationError` for unusable constants """
        for name in self._fields:
            if not getattr(self, name) > 0:
                raise ConfigurationError("must be positive", key=name)
        if self.c_minus > self.c_plus:
            raise ConfigurationError("c_minus exceeds c_plus", key="c_minus")

    @classmethod
    def for_unit_cube(cls, x: Sequence[float]) -> 'MassProfile':
        """ Exact constants for the uniform law on ``[0, 1]^d``

        Inside the cube a ball of radius ``r`` has mass ``V_d r^d`` as long as
        it does not reach the boundary.

        :param x: Interior query point
        :return: Profile with ``s = d`` and ``c_minus = c_plus = V_d``
        """
        query = np.asarray(x, dtype=np.float64).ravel()
        r0 = float(np.min(np.minimum(query, 1.0 - query)))
        if not r0 > 0:
            raise ParameterError("query must lie inside the unit cube")
        d = query.shape[0]
        volume = math.exp(log_unit_ball_volume(d))
        return cls(float(d), volume, volume, r0, math.sqrt(d))


class RegimeGuard(NamedTuple):
    """ Admissible range ``K0 log n <= k <= kappa n`` of the upper bounds

    ``kappa`` is ``kappa_fraction * c_minus r0^s / 8``.
    """
    k0: float = 3.0
    kappa_fraction: float = 0.9

    def kappa(self, mass: MassProfile) -> float:
        """ Upper limit of ``k / n`` """
        return self.kappa_fraction * mass.c_minus * mass.r0 ** mass.s / 8.0

    def check(self, n: int, k: int, mass: MassProfile) -> None:
        """ Raise :py:class:`ConfigurationError` outside the regime """
        if not 0 < self.kappa_fraction < 1:
            raise ConfigurationError("must lie in (0, 1)",
                                     key="kappa_fraction")
        if k < self.k0 * math.log(n):
            raise ConfigurationError(
                f"k={k} below K0 log n = {self.k0 * math.log(n):.3f} "
                f"for n={n}", key="k")
        if k > self.kappa(mass) * n:
            raise ConfigurationError(
                f"k={k} above kappa n = {self.kappa(mass) * n:.3f} "
                f"for n={n}", key="k")


class TailCheckReport(NamedTuple):
    """ Empirical survival of the k-NN radius on a dyadic grid

    ``empirical_survival[i]`` is the fraction of replications with
    ``R_{n,k}(x) > 2^{j_grid[i]} r_star``; ``bound_values[i]`` is
    ``4 exp(-c0 2^{js} k / log n) + C n^-7``.
    """
    n: int
    k: int
    j_grid: Tuple[int, ...]
    r_star: float
    empirical_survival: Tuple[float, ...]
    standard_errors: Tuple[float, ...]
    bound_values: Tuple[float, ...]
    gamma: float
    b_n: int
    decay_slope: float
    duality_violations: int
    reps: int

    def rows(self, s: float) -> Tuple['TailRow', ...]:
        """ One CSV row per grid point

        :param s: Local exponent used for the bound exponent column
        """
        return tuple(
            TailRow(self.n, self.k, j, self.r_star * 2.0 ** j, surv, se,
                    bound, 2.0 ** (j * s) * self.k / math.log(self.n),
                    self.gamma, self.b_n)
            for j, surv, se, bound in zip(
                self.j_grid, self.empirical_survival, self.standard_errors,
                self.bound_values))


class TailRow(NamedTuple):
    """ CSV row of a tail check """
    n: int
    k: int
    j: int
    radius: float
    survival: float
    standard_error: float
    bound: float
    exponent: float
    gamma: float
    b_n: int

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


class MomentPoint(NamedTuple):
    """ One grid point of a moment check """
    n: int
    k: int
    p: float
    empirical_moment: float
    standard_error: float
    lower_bound: float
    normalised_moment: float
    holds: bool

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


class MomentCheckReport(NamedTuple):
    """ Moment sandwich over a grid of ``(n, k)``

    .. py:attribute:: points

        Per grid point estimates and bounds

    .. py:attribute:: fit

        Slope of ``log E[R^p]`` against ``log(k / n)``, or ``None`` with a
        single distinct ``k / n``

    .. py:attribute:: target_slope

        ``p / s``

    .. py:attribute:: lower_envelope_constant

        Smallest ``E[R^p] / (k / n)^{p/s}`` over the grid

    .. py:attribute:: upper_envelope_constant

        Largest ``E[R^p] / (k / n)^{p/s}`` over the grid
    """
    points: Tuple[MomentPoint, ...]
    fit: Optional[SlopeFit]
    target_slope: float
    lower_envelope_constant: float
    upper_envelope_constant: float
    slope_tolerance: float

    @property
    def all_hold(self) -> bool:
        """ Whether every estimate clears its lower bound """
        return all(point.holds for point in self.points)

    @property
    def slope_compatible(self) -> bool:
        """ Whether the fitted slope is within tolerance of ``p / s`` """
        return self.fit is not None and \
            abs(self.fit.slope - self.target_slope) <= self.slope_tolerance


class LowerBoundResult(NamedTuple):
    """ Outcome of :py:func:`lower_bound_check`

    ``margin`` is ``moment - 3 SE - bound``; the check passes when it is
    nonnegative.
    """
    passed: bool
    margin: float
    empirical_moment: float
    standard_error: float
    bound: float
    n: int
    k: int
    p: float
    reps: int

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


class TrajectoryPoint(NamedTuple):
    """ One prefix length of a convergence trajectory """
    n: int
    k: int
    radius: float
    limit: float
    abs_error: float

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


class BernsteinRow(NamedTuple):
    """ Empirical tail of ``|sum Z_i|`` against the Bernstein-type bound """
    epsilon: float
    empirical_tail: float
    bound: float
    holds: bool
    n: int
    m: int
    sigma2: float
    alpha_m: float
    reps: int

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


def r_star(n: int, k: int, c_minus: float, s: float) -> float:
    """ Canonical radius scale ``(8 k / (c_minus n))^{1/s}`` """
    if not (n > 0 and k > 0 and c_minus > 0 and s > 0):
        raise ParameterError("r_star needs positive n, k, c_minus and s")
    return (8.0 * k / (c_minus * n)) ** (1.0 / s)


def blocking_length(n: int, gamma: float) -> int:
    """ Block length ``ceil((8 / gamma) log n)``, at least one """
    if not gamma > 0:
        raise ParameterError(f"mixing rate must be positive, got {gamma}")
    if math.isinf(gamma):
        return 1
    return max(1, math.ceil(8.0 / gamma * math.log(n)))


def default_mixing_rate(spec: SequenceSpec) -> float:
    """ Heuristic geometric mixing rate of a family

    ``-log|rho|`` for AR-type families, ``-log|2 p_stay - 1|`` for the hidden
    Markov chain (its second eigenvalue), ``1 / l`` for the Gaussian process
    and infinity for independent data. Only the reported block length depends
    on it.
    """
    param = spec.tuning_parameter()
    if spec.family is Family.IID_UNIFORM:
        return math.inf
    if spec.family is Family.GP_FFT:
        return 1.0 / param
    if spec.family is Family.HMM:
        param = 2.0 * param - 1.0
    if param == 0.0:
        return math.inf
    return -math.log(abs(param))


def tail_bound(n: int, k: int, s: float, j: int, c0: float = 0.01,
               big_c: float = 1.0) -> float:
    """ ``4 exp(-c0 2^{js} k / log n) + C n^-7`` """
    return (4.0 * math.exp(-c0 * 2.0 ** (j * s) * k / math.log(n))
            + big_c * float(n) ** -7)


def moment_lower_bound(n: int, k: int, p: float, s: float,
                       c_plus: float) -> float:
    """ ``(1/2) (k / (2 c_plus n))^{p/s}`` """
    return 0.5 * (k / (2.0 * c_plus * n)) ** (p / s)


def tail_check(spec: SequenceSpec, x, mass: MassProfile, n: int, k: int,
               j_max: int, reps: int, c0: float = 0.01, big_c: float = 1.0,
               gamma: float = None, guard: RegimeGuard = RegimeGuard(),
               workers: int = 1) -> TailCheckReport:
    """ Empirical tail of ``R_{n,k}(x)`` on the radii ``2^j r_*``

    :param spec: Data-generating process; its seed is the global seed and
                 its ``n`` is replaced by the ``n`` argument
    :param x: Query point
    :param mass: Local mass constants at ``x``
    :param n: Sample size
    :param k: Neighbor rank
    :param j_max: Largest grid exponent; ``2^j_max r_*`` must not exceed r0
    :param reps: Number of replications
    :param c0: Reported exponent constant
    :param big_c: Reported additive constant
    :param gamma: Mixing rate for the block length; family heuristic if
                  omitted
    :param guard: Admissible ``(n, k)`` regime
    :param workers: Threads used for replications
    :return: Survival estimates with their bounds
    """
    mass.validate()
    if j_max < 0 or reps < 1:
        raise ConfigurationError("j_max must be >= 0 and reps >= 1",
                                 key="j_max")
    scale = r_star(n, k, mass.c_minus, mass.s)
    if 2.0 ** j_max * scale > mass.r0:
        raise ConfigurationError(
            f"radius 2^{j_max} r_* = {2.0 ** j_max * scale:.6g} exceeds "
            f"r0 = {mass.r0:.6g}", key="j_max")
    guard.check(n, k, mass)

    thresholds = scale * 2.0 ** np.arange(j_max + 1)
    cell = _cell_id(spec, n, k)

    def replicate(rep: int):
        row = generate(_row_spec(spec, n, "tailcheck", cell, rep))
        dists = distances(row.data, x)
        radius = float(np.partition(dists, k - 1)[k - 1])
        by_radius = radius > thresholds
        by_count = np.array([np.count_nonzero(dists <= r) < k
                             for r in thresholds])
        return by_radius, int(np.count_nonzero(by_radius != by_count))

    outcomes = map_ordered(replicate, range(reps), workers)
    exceed = np.array([o[0] for o in outcomes])
    violations = sum(o[1] for o in outcomes)
    if violations:
        _log.error("{count} radius/count disagreements", count=violations)

    survival = exceed.mean(axis=0)
    errors = np.sqrt(survival * (1.0 - survival) / reps)
    j_grid = tuple(range(j_max + 1))
    bounds = tuple(tail_bound(n, k, mass.s, j, c0, big_c) for j in j_grid)
    rate = default_mixing_rate(spec) if gamma is None else gamma
    exponents = [2.0 ** (j * mass.s) * k / math.log(n) for j in j_grid]

    return TailCheckReport(n, k, j_grid, scale,
                           tuple(float(v) for v in survival),
                           tuple(float(v) for v in errors), bounds,
                           float(rate), blocking_length(n, rate),
                           _decay_slope(exponents, survival),
                           int(violations), reps)


def moment_sandwich_check(spec: SequenceSpec, x, mass: MassProfile,
                          grid: Sequence[Tuple[int, int]], p: float,
                          reps: int, guard: RegimeGuard = RegimeGuard(),
                          slope_tolerance: float = 0.1,
                          workers: int = 1) -> MomentCheckReport:
    """ Estimate ``E[R^p]`` over a grid and compare with ``(k/n)^{p/s}``

    Replications for the same ``n`` share one generated row per replication
    for every ``k``.

    :param spec: Data-generating process
    :param x: Query point
    :param mass: Local mass constants at ``x``
    :param grid: ``(n, k)`` pairs inside the regime of ``guard``
    :param p: Moment order
    :param reps: Replications per ``n``
    :param guard: Admissible ``(n, k)`` regime
    :param slope_tolerance: Allowed distance between fitted and target slope
    :param workers: Threads used for replications
    :return: Per-point estimates, lower bounds and the fitted slope
    """
    mass.validate()
    if not grid:
        raise ConfigurationError("empty (n, k) grid", key="grid")
    for n, k in grid:
        guard.check(n, k, mass)
        _check_lower_bound_radius(n, k, mass)

    points = []
    for n in sorted({n for n, _ in grid}):
        ks = sorted({k for m, k in grid if m == n})
        radii = _radius_table(spec, x, n, max(ks), reps, "momentcheck",
                              workers)
        for k in ks:
            points.append(_moment_point(radii[:, k - 1], n, k, p, mass))

    log_kn = [math.log(pt.k / pt.n) for pt in points]
    log_m = [math.log(pt.empirical_moment) for pt in points]
    fit = slope_fit(log_kn, log_m) if len(set(log_kn)) >= 2 else None
    ratios = [pt.normalised_moment for pt in points]
    return MomentCheckReport(tuple(points), fit, p / mass.s, min(ratios),
                             max(ratios), slope_tolerance)


def lower_bound_check(spec: SequenceSpec, x, mass: MassProfile, n: int,
                      k: int, p: float, reps: int,
                      workers: int = 1) -> LowerBoundResult:
    """ Test ``E[R^p] - 3 SE >= (1/2) (k / (2 c_plus n))^{p/s}``

    The bound holds without any mixing condition, so any family may be used.
    """
    if not (mass.c_plus > 0 and mass.s > 0 and mass.r0 > 0):
        raise ConfigurationError("c_plus, s and r0 must be positive",
                                 key="c_plus")
    _check_lower_bound_radius(n, k, mass)
    radii = _radius_table(spec, x, n, k, reps, "lowerbound", workers)
    point = _moment_point(radii[:, k - 1], n, k, p, mass)
    margin = point.empirical_moment - MARGIN_SE * point.standard_error \
        - point.lower_bound
    return LowerBoundResult(margin >= 0.0, margin, point.empirical_moment,
                            point.standard_error, point.lower_bound, n, k,
                            p, reps)


def as_convergence_check(spec: SequenceSpec, x,
                         k_schedule: Callable[[int], int],
                         n_grid: Sequence[int]) \
        -> Tuple[TrajectoryPoint, ...]:
    """ ``R_{n,k(n)}(x)`` along nested prefixes of one sequence

    :param spec: Data-generating process; one row of length ``max(n_grid)``
                 is drawn
    :param x: Query point
    :param k_schedule: Neighbor rank for each prefix length
    :param n_grid: Increasing prefix lengths
    :return: Trajectory; ``limit`` is the distance from ``x`` to the unit
             cube for uniform-marginal families and zero otherwise
    """
    grid = sorted(set(int(n) for n in n_grid))
    if not grid or grid[0] < 1:
        raise ConfigurationError("prefix lengths must be positive",
                                 key="n_grid")
    ks = [int(k_schedule(n)) for n in grid]
    for n, k in zip(grid, ks):
        if not 1 <= k <= n:
            raise ConfigurationError(f"k({n}) = {k} outside [1, {n}]",
                                     key="k_schedule")
    if len(grid) > 1 and ks[-1] / grid[-1] >= ks[0] / grid[0]:
        _log.warn("k/n does not shrink along the grid {grid}", grid=grid)

    row = generate(_row_spec(spec, grid[-1], "asconv",
                             _cell_id(spec, grid[-1], 0), 0))
    limit = cube_support_distance(x) \
        if spec.family in _UNIFORM_FAMILIES else 0.0
    trajectory = []
    for n, k in zip(grid, ks):
        radius = knn_radius(row.data.prefix(n), x, k, Metric.EUCLIDEAN)
        trajectory.append(TrajectoryPoint(n, k, radius, limit,
                                          abs(radius - limit)))
    return tuple(trajectory)


def parse_k_schedule(text: str) -> Callable[[int], int]:
    """ Build a neighbor schedule from its command-line spelling

    ``const:K`` gives ``k = K``; ``sqrt`` gives ``ceil(sqrt(n))``;
    ``power:b`` gives ``ceil(n^b)``.
    """
    name, _, arg = text.strip().lower().partition(":")
    try:
        if name == "const":
            value = int(arg)
            return lambda n: value
        if name == "sqrt":
            return lambda n: math.ceil(math.sqrt(n))
        if name == "power":
            exponent = float(arg)
            return lambda n: math.ceil(n ** exponent)
    except ValueError as exc:
        raise ConfigurationError(f"bad schedule {text!r}",
                                 key="k_schedule") from exc
    raise ConfigurationError(f"unknown schedule {text!r}", key="k_schedule")


class BoundedSequence(ABC):
    """ A centered, bounded stationary test sequence with known mixing

    Subclasses provide the bound ``S``, the mixing coefficients, the
    autocovariance and a sampler for the sum of ``n`` consecutive terms.
    """

    bound = 1.0

    @abstractmethod
    def alpha(self, m: int) -> float:
        """ Strong-mixing coefficient at separation ``m`` """

    @abstractmethod
    def autocovariance(self, h: int) -> float:
        """ ``Cov(Z_i, Z_{i+h})`` """

    @abstractmethod
    def sample_sums(self, rng: np.random.Generator, n: int,
                    reps: int) -> np.ndarray:
        """ Draw ``reps`` independent copies of ``sum_{i<=n} Z_i`` """

    def block_variance(self, n: int, m: int) -> float:
        """ ``sup_j E[(sum of Z over a window of m terms)^2]`` """
        length = min(m, n)
        return length * self.autocovariance(0) + 2.0 * math.fsum(
            (length - h) * self.autocovariance(h) for h in range(1, length))


class RademacherSequence(BoundedSequence):
    """ Independent fair signs """

    def alpha(self, m: int) -> float:
        return 0.0

    def autocovariance(self, h: int) -> float:
        return 1.0 if h == 0 else 0.0

    def sample_sums(self, rng, n, reps):
        return 2.0 * rng.binomial(n, 0.5, size=reps) - n


class MovingAverageRademacher(BoundedSequence):
    """ ``Z_i = (xi_i + xi_{i+1}) / 2`` for independent fair signs

    Terms two or more apart are independent, so ``alpha_m = 0`` for
    ``m >= 2``; ``alpha_1`` is reported as the universal bound 1/4.
    """

    _chunk = 10000

    def alpha(self, m: int) -> float:
        return 0.0 if m >= 2 else 0.25

    def autocovariance(self, h: int) -> float:
        return {0: 0.5, 1: 0.25}.get(abs(h), 0.0)

    def sample_sums(self, rng, n, reps):
        out = np.empty(reps)
        for start in range(0, reps, self._chunk):
            size = min(self._chunk, reps - start)
            signs = 2.0 * rng.integers(0, 2, size=(size, n + 1),
                                       dtype=np.int8) - 1.0
            out[start:start + size] = 0.5 * (signs[:, 0] + signs[:, n]) + \
                signs[:, 1:n].sum(axis=1)
        return out


SEQUENCES = {
    "rademacher": RademacherSequence,
    "ma1": MovingAverageRademacher,
}
""" Bernstein test sequences by command-line name """


def bernstein_bound(n: int, m: int, epsilon: float, sigma2: float,
                    bound: float, alpha_m: float) -> float:
    """ Bernstein-type tail bound for a bounded mixing sum

    ``4 exp(-eps^2 / (64 (n/m) sigma2 + (8/3) eps m S)) + 4 (n/m) alpha_m``
    """
    ratio = n / m
    exponent = epsilon * epsilon / (64.0 * ratio * sigma2
                                    + 8.0 / 3.0 * epsilon * m * bound)
    return 4.0 * math.exp(-exponent) + 4.0 * ratio * alpha_m


def bernstein_check(sequence: BoundedSequence, n: int, m: int,
                    epsilon_grid: Sequence[float], reps: int,
                    seed: int = streams.GLOBAL_SEED) \
        -> Tuple[BernsteinRow, ...]:
    """ Empirical ``P(|sum Z_i| > eps)`` against the bound

    :param sequence: Test sequence with known mixing and variance
    :param n: Number of terms
    :param m: Block length, ``1 <= m <= n``
    :param epsilon_grid: Thresholds, each above ``4 m S``
    :param reps: Replications
    :param seed: Global seed
    :return: One row per threshold
    """
    if not 1 <= m <= n:
        raise RangeError(f"m={m} outside [1, {n}]")
    for eps in epsilon_grid:
        if not eps > 4.0 * m * sequence.bound:
            raise ConfigurationError(
                f"epsilon={eps} must exceed 4 m S = "
                f"{4.0 * m * sequence.bound}", key="epsilon")

    rng = streams.stream(seed, "bernstein",
                         f"{type(sequence).__name__}/n{n}")
    sums = np.abs(sequence.sample_sums(rng, n, reps))
    sigma2 = sequence.block_variance(n, m)
    alpha_m = sequence.alpha(m)
    rows = []
    for eps in epsilon_grid:
        tail = float(np.count_nonzero(sums > eps)) / reps
        bound = bernstein_bound(n, m, eps, sigma2, sequence.bound, alpha_m)
        rows.append(BernsteinRow(float(eps), tail, bound, tail <= bound, n,
                                 m, sigma2, alpha_m, reps))
    return tuple(rows)


def _row_spec(spec: SequenceSpec, n: int, tag: str, cell: str,
              rep: int) -> SequenceSpec:
    return spec._replace(n=n, seed=streams.derive_seed(spec.seed, tag, cell,
                                                       rep))


def _cell_id(spec: SequenceSpec, n: int, k: int) -> str:
    return f"{spec.family}/{spec.tuning_parameter()}/d{spec.d}/n{n}/k{k}"


def _radius_table(spec: SequenceSpec, x, n: int, kmax: int, reps: int,
                  tag: str, workers: int) -> np.ndarray:
    if reps < 2:
        raise ConfigurationError("need at least two replications",
                                 key="reps")
    cell = _cell_id(spec, n, 0)

    def replicate(rep: int) -> np.ndarray:
        row = generate(_row_spec(spec, n, tag, cell, rep))
        dists = distances(row.data, x)
        if kmax < n:
            dists = np.partition(dists, kmax - 1)[:kmax]
        return np.sort(dists)

    return np.array(map_ordered(replicate, range(reps), workers))


def _moment_point(radii: np.ndarray, n: int, k: int, p: float,
                  mass: MassProfile) -> MomentPoint:
    moment = moment_estimate(radii, p)
    powered = np.power(radii, p)
    se = float(np.std(powered, ddof=1)) / math.sqrt(radii.size)
    lower = moment_lower_bound(n, k, p, mass.s, mass.c_plus)
    normalised = moment / (k / n) ** (p / mass.s)
    return MomentPoint(n, k, p, moment, se, lower, normalised,
                       moment - MARGIN_SE * se >= lower)


def _check_lower_bound_radius(n: int, k: int, mass: MassProfile) -> None:
    radius = (k / (2.0 * mass.c_plus * n)) ** (1.0 / mass.s)
    if radius > mass.r0:
        raise ConfigurationError(
            f"(k / (2 c_plus n))^(1/s) = {radius:.6g} exceeds r0 = "
            f"{mass.r0:.6g}", key="k")


def _decay_slope(exponents, survival) -> float:
    keep = [(e, math.log(v)) for e, v in zip(exponents, survival) if v > 0]
    if len(keep) < 2:
        return math.nan
    return slope_fit([e for e, _ in keep], [v for _, v in keep]).slope
