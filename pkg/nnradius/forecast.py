""" Windowed k-NN forecasting and classification

Series are standardized per channel with statistics of the training segment
only, cut into stride-1 ``(look-back, horizon)`` windows per channel, and
predicted by averaging the targets of the nearest training windows. Raw-kNN
searches the standardized windows directly; PCA-kNN first projects them on
principal components fitted to the training windows.

Hyperparameters are tuned over a fixed grid, by expanding-window
cross-validation when the training split is large enough and on the
validation split otherwise.

Short series are handled as groups: every series of a source group
contributes its windows to the neighbor database and the last horizon of
each target series is forecast from it. Groups are tuned by cross-validation
over whole series. Classification accepts either one file split by row
order or a given train/test pair.
"""

import enum
import itertools
import math
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from twisted.logger import Logger

from nnradius import streams
from nnradius.errors import (ConfigurationError, InsufficientDataError,
                             NnRadiusError, ParameterError, ShapeError)
from nnradius.estimators import (Standardized, pca_fit, pca_project,
                                 standardize)
from nnradius.generators import Family, SequenceSpec, gen_latent_ar1
from nnradius.geometry import Metric, PointSet
from nnradius.pool import map_ordered


_log = Logger()

K_GRID = (1, 3, 5, 7, 9, 15, 21, 31)
""" Neighbor counts searched by the tuner """

PCA_GRID = (8, 16, 32, 48, 64)
""" PCA embedding dimensions searched by the tuner """

DISTANCE_EPSILON = 1e-12
""" Regularizer of inverse-distance weights """

CV_MIN_WINDOWS = 20
""" Training windows needed before cross-validation replaces the holdout """

METRICS = ("mse", "mae", "smape")


@enum.unique
class Weighting(enum.IntEnum):
    """ Neighbor weighting scheme

    .. py:attribute:: UNIFORM

    .. py:attribute:: DISTANCE

       Weights ``1 / (distance + 1e-12)``
    """

    UNIFORM = 1
    DISTANCE = 2

    def __str__(self):
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> 'Weighting':
        """ Convert from command-line spelling """
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ParameterError(
                f"unknown {cls.__name__.lower()} {text!r}") from None


@enum.unique
class Task(enum.IntEnum):
    """ Prediction task """

    FORECAST = 1
    CLASSIFY = 2

    def __str__(self):
        return self.name.lower()


class KnnHyper(NamedTuple):
    """ One point of the hyperparameter grid

    .. py:attribute:: pca_dim

        PCA embedding dimension, or ``None`` for Raw-kNN
    """
    k: int
    weighting: Weighting = Weighting.UNIFORM
    metric: Metric = Metric.EUCLIDEAN
    pca_dim: Optional[int] = None

    def __str__(self):
        return (f"k={self.k} weighting={self.weighting} metric={self.metric} "
                f"pca_dim={self.pca_dim or 'none'}")


class ForecastConfig(NamedTuple):
    """ Forecasting protocol settings """
    lookback: int = 512
    horizon: int = 96
    split: Tuple[float, float, float] = (0.6, 0.1, 0.3)
    folds: int = 5
    cv_min_windows: int = CV_MIN_WINDOWS
    k_grid: Tuple[int, ...] = K_GRID
    pca_grid: Tuple[int, ...] = PCA_GRID
    use_pca: bool = True
    tuning_metric: str = "mse"
    group_tuning_metric: str = "smape"
    source_fraction: float = 0.7
    synthetic_length: int = 4000
    synthetic_rho: float = 0.9
    seed: int = streams.GLOBAL_SEED

    @classmethod
    def desk(cls, **overrides) -> 'ForecastConfig':
        """ Short windows for a quick run """
        values = dict(lookback=64, horizon=8)
        values.update(overrides)
        return cls(**values)

    def grid(self, width: int = None) -> Tuple[KnnHyper, ...]:
        """ The tuning grid; PCA dimensions above ``width`` are left out """
        width = self.lookback if width is None else width
        pca = (None,)
        if self.use_pca:
            pca += tuple(q for q in self.pca_grid if q <= width)
        return hyper_grid(self.k_grid, pca)

    def validate(self) -> None:
        """ Raise :py:class:`ConfigurationError` for unusable settings """
        checks = (
            ("lookback", self.lookback >= 1),
            ("horizon", self.horizon >= 1),
            ("split", len(self.split) == 3 and min(self.split) >= 0
             and self.split[0] > 0
             and abs(math.fsum(self.split) - 1.0) <= 1e-9),
            ("folds", self.folds >= 2),
            ("cv_min_windows", self.cv_min_windows >= 1),
            ("k_grid", self.k_grid and min(self.k_grid) >= 1),
            ("pca_grid", all(q >= 1 for q in self.pca_grid)),
            ("tuning_metric", self.tuning_metric in METRICS),
            ("group_tuning_metric", self.group_tuning_metric in METRICS),
            ("source_fraction", 0.0 < self.source_fraction < 1.0),
            ("synthetic_length", self.synthetic_length >= 2),
            ("synthetic_rho", -1.0 < self.synthetic_rho < 1.0),
        )
        for key, ok in checks:
            if not ok:
                raise ConfigurationError("invalid value",
                                         key=f"forecast.{key}")


class WindowDataset(NamedTuple):
    """ Input windows and their targets

    .. py:attribute:: inputs

        ``(m, L)`` look-back windows

    .. py:attribute:: targets

        ``(m, H)`` horizons, or length-m integer labels

    .. py:attribute:: starts

        Index of the first input value of each window in the series

    .. py:attribute:: channels

        Channel of each window

    .. py:attribute:: scale

        Per-window standard deviation of the source series when windows of
        differently scaled series are pooled; forecasts are then scored on
        the series scale

    .. py:attribute:: shift

        Per-window mean matching ``scale``
    """
    inputs: np.ndarray
    targets: np.ndarray
    starts: np.ndarray
    channels: np.ndarray
    scale: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        """ Number of windows """
        return self.inputs.shape[0]

    def subset(self, index) -> 'WindowDataset':
        """ Windows selected by a mask or index array """
        return WindowDataset(
            self.inputs[index], self.targets[index], self.starts[index],
            self.channels[index],
            None if self.scale is None else self.scale[index],
            None if self.shift is None else self.shift[index])

    def on_series_scale(self, values) -> np.ndarray:
        """ Undo the per-window standardization of ``(m, H)`` values """
        if self.scale is None:
            return np.asarray(values)
        return (np.asarray(values) * self.scale[:, np.newaxis]
                + self.shift[:, np.newaxis])


class WindowSplits(NamedTuple):
    """ Output of :py:func:`build_windows`

    .. py:attribute:: bounds

        ``(train_end, val_end)``: segment boundaries in series indices

    .. py:attribute:: scaler

        Per-channel statistics of the training segment
    """
    train: WindowDataset
    val: WindowDataset
    test: WindowDataset
    bounds: Tuple[int, int]
    scaler: Standardized


class GroupWindows(NamedTuple):
    """ Output of :py:func:`group_windows`

    ``channels`` holds the position of each window's series in the group.

    .. py:attribute:: database

        Every window of every usable series

    .. py:attribute:: finals

        The last window of each usable series; its targets are the final
        horizon
    """
    database: WindowDataset
    finals: WindowDataset


class ForecastMetrics(NamedTuple):
    """ Point-forecast errors; ``smape`` is in ``[0, 200]`` """
    mse: float
    mae: float
    smape: float


class TuneResult(NamedTuple):
    """ Output of :py:func:`tune`

    .. py:attribute:: scores

        Tuning score of each grid point, ``None`` where evaluation failed

    .. py:attribute:: scheme

        ``cv<folds>``, ``stratified<folds>`` or ``holdout``
    """
    best: KnnHyper
    score: float
    grid: Tuple[KnnHyper, ...]
    scores: Tuple[Optional[float], ...]
    scheme: str


class TuningRow(NamedTuple):
    """ Tuning score of one grid point """
    k: int
    weighting: Weighting
    metric: Metric
    pca_dim: Optional[int]
    score: float
    selected: bool

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


class EvalReport(NamedTuple):
    """ Test-split evaluation of a tuned predictor

    Forecast errors are given on the standardized scale used for prediction
    and, with an ``_original`` suffix, on the scale of the input series.
    Metrics that do not apply to the task are NaN, and so is ``split`` when
    the partition was given rather than cut by fractions.
    """
    task: Task
    k: int
    weighting: Weighting
    metric: Metric
    pca_dim: Optional[int]
    scheme: str
    split: Tuple[float, float, float]
    n_train: int
    n_val: int
    n_test: int
    mse: float
    mae: float
    smape: float
    mse_original: float
    mae_original: float
    smape_original: float
    baseline_mse: float
    baseline_mae: float
    baseline_smape: float
    accuracy: float

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


def hyper_grid(k_grid: Sequence[int] = K_GRID,
               pca_dims: Sequence[Optional[int]] = (None,) + PCA_GRID) \
        -> Tuple[KnnHyper, ...]:
    """ Cartesian grid in tie-breaking order

    PCA dimension varies slowest, then metric, then weighting, then ``k``.
    """
    return tuple(KnnHyper(k, weighting, metric, pca_dim)
                 for pca_dim, metric, weighting, k in itertools.product(
                     pca_dims, Metric, Weighting, k_grid))


def build_windows(series, lookback: int, horizon: int,
                  split: Tuple[float, float, float] = (0.6, 0.1, 0.3)) \
        -> WindowSplits:
    """ Standardize a series and cut it into windows per split

    The series is split chronologically at ``round(T * train)`` and
    ``round(T * (train + val))``. Every window, inputs and targets alike,
    lies inside one segment. Standardization uses the training segment only.

    :param series: ``(T,)`` or ``(T, channels)`` array
    :param lookback: Input length L
    :param horizon: Target length H
    :param split: Train, validation and test fractions
    :return: Window datasets
    """
    data = np.asarray(series, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, np.newaxis]
    if data.ndim != 2:
        raise ShapeError(f"series must be 1-D or 2-D, got {data.ndim}-D")
    if lookback < 1 or horizon < 1:
        raise ParameterError("look-back and horizon must be positive")
    length = data.shape[0]
    span = lookback + horizon
    if length < span:
        raise InsufficientDataError(
            f"series of length {length} is shorter than L + H = {span}")

    train_end = int(round(length * split[0]))
    val_end = min(int(round(length * (split[0] + split[1]))), length)
    if train_end < span:
        raise InsufficientDataError(
            f"training segment of length {train_end} holds no window of "
            f"length {span}")
    scaler = standardize(PointSet.from_array(data[:train_end]))
    scaled = scaler.apply(data)

    def segment(begin: int, end: int) -> WindowDataset:
        starts = np.arange(begin, max(begin, end - span + 1))
        offsets = np.arange(span)
        inputs, targets, origin, channel = [], [], [], []
        for ch in range(scaled.shape[1]):
            windows = scaled[starts[:, np.newaxis] + offsets, ch] \
                if starts.size else np.empty((0, span))
            inputs.append(windows[:, :lookback])
            targets.append(windows[:, lookback:])
            origin.append(starts)
            channel.append(np.full(starts.size, ch))
        return WindowDataset(np.vstack(inputs), np.vstack(targets),
                             np.concatenate(origin),
                             np.concatenate(channel))

    return WindowSplits(segment(0, train_end), segment(train_end, val_end),
                        segment(val_end, length), (train_end, val_end),
                        scaler)


def group_windows(group: Sequence, lookback: int, horizon: int) \
        -> GroupWindows:
    """ Cut a group of short series into windows

    Each series is standardized with the mean and standard deviation of its
    values before the final horizon. Series shorter than
    ``lookback + horizon`` are skipped with a warning.

    :param group: One-dimensional series of any lengths
    :param lookback: Input length L
    :param horizon: Target length H
    :return: Database and final windows
    """
    if lookback < 1 or horizon < 1:
        raise ParameterError("look-back and horizon must be positive")
    span = lookback + horizon
    parts = []
    for index, values in enumerate(group):
        arr = np.asarray(values, dtype=np.float64).ravel()
        if arr.size < span:
            _log.warn("series {index} of length {length} is shorter than "
                      "L + H = {span}; skipped", index=index,
                      length=arr.size, span=span)
            continue
        history = arr[:-horizon]
        shift = float(np.mean(history))
        scale = float(np.std(history))
        if scale <= 1e-12 * max(1.0, abs(shift)):
            scale = 1.0
        starts = np.arange(arr.size - span + 1)
        windows = ((arr - shift) / scale)[starts[:, np.newaxis]
                                           + np.arange(span)]
        count = starts.size
        parts.append(WindowDataset(
            windows[:, :lookback], windows[:, lookback:], starts,
            np.full(count, index), np.full(count, scale),
            np.full(count, shift)))
    if not parts:
        raise InsufficientDataError(
            f"no series of the group holds a window of length {span}")

    database = WindowDataset(*(np.concatenate(field)
                               for field in zip(*parts)))
    last = np.cumsum([part.size for part in parts]) - 1
    return GroupWindows(database, database.subset(last))


def knn_predict(train: WindowDataset, query, hyper: KnnHyper,
                task: Task = Task.FORECAST):
    """ Predict the target of one standardized query window

    :return: Length-H forecast, or an integer label
    """
    out = knn_predict_batch(train, np.atleast_2d(query), hyper, task)
    return out[0] if task is Task.FORECAST else int(out[0])


def knn_predict_batch(train: WindowDataset, queries, hyper: KnnHyper,
                      task: Task = Task.FORECAST) -> np.ndarray:
    """ Predict targets for many standardized query windows

    Neighbors are ranked by distance with ties going to the earlier training
    window. Forecasts are weighted averages of neighbor targets;
    classifications are weighted votes whose ties go to the label with the
    smallest distance sum, then to the lowest label.

    :param train: Training windows
    :param queries: ``(m, L)`` windows
    :param hyper: Grid point
    :param task: Forecast or classification
    :return: ``(m, H)`` forecasts or length-m labels
    """
    if train.size == 0:
        raise InsufficientDataError("no training windows")
    qs = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if qs.shape[1] != train.inputs.shape[1]:
        raise ShapeError(f"queries have length {qs.shape[1]}, training "
                         f"windows {train.inputs.shape[1]}")
    k = hyper.k
    if k > train.size:
        _log.warn("k={k} exceeds {size} training windows; clamped",
                  k=k, size=train.size)
        k = train.size

    reference, qs = _features(train.inputs, qs, hyper.pca_dim)
    dist = cdist(qs, reference, metric="euclidean"
                 if hyper.metric is Metric.EUCLIDEAN else "cityblock")
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    near = np.take_along_axis(dist, order, axis=1)
    if hyper.weighting is Weighting.DISTANCE:
        weights = 1.0 / (near + DISTANCE_EPSILON)
    else:
        weights = np.ones_like(near)
    weights = weights / weights.sum(axis=1, keepdims=True)

    if task is Task.FORECAST:
        return np.einsum("mk,mkh->mh", weights, train.targets[order])
    return np.array([_vote(train.targets[idx], w, d)
                     for idx, w, d in zip(order, weights, near)],
                    dtype=np.int64)


def _features(reference: np.ndarray, queries: np.ndarray,
              pca_dim: Optional[int]):
    if pca_dim is None:
        return reference, queries
    model = pca_fit(PointSet.from_array(reference), pca_dim)
    return (pca_project(model, reference, pca_dim).points,
            pca_project(model, queries, pca_dim).points)


def _vote(labels: np.ndarray, weights: np.ndarray, dists: np.ndarray) -> int:
    tally = {}
    for label, weight, dist in zip(labels.tolist(), weights, dists):
        score, total = tally.get(label, (0.0, 0.0))
        tally[label] = (score + weight, total + dist)
    return min(tally, key=lambda lab: (-tally[lab][0], tally[lab][1], lab))


def forecast_metrics(pred, truth) -> ForecastMetrics:
    """ MSE, MAE and sMAPE over every forecast value

    sMAPE is ``200 |y - yhat| / (|y| + |yhat|)`` averaged over values, with
    ``0/0`` terms counted as zero.
    """
    yhat = np.asarray(pred, dtype=np.float64)
    y = np.asarray(truth, dtype=np.float64)
    if yhat.shape != y.shape:
        raise ShapeError(f"prediction shape {yhat.shape} differs from "
                         f"truth shape {y.shape}")
    if y.size == 0:
        raise InsufficientDataError("no forecasts to score")
    err = np.abs(y - yhat)
    denom = np.abs(y) + np.abs(yhat)
    ratio = np.divide(err, denom, out=np.zeros_like(err), where=denom > 0)
    return ForecastMetrics(float(np.mean(err * err)), float(np.mean(err)),
                           float(200.0 * np.mean(ratio)))


def accuracy(pred, truth) -> float:
    """ Fraction of correct labels """
    yhat = np.asarray(pred)
    y = np.asarray(truth)
    if yhat.shape != y.shape:
        raise ShapeError(f"{yhat.size} predictions for {y.size} labels")
    if y.size == 0:
        raise InsufficientDataError("no labels to score")
    return float(np.count_nonzero(yhat == y)) / y.size


def last_value_baseline(inputs, horizon: int) -> np.ndarray:
    """ Carry the last input value forward over the horizon """
    arr = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    return np.repeat(arr[:, -1:], horizon, axis=1)


def time_series_folds(dataset: WindowDataset, folds: int, span: int):
    """ Expanding-window folds over window start times

    Start times are cut into ``folds + 1`` contiguous blocks; fold ``i``
    validates on block ``i + 1`` and trains on the windows that end before
    that block begins.

    :return: List of ``(train_mask, val_mask)``
    """
    blocks = np.array_split(np.unique(dataset.starts), folds + 1)
    out = []
    for block in blocks[1:]:
        if block.size == 0:
            continue
        val = np.isin(dataset.starts, block)
        train = dataset.starts + span <= block[0]
        if np.any(train):
            out.append((train, val))
    return out


def stratified_folds(labels: np.ndarray, folds: int):
    """ Folds with every class spread evenly, or ``None`` if infeasible

    Feasible when each class has at least ``folds`` members. Members are
    dealt to folds in file order.
    """
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < 2 or np.min(counts) < folds:
        return None
    assignment = np.empty(labels.size, dtype=np.int64)
    for label in classes:
        members = np.flatnonzero(labels == label)
        assignment[members] = np.arange(members.size) % folds
    return [(assignment != f, assignment == f) for f in range(folds)]


def group_folds(windows: GroupWindows, folds: int):
    """ Folds over whole series of a group

    Series are cut into ``min(folds, series)`` contiguous blocks; each fold
    forecasts the final horizon of its block's series from every window of
    the other series.

    :return: List of ``(fit, check)`` window datasets
    """
    owners = np.unique(windows.finals.channels)
    if owners.size < 2:
        raise InsufficientDataError(
            "cross-validation over series needs two usable series")
    out = []
    for block in np.array_split(owners, min(folds, owners.size)):
        held = np.isin(windows.database.channels, block)
        out.append((windows.database.subset(~held),
                    windows.finals.subset(
                        np.isin(windows.finals.channels, block))))
    return out


def tune(train: WindowDataset, grid: Sequence[KnnHyper],
         task: Task = Task.FORECAST, val: WindowDataset = None,
         folds: int = 5, metric: str = "mse",
         cv_min_windows: int = CV_MIN_WINDOWS, workers: int = 1,
         predict: Callable = None, splits=None) -> TuneResult:
    """ Select the grid point with the best validation score

    Forecasting uses expanding-window cross-validation when the training
    split has at least ``cv_min_windows`` windows and the validation split
    otherwise. Classification uses stratified folds when every class is
    large enough and the validation split otherwise. Lower scores win for
    forecast metrics, higher accuracy wins for classification; ties go to
    the earlier grid point.

    :param train: Training windows
    :param grid: Candidate grid points, nonempty
    :param task: Forecast or classification
    :param val: Validation windows for the holdout scheme
    :param folds: Cross-validation folds
    :param metric: ``mse``, ``mae`` or ``smape`` for forecasting
    :param cv_min_windows: Smallest training split that is cross-validated
    :param workers: Threads; grid points are the unit of parallelism
    :param predict: Replacement for :py:func:`knn_predict_batch`
    :param splits: ``(scheme, [(fit, check), ...])`` used instead of the
        automatic choice
    :return: Best grid point and every score
    """
    grid = tuple(grid)
    if not grid:
        raise ConfigurationError("empty tuning grid", key="grid")
    predict = predict or knn_predict_batch

    if splits is None:
        splits = _tuning_splits(train, task, val, folds, cv_min_windows)
    scheme, splits = splits

    def score(hyper: KnnHyper) -> Optional[float]:
        values = []
        try:
            for fit, check in splits:
                pred = predict(fit, check.inputs, hyper, task)
                values.append(_score(pred, check, task, metric))
        except (NnRadiusError, np.linalg.LinAlgError) as exc:
            _log.warn("grid point {hyper} failed: {error}",
                      hyper=str(hyper), error=exc)
            return None
        return math.fsum(values) / len(values)

    scores = tuple(map_ordered(score, grid, workers))
    best_index = None
    for index, value in enumerate(scores):
        if value is None:
            continue
        if best_index is None or _better(value, scores[best_index], task):
            best_index = index
    if best_index is None:
        raise ConfigurationError("every grid point failed", key="grid")

    _log.info("tuned by {scheme}: {hyper} (score {score})", scheme=scheme,
              hyper=str(grid[best_index]), score=scores[best_index])
    return TuneResult(grid[best_index], scores[best_index], grid, scores,
                      scheme)


def _tuning_splits(train, task, val, folds, cv_min_windows):
    if task is Task.CLASSIFY:
        masks = stratified_folds(train.targets, folds)
        if masks is not None:
            return (f"stratified{folds}",
                    [(train.subset(a), train.subset(b)) for a, b in masks])
    elif train.size >= cv_min_windows:
        span = train.inputs.shape[1] + train.targets.shape[1]
        masks = time_series_folds(train, folds, span)
        if masks:
            return (f"cv{folds}",
                    [(train.subset(a), train.subset(b)) for a, b in masks])
    if val is None or val.size == 0:
        raise InsufficientDataError(
            "too few training windows for cross-validation and no "
            "validation windows")
    return "holdout", [(train, val)]


def _score(pred, check: WindowDataset, task: Task, metric: str) -> float:
    if task is Task.CLASSIFY:
        return accuracy(pred, check.targets)
    return getattr(forecast_metrics(check.on_series_scale(pred),
                                    check.on_series_scale(check.targets)),
                   metric)


def _better(value: float, incumbent: float, task: Task) -> bool:
    return value > incumbent if task is Task.CLASSIFY else value < incumbent


def synthetic_ar1(length: int, rho: float,
                  seed: int = streams.GLOBAL_SEED) -> np.ndarray:
    """ Stationary Gaussian AR(1) series with unit variance """
    spec = SequenceSpec(Family.LATENT_AR1, length, 1, seed=streams.derive_seed(
        seed, "forecast", f"ar1/rho{rho!r}/n{length}"))
    return gen_latent_ar1(spec, 1, rho).data.points[:, 0].copy()


def evaluate_forecast(series, cfg: ForecastConfig,
                      grid: Sequence[KnnHyper] = None, workers: int = 1) \
        -> Tuple[EvalReport, TuneResult, np.ndarray]:
    """ Tune on the training split and score the test split

    :param series: ``(T,)`` or ``(T, channels)`` array
    :param cfg: Protocol settings
    :param grid: Tuning grid; ``cfg.grid()`` if omitted
    :param workers: Threads for tuning
    :return: Report, tuning scores and standardized test forecasts
    """
    cfg.validate()
    splits = build_windows(series, cfg.lookback, cfg.horizon, cfg.split)
    train, val, test = splits.train, splits.val, splits.test
    if test.size == 0:
        raise InsufficientDataError("test segment holds no window")

    tuned = tune(train, grid or cfg.grid(), Task.FORECAST, val, cfg.folds,
                 cfg.tuning_metric, cfg.cv_min_windows, workers)
    pred = knn_predict_batch(train, test.inputs, tuned.best)
    truth = test.targets
    baseline = last_value_baseline(test.inputs, cfg.horizon)

    scale = splits.scaler.stds[test.channels][:, np.newaxis]
    shift = splits.scaler.means[test.channels][:, np.newaxis]
    std_metrics = forecast_metrics(pred, truth)
    orig_metrics = forecast_metrics(pred * scale + shift,
                                    truth * scale + shift)
    base_metrics = forecast_metrics(baseline, truth)

    best = tuned.best
    report = EvalReport(Task.FORECAST, best.k, best.weighting, best.metric,
                        best.pca_dim, tuned.scheme, tuple(cfg.split),
                        train.size, val.size, test.size, *std_metrics,
                        *orig_metrics, *base_metrics, math.nan)
    _log.info("forecast test mse {mse} (last value {baseline})",
              mse=std_metrics.mse, baseline=base_metrics.mse)
    return report, tuned, pred


def evaluate_transfer(source: Sequence, target: Sequence,
                      cfg: ForecastConfig, grid: Sequence[KnnHyper] = None,
                      workers: int = 1) \
        -> Tuple[EvalReport, TuneResult, np.ndarray]:
    """ Tune on one group of short series and forecast another

    Hyperparameters are chosen by cross-validation over the source series
    with ``cfg.group_tuning_metric``. The final horizon of every target
    series is then forecast from the windows of all source series.

    :param source: Source series
    :param target: Target series, scored on their final horizon
    :param cfg: Protocol settings; ``split`` is ignored
    :param grid: Tuning grid; ``cfg.grid()`` if omitted
    :param workers: Threads for tuning
    :return: Report, tuning scores and standardized target forecasts
    """
    cfg.validate()
    return _evaluate_group(
        group_windows(source, cfg.lookback, cfg.horizon),
        group_windows(target, cfg.lookback, cfg.horizon),
        cfg, grid, workers, (math.nan,) * 3)


def evaluate_within_group(group: Sequence, cfg: ForecastConfig,
                          grid: Sequence[KnnHyper] = None,
                          workers: int = 1) \
        -> Tuple[EvalReport, TuneResult, np.ndarray]:
    """ Split one group at random into source and target series

    A seeded permutation sends ``round(cfg.source_fraction * series)``
    series to the source and the rest to the target; both keep file order.
    Evaluation then follows :py:func:`evaluate_transfer`.

    :param group: Series of one group
    :return: Report, tuning scores and standardized target forecasts
    """
    cfg.validate()
    count = len(group)
    n_source = int(round(count * cfg.source_fraction))
    if n_source < 2 or n_source >= count:
        raise InsufficientDataError(
            f"{count} series cannot be split into two source series and "
            f"a target series at fraction {cfg.source_fraction}")
    order = streams.stream(cfg.seed, "forecast", "within-group").permutation(
        count)
    source = [group[i] for i in sorted(order[:n_source])]
    target = [group[i] for i in sorted(order[n_source:])]
    _log.info("within-group split: {source} source, {target} target series",
              source=len(source), target=len(target))
    return _evaluate_group(
        group_windows(source, cfg.lookback, cfg.horizon),
        group_windows(target, cfg.lookback, cfg.horizon),
        cfg, grid, workers,
        (cfg.source_fraction, 0.0, 1.0 - cfg.source_fraction))


def _evaluate_group(source: GroupWindows, target: GroupWindows,
                    cfg: ForecastConfig, grid, workers: int, split) \
        -> Tuple[EvalReport, TuneResult, np.ndarray]:
    folds = group_folds(source, cfg.folds)
    train = source.database
    tuned = tune(train, grid or cfg.grid(), Task.FORECAST,
                 metric=cfg.group_tuning_metric, workers=workers,
                 splits=(f"group{len(folds)}", folds))
    test = target.finals
    pred = knn_predict_batch(train, test.inputs, tuned.best)
    baseline = last_value_baseline(test.inputs, cfg.horizon)

    std_metrics = forecast_metrics(pred, test.targets)
    orig_metrics = forecast_metrics(test.on_series_scale(pred),
                                    test.on_series_scale(test.targets))
    base_metrics = forecast_metrics(baseline, test.targets)

    best = tuned.best
    report = EvalReport(Task.FORECAST, best.k, best.weighting, best.metric,
                        best.pca_dim, tuned.scheme, tuple(split),
                        train.size, 0, test.size, *std_metrics,
                        *orig_metrics, *base_metrics, math.nan)
    _log.info("group forecast smape {smape} (last value {baseline})",
              smape=orig_metrics.smape, baseline=base_metrics.smape)
    return report, tuned, pred


def _labelled(inputs, labels) -> Tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"{x.shape[0]} series but {y.shape[0]} labels")
    return x, y


def _rows(x: np.ndarray, y: np.ndarray, begin: int = 0) -> WindowDataset:
    count = x.shape[0]
    return WindowDataset(x, y, np.arange(begin, begin + count),
                         np.zeros(count, dtype=np.int64))


def _classify(train: WindowDataset, test: WindowDataset, n_val: int,
              tuned: TuneResult, split) \
        -> Tuple[EvalReport, TuneResult, np.ndarray]:
    pred = knn_predict_batch(train, test.inputs, tuned.best, Task.CLASSIFY)
    score = accuracy(pred, test.targets)

    best = tuned.best
    nan3 = (math.nan,) * 3
    report = EvalReport(Task.CLASSIFY, best.k, best.weighting, best.metric,
                        best.pca_dim, tuned.scheme, tuple(split),
                        train.size, n_val, test.size, *nan3, *nan3,
                        *nan3, score)
    _log.info("classification test accuracy {accuracy}", accuracy=score)
    return report, tuned, pred


def evaluate_classification(inputs, labels, cfg: ForecastConfig,
                            grid: Sequence[KnnHyper] = None,
                            workers: int = 1) \
        -> Tuple[EvalReport, TuneResult, np.ndarray]:
    """ Tune and score a labelled-series classifier

    Rows are split in file order by ``cfg.split``. Each input position is
    standardized with training-row statistics.

    :param inputs: ``(m, L)`` series
    :param labels: Length-m integer labels
    :param cfg: Protocol settings; look-back and horizon are ignored
    :param grid: Tuning grid; ``cfg.grid(L)`` if omitted
    :param workers: Threads for tuning
    :return: Report, tuning scores and test predictions
    """
    cfg.validate()
    x, y = _labelled(inputs, labels)
    rows = x.shape[0]
    train_end = int(round(rows * cfg.split[0]))
    val_end = min(int(round(rows * (cfg.split[0] + cfg.split[1]))), rows)
    if train_end < 2 or val_end >= rows:
        raise InsufficientDataError(
            f"{rows} labelled series are too few for split {cfg.split}")

    scaled = standardize(PointSet.from_array(x[:train_end])).apply(x)
    train = _rows(scaled[:train_end], y[:train_end])
    val = _rows(scaled[train_end:val_end], y[train_end:val_end], train_end)
    test = _rows(scaled[val_end:], y[val_end:], val_end)
    tuned = tune(train, grid or cfg.grid(x.shape[1]), Task.CLASSIFY, val,
                 cfg.folds, workers=workers)
    return _classify(train, test, val.size, tuned, cfg.split)


def evaluate_classification_split(train_inputs, train_labels, test_inputs,
                                  test_labels, cfg: ForecastConfig,
                                  grid: Sequence[KnnHyper] = None,
                                  workers: int = 1) \
        -> Tuple[EvalReport, TuneResult, np.ndarray]:
    """ Tune on a given training set and score a given test set

    Only training rows are used for standardization and tuning: stratified
    folds when every class has ``cfg.folds`` members, otherwise a holdout
    of the last training rows sized by the validation share of
    ``cfg.split``. The final classifier uses every training row.

    :param train_inputs: ``(m, L)`` training series
    :param train_labels: Length-m integer labels
    :param test_inputs: ``(n, L)`` test series
    :param test_labels: Length-n integer labels
    :param cfg: Protocol settings; look-back and horizon are ignored
    :param grid: Tuning grid; ``cfg.grid(L)`` if omitted
    :param workers: Threads for tuning
    :return: Report, tuning scores and test predictions
    """
    cfg.validate()
    x_train, y_train = _labelled(train_inputs, train_labels)
    x_test, y_test = _labelled(test_inputs, test_labels)
    if x_train.shape[1] != x_test.shape[1]:
        raise ShapeError(f"training series have length {x_train.shape[1]}, "
                         f"test series {x_test.shape[1]}")
    rows = x_train.shape[0]
    if rows < 3:
        raise InsufficientDataError(
            f"{rows} training series are too few to tune on")

    scaler = standardize(PointSet.from_array(x_train))
    train = _rows(scaler.apply(x_train), y_train)
    test = _rows(scaler.apply(x_test), y_test, rows)

    masks = stratified_folds(y_train, cfg.folds)
    if masks is not None:
        splits = (f"stratified{cfg.folds}",
                  [(train.subset(a), train.subset(b)) for a, b in masks])
        n_val = 0
    else:
        share = cfg.split[1] / (cfg.split[0] + cfg.split[1])
        n_val = min(max(1, int(round(rows * share))), rows - 2)
        head = np.arange(rows) < rows - n_val
        splits = ("holdout", [(train.subset(head), train.subset(~head))])
    tuned = tune(train, grid or cfg.grid(x_train.shape[1]), Task.CLASSIFY,
                 workers=workers, splits=splits)
    return _classify(train, test, n_val, tuned, (math.nan,) * 3)


def tuning_rows(tuned: TuneResult) -> Tuple[TuningRow, ...]:
    """ One CSV row per grid point """
    return tuple(TuningRow(h.k, h.weighting, h.metric, h.pca_dim,
                           math.nan if s is None else s, h == tuned.best)
                 for h, s in zip(tuned.grid, tuned.scores))
