""" Moment-rate and entropy experiments

Experiment 1 measures how the mean p-th moment of the k-NN radius at
interior query points scales with ``k / n`` for i.i.d. and dependent
uniform-marginal sequences, and fits ``log M = a + b log(k/n)`` per cell.
Experiment 2 estimates the entropy of a latent Gaussian AR(1) process from
its 20-dimensional linear embedding, both directly and through PCA.

Every ``(cell, replication)`` draws from its own derived stream, so a cell
can be rerun alone and produce the same numbers. Pooled sums use
:py:func:`math.fsum`; results do not depend on replication order.
"""

import math
import os
import time
from typing import TYPE_CHECKING, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from twisted.logger import Logger

from nnradius import streams
from nnradius.errors import (ConfigurationError, DegenerateSampleError,
                             InsufficientDataError, NnRadiusError)
from nnradius.estimators import (SlopeFit, embed_kl, gaussian_entropy,
                                 mle_intrinsic_dimension, pca_fit,
                                 pca_project, slope_fit)
from nnradius.generators import (AMBIENT_DIM, Family, SequenceSpec, Strength,
                                 embed_ambient, gen_latent_ar1, generate)
from nnradius.geometry import knn_radii
from nnradius.manifest import RunManifest, checksum
from nnradius.pool import map_ordered
from nnradius.protocol import ReportWriter
from nnradius.version import __version__

if TYPE_CHECKING:  # pragma: no cover
    from nnradius.config import Settings


_log = Logger()


class Exp1Config(NamedTuple):
    """ Grid of the moment-rate experiment

    Sample sizes are ``n = 100 * 2^d * m``; neighbor counts are
    ``round(n^beta)`` capped at ``kn_cap * n``; query points are uniform on
    ``[eval_low, eval_high]^d``. The i.i.d. baseline is always run.
    """
    d_list: Tuple[int, ...] = (1, 3, 5)
    p_over_d: Tuple[int, ...] = (1, 2, 3, 4, 5)
    m_list: Tuple[int, ...] = (1, 2, 4, 8, 16, 32)
    beta_min: float = 0.1
    beta_max: float = 0.9
    beta_points: int = 20
    eval_points: int = 1000
    eval_low: float = 0.01
    eval_high: float = 0.99
    kn_cap: float = 0.01
    families: Tuple[Family, ...] = (Family.LSS, Family.HMM, Family.GP_FFT)
    strengths: Tuple[Strength, ...] = (Strength.WEAK, Strength.MEDIUM,
                                       Strength.STRONG)
    mc_reps: int = 100
    seed: int = streams.GLOBAL_SEED

    @classmethod
    def desk(cls, **overrides) -> 'Exp1Config':
        """ Reduced grid that runs in minutes """
        values = dict(m_list=(1, 2, 4, 8), eval_points=200, mc_reps=50)
        values.update(overrides)
        return cls(**values)

    @property
    def beta_grid(self) -> Tuple[float, ...]:
        """ Equally spaced exponents from ``beta_min`` to ``beta_max`` """
        return tuple(float(b) for b in np.linspace(
            self.beta_min, self.beta_max, self.beta_points))

    def settings(self) -> List[Tuple[Family, Optional[Strength]]]:
        """ ``(family, strength)`` pairs, i.i.d. baseline first """
        pairs = [(Family.IID_UNIFORM, None)]
        for family in self.families:
            if family is Family.IID_UNIFORM:
                continue
            if family is Family.LATENT_AR1:
                raise ConfigurationError(
                    "latent_ar1 has no uniform marginals",
                    key="exp1.families")
            pairs.extend((family, strength) for strength in self.strengths)
        return pairs

    def validate(self) -> None:
        """ Raise :py:class:`ConfigurationError` for an unusable grid """
        checks = (
            ("d_list", all(d >= 1 for d in self.d_list) and self.d_list),
            ("p_over_d", all(r > 0 for r in self.p_over_d)
             and self.p_over_d),
            ("m_list", all(m >= 1 for m in self.m_list) and self.m_list),
            ("beta_points", self.beta_points >= 2),
            ("beta_min", 0 < self.beta_min < self.beta_max < 1),
            ("eval_points", self.eval_points >= 1),
            ("eval_low", 0 <= self.eval_low < self.eval_high <= 1),
            ("kn_cap", 0 < self.kn_cap <= 1),
            ("mc_reps", self.mc_reps >= 1),
        )
        for key, ok in checks:
            if not ok:
                raise ConfigurationError("invalid value", key=f"exp1.{key}")


class Exp2Config(NamedTuple):
    """ Grid of the entropy experiment

    The neighbor rank is ``max(k_min, ceil(n^k_exponent))``.
    """
    s_list: Tuple[int, ...] = (1, 3, 5)
    rho_list: Tuple[float, ...] = (0.0, 0.3, 0.6)
    n_grid: Tuple[int, ...] = (512, 1024, 2048, 4096)
    reps: int = 1000
    k_exponent: float = 0.1
    k_min: int = 2
    mle_k: int = 10
    burn_in: int = 2000
    ambient_d: int = AMBIENT_DIM
    pca_q: int = 5
    seed: int = streams.GLOBAL_SEED

    @classmethod
    def desk(cls, **overrides) -> 'Exp2Config':
        """ Reduced replication count """
        values = dict(reps=100)
        values.update(overrides)
        return cls(**values)

    def neighbor_rank(self, n: int) -> int:
        """ ``k = max(k_min, ceil(n^k_exponent))`` """
        return max(self.k_min, math.ceil(n ** self.k_exponent))

    def validate(self) -> None:
        """ Raise :py:class:`ConfigurationError` for an unusable grid """
        checks = (
            ("s_list", self.s_list and all(1 <= s <= self.pca_q
                                           for s in self.s_list)),
            ("rho_list", self.rho_list and all(abs(r) < 1
                                               for r in self.rho_list)),
            ("n_grid", self.n_grid and all(n >= 2 for n in self.n_grid)),
            ("reps", self.reps >= 1),
            ("k_min", self.k_min >= 1),
            ("mle_k", self.mle_k >= 2),
            ("burn_in", self.burn_in >= 0),
            ("ambient_d", self.ambient_d == AMBIENT_DIM),
            ("pca_q", 1 <= self.pca_q <= 5),
        )
        for key, ok in checks:
            if not ok:
                raise ConfigurationError("invalid value", key=f"exp2.{key}")


class Exp1Row(NamedTuple):
    """ Fitted moment-rate slope of one cell """
    family: Family
    strength: str
    d: int
    p: int
    slope: float
    intercept: float
    r2: float
    n_points: int
    target_slope: float
    reps_failed: int

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


class Exp1OrderingRow(NamedTuple):
    """ Slopes of one family across dependence strengths

    ``ordered`` reports whether ``|slope - p/d|`` is nondecreasing from
    weak to strong dependence. It is descriptive only.
    """
    family: Family
    d: int
    p: int
    slope_iid: float
    slope_weak: float
    slope_medium: float
    slope_strong: float
    ordered: bool

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


class Exp2Row(NamedTuple):
    """ Entropy estimates of one ``(s, rho, n)`` cell, in nats """
    s: int
    rho: float
    n: int
    k: int
    h_true: float
    h_oracle_mean: float
    h_pca_mean: float
    h_ambient_mean: float
    sd_oracle: float
    sd_pca: float
    dim_mle_mean: float
    reps_used: int
    reps_failed: int

    def as_dict(self) -> dict:
        """ Convert to dict """
        return self._asdict()  # pylint: disable=no-member

    @classmethod
    def field_names(cls) -> Tuple:
        """ Column order for CSV files """
        return cls._fields


class Exp1Result(NamedTuple):
    """ Output of :py:func:`run_exp1`

    .. py:attribute:: cell_seeds

        Generator seed of the first replication of each
        ``family/strength/d/m`` sample size
    """
    rows: Tuple[Exp1Row, ...]
    ordering: Tuple[Exp1OrderingRow, ...]
    cell_seeds: Dict[str, int]
    failures: int


class Exp2Result(NamedTuple):
    """ Output of :py:func:`run_exp2` """
    rows: Tuple[Exp2Row, ...]
    cell_seeds: Dict[str, int]
    failures: int


def sample_size(d: int, m: int) -> int:
    """ ``n = 100 * 2^d * m`` """
    return 100 * 2 ** d * m


def neighbor_counts(n: int, beta_grid, kn_cap: float) -> Tuple[int, ...]:
    """ Distinct neighbor ranks for one sample size

    ``k = round(n^beta)`` (halves to even), capped at ``floor(kn_cap n)``.
    Ranks below one are dropped with a warning; duplicates are removed.

    :return: Increasing ranks
    """
    cap = math.floor(kn_cap * n)
    ks = set()
    for beta in beta_grid:
        k = min(int(np.rint(n ** beta)), cap)
        if k < 1:
            _log.warn("beta={beta} gives k < 1 at n={n}; dropped",
                      beta=beta, n=n)
            continue
        ks.add(k)
    return tuple(sorted(ks))


def run_exp1(cfg: Exp1Config, workers: int = 1) -> Exp1Result:
    """ Run the moment-rate experiment

    :param cfg: Grid
    :param workers: Threads; cells are the unit of parallelism
    :return: One row per ``(family, strength, d, p)`` plus the ordering
             summary
    """
    cfg.validate()
    cells = [(family, strength, d) for family, strength in cfg.settings()
             for d in cfg.d_list]
    outcomes = map_ordered(lambda cell: _exp1_cell(cfg, *cell), cells,
                           workers)

    rows = [row for cell_rows, _, _ in outcomes for row in cell_rows]
    failures = sum(failed for _, failed, _ in outcomes)
    seeds = {key: seed for _, _, cell_seeds in outcomes
             for key, seed in cell_seeds.items()}
    return Exp1Result(tuple(rows), dependence_ordering(rows), seeds,
                      failures)


def dependence_ordering(rows) -> Tuple[Exp1OrderingRow, ...]:
    """ Summarise slopes across strengths for each ``(family, d, p)`` """
    table = {(r.family, r.strength, r.d, r.p): r.slope for r in rows}
    out = []
    for (family, strength, d, p), _ in table.items():
        if family is Family.IID_UNIFORM or strength != str(Strength.WEAK):
            continue
        slopes = [table.get((family, str(s), d, p)) for s in Strength]
        baseline = table.get((Family.IID_UNIFORM, "none", d, p))
        if baseline is None or any(v is None for v in slopes):
            continue
        gaps = [abs(v - p / d) for v in slopes]
        out.append(Exp1OrderingRow(family, d, p, baseline, *slopes,
                                   gaps[0] <= gaps[1] <= gaps[2]))
    return tuple(out)


def _exp1_cell_id(family: Family, strength: Optional[Strength],
                  d: int) -> str:
    return f"{family}/{strength or 'none'}/d{d}"


def _exp1_cell(cfg: Exp1Config, family: Family,
               strength: Optional[Strength], d: int):
    cell = _exp1_cell_id(family, strength, d)
    powers = [r * d for r in cfg.p_over_d]
    log_kn: List[float] = []
    log_m: Dict[int, List[float]] = {p: [] for p in powers}
    failed = 0
    seeds: Dict[str, int] = {}

    for m in cfg.m_list:
        n = sample_size(d, m)
        ks = neighbor_counts(n, cfg.beta_grid, cfg.kn_cap)
        if not ks:
            continue
        size_cell = f"{cell}/m{m}"
        seeds[size_cell] = streams.derive_seed(cfg.seed, "exp1", size_cell)
        sums = []
        for rep in range(cfg.mc_reps):
            try:
                sums.append(_exp1_replication(cfg, family, strength, d, n,
                                              ks, powers, size_cell, rep))
            except (NnRadiusError, FloatingPointError) as exc:
                failed += 1
                _log.warn("{cell} m={m} rep {rep} failed: {error}",
                          cell=cell, m=m, rep=rep, error=exc)
        if not sums:
            continue
        count = len(sums) * cfg.eval_points
        for i, k in enumerate(ks):
            log_kn.append(math.log(k / n))
            for j, p in enumerate(powers):
                pooled = math.fsum(s[i][j] for s in sums) / count
                log_m[p].append(math.log(pooled))

    rows = []
    for ratio, p in zip(cfg.p_over_d, powers):
        try:
            fit = slope_fit(log_kn, log_m[p])
        except (InsufficientDataError, NnRadiusError) as exc:
            _log.warn("{cell} p={p}: no slope ({error})", cell=cell, p=p,
                      error=exc)
            fit = SlopeFit(math.nan, math.nan, math.nan, len(log_kn))
        rows.append(Exp1Row(family, str(strength or "none"), d, p,
                            fit.slope, fit.intercept, fit.r2, fit.n_points,
                            float(ratio), failed))
    _log.info("exp1 cell {cell} done ({failed} failed replications)",
              cell=cell, failed=failed)
    return rows, failed, seeds


def _exp1_replication(cfg, family, strength, d, n, ks, powers, cell, rep):
    spec = SequenceSpec(family, n, d, strength=strength,
                        seed=streams.derive_seed(cfg.seed, "exp1", cell, rep))
    row = generate(spec)
    queries = streams.stream(cfg.seed, "exp1-eval", cell, rep).uniform(
        cfg.eval_low, cfg.eval_high, size=(cfg.eval_points, d))
    radii = knn_radii(row.data, queries, ks[-1])
    return [[math.fsum(np.power(radii[:, k - 1], p)) for p in powers]
            for k in ks]


def run_exp2(cfg: Exp2Config, workers: int = 1) -> Exp2Result:
    """ Run the entropy experiment

    :param cfg: Grid
    :param workers: Threads; cells are the unit of parallelism
    :return: One row per ``(s, rho, n)``
    """
    cfg.validate()
    cells = [(s, rho, n) for s in cfg.s_list for rho in cfg.rho_list
             for n in cfg.n_grid]
    rows = map_ordered(lambda cell: _exp2_cell(cfg, *cell), cells, workers)
    seeds = {_exp2_cell_id(*cell): streams.derive_seed(
        cfg.seed, "exp2", _exp2_cell_id(*cell)) for cell in cells}
    return Exp2Result(tuple(rows), seeds, sum(r.reps_failed for r in rows))


def entropy_replication(cfg: Exp2Config, s: int, rho: float, n: int,
                        rep: int):
    """ Entropy estimates for one replication of one cell

    :return: :py:class:`~nnradius.estimators.EntropyReport` and the MLE
             intrinsic dimension of the observations
    """
    k = cfg.neighbor_rank(n)
    cell = _exp2_cell_id(s, rho, n)
    spec = SequenceSpec(Family.LATENT_AR1, n, s, burn_in=cfg.burn_in,
                        seed=streams.derive_seed(cfg.seed, "exp2", cell, rep))
    latent = gen_latent_ar1(spec, s, rho)
    observed = embed_ambient(latent, s, cfg.seed)
    model = pca_fit(observed.data, cfg.pca_q)
    report = embed_kl(latent.data, pca_project(model, observed.data, s),
                      observed.data, k, s, rho)
    return report, mle_intrinsic_dimension(observed.data,
                                           min(cfg.mle_k, n - 1))


def _exp2_cell_id(s: int, rho: float, n: int) -> str:
    return f"s{s}/rho{rho!r}/n{n}"


def _exp2_cell(cfg: Exp2Config, s: int, rho: float, n: int) -> Exp2Row:
    oracle, pca, ambient, dims = [], [], [], []
    failed = 0
    for rep in range(cfg.reps):
        try:
            report, dim = entropy_replication(cfg, s, rho, n, rep)
        except DegenerateSampleError as exc:
            failed += 1
            _log.warn("exp2 s={s} rho={rho} n={n} rep {rep} excluded: "
                      "{error}", s=s, rho=rho, n=n, rep=rep, error=exc)
            continue
        oracle.append(report.h_hat_oracle)
        pca.append(report.h_hat_pca)
        ambient.append(report.h_hat_ambient)
        dims.append(dim)

    _log.info("exp2 cell s={s} rho={rho} n={n} done", s=s, rho=rho, n=n)
    return Exp2Row(s, rho, n, cfg.neighbor_rank(n), gaussian_entropy(s),
                   _mean(oracle), _mean(pca), _mean(ambient), _sd(oracle),
                   _sd(pca), _mean(dims), len(oracle), failed)


def _mean(values: List[float]) -> float:
    return math.fsum(values) / len(values) if values else math.nan


def _sd(values: List[float]) -> float:
    if len(values) < 2:
        return math.nan
    mean = _mean(values)
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values)
                     / (len(values) - 1))


def run_matrix(settings: 'Settings', out_dir: str, command: str = "matrix",
               experiments: Tuple[str, ...] = None) -> RunManifest:
    """ Run the configured experiments and write a run directory

    The directory receives one CSV per table and ``manifest.ini``, which
    records the resolved configuration, the per-cell seeds, the artifact
    checksums and the failure counts. CSV files depend only on the
    configuration.

    :param settings: Resolved configuration
    :param out_dir: Run directory, created if needed
    :param command: Name recorded in the manifest
    :param experiments: Subset of ``exp1``/``exp2``; the configured list if
                        omitted
    :return: The manifest that was written
    """
    started = time.monotonic()
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create run directory {out_dir}: {exc}") \
            from exc

    chosen = experiments or settings.run.experiments
    workers = settings.run.workers
    artifacts, seeds, failures = {}, {}, {}

    if "exp1" in chosen:
        result = run_exp1(settings.exp1, workers)
        artifacts["exp1.csv"] = _write_table(
            out_dir, "exp1.csv", Exp1Row.field_names(), result.rows)
        artifacts["exp1_ordering.csv"] = _write_table(
            out_dir, "exp1_ordering.csv", Exp1OrderingRow.field_names(),
            result.ordering)
        seeds.update({f"exp1/{k}": v for k, v in result.cell_seeds.items()})
        failures["exp1"] = result.failures

    if "exp2" in chosen:
        result = run_exp2(settings.exp2, workers)
        artifacts["exp2.csv"] = _write_table(
            out_dir, "exp2.csv", Exp2Row.field_names(), result.rows)
        seeds.update({f"exp2/{k}": v for k, v in result.cell_seeds.items()})
        failures["exp2"] = result.failures

    manifest = RunManifest(command, __version__, settings.run.seed, out_dir,
                           settings.as_sections(), seeds, artifacts,
                           failures, time.monotonic() - started)
    manifest.write(os.path.join(out_dir, "manifest.ini"))
    return manifest


def _write_table(out_dir: str, name: str, fieldnames, rows) -> str:
    path = os.path.join(out_dir, name)
    with open(path, mode="w", newline="", encoding="utf-8") as outfile:
        ReportWriter(outfile, fieldnames).write_all(rows)
    return checksum(path)
