"""
Simulate nearest-neighbor radii under dependent sampling
"""

import argparse
import os
import sys
import time
from typing import Dict, Sequence

import numpy as np
from twisted.logger import (FilteringLogObserver, LogLevel,
                            LogLevelFilterPredicate, Logger,
                            globalLogPublisher, textFileLogObserver)

from nnradius import streams
from nnradius.config import Settings, load_config
from nnradius.errors import (ConfigurationError, ParameterError, RangeError,
                             ShapeError)
from nnradius.forecast import (TuningRow, evaluate_classification,
                               evaluate_classification_split,
                               evaluate_forecast, evaluate_transfer,
                               evaluate_within_group, synthetic_ar1,
                               tuning_rows)
from nnradius.generators import Family, SequenceSpec, Strength, generate
from nnradius.geometry import Metric, PointSet, knn_radii
from nnradius.harness import run_matrix
from nnradius.manifest import RunManifest, checksum
from nnradius.protocol import (ReportWriter, load_group, load_labelled,
                               load_series)
from nnradius.theory import (SEQUENCES, BernsteinRow, LowerBoundResult,
                             MassProfile, MomentPoint, RegimeGuard, TailRow,
                             TrajectoryPoint, as_convergence_check,
                             bernstein_check, lower_bound_check,
                             moment_sandwich_check, parse_k_schedule,
                             tail_check)
from nnradius.version import __version__ as version


_APPLICATION_NAME = 'nnradius'

_USAGE_ERRORS = (ConfigurationError, ParameterError, RangeError, ShapeError)

_FORECAST_MODES = ("split", "transfer", "within")

_log = Logger()


def main():
    """ Run the program """
    sys.exit(cli(sys.argv[1:]))


def cli(argv: Sequence[str]) -> int:
    """ Run one command

    :param argv: Arguments without the program name
    :return: 0 on success, 2 for usage and configuration errors, 1 for any
             other failure
    """
    parser = get_arg_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if args.version:
        print(version_string(), file=sys.stderr)
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2

    observer = FilteringLogObserver(
        textFileLogObserver(sys.stderr),
        [LogLevelFilterPredicate(
            LogLevel.debug if args.verbose else LogLevel.info)])
    globalLogPublisher.addObserver(observer)
    try:
        settings = load_config(args.config, overrides={
            "seed": args.seed, "workers": args.workers,
            "profile": args.profile})
        _COMMANDS[args.command](args, settings)
    except _USAGE_ERRORS as exc:
        print(f"{_APPLICATION_NAME}: error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # pylint: disable=broad-except
        _log.failure("{command} failed", command=args.command)
        return 1
    finally:
        globalLogPublisher.removeObserver(observer)
    return 0


def get_arg_parser() -> argparse.ArgumentParser:
    """ Obtain the argparse for the executable

    :return: Argument parser
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, required=False,
                        help="Configuration file, or the manifest.ini of a "
                             "previous run")
    common.add_argument("--out", type=str, required=False,
                        help="Run directory (default: runs/<timestamp>)")
    common.add_argument("--seed", type=int, required=False,
                        help="Global seed (default: 20260504)")
    common.add_argument("--workers", type=int, required=False,
                        help="Worker threads")
    scale = common.add_mutually_exclusive_group()
    scale.add_argument("--desk", dest="profile", action="store_const",
                       const="desk", help="Reduced grids that run quickly")
    scale.add_argument("--full", dest="profile", action="store_const",
                       const="full", help="Full experiment grids")
    common.add_argument("--verbose", action='store_true',
                        help="Log debug messages")

    parser = argparse.ArgumentParser(
        description="Simulate nearest-neighbor radii under dependent "
                    "sampling")
    parser.add_argument("--version", action='store_true',
                        help="Print version and exit")
    sub = parser.add_subparsers(dest="command")

    cmd = sub.add_parser("generate", parents=[common],
                         help="Write one generated row as CSV")
    _add_process_args(cmd)
    cmd.add_argument("--n", type=int, required=True, help="Row length")
    cmd.add_argument("--burn-in", type=int, required=False,
                     help="Burn-in steps (default: family default)")
    cmd.add_argument("--rep", type=int, default=0, help="Replication index")

    cmd = sub.add_parser("radii", parents=[common],
                         help="k-NN radii of query points")
    _add_process_args(cmd)
    cmd.add_argument("--input", type=str, required=False,
                     help="Wide CSV of sample points instead of a "
                          "generated row")
    cmd.add_argument("--n", type=int, default=1000, help="Row length")
    cmd.add_argument("--query", type=_floats, action="append",
                     required=True, help="Query point, comma separated; "
                                         "repeatable")
    cmd.add_argument("--kmax", type=int, default=10,
                     help="Largest neighbor rank")
    cmd.add_argument("--metric", type=Metric.parse,
                     default=Metric.EUCLIDEAN, help="euclidean or manhattan")

    sub.add_parser("exp1", parents=[common],
                   help="Moment-rate experiment")
    sub.add_parser("exp2", parents=[common],
                   help="Entropy experiment")

    cmd = sub.add_parser("tailcheck", parents=[common],
                         help="Empirical tail of the k-NN radius")
    _add_process_args(cmd)
    _add_query_args(cmd)
    cmd.add_argument("--n", type=int, required=True, help="Sample size")
    cmd.add_argument("--k", type=int, required=True, help="Neighbor rank")
    cmd.add_argument("--j-max", type=int, default=2,
                     help="Largest radius exponent")
    cmd.add_argument("--reps", type=int, required=False,
                     help="Replications (default: theory.reps)")
    cmd.add_argument("--gamma", type=float, required=False,
                     help="Geometric mixing rate for the block length")

    cmd = sub.add_parser("momentcheck", parents=[common],
                         help="Moment sandwich and exponent")
    _add_process_args(cmd)
    _add_query_args(cmd)
    cmd.add_argument("--grid", type=_pairs, required=True,
                     help="(n, k) pairs as n:k,n:k,...")
    cmd.add_argument("--p", type=float, default=1.0, help="Moment order")
    cmd.add_argument("--reps", type=int, required=False,
                     help="Replications (default: theory.reps)")
    cmd.add_argument("--k0", type=float, required=False,
                     help="Lower regime constant (default: theory.k0)")

    cmd = sub.add_parser("lowerbound", parents=[common],
                         help="Mixing-free moment lower bound")
    _add_process_args(cmd)
    _add_query_args(cmd)
    cmd.add_argument("--n", type=int, required=True, help="Sample size")
    cmd.add_argument("--k", type=int, required=True, help="Neighbor rank")
    cmd.add_argument("--p", type=float, default=1.0, help="Moment order")
    cmd.add_argument("--c-plus", type=float, required=False,
                     help="Upper mass constant (default: unit-ball volume)")
    cmd.add_argument("--reps", type=int, required=False,
                     help="Replications (default: theory.reps)")

    cmd = sub.add_parser("bernstein", parents=[common],
                         help="Bernstein bound for bounded mixing sums")
    cmd.add_argument("--sequence", choices=sorted(SEQUENCES),
                     default="rademacher", help="Test sequence")
    cmd.add_argument("--n", type=int, default=1000, help="Number of terms")
    cmd.add_argument("--m", type=int, default=1, help="Block length")
    cmd.add_argument("--epsilon", type=_floats, default=(600.0, 800.0),
                     help="Thresholds, comma separated")
    cmd.add_argument("--reps", type=int, required=False,
                     help="Replications (default: theory.bernstein_reps)")

    cmd = sub.add_parser("asconv", parents=[common],
                         help="Radius trajectory along nested prefixes")
    _add_process_args(cmd)
    _add_query_args(cmd)
    cmd.add_argument("--k-schedule", type=str, default="const:1",
                     help="const:K, sqrt or power:b")
    cmd.add_argument("--n-grid", type=_ints,
                     default=(100, 1000, 10000, 100000),
                     help="Prefix lengths, comma separated")

    for name, text in (("forecast", "k-NN forecasting"),
                       ("classify", "k-NN series classification")):
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument("--input", type=str, required=False,
                         help="Input CSV" + (" (default: synthetic AR(1))"
                                             if name == "forecast" else
                                             ", split in row order"))
        cmd.add_argument("--lookback", type=int, required=False,
                         help="Look-back length L")
        cmd.add_argument("--horizon", type=int, required=False,
                         help="Forecast horizon H")
        cmd.add_argument("--split", type=_floats, required=False,
                         help="Train,validation,test fractions")
        cmd.add_argument("--k-grid", type=_ints, required=False,
                         help="Neighbor counts to search")
        cmd.add_argument("--no-pca", action='store_true',
                         help="Search Raw-kNN only")
        if name == "forecast":
            cmd.add_argument("--layout", choices=("wide", "long"),
                             default="wide", help="Input CSV layout")
            cmd.add_argument("--mode", choices=_FORECAST_MODES,
                             default="split",
                             help="split: one long series; transfer: tune "
                                  "on --source, score --target; within: "
                                  "split the group in --input")
            cmd.add_argument("--source", type=str, required=False,
                             help="Long-layout file of source series")
            cmd.add_argument("--target", type=str, required=False,
                             help="Long-layout file of target series")
        else:
            cmd.add_argument("--train-input", type=str, required=False,
                             help="Given training set")
            cmd.add_argument("--test-input", type=str, required=False,
                             help="Given test set")

    return parser


def version_string() -> str:
    """ Obtain a version string for this executable

    :return Version string
    """
    return f"{_APPLICATION_NAME} version {version}"


def _add_process_args(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--family", type=Family.parse,
                     default=Family.IID_UNIFORM,
                     help="iid_uniform, lss, hmm, gp_fft or latent_ar1")
    cmd.add_argument("--strength", type=Strength.parse, required=False,
                     help="weak, medium or strong")
    cmd.add_argument("--param", type=float, required=False,
                     help="Explicit tuning parameter")
    cmd.add_argument("--d", type=int, default=1, help="Dimension")


def _add_query_args(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--x", type=_floats, required=False,
                     help="Query point, comma separated (default: cube "
                          "center)")


def _floats(text: str):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _ints(text: str):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _pairs(text: str):
    try:
        return tuple(tuple(int(v) for v in pair.split(":"))
                     for pair in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _out_dir(args, settings: Settings) -> str:
    if args.out:
        return args.out
    return os.path.join(settings.out_root, time.strftime("%Y%m%dT%H%M%S"))


def _spec(args, settings: Settings, n: int) -> SequenceSpec:
    return SequenceSpec(args.family, n, args.d, strength=args.strength,
                        parameter=args.param,
                        burn_in=getattr(args, "burn_in", None),
                        seed=settings.run.seed)


def _query(args) -> np.ndarray:
    if args.x is None:
        return np.full(args.d, 0.5)
    if len(args.x) != args.d:
        raise ShapeError(f"query has dimension {len(args.x)}, --d is "
                         f"{args.d}")
    return np.asarray(args.x)


class _Run:
    """ Output directory of one command """

    def __init__(self, args, settings: Settings):
        self.settings = settings
        self.command = args.command
        self.out_dir = _out_dir(args, settings)
        self.artifacts: Dict[str, str] = {}
        self.seeds: Dict[str, int] = {}
        self.failures: Dict[str, int] = {}
        self._started = time.monotonic()
        os.makedirs(self.out_dir, exist_ok=True)

    def table(self, name: str, fieldnames, rows) -> None:
        """ Write a CSV table and record its checksum """
        path = os.path.join(self.out_dir, name)
        with open(path, mode="w", newline="", encoding="utf-8") as outfile:
            ReportWriter(outfile, fieldnames).write_all(rows)
        self.artifacts[name] = checksum(path)
        _log.info("wrote {path}", path=path)

    def finish(self) -> None:
        """ Write the manifest """
        RunManifest(self.command, version, self.settings.run.seed,
                    self.out_dir, self.settings.as_sections(), self.seeds,
                    self.artifacts, self.failures,
                    time.monotonic() - self._started).write(
                        os.path.join(self.out_dir, "manifest.ini"))


def _cmd_generate(args, settings: Settings) -> None:
    spec = _spec(args, settings, args.n)
    cell = f"{spec.family}/{spec.tuning_parameter()}/d{spec.d}/n{spec.n}"
    spec = spec._replace(seed=streams.derive_seed(
        settings.run.seed, "generate", cell, args.rep))
    row = generate(spec)
    run = _Run(args, settings)
    path = os.path.join(run.out_dir, "generate.csv")
    with open(path, mode="w", newline="", encoding="utf-8") as outfile:
        row.to_csv(outfile)
    run.artifacts["generate.csv"] = checksum(path)
    run.seeds[f"generate/{cell}/{args.rep}"] = spec.seed
    run.finish()


def _cmd_radii(args, settings: Settings) -> None:
    if args.input:
        _, points = load_series(args.input, "wide")
        sample = PointSet.from_array(points)
    else:
        spec = _spec(args, settings, args.n)
        cell = f"{spec.family}/{spec.tuning_parameter()}/d{spec.d}/n{args.n}"
        sample = generate(spec._replace(seed=streams.derive_seed(
            settings.run.seed, "radii", cell))).data
    radii = knn_radii(sample, np.array(args.query), args.kmax, args.metric)
    rows = [{"query": q, "k": k + 1, "radius": radii[i, k]}
            for i, q in enumerate(args.query) for k in range(args.kmax)]
    run = _Run(args, settings)
    run.table("radii.csv", ("query", "k", "radius"), rows)
    run.finish()


def _cmd_experiment(args, settings: Settings) -> None:
    manifest = run_matrix(settings, _out_dir(args, settings), args.command,
                          (args.command,))
    print(f"{args.command}: wrote {', '.join(manifest.artifacts)} to "
          f"{manifest.out_dir}")


def _guard(settings: Settings, k0: float = None) -> RegimeGuard:
    return RegimeGuard(settings.theory.k0 if k0 is None else k0,
                       settings.theory.kappa_fraction)


def _cmd_tailcheck(args, settings: Settings) -> None:
    x = _query(args)
    mass = MassProfile.for_unit_cube(x)
    report = tail_check(_spec(args, settings, args.n), x, mass, args.n,
                        args.k, args.j_max,
                        args.reps or settings.theory.reps,
                        settings.theory.c0, settings.theory.big_c,
                        args.gamma, _guard(settings),
                        settings.run.workers)
    run = _Run(args, settings)
    run.table("tailcheck.csv", TailRow.field_names(), report.rows(mass.s))
    run.failures["duality_violations"] = report.duality_violations
    run.finish()


def _cmd_momentcheck(args, settings: Settings) -> None:
    x = _query(args)
    mass = MassProfile.for_unit_cube(x)
    report = moment_sandwich_check(
        _spec(args, settings, 1), x, mass, args.grid, args.p,
        args.reps or settings.theory.reps, _guard(settings, args.k0),
        settings.theory.slope_tolerance, settings.run.workers)
    run = _Run(args, settings)
    run.table("momentcheck.csv", MomentPoint.field_names(), report.points)
    run.finish()
    if report.fit is not None:
        print(f"momentcheck: slope {report.fit.slope:.6g} "
              f"(target {report.target_slope:.6g})")


def _cmd_lowerbound(args, settings: Settings) -> None:
    x = _query(args)
    mass = MassProfile.for_unit_cube(x)
    if args.c_plus is not None:
        mass = mass._replace(c_plus=args.c_plus)
    result = lower_bound_check(_spec(args, settings, args.n), x, mass,
                               args.n, args.k, args.p,
                               args.reps or settings.theory.reps,
                               settings.run.workers)
    run = _Run(args, settings)
    run.table("lowerbound.csv", LowerBoundResult.field_names(), [result])
    run.finish()
    if not result.passed:
        _log.warn("lower bound not met: margin {margin}",
                  margin=result.margin)


def _cmd_bernstein(args, settings: Settings) -> None:
    rows = bernstein_check(SEQUENCES[args.sequence](), args.n, args.m,
                           args.epsilon,
                           args.reps or settings.theory.bernstein_reps,
                           settings.run.seed)
    run = _Run(args, settings)
    run.table("bernstein.csv", BernsteinRow.field_names(), rows)
    run.finish()


def _cmd_asconv(args, settings: Settings) -> None:
    trajectory = as_convergence_check(_spec(args, settings, 1), _query(args),
                                      parse_k_schedule(args.k_schedule),
                                      args.n_grid)
    run = _Run(args, settings)
    run.table("asconv.csv", TrajectoryPoint.field_names(), trajectory)
    run.finish()


def _forecast_config(args, settings: Settings):
    overrides = {key: value for key, value in (
        ("lookback", args.lookback), ("horizon", args.horizon),
        ("split", args.split), ("k_grid", args.k_grid)) if value is not None}
    if args.no_pca:
        overrides["use_pca"] = False
    return settings.forecast._replace(**overrides)


def _cmd_forecast(args, settings: Settings) -> None:
    cfg = _forecast_config(args, settings)
    workers = settings.run.workers
    if args.mode == "transfer":
        if not (args.source and args.target):
            raise ParameterError("--mode transfer needs --source and "
                                 "--target")
        report, tuned, _ = evaluate_transfer(
            load_group(args.source)[1], load_group(args.target)[1], cfg,
            workers=workers)
    elif args.mode == "within":
        if not args.input:
            raise ParameterError("--mode within needs --input")
        report, tuned, _ = evaluate_within_group(
            load_group(args.input)[1], cfg, workers=workers)
    else:
        if args.input:
            _, series = load_series(args.input, args.layout)
        else:
            series = synthetic_ar1(cfg.synthetic_length, cfg.synthetic_rho,
                                   cfg.seed)
        report, tuned, _ = evaluate_forecast(series, cfg, workers=workers)
    _write_evaluation(args, settings, report, tuned)


def _cmd_classify(args, settings: Settings) -> None:
    cfg = _forecast_config(args, settings)
    given = (args.train_input, args.test_input)
    if args.input and not any(given):
        inputs, labels = load_labelled(args.input)
        report, tuned, _ = evaluate_classification(
            inputs, labels, cfg, workers=settings.run.workers)
    elif all(given) and not args.input:
        report, tuned, _ = evaluate_classification_split(
            *load_labelled(args.train_input), *load_labelled(args.test_input),
            cfg, workers=settings.run.workers)
    else:
        raise ParameterError("classify needs either --input or both "
                             "--train-input and --test-input")
    _write_evaluation(args, settings, report, tuned)


def _write_evaluation(args, settings: Settings, report, tuned) -> None:
    run = _Run(args, settings)
    run.table(f"{args.command}_report.csv", report.field_names(), [report])
    run.table(f"{args.command}_tuning.csv", TuningRow.field_names(),
              tuning_rows(tuned))
    run.finish()


_COMMANDS = {
    "generate": _cmd_generate,
    "radii": _cmd_radii,
    "exp1": _cmd_experiment,
    "exp2": _cmd_experiment,
    "tailcheck": _cmd_tailcheck,
    "momentcheck": _cmd_momentcheck,
    "lowerbound": _cmd_lowerbound,
    "bernstein": _cmd_bernstein,
    "asconv": _cmd_asconv,
    "forecast": _cmd_forecast,
    "classify": _cmd_classify,
}


if __name__ == '__main__':
    # execute only if run as the entry point into the program
    main()
