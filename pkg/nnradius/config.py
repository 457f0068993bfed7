""" Run configuration

Configuration files are line-oriented ``key = value`` text with ``[section]``
headers. Keys before the first header belong to ``[run]``. A ``manifest.ini``
written by a previous run is also accepted: its ``[config.*]`` sections are
read and everything else is ignored, which reproduces that run.

Sections and their keys:

``[run]``
    ``seed``, ``workers``, ``profile`` (``desk`` or ``full``),
    ``experiments``
``[exp1]``
    fields of :py:class:`~nnradius.harness.Exp1Config`
``[exp2]``
    fields of :py:class:`~nnradius.harness.Exp2Config`
``[theory]``
    fields of :py:class:`TheorySettings`
``[forecast]``
    fields of :py:class:`~nnradius.forecast.ForecastConfig`

Unknown sections and keys are errors. The profile picks the preset each
experiment section starts from; keys in the file override it. The
environment variables ``NNRADIUS_OUT_ROOT`` and ``NNRADIUS_WORKERS`` override
the file, and command-line flags override both.
"""

import configparser
import difflib
import enum
import os
from typing import Callable, Dict, Mapping, NamedTuple, Tuple

from twisted.logger import Logger

from nnradius import streams
from nnradius.errors import ConfigurationError
from nnradius.forecast import ForecastConfig
from nnradius.generators import Family, Strength
from nnradius.harness import Exp1Config, Exp2Config


_log = Logger()

ENV_OUT_ROOT = "NNRADIUS_OUT_ROOT"
ENV_WORKERS = "NNRADIUS_WORKERS"
DEFAULT_OUT_ROOT = "runs"
PROFILES = ("desk", "full")
EXPERIMENTS = ("exp1", "exp2")

_TOP = "__top__"


class RunSettings(NamedTuple):
    """ Settings shared by every command """
    seed: int = streams.GLOBAL_SEED
    workers: int = 1
    profile: str = "full"
    experiments: Tuple[str, ...] = EXPERIMENTS


class TheorySettings(NamedTuple):
    """ Constants of the Monte Carlo bound checks

    .. py:attribute:: k0

        Lower regime constant: ``k >= k0 log n``

    .. py:attribute:: kappa_fraction

        Upper regime constant as a fraction of ``c_minus r0^s / 8``

    .. py:attribute:: c0

        Reported exponent constant of the tail bound

    .. py:attribute:: big_c

        Reported additive constant of the tail bound
    """
    k0: float = 3.0
    kappa_fraction: float = 0.9
    c0: float = 0.01
    big_c: float = 1.0
    reps: int = 2000
    bernstein_reps: int = 100000
    slope_tolerance: float = 0.1

    def validate(self) -> None:
        """ Raise :py:class:`ConfigurationError` for unusable settings """
        checks = (
            ("k0", self.k0 > 0),
            ("kappa_fraction", 0 < self.kappa_fraction <= 1),
            ("c0", self.c0 > 0),
            ("big_c", self.big_c >= 0),
            ("reps", self.reps >= 2),
            ("bernstein_reps", self.bernstein_reps >= 1),
            ("slope_tolerance", self.slope_tolerance > 0),
        )
        for key, ok in checks:
            if not ok:
                raise ConfigurationError("invalid value",
                                         key=f"theory.{key}")


class Settings(NamedTuple):
    """ Fully resolved configuration

    .. py:attribute:: out_root

        Parent of time-stamped run directories
    """
    run: RunSettings
    exp1: Exp1Config
    exp2: Exp2Config
    theory: TheorySettings
    forecast: ForecastConfig
    out_root: str = DEFAULT_OUT_ROOT

    def as_sections(self) -> Dict[str, Dict[str, str]]:
        """ Every setting as text, defaults included

        Seeds of the experiment sections are omitted; they always equal
        ``run.seed``.
        """
        out = {}
        for name in _SCHEMA:
            values = getattr(self, name)._asdict()
            out[name] = {key: format_setting(values[key])
                         for key in _SCHEMA[name]}
        return out


def format_setting(value) -> str:
    """ Text form of a setting, parseable by the matching reader """
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, enum.Enum):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(format_setting(v) for v in value)
    return str(value)


def _items(convert: Callable) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        return tuple(convert(part) for part in text.split(",")
                     if part.strip())
    return parse


def _boolean(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 1 << 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return value


def _profile(text: str) -> str:
    value = text.strip().lower()
    if value not in PROFILES:
        raise ValueError(f"profile must be one of {', '.join(PROFILES)}")
    return value


def _experiment(text: str) -> str:
    value = text.strip().lower()
    if value not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {value!r}")
    return value


def _split(text: str) -> Tuple[float, float, float]:
    parts = _items(float)(text)
    if len(parts) != 3:
        raise ValueError("split needs three fractions")
    return parts


_SCHEMA: Dict[str, Dict[str, Callable[[str], object]]] = {
    "run": {
        "seed": _seed,
        "workers": int,
        "profile": _profile,
        "experiments": _items(_experiment),
    },
    "exp1": {
        "d_list": _items(int),
        "p_over_d": _items(int),
        "m_list": _items(int),
        "beta_min": float,
        "beta_max": float,
        "beta_points": int,
        "eval_points": int,
        "eval_low": float,
        "eval_high": float,
        "kn_cap": float,
        "families": _items(Family.parse),
        "strengths": _items(Strength.parse),
        "mc_reps": int,
    },
    "exp2": {
        "s_list": _items(int),
        "rho_list": _items(float),
        "n_grid": _items(int),
        "reps": int,
        "k_exponent": float,
        "k_min": int,
        "mle_k": int,
        "burn_in": int,
        "ambient_d": int,
        "pca_q": int,
    },
    "theory": {
        "k0": float,
        "kappa_fraction": float,
        "c0": float,
        "big_c": float,
        "reps": int,
        "bernstein_reps": int,
        "slope_tolerance": float,
    },
    "forecast": {
        "lookback": int,
        "horizon": int,
        "split": _split,
        "folds": int,
        "cv_min_windows": int,
        "k_grid": _items(int),
        "pca_grid": _items(int),
        "use_pca": _boolean,
        "tuning_metric": str.strip,
        "group_tuning_metric": str.strip,
        "source_fraction": float,
        "synthetic_length": int,
        "synthetic_rho": float,
    },
}


def load_config(path: str = None, overrides: Mapping[str, object] = None,
                environ: Mapping[str, str] = None) -> Settings:
    """ Read and resolve a configuration file

    :param path: Configuration or manifest file; ``None`` for all defaults
    :param overrides: ``[run]`` values from the command line; ``None``
                      entries are ignored
    :param environ: Environment; ``os.environ`` if omitted
    :return: Resolved settings
    """
    sections = read_sections(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            sections.setdefault("run", {})[key] = format_setting(value)
    return resolve(sections, environ=environ, command_line=overrides)


def read_sections(path: str) -> Dict[str, Dict[str, str]]:
    """ Parse a configuration file into raw ``{section: {key: text}}`` """
    try:
        with open(path, encoding="utf-8") as infile:
            text = infile.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}",
                                 key="config") from exc

    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(f"[{_TOP}]\n{text}", source=path)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] - 1 if exc.errors else 0
        raise ConfigurationError(f"{path}, line {lineno}: syntax error",
                                 key="config") from exc
    except (configparser.DuplicateOptionError,
            configparser.DuplicateSectionError) as exc:
        raise ConfigurationError(
            f"{path}, line {(exc.lineno or 1) - 1}: {exc.message}",
            key="config") from exc
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc.message}",
                                 key="config") from exc

    names = parser.sections()
    if any(name.startswith("config.") for name in names):
        _log.info("reading configuration from manifest {path}", path=path)
        return {name[len("config."):]: dict(parser[name]) for name in names
                if name.startswith("config.")}

    sections: Dict[str, Dict[str, str]] = {}
    for name in names:
        target = "run" if name == _TOP else name
        sections.setdefault(target, {}).update(parser[name])
    return sections


def resolve(sections: Mapping[str, Mapping[str, str]],
            environ: Mapping[str, str] = None,
            command_line: Mapping[str, object] = None,
            out_root: str = None) -> Settings:
    """ Validate raw sections and fill in defaults

    :param sections: ``{section: {key: text}}``
    :param environ: Environment; ``os.environ`` if omitted
    :param command_line: ``[run]`` keys given as flags, which the
                         environment must not override
    :param out_root: Output root; taken from the environment if omitted
    :return: Resolved settings
    """
    environ = os.environ if environ is None else environ
    command_line = {k for k, v in (command_line or {}).items()
                    if v is not None}
    parsed = {name: _parse_section(name, keys)
              for name, keys in sections.items()}
    run_values = parsed.get("run", {})
    if ENV_WORKERS in environ and "workers" not in command_line:
        try:
            run_values["workers"] = int(environ[ENV_WORKERS])
        except ValueError as exc:
            raise ConfigurationError("not an integer",
                                     key=ENV_WORKERS) from exc
    run = RunSettings(**run_values)
    if run.workers < 1:
        raise ConfigurationError("must be at least 1", key="run.workers")

    desk = run.profile == "desk"
    seeded = dict(seed=run.seed)
    exp1 = (Exp1Config.desk if desk else Exp1Config)(
        **{**parsed.get("exp1", {}), **seeded})
    exp2 = (Exp2Config.desk if desk else Exp2Config)(
        **{**parsed.get("exp2", {}), **seeded})
    forecast = (ForecastConfig.desk if desk else ForecastConfig)(
        **{**parsed.get("forecast", {}), **seeded})
    theory = TheorySettings(**parsed.get("theory", {}))

    exp1.validate()
    exp2.validate()
    forecast.validate()
    theory.validate()

    root = out_root or environ.get(ENV_OUT_ROOT) or DEFAULT_OUT_ROOT
    return Settings(run, exp1, exp2, theory, forecast, root)


def _parse_section(name: str, keys: Mapping[str, str]) -> Dict[str, object]:
    schema = _SCHEMA.get(name)
    if schema is None:
        raise ConfigurationError(
            f"unknown section{_suggest(name, _SCHEMA)}", key=name)
    values = {}
    for key, text in keys.items():
        reader = schema.get(key)
        if reader is None:
            raise ConfigurationError(
                f"unknown key{_suggest(key, schema)}", key=f"{name}.{key}")
        try:
            values[key] = reader(text)
        except (ValueError, KeyError) as exc:
            raise ConfigurationError(f"cannot parse {text!r}: {exc}",
                                     key=f"{name}.{key}") from exc
    return values


def _suggest(word: str, choices) -> str:
    close = difflib.get_close_matches(word, list(choices), n=1)
    return f"; did you mean {close[0]!r}?" if close else ""
