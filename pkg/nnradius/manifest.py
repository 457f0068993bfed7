""" Run manifests

A manifest is an INI file written next to the CSV outputs of a run. It holds
the resolved configuration, so feeding its ``config.*`` sections back as a
configuration file reproduces the run, plus the derived per-cell seeds, the
SHA-256 of every artifact and the number of failed replications.
"""

import configparser
import hashlib
from typing import Dict, NamedTuple

from twisted.logger import Logger


_log = Logger()


class RunManifest(NamedTuple):
    """ Record of one run directory

    .. py:attribute:: config

        Resolved configuration as ``{section: {key: text}}``

    .. py:attribute:: cell_seeds

        Derived seed of replication 0 of each cell

    .. py:attribute:: artifacts

        SHA-256 hex digest of each output file, by file name

    .. py:attribute:: wall_clock

        Elapsed seconds; the only field that varies between reruns
    """
    command: str
    version: str
    seed: int
    out_dir: str
    config: Dict[str, Dict[str, str]]
    cell_seeds: Dict[str, int]
    artifacts: Dict[str, str]
    failures: Dict[str, int]
    wall_clock: float

    def config_digest(self) -> str:
        """ SHA-256 of the canonical configuration text """
        digest = hashlib.sha256()
        for section in sorted(self.config):
            digest.update(f"[{section}]\n".encode("utf-8"))
            for key in sorted(self.config[section]):
                digest.update(
                    f"{key} = {self.config[section][key]}\n".encode("utf-8"))
        return digest.hexdigest()

    def to_parser(self) -> configparser.ConfigParser:
        """ Lay the manifest out as INI sections """
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        parser["manifest"] = {
            "command": self.command,
            "version": self.version,
            "seed": str(self.seed),
            "out": self.out_dir,
            "config_sha256": self.config_digest(),
            "wall_clock_seconds": format(self.wall_clock, ".3f"),
        }
        for section in sorted(self.config):
            parser[f"config.{section}"] = dict(sorted(
                self.config[section].items()))
        parser["seeds"] = {k: str(v) for k, v in sorted(
            self.cell_seeds.items())}
        parser["artifacts"] = dict(sorted(self.artifacts.items()))
        parser["failures"] = {k: str(v) for k, v in sorted(
            self.failures.items())}
        return parser

    def write(self, path: str) -> None:
        """ Write the manifest to ``path`` """
        with open(path, mode="w", newline="", encoding="utf-8") as outfile:
            self.to_parser().write(outfile)
        _log.info("wrote manifest {path}", path=path)


def checksum(path: str) -> str:
    """ SHA-256 hex digest of a file """
    digest = hashlib.sha256()
    with open(path, mode="rb") as infile:
        for block in iter(lambda: infile.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()
