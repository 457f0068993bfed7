import configparser
import hashlib

from nnradius.manifest import RunManifest, checksum


def _manifest(config=None):
    return RunManifest(
        "exp2", "0.1.0", 42, "runs/x",
        config or {"run": {"seed": "42", "workers": "1"},
                   "exp2": {"reps": "10"}},
        {"s1/rho0.0/n512": 123456789},
        {"exp2.csv": "ab" * 32},
        {"exp2": 0},
        1.23456)


def test_sections():
    parser = _manifest().to_parser()

    assert parser.sections() == ["manifest", "config.exp2", "config.run",
                                 "seeds", "artifacts", "failures"]
    assert parser["manifest"]["seed"] == "42"
    assert parser["manifest"]["wall_clock_seconds"] == "1.235"
    assert parser["seeds"]["s1/rho0.0/n512"] == "123456789"
    assert parser["failures"]["exp2"] == "0"


def test_config_digest_ignores_order():
    shuffled = {"exp2": {"reps": "10"},
                "run": {"workers": "1", "seed": "42"}}

    assert _manifest().config_digest() == \
        _manifest(shuffled).config_digest()
    assert _manifest().config_digest() != _manifest(
        {"run": {"seed": "43", "workers": "1"},
         "exp2": {"reps": "10"}}).config_digest()


def test_write_and_checksum(tmp_path):
    path = tmp_path / "manifest.ini"
    manifest = _manifest()
    manifest.write(str(path))

    parser = configparser.ConfigParser(interpolation=None)
    parser.read(path)
    assert parser["manifest"]["config_sha256"] == manifest.config_digest()
    assert parser["artifacts"]["exp2.csv"] == "ab" * 32
    assert checksum(str(path)) == \
        hashlib.sha256(path.read_bytes()).hexdigest()
