import pytest

from nnradius import streams
from nnradius.config import ENV_OUT_ROOT, ENV_WORKERS, Settings, \
    format_setting, load_config, read_sections, resolve
from nnradius.errors import ConfigurationError
from nnradius.generators import Family, Strength
from nnradius.harness import Exp1Config, Exp2Config
from nnradius.manifest import RunManifest

from . import datasets


def _config(tmp_path, text, name="nnradius.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_defaults():
    settings = load_config(environ={})

    assert settings.run.seed == streams.GLOBAL_SEED
    assert settings.run.workers == 1
    assert settings.run.profile == "full"
    assert settings.run.experiments == ("exp1", "exp2")
    assert settings.exp1 == Exp1Config()
    assert settings.exp2 == Exp2Config()
    assert settings.out_root == "runs"


def test_empty_file(tmp_path):
    path = _config(tmp_path, datasets.CONFIG_EMPTY)
    assert load_config(path, environ={}) == load_config(environ={})


def test_top_level_keys_belong_to_run(tmp_path):
    settings = load_config(_config(tmp_path, datasets.CONFIG_SEED),
                           environ={})

    assert settings.run.seed == 7
    assert settings.exp1.seed == 7
    assert settings.exp2.seed == 7
    assert settings.forecast.seed == 7


def test_desk_profile_with_overrides(tmp_path):
    settings = load_config(_config(tmp_path, datasets.CONFIG_SUBSET),
                           environ={})

    assert settings.run.profile == "desk"
    assert settings.exp1 == Exp1Config.desk(
        d_list=(1, 3), families=(Family.LSS, Family.HMM))
    assert settings.exp2 == Exp2Config.desk()
    assert settings.forecast.lookback == 64


def test_forecast_section(tmp_path):
    forecast = load_config(_config(tmp_path, datasets.CONFIG_FORECAST),
                           environ={}).forecast

    assert forecast.lookback == 32
    assert forecast.horizon == 96
    assert forecast.split == (0.5, 0.25, 0.25)
    assert forecast.use_pca is False
    assert forecast.group_tuning_metric == "mae"
    assert forecast.source_fraction == 0.8


def test_unknown_key_suggests(tmp_path):
    with pytest.raises(ConfigurationError) as info:
        load_config(_config(tmp_path, datasets.CONFIG_TYPO), environ={})

    assert info.value.key == "exp1.d_lst"
    assert "did you mean 'd_list'" in str(info.value)


def test_unknown_section(tmp_path):
    with pytest.raises(ConfigurationError) as info:
        load_config(_config(tmp_path, datasets.CONFIG_BAD_SECTION),
                    environ={})

    assert info.value.key == "exp3"
    assert "unknown section" in str(info.value)


def test_unparseable_value(tmp_path):
    with pytest.raises(ConfigurationError) as info:
        load_config(_config(tmp_path, datasets.CONFIG_BAD_VALUE),
                    environ={})

    assert info.value.key == "exp2.reps"
    assert str(info.value).startswith("exp2.reps: cannot parse 'many'")


def test_syntax_error_line(tmp_path):
    path = _config(tmp_path, datasets.CONFIG_SYNTAX)
    with pytest.raises(ConfigurationError) as info:
        read_sections(path)

    assert "line 2" in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError) as info:
        load_config(str(tmp_path / "absent.ini"), environ={})

    assert info.value.key == "config"


def test_invalid_values():
    with pytest.raises(ConfigurationError) as info:
        resolve({"run": {"workers": "0"}}, environ={})
    assert info.value.key == "run.workers"

    with pytest.raises(ConfigurationError) as info:
        resolve({"run": {"profile": "huge"}}, environ={})
    assert info.value.key == "run.profile"

    with pytest.raises(ConfigurationError) as info:
        resolve({"forecast": {"split": "0.5,0.5"}}, environ={})
    assert info.value.key == "forecast.split"

    with pytest.raises(ConfigurationError) as info:
        resolve({"forecast": {"source_fraction": "1"}}, environ={})
    assert info.value.key == "forecast.source_fraction"

    with pytest.raises(ConfigurationError) as info:
        resolve({"theory": {"kappa_fraction": "1.5"}}, environ={})
    assert info.value.key == "theory.kappa_fraction"


def test_environment_and_command_line():
    environ = {ENV_WORKERS: "3", ENV_OUT_ROOT: "/tmp/nnradius-runs"}

    from_env = load_config(environ=environ)
    assert from_env.run.workers == 3
    assert from_env.out_root == "/tmp/nnradius-runs"

    from_flags = load_config(overrides={"workers": 2, "seed": None},
                             environ=environ)
    assert from_flags.run.workers == 2
    assert from_flags.run.seed == streams.GLOBAL_SEED

    assert resolve({}, environ=environ, out_root="elsewhere").out_root == \
        "elsewhere"


def test_environment_overrides_file(tmp_path):
    path = _config(tmp_path, "workers = 4\n")
    assert load_config(path, environ={ENV_WORKERS: "6"}).run.workers == 6
    assert load_config(path, environ={}).run.workers == 4


def test_bad_environment_value():
    with pytest.raises(ConfigurationError) as info:
        load_config(environ={ENV_WORKERS: "many"})

    assert info.value.key == ENV_WORKERS


def test_manifest_reproduces_settings(tmp_path):
    settings = load_config(_config(tmp_path, datasets.CONFIG_SUBSET),
                           overrides={"seed": 11}, environ={})
    path = str(tmp_path / "manifest.ini")
    RunManifest("exp1", "0.1.0", settings.run.seed, str(tmp_path),
                settings.as_sections(), {}, {}, {}, 0.5).write(path)

    reloaded = load_config(path, environ={})

    assert isinstance(reloaded, Settings)
    assert reloaded == settings
    assert reloaded.exp1.families == (Family.LSS, Family.HMM)


def test_as_sections():
    sections = load_config(environ={}).as_sections()

    assert set(sections) == {"run", "exp1", "exp2", "theory", "forecast"}
    assert "seed" not in sections["exp1"]
    assert sections["exp1"]["strengths"] == "weak,medium,strong"
    assert sections["forecast"]["use_pca"] == "true"
    assert sections["run"]["seed"] == str(streams.GLOBAL_SEED)


def test_format_setting():
    assert format_setting(None) == ""
    assert format_setting(False) == "false"
    assert format_setting(0.1) == "0.1"
    assert format_setting((1, 3, 5)) == "1,3,5"
    assert format_setting((Strength.WEAK, Strength.STRONG)) == "weak,strong"
    assert format_setting(12) == "12"
