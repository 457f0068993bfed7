import configparser
import csv
import math

import numpy as np
import pytest

from nnradius import harness, streams
from nnradius.config import resolve
from nnradius.errors import ConfigurationError
from nnradius.estimators import kl_entropy, slope_fit
from nnradius.generators import Family, SequenceSpec, Strength, \
    gen_latent_ar1, generate
from nnradius.geometry import knn_radii
from nnradius.harness import Exp1Config, Exp1Row, Exp2Config, \
    dependence_ordering, entropy_replication, neighbor_counts, run_exp1, \
    run_exp2, run_matrix, sample_size


def _iid_slopes(d_list, p_over_d):
    cfg = Exp1Config.desk(d_list=d_list, p_over_d=p_over_d, families=())
    return {(row.d, row.p): row for row in run_exp1(cfg).rows}


def test_sample_size():
    assert sample_size(1, 1) == 200
    assert sample_size(3, 2) == 1600
    assert sample_size(5, 32) == 102400


def test_neighbor_counts():
    assert neighbor_counts(100, (0.1, 0.5, 0.9), 1.0) == (2, 10, 63)
    assert neighbor_counts(100, (0.1, 0.5, 0.9), 0.01) == (1,)
    assert neighbor_counts(50, (0.5,), 0.01) == ()
    assert neighbor_counts(1600, Exp1Config().beta_grid, 0.01) == \
        (2, 3, 4, 5, 7, 10, 13, 16)


def test_exp1_config():
    cfg = Exp1Config()
    assert len(cfg.beta_grid) == 20
    assert cfg.beta_grid[0] == 0.1
    assert cfg.beta_grid[-1] == pytest.approx(0.9)
    settings = cfg.settings()
    assert settings[0] == (Family.IID_UNIFORM, None)
    assert len(settings) == 1 + 3 * 3

    with pytest.raises(ConfigurationError):
        Exp1Config(families=(Family.LATENT_AR1,)).settings()
    with pytest.raises(ConfigurationError):
        Exp1Config(beta_min=0.9, beta_max=0.1).validate()
    with pytest.raises(ConfigurationError):
        Exp1Config(d_list=()).validate()


def test_exp2_config():
    cfg = Exp2Config()
    assert cfg.neighbor_rank(4096) == 3
    assert cfg.neighbor_rank(512) == 2
    assert Exp2Config.desk().reps == 100
    with pytest.raises(ConfigurationError):
        Exp2Config(ambient_d=10).validate()
    with pytest.raises(ConfigurationError):
        Exp2Config(s_list=(6,)).validate()


def test_iid_slopes_match_dimension():
    rows = _iid_slopes((1,), (1, 2))
    for p in (1, 2):
        row = rows[(1, p)]
        assert row.target_slope == p
        assert abs(row.slope - p) <= 0.1 * p
        assert row.reps_failed == 0
    assert rows[(1, 1)].r2 >= 0.99
    assert rows[(1, 2)].r2 >= 0.98


def test_iid_slope_three_dimensions():
    row = _iid_slopes((3,), (1,))[(3, 3)]
    assert abs(row.slope - 1.0) <= 0.1
    assert row.r2 >= 0.99


def test_weak_dependence_close_to_iid():
    cfg = Exp1Config.desk(d_list=(1,), p_over_d=(1,),
                          families=(Family.LSS,), strengths=(Strength.WEAK,))
    result = run_exp1(cfg)
    slopes = {(row.family, row.strength): row.slope for row in result.rows}

    assert abs(slopes[(Family.LSS, "weak")]
               - slopes[(Family.IID_UNIFORM, "none")]) < 0.1
    assert result.ordering == ()
    assert set(result.cell_seeds) == {"iid_uniform/none/d1", "lss/weak/d1"}
    assert result.failures == 0


def test_dependence_ordering():
    def row(family, strength, slope):
        return Exp1Row(family, strength, 1, 1, slope, 0.0, 1.0, 10, 1.0, 0)

    rows = [row(Family.IID_UNIFORM, "none", 1.0),
            row(Family.LSS, "weak", 0.98),
            row(Family.LSS, "medium", 0.9),
            row(Family.LSS, "strong", 0.5),
            row(Family.HMM, "weak", 0.7),
            row(Family.HMM, "medium", 0.95),
            row(Family.HMM, "strong", 0.8),
            row(Family.GP_FFT, "weak", 1.0)]
    ordering = dependence_ordering(rows)

    assert [(o.family, o.ordered) for o in ordering] == \
        [(Family.LSS, True), (Family.HMM, False)]
    assert ordering[0].slope_iid == 1.0
    assert ordering[0].slope_strong == 0.5


def test_exp1_reproducible_across_workers():
    cfg = Exp1Config.desk(d_list=(1,), p_over_d=(1,), m_list=(1, 2),
                          families=(Family.HMM,), mc_reps=4, eval_points=20)
    serial = run_exp1(cfg, workers=1)
    threaded = run_exp1(cfg, workers=3)

    assert serial == threaded
    assert run_exp1(cfg._replace(seed=1)).rows != serial.rows


def test_entropy_pca_matches_oracle():
    cfg = Exp2Config.desk(s_list=(3,), rho_list=(0.3,), n_grid=(4096,))
    result = run_exp2(cfg)
    row = result.rows[0]

    assert row.k == 3
    assert row.reps_used == 100
    assert row.h_true == pytest.approx(4.256816, abs=1e-6)
    assert abs(row.h_pca_mean - row.h_oracle_mean) <= 0.1
    assert abs(row.h_pca_mean - row.h_true) <= 0.15
    assert abs(row.h_oracle_mean - row.h_true) <= 0.15
    assert row.dim_mle_mean == pytest.approx(3.0, abs=0.5)


def test_entropy_replication():
    cfg = Exp2Config(reps=1)
    report, dim = entropy_replication(cfg, 2, 0.0, 256, 0)

    assert report.n == 256
    assert report.k == 2
    assert report.s == 2
    assert report.h_hat_pca == pytest.approx(report.h_hat_oracle, abs=1e-8)
    assert math.isfinite(report.h_hat_ambient)
    assert dim > 0.0


def test_exp2_reproducible_across_workers():
    cfg = Exp2Config(s_list=(1, 2), rho_list=(0.0, 0.6), n_grid=(128,),
                     reps=3)
    serial = run_exp2(cfg, workers=1)

    assert serial == run_exp2(cfg, workers=2)
    assert len(serial.rows) == 4
    assert [(r.s, r.rho) for r in serial.rows] == \
        [(1, 0.0), (1, 0.6), (2, 0.0), (2, 0.6)]
    assert "s1/rho0.6/n128" in serial.cell_seeds


def test_run_matrix(tmp_path):
    sections = {
        "run": {"seed": "5", "profile": "desk"},
        "exp1": {"d_list": "1", "p_over_d": "1", "m_list": "1,2",
                 "families": "", "mc_reps": "2", "eval_points": "10"},
        "exp2": {"s_list": "1", "rho_list": "0.0", "n_grid": "64",
                 "reps": "2"},
    }
    settings = resolve(sections, environ={})
    first = run_matrix(settings, str(tmp_path / "a"))
    second = run_matrix(settings, str(tmp_path / "b"))

    assert set(first.artifacts) == {"exp1.csv", "exp1_ordering.csv",
                                    "exp2.csv"}
    assert first.artifacts == second.artifacts
    assert first.cell_seeds == second.cell_seeds
    assert (tmp_path / "a" / "exp1.csv").read_text().startswith(
        "family,strength,d,p,slope,")

    manifest = configparser.ConfigParser(interpolation=None)
    manifest.read(tmp_path / "a" / "manifest.ini")
    assert manifest["manifest"]["seed"] == "5"
    assert manifest["config.exp2"]["n_grid"] == "64"
    assert manifest["failures"]["exp1"] == "0"

    only = run_matrix(settings, str(tmp_path / "c"),
                      experiments=("exp2",))
    assert set(only.artifacts) == {"exp2.csv"}


def test_exp1_seeds_regenerate_first_replication(monkeypatch):
    generated = []

    def recording_generate(spec):
        row = generate(spec)
        generated.append((spec, row))
        return row

    monkeypatch.setattr(harness, "generate", recording_generate)
    cfg = Exp1Config.desk(d_list=(1,), p_over_d=(1,), m_list=(1, 2),
                          families=(Family.HMM,),
                          strengths=(Strength.WEAK,), mc_reps=3,
                          eval_points=10)
    result = run_exp1(cfg)

    assert list(result.cell_seeds) == [
        "iid_uniform/none/d1/m1", "iid_uniform/none/d1/m2",
        "hmm/weak/d1/m1", "hmm/weak/d1/m2"]
    assert len(generated) == 4 * 3
    firsts = generated[::3]
    for (key, seed), (spec, row) in zip(result.cell_seeds.items(), firsts):
        assert spec.seed == seed
        assert spec.n == sample_size(1, int(key.rsplit("/m", 1)[1]))
        again = generate(SequenceSpec(spec.family, spec.n, spec.d,
                                      strength=spec.strength, seed=seed))
        assert np.array_equal(again.data.points, row.data.points)
    later = {spec.seed for spec, _ in generated} - \
        set(result.cell_seeds.values())
    assert len(later) == 8


def _csv_rows(path):
    with open(path, newline="", encoding="utf-8") as infile:
        return list(csv.DictReader(infile))


def test_manifest_seeds_rederive_rows(tmp_path):
    sections = {
        "run": {"seed": "9", "profile": "desk"},
        "exp1": {"d_list": "1", "p_over_d": "1", "m_list": "1,2",
                 "families": "", "mc_reps": "1", "eval_points": "25"},
        "exp2": {"s_list": "1", "rho_list": "0.5", "n_grid": "128",
                 "reps": "1"},
    }
    settings = resolve(sections, environ={})
    run_matrix(settings, str(tmp_path))
    manifest = configparser.ConfigParser(interpolation=None)
    manifest.read(tmp_path / "manifest.ini")
    run_seed = int(manifest["manifest"]["seed"])
    seeds = manifest["seeds"]

    # one replication per exp2 cell: its oracle estimate is the row mean
    exp2 = settings.exp2
    latent = gen_latent_ar1(
        SequenceSpec(Family.LATENT_AR1, 128, 1, burn_in=exp2.burn_in,
                     seed=int(seeds["exp2/s1/rho0.5/n128"])), 1, 0.5)
    row = _csv_rows(tmp_path / "exp2.csv")[0]
    assert float(row["h_oracle_mean"]) == pytest.approx(
        kl_entropy(latent.data, exp2.neighbor_rank(128), 1), rel=1e-12)

    exp1 = settings.exp1
    log_kn, log_m = [], []
    for m in exp1.m_list:
        cell = f"iid_uniform/none/d1/m{m}"
        n = sample_size(1, m)
        ks = neighbor_counts(n, exp1.beta_grid, exp1.kn_cap)
        sample = generate(SequenceSpec(Family.IID_UNIFORM, n, 1,
                                       seed=int(seeds[f"exp1/{cell}"])))
        queries = streams.stream(run_seed, "exp1-eval", cell).uniform(
            exp1.eval_low, exp1.eval_high, size=(exp1.eval_points, 1))
        radii = knn_radii(sample.data, queries, ks[-1])
        for k in ks:
            log_kn.append(math.log(k / n))
            log_m.append(math.log(math.fsum(radii[:, k - 1])
                                  / exp1.eval_points))
    row = _csv_rows(tmp_path / "exp1.csv")[0]
    assert row["family"] == "iid_uniform"
    assert float(row["slope"]) == pytest.approx(
        slope_fit(log_kn, log_m).slope, rel=1e-12)
