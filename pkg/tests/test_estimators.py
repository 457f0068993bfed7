import math

import numpy as np
import pytest

from nnradius import streams
from nnradius.errors import DegenerateSampleError, DomainError, \
    InsufficientDataError, ParameterError, RangeError, ShapeError, \
    SingularityError
from nnradius.estimators import digamma, embed_kl, gaussian_entropy, \
    kl_entropy, log_unit_ball_volume, mle_intrinsic_dimension, \
    moment_estimate, pca_fit, pca_project, pca_reconstruct, slope_fit, \
    standardize
from nnradius.geometry import PointSet


def test_moment_estimate():
    assert moment_estimate([1.0, 2.0, 3.0], 2) == pytest.approx(14.0 / 3.0)
    assert moment_estimate([4.0], 0.5) == 2.0
    with pytest.raises(RangeError):
        moment_estimate([], 1)
    with pytest.raises(ParameterError):
        moment_estimate([1.0], 0)


def test_slope_fit_exact_line():
    x = [-3.0, -2.0, -1.0, 0.0]
    fit = slope_fit(x, [1.0 + 0.5 * v for v in x])

    assert fit.slope == pytest.approx(0.5)
    assert fit.intercept == pytest.approx(1.0)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.n_points == 4
    assert fit.as_dict()["slope"] == fit.slope


def test_slope_fit_errors():
    with pytest.raises(SingularityError):
        slope_fit([1.0, 1.0], [0.0, 1.0])
    with pytest.raises(InsufficientDataError):
        slope_fit([1.0], [1.0])
    with pytest.raises(ShapeError):
        slope_fit([1.0, 2.0], [1.0])
    with pytest.raises(RangeError):
        slope_fit([1.0, float("nan")], [1.0, 2.0])


def test_slope_fit_noisy_r2():
    rng = np.random.default_rng(0)
    x = np.linspace(-5.0, -1.0, 20)
    fit = slope_fit(x, 2.0 * x + rng.normal(0.0, 0.1, x.size))

    assert 0.9 < fit.r2 < 1.0
    assert fit.slope == pytest.approx(2.0, abs=0.1)


def test_special_functions():
    assert digamma(1.0) == pytest.approx(-0.5772156649015329)
    with pytest.raises(DomainError):
        digamma(0.0)
    assert math.exp(log_unit_ball_volume(1)) == pytest.approx(2.0)
    assert math.exp(log_unit_ball_volume(2)) == pytest.approx(math.pi)
    assert math.exp(log_unit_ball_volume(3)) == \
        pytest.approx(4.0 * math.pi / 3.0)
    assert gaussian_entropy(1) == pytest.approx(1.4189385332046727)


def test_kl_entropy_gaussian():
    estimates = []
    for rep in range(200):
        rng = streams.stream(5, "kl-test", "", rep)
        ps = PointSet.from_array(rng.standard_normal(4096))
        estimates.append(kl_entropy(ps, 3, 1))

    assert abs(np.mean(estimates) - 1.418939) < 0.05


def test_kl_entropy_errors():
    ps = PointSet.from_array([0.0, 1.0, 1.0, 3.0])
    with pytest.raises(DegenerateSampleError) as info:
        kl_entropy(ps, 1, 1)
    assert info.value.count == 2
    with pytest.raises(ShapeError):
        kl_entropy(ps, 1, 2)
    with pytest.raises(RangeError):
        kl_entropy(ps, 4, 1)


def test_embed_kl_agrees_on_identical_views():
    rng = np.random.default_rng(1)
    latent = PointSet.from_array(rng.standard_normal((500, 2)))
    report = embed_kl(latent, latent, latent, 4, 2, rho=0.3)

    assert report.h_hat_oracle == report.h_hat_pca == report.h_hat_ambient
    assert report.h_true == gaussian_entropy(2)
    assert (report.n, report.k, report.s, report.rho) == (500, 4, 2, 0.3)


def test_mle_intrinsic_dimension():
    rng = np.random.default_rng(2)
    flat = np.zeros((2000, 6))
    flat[:, :2] = rng.random((2000, 2))
    estimate = mle_intrinsic_dimension(PointSet.from_array(flat), 10)

    assert estimate == pytest.approx(2.0, abs=0.25)
    with pytest.raises(RangeError):
        mle_intrinsic_dimension(PointSet.from_array(flat), 1)


def test_pca():
    rng = np.random.default_rng(3)
    direction = np.array([3.0, 4.0, 0.0]) / 5.0
    data = np.outer(rng.standard_normal(1000) * 5.0, direction) \
        + 0.01 * rng.standard_normal((1000, 3))
    model = pca_fit(PointSet.from_array(data), 3)

    assert np.allclose(model.components @ model.components.T, np.eye(3),
                       atol=1e-10)
    assert np.all(np.diff(model.eigenvalues) <= 0.0)
    assert np.allclose(model.components[0], direction, atol=1e-3)

    full = pca_project(model, data, 3)
    assert np.allclose(pca_reconstruct(model, full), data, atol=1e-10)
    assert pca_project(model, data, 1).d == 1
    with pytest.raises(ParameterError):
        pca_project(model, data, 4)
    with pytest.raises(ParameterError):
        pca_fit(PointSet.from_array(data), 0)


def test_standardize():
    data = PointSet.from_array([[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]])
    result = standardize(data)

    assert result.flagged == (1,)
    assert result.means.tolist() == [3.0, 5.0]
    assert result.stds[1] == 1.0
    assert np.allclose(result.data.points[:, 0],
                       [-1.224744871391589, 0.0, 1.224744871391589])
    assert result.data.points[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert np.allclose(result.apply([[3.0, 6.0]]), [[0.0, 1.0]])
    with pytest.raises(InsufficientDataError):
        standardize(PointSet.from_array([1.0]))


def test_kl_entropy_translation_and_scale():
    rng = np.random.default_rng(4)
    data = rng.standard_normal((300, 2))
    base = kl_entropy(PointSet.from_array(data), 3, 2)
    shifted = kl_entropy(PointSet.from_array(data + 0.25), 3, 2)
    scaled = kl_entropy(PointSet.from_array(4.0 * data), 3, 2)

    assert shifted == pytest.approx(base, abs=1e-10)
    assert scaled - base == pytest.approx(2.0 * math.log(4.0), abs=1e-10)


def test_standardize_postconditions():
    rng = np.random.default_rng(6)
    data = PointSet.from_array(rng.normal(3.0, 2.0, (500, 4)))
    once = standardize(data).data

    assert np.all(np.abs(once.points.mean(axis=0)) <= 1e-12)
    assert np.allclose(once.points.var(axis=0), 1.0, atol=1e-12)
    assert np.allclose(standardize(once).data.points, once.points,
                       atol=1e-10)
