from math import log, sqrt

import numpy as np
import pytest
from scipy import integrate, stats

from py9audit.core import InvalidArgument, Space
from py9audit.density import (
    ESTIMATION,
    INFERENCE,
    EstimatorSettings,
    Sample,
    default_bandwidth,
    default_floor,
    silverman_scale,
    tdde_build,
    tkde_build,
    undersmoothing_bound,
)
from py9audit.statcore import Kernel, Rng

DISCRETE = Space.discrete()
CONT = Space.continuous(1)


@pytest.fixture
def normal_sample(rng):
    return Sample(rng.generator.standard_normal(2000), CONT)


def test_tdde_counts_sum_to_n():
    sample = Sample(np.array([3, 1, 1, 2, 3, 3]), DISCRETE)
    est = tdde_build(sample, tau=0.0)

    assert est.symbols == (1, 2, 3)
    assert est.counts == {1: 2, 2: 1, 3: 3}
    assert sum(est.counts.values()) == est.n == 6
    assert est(3) == pytest.approx(0.5)


def test_tdde_floor():
    sample = Sample(np.array([0] * 999 + [1]), DISCRETE)
    est = tdde_build(sample, tau=1e-2)

    assert est.raw(1) == pytest.approx(1e-3)
    assert est(1) == pytest.approx(1e-2)
    assert est.raw(5) == 0.0
    assert est(5) == pytest.approx(1e-2)
    assert np.allclose(est(np.array([0, 1, 7])), [0.999, 1e-2, 1e-2])


def test_tkde_matches_direct_sum():
    sample = Sample(np.array([0.0, 1.0]), CONT)
    est = tkde_build(sample, h=1.0)

    expected = (stats.norm.pdf(0.0) + stats.norm.pdf(-1.0)) / 2
    assert est(0.0) == pytest.approx(expected)
    assert isinstance(est(0.0), float)


def test_tkde_is_normalised(normal_sample):
    est = tkde_build(normal_sample, h=0.3)
    t = np.linspace(-10, 10, 4001)

    assert integrate.trapezoid(est(t), t) == pytest.approx(1.0, abs=1e-3)


def test_tkde_floor(normal_sample):
    est = tkde_build(normal_sample, h=0.3, tau=1e-3)
    t = np.linspace(-20, 20, 401)

    assert np.all(est(t) >= 1e-3)
    assert est.raw(20.0) < 1e-3


def test_tkde_chunking_is_invisible(normal_sample, monkeypatch):
    est = tkde_build(normal_sample, h=0.25)
    t = np.linspace(-3, 3, 301)
    whole = est(t)

    monkeypatch.setattr("py9audit.density._KDE_BLOCK", 5000)
    assert np.allclose(est(t), whole, rtol=0, atol=1e-14)


def test_tkde_in_two_dimensions(rng):
    pts = rng.generator.standard_normal((3000, 2))
    est = tkde_build(Sample(pts, Space.continuous(2)), 0.4, Kernel(dim=2))

    assert isinstance(est(np.array([0.0, 0.0])), float)
    assert est(np.zeros((4, 2))).shape == (4,)
    # standard bivariate normal smoothed with h = 0.4
    assert est(np.array([0.0, 0.0])) == pytest.approx(
        1 / (2 * np.pi * 1.16), rel=0.1
    )


def test_builders_check_their_space(normal_sample):
    discrete = Sample(np.array([1, 2]), DISCRETE)

    with pytest.raises(InvalidArgument):
        tkde_build(discrete, h=1.0)
    with pytest.raises(InvalidArgument):
        tdde_build(normal_sample, tau=0.0)
    with pytest.raises(InvalidArgument):
        tkde_build(normal_sample, h=0.0)
    with pytest.raises(InvalidArgument):
        tdde_build(discrete, tau=-1.0)
    with pytest.raises(InvalidArgument):
        tkde_build(normal_sample, h=1.0, kernel=Kernel(dim=2))


def test_sample_validation():
    with pytest.raises(InvalidArgument):
        Sample(np.array([]), CONT)
    with pytest.raises(InvalidArgument):
        Sample(np.zeros((5, 2)), CONT)


def test_fixed_floor_schedule():
    assert default_floor(20_000, CONT) == 1e-3
    assert default_floor(99_999, DISCRETE) == 1e-3
    assert default_floor(100_000, DISCRETE) == 1e-4
    assert default_floor(500_000, DISCRETE, INFERENCE) == 0.0


def test_rate_floor_schedule_hits_its_anchors():
    assert default_floor(
        100_000, DISCRETE, schedule="rate"
    ) == pytest.approx(1e-4)
    assert default_floor(20_000, CONT, schedule="rate") == pytest.approx(1e-3)
    # decreasing in n
    assert default_floor(10**6, DISCRETE, schedule="rate") < 1e-4


def test_floor_rejects_unknown_schedule():
    with pytest.raises(InvalidArgument):
        default_floor(100, CONT, schedule="adaptive")


def test_estimation_bandwidth_rate(normal_sample):
    h = default_bandwidth(normal_sample, ESTIMATION, scale=1.0)
    assert h == pytest.approx(2000 ** (-1 / 3))


def test_silverman_pools_samples(rng):
    a = Sample(rng.generator.normal(0, 1, 5000), CONT)
    b = Sample(rng.generator.normal(5, 3, 5000), CONT)

    assert silverman_scale(a) == pytest.approx(1.06, rel=0.05)
    assert silverman_scale(a, b) == pytest.approx(1.06 * sqrt(5), rel=0.05)


def test_inference_bandwidth_undersmooths(normal_sample):
    nu = log(50_000 / 20_000) / log(20_000)
    h_est = default_bandwidth(normal_sample, ESTIMATION)
    h_inf = default_bandwidth(normal_sample, INFERENCE, nu=nu, gamma=0.02)

    assert h_inf == pytest.approx(h_est * 2000 ** (-0.02))


def test_inference_bandwidth_needs_enough_undersmoothing(normal_sample):
    nu = log(5.0) / log(1000)
    assert undersmoothing_bound(nu) > 0.02

    with pytest.raises(InvalidArgument):
        default_bandwidth(normal_sample, INFERENCE, nu=nu, gamma=0.02)


def test_settings_pick_the_estimator(normal_sample):
    settings = EstimatorSettings()
    discrete = Sample(np.array([1, 1, 2]), DISCRETE)

    tdde = settings.estimate(discrete)
    tkde = settings.estimate(normal_sample)

    assert tdde.kind == "TDDE" and tdde.tau == 1e-3
    assert tkde.kind == "TKDE" and tkde.h > 0
    assert settings.estimate(normal_sample, INFERENCE, h=0.1).tau == 0.0
    assert EstimatorSettings(tau=0.05).estimate(discrete).tau == 0.05


def _laplace_sup_error(n, rng):
    sample = Sample(rng.generator.laplace(0.0, 1.0, n), CONT)
    est = tkde_build(sample, default_bandwidth(sample), tau=1e-3)
    t = np.linspace(-1, 1, 201)

    return float(np.max(np.abs(est(t) - 0.5 * np.exp(-np.abs(t)))))


def test_tkde_tracks_the_laplace_density(rng):
    assert _laplace_sup_error(20_000, rng) <= 0.05


@pytest.mark.slow
def test_tkde_error_shrinks_with_n():
    errors = [
        np.mean(
            [_laplace_sup_error(n, Rng(seed).split(n)) for seed in range(20)]
        )
        for n in (1_000, 10_000, 100_000)
    ]

    assert errors[0] > errors[1] > errors[2]
