from math import pi, sqrt

import numpy as np
import pytest
from scipy import integrate, stats

from py9audit.core import InvalidArgument
from py9audit.statcore import (
    GAUSSIAN,
    Kernel,
    Rng,
    kernel_eval,
    kernel_l2_norm,
    laplace_inverse_cdf,
    sample_laplace,
    std_normal_quantile,
)


def _phi(z: float) -> float:
    return 0.5 + integrate.quad(stats.norm.pdf, 0.0, z)[0]


def _bisect_quantile(p: float) -> float:
    lo, hi = -10.0, 10.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _phi(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_quantile_at_five_percent():
    assert std_normal_quantile(0.05) == pytest.approx(-1.6448536, abs=1e-6)


@pytest.mark.parametrize("p", [0.001, 0.05, 0.5, 0.9, 0.999])
def test_quantile_against_bisection(p):
    assert std_normal_quantile(p) == pytest.approx(
        _bisect_quantile(p), abs=1e-7
    )


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_quantile_outside_unit_interval(p):
    with pytest.raises(InvalidArgument):
        std_normal_quantile(p)


def test_gaussian_kernel_l2_norm():
    assert kernel_l2_norm(GAUSSIAN) == pytest.approx(
        1.0 / (2.0 * sqrt(pi)), abs=1e-9
    )
    assert kernel_l2_norm(Kernel(dim=2)) == pytest.approx(1.0 / (4.0 * pi))


def test_kernel_integrates_to_one():
    u = np.linspace(-12, 12, 24001)
    mass = integrate.trapezoid(kernel_eval(GAUSSIAN, u[:, None]), u)
    assert mass == pytest.approx(1.0, abs=1e-9)


def test_kernel_is_a_product_in_two_dimensions():
    k2 = Kernel(dim=2)
    u = np.array([0.3, -1.2])

    assert kernel_eval(k2, u) == pytest.approx(
        stats.norm.pdf(0.3) * stats.norm.pdf(-1.2)
    )
    assert kernel_eval(GAUSSIAN, 0.0) == pytest.approx(1 / sqrt(2 * pi))


def test_kernel_rejects_wrong_dimension():
    with pytest.raises(InvalidArgument):
        kernel_eval(GAUSSIAN, np.array([0.1, 0.2]))
    with pytest.raises(InvalidArgument):
        kernel_eval(Kernel(dim=2), 0.5)


def test_kernel_from_name():
    assert Kernel.from_name("Gaussian") == GAUSSIAN
    with pytest.raises(InvalidArgument):
        Kernel.from_name("epanechnikov")


def test_rng_is_reproducible():
    a = Rng(7).split("cdf", 3).uniform(5)
    b = Rng(7).split("cdf", 3).uniform(5)

    assert np.array_equal(a, b)


def test_rng_substreams_differ():
    root = Rng(7)
    a = root.split("x").uniform(100)
    b = root.split("y").uniform(100)
    c = root.split(0, 1).uniform(100)
    d = root.split(1, 0).uniform(100)

    assert not np.array_equal(a, b)
    assert not np.array_equal(c, d)


def test_rng_split_does_not_depend_on_parent_state():
    root = Rng(11)
    first = root.split(2).uniform(3)
    root.uniform(1000)

    assert np.array_equal(first, root.split(2).uniform(3))


def test_uniform_is_open_interval(rng):
    u = rng.uniform(100_000)
    assert np.all(u > 0.0) and np.all(u < 1.0)
    assert 0.0 < rng.uniform() < 1.0


def test_rng_rejects_bad_seed():
    with pytest.raises(InvalidArgument):
        Rng(-1)
    with pytest.raises(InvalidArgument):
        Rng(0).split(-3)


def test_laplace_inverse_cdf():
    assert laplace_inverse_cdf(0.5, 2.0) == 0.0
    assert laplace_inverse_cdf(0.2, 1.0) == pytest.approx(
        -laplace_inverse_cdf(0.8, 1.0)
    )
    assert laplace_inverse_cdf(0.9, 0.5) == pytest.approx(
        stats.laplace.ppf(0.9, scale=0.5)
    )


def test_laplace_samples_match_law(rng):
    b = 1.0 / 1.5
    x = sample_laplace(b, rng, size=200_000)

    assert abs(x.mean()) < 0.01
    assert stats.kstest(x, stats.laplace(scale=b).cdf).statistic < 0.005
    assert isinstance(sample_laplace(b, rng), float)


def test_laplace_rejects_bad_scale(rng):
    with pytest.raises(InvalidArgument):
        sample_laplace(0.0, rng)
