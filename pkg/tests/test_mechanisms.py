from math import exp, inf, log

import numpy as np
import pytest
from scipy import integrate, stats

from py9audit.core import InvalidArgument
from py9audit.default_mechanisms import (
    MECHANISMS,
    PY9SVT,
    PY9Exponential,
    PY9Gaussian,
    PY9Laplace,
    PY9NoisyMax,
    PY9RandomizedResponse,
    PY9ReportNoisyMax,
    build_mechanism,
    mechanism_catalog,
    true_epsilon,
)
from py9audit.default_mechanisms.py9exponential import (
    calibrate_lambda,
    exponential_epsilon,
)
from py9audit.patterns import table1_pairs
from py9audit.statcore import Rng


def test_laplace():
    mech = PY9Laplace(epsilon0=1.5)

    assert mech.true_epsilon() == 1.5
    assert mech.analytic_loss(0.0, 1.0, -0.5) == pytest.approx(1.5)
    assert PY9Laplace(lam=0.2).true_epsilon() == 0.2


def test_laplace_is_centered(rng):
    x = PY9Laplace(epsilon0=1.5).sample(0.0, rng, size=200_000)
    assert abs(x.mean()) < 0.01


def test_sampling_is_deterministic_per_substream():
    mech = PY9Laplace(epsilon0=0.7)

    a = mech.sample(0.3, Rng(4).split(1, 1), size=10)
    b = mech.sample(0.3, Rng(4).split(1, 1), size=10)
    assert np.array_equal(a, b)


def test_noisy_max_epsilon_is_k_lambda():
    assert PY9NoisyMax(lam=0.5, k=3).true_epsilon() == 1.5
    assert PY9NoisyMax(epsilon0=1.5, k=3).lam == pytest.approx(0.5)


def test_noisy_max_density_matches_histogram(rng):
    mech = PY9NoisyMax(lam=0.5, k=3)
    x = mech.sample((0, 0, 0), rng, size=400_000)

    edges = np.linspace(-1, 1, 21)
    counts, _ = np.histogram(x, bins=edges)
    empirical = counts / (len(x) * np.diff(edges))
    mids = 0.5 * (edges[1:] + edges[:-1])

    assert np.max(np.abs(empirical - mech.density((0, 0, 0), mids))) < 0.02


def test_noisy_max_density_is_normalised():
    mech = PY9NoisyMax(lam=0.5, k=3)
    t = np.linspace(-80, 80, 40001)

    mass = integrate.trapezoid(mech.density((0.2, 0.5, 1.0), t), t)
    assert mass == pytest.approx(1.0, abs=1e-4)


def test_noisy_max_with_one_entry_is_laplace():
    t = np.linspace(-2, 2, 9)

    assert np.allclose(
        PY9NoisyMax(lam=0.8, k=1).density((0.4,), t),
        PY9Laplace(lam=0.8).density(0.4, t),
    )


def test_noisy_max_analytic_violation():
    mech = PY9NoisyMax(lam=0.5, k=3)
    grid = np.linspace(-1, 1, 201)

    assert mech.pair_epsilon((0, 0, 0), (1, 1, 1), grid) == pytest.approx(1.5)


def test_noisy_max_checks_input_length(rng):
    with pytest.raises(InvalidArgument):
        PY9NoisyMax(lam=0.5, k=3).sample((0, 0), rng)


def test_report_noisy_max_is_uniform_on_equal_queries(rng):
    mech = PY9ReportNoisyMax(epsilon0=1.5, d=6)
    q = (1,) * 6

    assert np.allclose(mech.probabilities(q), 1 / 6, atol=1e-6)

    x = mech.sample(q, rng, size=60_000)
    assert set(np.unique(x).tolist()) == set(range(1, 7))
    freq = np.bincount(x, minlength=7)[1:] / len(x)
    assert np.max(np.abs(freq - 1 / 6)) < 0.01


def test_report_noisy_max_singletons_respect_epsilon():
    mech = PY9ReportNoisyMax(epsilon0=1.5, d=6)
    symbols = mech.alphabet(None)

    patterns = table1_pairs(6)
    for pair in patterns:
        eps = mech.pair_epsilon(pair.x, pair.x_prime, symbols)
        assert 0.0 <= eps <= 1.5 + 1e-6

    # a uniform shift leaves the winner distribution unchanged
    shifted = patterns["All Above All Below"]
    eps = mech.pair_epsilon(shifted.x, shifted.x_prime, symbols)
    assert eps == pytest.approx(0.0, abs=1e-9)


def test_report_noisy_max_probabilities_match_sampling(rng):
    mech = PY9ReportNoisyMax(epsilon0=1.5, d=6)
    q = (2, 0, 0, 0, 0, 0)

    x = mech.sample(q, rng, size=100_000)
    freq = np.bincount(x, minlength=7)[1:] / len(x)
    assert np.abs(freq - mech.probabilities(q)).sum() < 0.02


@pytest.mark.parametrize("lam", [0.1, 0.75, 1.5])
def test_exponential_epsilon_closed_form(lam):
    expected = lam + log(2 - exp(-2 * lam)) - log(2 - exp(-lam))

    assert exponential_epsilon(lam) == pytest.approx(expected, abs=1e-12)
    assert PY9Exponential(lam=lam).true_epsilon() == pytest.approx(
        expected, abs=1e-12
    )


def test_exponential_calibration():
    lam = calibrate_lambda(1.5)

    assert exponential_epsilon(lam) == pytest.approx(1.5, abs=1e-9)
    assert PY9Exponential(epsilon0=1.5).lam == pytest.approx(lam)


def test_exponential_inverse_cdf(rng):
    mech = PY9Exponential(lam=0.75)
    x = mech.sample(1.5, rng, size=200_000)

    assert np.all(x >= 0)
    u = mech.cdf(1.5, x)
    assert stats.kstest(u, "uniform").statistic < 0.005


def test_exponential_density():
    mech = PY9Exponential(lam=1.2)
    t = np.linspace(0, 60, 60001)

    mass = integrate.trapezoid(mech.density(1.3, t), t)
    assert mass == pytest.approx(1.0, abs=1e-5)
    assert mech.density(1.3, -0.1) == 0.0
    assert mech.pair_epsilon(1.0, 2.0, [0.0, 0.5]) == pytest.approx(
        mech.true_epsilon()
    )


def test_exponential_domain(rng):
    with pytest.raises(InvalidArgument):
        PY9Exponential(lam=1.0).sample(0.5, rng)


def test_svt_stopping_encoding(rng):
    mech = PY9SVT("SVT2", epsilon0=1.0, d=10)

    assert mech.alphabet(None) == tuple(range(11))
    assert np.all(mech.sample((100,) * 10, rng, size=1000) == 1)
    assert np.all(mech.sample((-100,) * 10, rng, size=1000) == 0)


def test_svt5_answers_everything(rng):
    mech = PY9SVT("SVT5", epsilon0=0.7, d=10)
    out = mech.sample((100,) * 10, rng, size=1000)

    # a leading 1 bit then ten "above" answers
    assert np.all(out == 2**11 - 1)
    assert mech.true_epsilon() == inf


def test_svt_sequence_encoding():
    mech = PY9SVT("SVT2", epsilon0=1.0, M=2, d=4)
    answers = np.array([[1, 0, 1, -1], [0, 0, 0, 0]])

    assert mech.encode(answers).tolist() == [0b1101, 0b10000]


def test_svt_stops_after_m_answers(rng):
    mech = PY9SVT("SVT4", epsilon0=1.0, M=2, d=5)
    answers = mech._answers(np.full(5, 1e6), rng, 50)

    assert np.all(answers[:, :2] == 1)
    assert np.all(answers[:, 2:] == -1)


def test_svt_same_input_same_law():
    mech = PY9SVT("SVT2", epsilon0=0.7, d=10)
    q = (1,) * 10

    a = mech.sample(q, Rng(1).split("x"), size=50_000)
    b = mech.sample(q, Rng(2).split("y"), size=50_000)
    fa = np.bincount(a, minlength=11) / len(a)
    fb = np.bincount(b, minlength=11) / len(b)
    assert np.abs(fa - fb).sum() < 0.04


def test_svt_rejects_unknown_variant():
    with pytest.raises(InvalidArgument):
        PY9SVT("SVT3", epsilon0=1.0)


def test_randomized_response(rng):
    mech = PY9RandomizedResponse(epsilon0=0.9)

    assert mech.analytic_loss(0, 1, 0) == pytest.approx(0.9)
    assert mech.analytic_loss(0, 1, 1) == pytest.approx(0.9)
    assert set(np.unique(mech.sample(1, rng, size=1000))) <= {0, 1}

    honest = PY9RandomizedResponse(epsilon0=50.0)
    assert np.all(honest.sample(1, rng, size=1000) == 1)
    assert np.all(honest.sample(0, rng, size=1000) == 0)

    with pytest.raises(InvalidArgument):
        mech.sample(2, rng)


def test_gaussian_loss_is_unbounded():
    mech = PY9Gaussian(sigma=1.0)

    assert mech.analytic_loss(0.0, 1.0, -1.0) == pytest.approx(1.5)
    assert mech.analytic_loss(0.0, 1.0, 10.0) == pytest.approx(9.5)
    assert mech.pair_epsilon(0, 1, np.linspace(-1, 1, 201)) == pytest.approx(
        1.5
    )
    assert mech.true_epsilon() == inf


def test_gaussian_mean(rng):
    x = PY9Gaussian(sigma=2.0).sample(0.5, rng, size=200_000)
    assert abs(x.mean() - 0.5) < 0.02


def test_true_epsilon_lookup():
    assert true_epsilon("laplace", epsilon0=0.2) == 0.2
    assert true_epsilon("svt6", epsilon0=0.7) == inf
    assert true_epsilon("svt4", epsilon0=0.7) == 0.7
    assert true_epsilon("no_such_mechanism") is None
    assert true_epsilon(PY9NoisyMax(lam=0.5)) == 1.5


def test_registry():
    assert len(MECHANISMS) == 10
    assert build_mechanism("svt5", epsilon0=1.0).variant == "SVT5"

    with pytest.raises(InvalidArgument):
        build_mechanism("svt3")
    with pytest.raises(InvalidArgument):
        build_mechanism("laplace", epsilon0=1.0, bogus=2)

    catalog = {entry["name"]: entry for entry in mechanism_catalog()}
    assert catalog["report_noisy_max"]["space"] == "discrete"
    assert "variant" not in catalog["svt2"]["params"]
    assert catalog["gaussian"]["params"]["sigma"][0] == "float"


@pytest.mark.parametrize("name", sorted(MECHANISMS))
def test_outputs_live_in_the_declared_space(name, rng):
    cls, _ = MECHANISMS[name]
    params = {"epsilon0": 1.0} if "epsilon0" in cls.PARAMS else {}
    mech = build_mechanism(name, **params)
    x = {
        "laplace": 0.5,
        "gaussian": 0.5,
        "exponential": 1.5,
        "noisy_max": (0.0, 0.5, 1.0),
        "randomized_response": 1,
        "report_noisy_max": (1,) * 6,
    }.get(name, (1,) * 10)

    out = mech.sample(x, rng, size=500)
    one = mech.sample(x, rng)

    if mech.space.is_discrete:
        assert out.dtype.kind == "i" and isinstance(one, int)
        if mech.alphabet(x):
            assert set(out.tolist()) <= set(mech.alphabet(x))
    else:
        assert out.shape == (500,) and isinstance(one, float)
