import math

import numpy as np
import pytest
import scipy.stats as ss
from hypothesis import given
from hypothesis import strategies as st

from conftest import ks_critical
from dmixrep import simkit
from dmixrep.simkit import MonteCarloReport, RngStream, monte_carlo, replicate


def gen(seed, stream=0):
    return RngStream(seed, stream).generator()


# -- streams -------------------------------------------------------------


def test_streams_are_reproducible_and_distinct():
    a = gen(1, 0).random(5)
    assert np.array_equal(a, gen(1, 0).random(5))
    assert not np.array_equal(a, gen(1, 1).random(5))
    assert not np.array_equal(a, gen(2, 0).random(5))
    assert RngStream(1).child(3) == RngStream(1, 3)
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(TypeError):
        simkit.as_generator("seed")


def test_streams_look_independent():
    a = gen(3, 0).standard_normal(200_000)
    b = gen(3, 1).standard_normal(200_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(a.size)


def test_lag_one_autocorrelation():
    z = simkit.standard_normal(gen(4), 10**6)
    r = np.corrcoef(z[:-1], z[1:])[0, 1]
    assert abs(r) < 4 / math.sqrt(z.size)


# -- samplers ------------------------------------------------------------


def _within_3se(x, mean):
    return abs(x.mean() - mean) < 3 * x.std(ddof=1) / math.sqrt(x.size)


def test_poisson_mean():
    x = simkit.poisson(2.0, gen(5), 10**6)
    assert _within_3se(x, 2.0)


@pytest.mark.parametrize("lam", [0.0, 0.3, 4.0, 9.99, 10.0, 17.5, 250.0])
def test_poisson_law(lam):
    x = simkit.poisson(lam, gen(6), 200_000)
    if lam == 0:
        assert np.all(x == 0)
        return
    ks = np.arange(int(lam + 10 * math.sqrt(lam) + 10))
    counts = np.bincount(x, minlength=ks.size)[: ks.size]
    expected = ss.poisson.pmf(ks, lam) * x.size
    keep = expected > 20
    chi = ((counts[keep] - expected[keep]) ** 2 / expected[keep]).sum()
    assert ss.chi2.sf(chi, keep.sum() - 1) > 1e-3
    assert abs(x.var(ddof=1) / lam - 1) < 0.03


def test_poisson_array_means():
    means = np.array([0.5, 3.0, 12.0, 40.0] * 50_000)
    x = simkit.poisson(means, gen(7))
    for m in (0.5, 3.0, 12.0, 40.0):
        assert _within_3se(x[means == m].astype(float), m)


def test_categorical_frequencies():
    x = simkit.categorical([2 / 3, 1 / 3], gen(8), 10**6)
    p = (x == 0).mean()
    assert abs(p - 2 / 3) < 3 * math.sqrt(2 / 9 / x.size)
    with pytest.raises(ValueError):
        simkit.categorical([0.5, 0.6], gen(8), 3)


def test_gamma_half_scale_two_is_chi2_1():
    g = simkit.gamma(0.5, 2.0, gen(9), 10**5)
    z = simkit.standard_normal(gen(10), 10**5) ** 2
    assert ss.ks_2samp(g, z).statistic < ks_critical(g.size, z.size)


@pytest.mark.parametrize("shape", [0.05, 0.5, 1.0, 3.3, 40.0])
def test_gamma_law(shape):
    g = simkit.gamma(shape, 1.5, gen(11), 10**5)
    assert ss.kstest(g, ss.gamma(shape, scale=1.5).cdf).pvalue > 1e-3


def test_gamma_validation():
    with pytest.raises(ValueError):
        simkit.gamma(0.0, 1.0, gen(0), 3)
    with pytest.raises(ValueError):
        simkit.gamma(1.0, -1.0, gen(0), 3)


def test_other_samplers():
    e = simkit.exponential(2.0, gen(12), 10**5)
    assert ss.kstest(e, ss.expon(scale=0.5).cdf).pvalue > 1e-3
    u = simkit.uniform(-1.0, 3.0, gen(13), 10**5)
    assert ss.kstest(u, ss.uniform(-1, 4).cdf).pvalue > 1e-3
    g = simkit.geometric(0.25, gen(14), 10**5)
    assert _within_3se(g.astype(float), 3.0)
    assert simkit.geometric(1.0, gen(14)) == 0
    c = simkit.chi2(np.array([1.0, 5.0] * 50_000), gen(15))
    assert _within_3se(c[1::2], 5.0)
    with pytest.raises(ValueError):
        simkit.uniform(1.0, 1.0, gen(0))
    with pytest.raises(ValueError):
        simkit.exponential(0.0, gen(0))


# -- Monte Carlo harness -------------------------------------------------


def test_monte_carlo_constant():
    rep = monte_carlo(lambda g, n: np.ones(n), 100, seed=3)
    assert (rep.estimate, rep.standard_error, rep.n, rep.seed) == (1.0, 0.0, 100, 3)


def test_monte_carlo_moment_estimator_variance():
    def t_hat(g, n):
        z = g.standard_normal(n) + 2.0  # sqrt(2 theta) with theta = 2
        return (z * z - 1.0) / 2.0

    rep = monte_carlo(t_hat, 10**6, seed=17)
    assert rep.within(2.0)
    sq = monte_carlo(lambda g, n: (t_hat(g, n) - 2.0) ** 2, 10**6, seed=17)
    assert sq.within(4.5)


@given(st.integers(0, 2**63), st.integers(1, 4))
def test_monte_carlo_bit_identical(seed, streams):
    f = lambda g, n: g.standard_normal(n)
    a = monte_carlo(f, 1000, seed, streams)
    b = monte_carlo(f, 1000, seed, streams)
    assert a.to_json() == b.to_json()


def test_monte_carlo_validation():
    with pytest.raises(ValueError):
        monte_carlo(lambda g, n: np.ones(n), 1)
    with pytest.raises(ValueError):
        monte_carlo(lambda g, n: np.full(n, np.nan), 10)
    with pytest.raises(ValueError):
        monte_carlo(lambda g, n: np.ones(n + 1), 10)


def test_report_json_and_within():
    rep = MonteCarloReport(1.0, 0.1, 10, 5)
    assert '"seed": 5' in rep.to_json()
    assert rep.within(1.25) and not rep.within(1.31)


def test_replicate_uses_one_stream_per_index():
    out = replicate(lambda g, i: (i, g.random()), 3, seed=9)
    assert [i for i, _ in out] == [0, 1, 2]
    assert out[1][1] == gen(9, 1).random()
