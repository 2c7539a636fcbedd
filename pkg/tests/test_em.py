import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmixrep import em, simkit
from dmixrep.chi2 import MixingPMF, central_logpdf


def small_sample(seed=0, n=20, theta=1.5):
    return em.simulate_poisson_experiment(n, theta, simkit.RngStream(seed).generator())


def direct_loglik(p, xs):
    """log prod_i sum_k p_k f_{2k+1}(x_i) straight from the central densities."""
    k = np.arange(len(p))
    dens = np.exp(central_logpdf(2 * k[None, :] + 1.0, np.asarray(xs)[:, None])) @ p
    return float(np.log(dens).sum())


# -- support bound -------------------------------------------------------


def test_support_bound_examples():
    assert em.support_bound([5.0]) == 3
    assert em.support_bound([0.2, 0.4]) == 1
    with pytest.raises(ValueError):
        em.support_bound([])
    with pytest.raises(ValueError):
        em.support_bound([1.0, 0.0])


def test_support_extension_keeps_maximum():
    xs = small_sample(3)
    K = em.support_bound(xs)
    v, p, gap = em.max_loglik(xs, K)
    v5, p5, gap5 = em.max_loglik(xs, K + 5)
    # v5 + gap5 bounds the maximum over {0..K+5} from above
    assert gap < 1e-9 and gap5 < 1e-9
    assert v5 + gap5 - v < 1e-9
    assert np.all(p5[K + 1 :] < 1e-12)
    # EM run long enough lands on the same value
    assert em.fit(xs, K=K + 5).loglik == pytest.approx(v, abs=1e-6)


# -- component matrix and loglik ----------------------------------------


def test_component_matrix_and_loglik_match_direct_evaluation():
    xs = small_sample(4, n=50)
    K = em.support_bound(xs)
    H, off = em.component_matrix(xs, K)
    assert np.allclose(H.max(axis=1), 1.0)
    p = np.random.default_rng(0).dirichlet(np.ones(K + 1))
    assert em.loglik(p, H, off) == pytest.approx(direct_loglik(p, xs), rel=1e-13)


def test_component_matrix_recursion_is_stable_for_large_x():
    xs = np.array([0.01, 900.0])
    H, off = em.component_matrix(xs, em.support_bound(xs))
    assert np.all(np.isfinite(H)) and np.all(np.isfinite(off))


# -- em_step -------------------------------------------------------------


def test_vertex_is_fixed():
    xs = small_sample(5)
    K = em.support_bound(xs)
    for k in (0, 2, K):
        p = MixingPMF.point(k).padded(K + 1)
        state = em.EMState(MixingPMF(p), -np.inf)
        assert np.array_equal(em.em_step(state, xs).p, p)


def test_single_observation_converges_to_argmax_vertex():
    # g_k(4) / g_{k-1}(4) = 4 / (2k - 1) exceeds 1 exactly for k <= 2
    state = em.fit([4.0], em.EMConfig(max_iterations=5000, loglik_tolerance=1e-14), init=np.full(4, 0.25), K=3)
    assert state.p.argmax() == 2 and state.p[2] > 1 - 1e-6


@pytest.mark.parametrize("x", [0.3, 2.0, 7.5, 20.0])
def test_single_observation_vertex_by_ratio_identity(x):
    kstar = max(k for k in range(0, 40) if k == 0 or x / (2 * k - 1) > 1)
    state = em.fit([x], em.EMConfig(max_iterations=20000, loglik_tolerance=1e-15))
    assert state.p.argmax() == kstar


def test_one_step_normalization():
    xs = small_sample(6, n=100)
    K = em.support_bound(xs)
    state = em.EMState(MixingPMF(np.full(K + 1, 1 / (K + 1))), -np.inf)
    new = em.em_step(state, xs)
    assert abs(new.p.sum() - 1.0) < 1e-14
    assert new.iteration == 1


# -- fit -----------------------------------------------------------------


@given(st.integers(0, 2**32 - 1), st.integers(2, 60), st.floats(0.0, 4.0))
def test_fit_simplex_and_ascent(seed, n, theta):
    xs = em.simulate_poisson_experiment(n, theta, simkit.RngStream(seed).generator())
    state = em.fit(xs, em.EMConfig(max_iterations=300))
    assert np.all(state.p >= 0) and abs(state.p.sum() - 1.0) < 1e-12
    assert np.all(np.diff(state.trace) >= -1e-10)
    assert state.loglik == pytest.approx(direct_loglik(state.p, xs), abs=1e-8 * abs(state.loglik))


def test_fit_matches_step_by_step_iteration():
    xs = small_sample(8, n=40)
    K = em.support_bound(xs)
    state = em.EMState(MixingPMF(np.full(K + 1, 1 / (K + 1))), -np.inf)
    for _ in range(25):
        state = em.em_step(state, xs)
    fitted = em.fit(xs, em.EMConfig(max_iterations=25, loglik_tolerance=1e-300))
    assert np.allclose(fitted.p, state.p, atol=1e-13)
    assert fitted.iteration == 25 and not fitted.converged


def test_central_sample_recovers_vertex():
    xs = simkit.chi2(1.0, simkit.RngStream(21).generator(), 10_000)
    state = em.fit(xs)
    assert state.p[0] >= 0.9
    assert state.converged


@pytest.mark.slow
def test_two_random_starts_agree():
    xs = em.simulate_poisson_experiment(10_000, 2.0, simkit.RngStream(7).generator())
    K = em.support_bound(xs)
    fits = []
    for s in (1, 2):
        init = simkit.RngStream(100 + s).generator().dirichlet(np.ones(K + 1))
        fits.append(em.fit(xs, init=init))
    assert all(f.converged for f in fits)
    assert fits[0].weights.total_variation(fits[1].weights) < 0.02


def test_config_validation():
    with pytest.raises(ValueError):
        em.EMConfig(max_iterations=0)
    with pytest.raises(ValueError):
        em.EMConfig(loglik_tolerance=0.0)
    with pytest.raises(ValueError):
        em.EMConfig(weight_floor=1e-6)
    with pytest.raises(ValueError):
        em.fit([1.0, 2.0], init=[0.5, 0.5, 0.0, 0.0, 0.0])


def test_kkt_gap_vanishes_at_the_npmle():
    xs = small_sample(9, n=200)
    v, p, gap = em.max_loglik(xs)
    H, _ = em.component_matrix(xs, p.size - 1)
    assert em.kkt_gap(p, H) == pytest.approx(gap, abs=1e-12)
    assert gap < 1e-9
    assert em.fit(xs).loglik <= v + 1e-9


# -- deconvolution -------------------------------------------------------


def test_deconvolution_sample_law():
    xs = em.simulate_deconvolution_experiment(200_000, simkit.RngStream(30).generator())
    # E (Y + Z)^2 = 1 + E Z^2 = 1 + 2 E W = 3 for Z = sqrt(2 W)
    assert abs(xs.mean() - 3.0) < 3 * xs.std() / math.sqrt(xs.size)
    ys = em.simulate_deconvolution_experiment(200_000, simkit.RngStream(31).generator(), "2sqrtw")
    assert abs(ys.mean() - 5.0) < 3 * ys.std() / math.sqrt(ys.size)
    with pytest.raises(ValueError):
        em.simulate_deconvolution_experiment(10, 0, "bogus")


def test_deconvolution_with_z_zero_gives_delta0():
    xs = simkit.standard_normal(simkit.RngStream(32).generator(), 2000) ** 2
    assert em.deconvolve_mixed_poisson(xs).pmf(0) > 0.9


# -- io ------------------------------------------------------------------


def test_load_sample_and_csv(tmp_path):
    path = tmp_path / "xs.txt"
    path.write_text("# header\n1.5\n\n2.25  # comment\n0.5\n")
    xs = em.load_sample(path)
    assert xs.tolist() == [1.5, 2.25, 0.5]
    text = em.pmf_to_csv(MixingPMF.from_masses([1, 3]))
    assert text.splitlines() == ["k,p_k", "0,0.25", "1,0.75"]
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0\n-2.0\n")
    with pytest.raises(ValueError):
        em.load_sample(bad)
