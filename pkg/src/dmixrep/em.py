"""
Nonparametric maximum likelihood for the mixing pmf of chi-squared mixtures.

The model is ``X ~ sum_k p_k g_k`` with ``g_k`` the central ``chi2_{2k+1}``
density. Since ``g_k(x) = g_0(x) x^k / (2k - 1)!!``, the factor ``g_0(x)``
(and with it ``exp(-x/2)``) cancels from the EM update, which is

    p_k <- p_k * (1/n) sum_i h_k(x_i) / sum_j p_j h_j(x_i),   h_k(x) = x^k / (2k-1)!!.

Mass above ``K = ceil((1 + max x) / 2)`` can always be moved one index down
without lowering the likelihood (``h_k / h_{k-1} = x / (2k - 1) < 1`` there),
so the support is truncated at ``K``.

The iteration loop runs in a compiled kernel (pure numpy when the JIT is
disabled). :func:`max_loglik` solves the same concave problem by an
active-set Newton method and serves as an independent check on EM.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import simkit
from ._jit import JIT_ENABLED, njit
from .chi2 import MixingPMF, NoncentralChiSq, central_logpdf, sample_noncentral

__all__ = [
    "EMConfig",
    "EMState",
    "support_bound",
    "component_matrix",
    "loglik",
    "kkt_gap",
    "em_step",
    "fit",
    "max_loglik",
    "deconvolve_mixed_poisson",
    "simulate_poisson_experiment",
    "simulate_deconvolution_experiment",
    "load_sample",
    "pmf_to_csv",
]


# weights and component ratios below this are set to exactly zero; subnormal
# floats would otherwise slow the iteration by orders of magnitude
TINY = 1e-300


@dataclass(frozen=True)
class EMConfig:
    max_iterations: int = 100_000
    loglik_tolerance: float = 1e-9
    weight_floor: float = 0.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.loglik_tolerance > 0:
            raise ValueError("loglik_tolerance must be positive")
        if self.weight_floor != 0.0:
            # zeros are absorbing for EM; a floor would change the fixed points
            raise ValueError("only weight_floor = 0 is supported")


@dataclass(frozen=True, eq=False)
class EMState:
    weights: MixingPMF
    loglik: float
    iteration: int = 0
    trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    converged: bool = False

    @property
    def p(self) -> np.ndarray:
        return self.weights.masses

    def to_json_obj(self) -> dict:
        return {
            "weights": self.weights.masses.tolist(),
            "loglik": self.loglik,
            "iteration": self.iteration,
            "converged": self.converged,
        }


def _sample(xs) -> np.ndarray:
    arr = np.asarray(xs, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("empty sample")
    if np.any(~(arr > 0)) or not np.all(np.isfinite(arr)):
        raise ValueError("observations must be positive and finite")
    return arr


def support_bound(xs) -> int:
    """``ceil((1 + max x) / 2)``."""
    return int(math.ceil((1.0 + _sample(xs).max()) / 2.0))


def component_matrix(xs, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Scaled components ``H[i, k] = h_k(x_i) / max_j h_j(x_i)`` and the log row scale.

    ``g_k(x_i) = exp(log g_0(x_i) + scale_i) H[i, k]``. The logs of ``h_k`` come
    from the recursion ``h_k = h_{k-1} x / (2k - 1)``.
    """
    x = _sample(xs)
    if K < 0:
        raise ValueError("K must be nonnegative")
    k = np.arange(1, K + 1)
    steps = np.log(x)[:, None] - np.log(2.0 * k - 1.0)[None, :]
    logh = np.concatenate((np.zeros((x.size, 1)), np.cumsum(steps, axis=1)), axis=1)
    scale = logh.max(axis=1)
    H = np.exp(logh - scale[:, None])
    H[H < TINY] = 0.0
    return np.ascontiguousarray(H), central_logpdf(1, x) + scale


def loglik(p, H: np.ndarray, offset: np.ndarray) -> float:
    dens = H @ np.asarray(p, dtype=float)
    if np.any(dens <= 0):
        return -math.inf
    return float(np.sum(np.log(dens)) + offset.sum())


def kkt_gap(p, H: np.ndarray) -> float:
    """Upper bound ``n (max_k D_k - 1)`` on ``max loglik - loglik(p)``.

    ``D_k = mean_i H[i, k] / (H p)_i`` is the gradient over ``n``; by concavity
    ``L(q) - L(p) <= n sum_k q_k (D_k - 1) <= n (max_k D_k - 1)``.
    """
    dens = H @ np.asarray(p, dtype=float)
    D = (H / dens[:, None]).mean(axis=0)
    return float(H.shape[0] * max(D.max() - 1.0, 0.0))


@njit(fastmath=True)
def _em_kernel(HT, p, max_iter, tol, trace):
    # HT is (K + 1, n) so every inner loop runs over contiguous observations
    m, n = HT.shape
    dens = np.empty(n)
    inv = np.empty(n)
    it = 0
    prev = -np.inf
    while True:
        dens[:] = 0.0
        for k in range(m):
            pk = p[k]
            for i in range(n):
                dens[i] += HT[k, i] * pk
        # sum of logs as the log of a running product, renormalized by frexp
        prod = 1.0
        expo = 0
        for i in range(n):
            prod *= dens[i]
            inv[i] = 1.0 / dens[i]
            if prod < 1e-200:
                prod, e = math.frexp(prod)
                expo += e
        ll = math.log(prod) + expo * 0.6931471805599453
        trace[it] = ll
        if it > 0 and ll - prev < tol:
            return it, True
        if it == max_iter:
            return it, False
        prev = ll
        total = 0.0
        for k in range(m):
            if p[k] == 0.0:
                continue
            g = 0.0
            for i in range(n):
                g += HT[k, i] * inv[i]
            p[k] *= g / n
            if p[k] < 1e-300:
                p[k] = 0.0
            total += p[k]
        for k in range(m):
            p[k] /= total
        it += 1


def _em_numpy(HT, p, max_iter, tol, trace):
    n = HT.shape[1]
    prev = -np.inf
    it = 0
    while True:
        dens = p @ HT
        ll = float(np.log(dens).sum())
        trace[it] = ll
        if it > 0 and ll - prev < tol:
            return it, True
        if it == max_iter:
            return it, False
        prev = ll
        p *= (HT @ (1.0 / dens)) / n
        p[p < TINY] = 0.0
        p /= p.sum()
        it += 1


def _init_weights(K: int, init) -> np.ndarray:
    if init is None:
        return np.full(K + 1, 1.0 / (K + 1))
    p = np.array(init.masses if isinstance(init, MixingPMF) else init, dtype=float)
    if p.size != K + 1:
        raise ValueError(f"init has {p.size} weights, expected {K + 1}")
    if np.any(p < 0) or not p.sum() > 0:
        raise ValueError("init must be a nonnegative vector with positive mass")
    return p / p.sum()


def em_step(state: EMState, xs) -> EMState:
    """One EM update; the support is taken from ``state.weights``."""
    p = state.weights.masses
    H, off = component_matrix(xs, p.size - 1)
    dens = H @ p
    if np.any(dens <= 0):
        raise FloatingPointError("all components vanish at some observation")
    new = p * (H.T @ (1.0 / dens)) / H.shape[0]
    new[new < TINY] = 0.0
    new /= new.sum()
    return EMState(MixingPMF(new), loglik(new, H, off), state.iteration + 1)


def fit(xs, config: EMConfig | None = None, init=None, K: int | None = None) -> EMState:
    """Iterate EM until the loglik gain drops below ``config.loglik_tolerance``.

    ``K`` defaults to :func:`support_bound`; a larger value only adds
    components that EM drives towards zero. ``init`` defaults to uniform.
    The returned state carries the full loglik trace.
    """
    cfg = config or EMConfig()
    x = _sample(xs)
    if K is None:
        K = support_bound(x)
    H, off = component_matrix(x, K)
    p = _init_weights(K, init)
    trace = np.empty(cfg.max_iterations + 1)
    runner = _em_kernel if JIT_ENABLED else _em_numpy
    it, converged = runner(np.ascontiguousarray(H.T), p, cfg.max_iterations, cfg.loglik_tolerance, trace)
    trace = trace[: it + 1] + off.sum()
    if not np.all(np.isfinite(trace)):
        raise FloatingPointError("non-finite log-likelihood; check the input sample")
    return EMState(MixingPMF(p / p.sum()), float(trace[-1]), int(it), trace, bool(converged))


def _newton_direction(H, dens, S):
    """Newton step for ``sum log (H p)`` in the coordinates ``S``, keeping ``sum p`` fixed.

    With ``W = H[:, S] / dens`` the negative Hessian is ``W^T W`` and the
    gradient ``W^T 1``, so the step is the least-squares solution of
    ``W d = 1``. The constraint ``sum d = 0`` is eliminated with the basis
    ``e_j - e_last``; solving by QR avoids squaring the condition number.
    """
    if S.size == 1:
        return np.zeros(1)
    W = H[:, S] / dens[:, None]
    Z = W[:, :-1] - W[:, -1:]
    y = np.linalg.lstsq(Z, np.ones(W.shape[0]), rcond=None)[0]
    return np.append(y, -y.sum())


def max_loglik(
    xs,
    K: int | None = None,
    tol: float = 1e-10,
    max_rounds: int = 500,
    warm_start: int = 2000,
    keep: float = 1e-4,
) -> tuple[float, np.ndarray, float]:
    """Maximum log-likelihood over pmfs on ``{0..K}``, a maximizer, and its certified gap.

    Active-set Newton method. A short EM run supplies the starting support
    (components with weight above ``keep``). On the support ``S`` the
    constrained Newton step is damped by a ratio test (a component that hits
    zero leaves ``S``) and a backtracking search on the exact loglik
    difference. Once ``p`` is optimal on ``S``, the outside component with the
    largest gradient enters. Stops when :func:`kkt_gap`, an upper bound on the
    distance to the maximum, is below ``tol``.
    """
    x = _sample(xs)
    if K is None:
        K = support_bound(x)
    H, off = component_matrix(x, K)
    n = H.shape[0]
    p = fit(x, EMConfig(max_iterations=warm_start, loglik_tolerance=1e-300), K=K).p.copy()
    p[p < keep * p.max()] = 0.0
    p /= p.sum()
    gap = math.inf
    noise = n * np.finfo(float).eps
    for _ in range(max_rounds):
        dens = H @ p
        D = (H / dens[:, None]).mean(axis=0)
        gap = n * max(D.max() - 1.0, 0.0)
        if gap <= tol:
            break
        S = np.nonzero(p > 0)[0]
        outside = np.where(p > 0, -np.inf, D)
        # enter a new component once the support is (nearly) optimal compared
        # with the largest outside gradient
        if n * np.abs(D[S] - 1.0).max() <= max(tol, 1e-3 * gap) and outside.max() > 1.0:
            S = np.sort(np.append(S, int(np.argmax(outside))))
        step = _newton_direction(H, dens, S)
        base = p[S]
        # a component sitting at zero cannot move down
        step = np.where((base == 0) & (step < 0), 0.0, step)
        blocking = step < 0
        ratios = np.where(blocking, -base / np.where(blocking, step, -1.0), np.inf)
        t = min(1.0, float(ratios.min()))
        moved = False
        while t > 1e-16:
            cand = p.copy()
            cand[S] = np.maximum(base + t * step, 0.0)
            cand[S[ratios <= t]] = 0.0
            cand /= cand.sum()
            if np.array_equal(cand, p):
                break
            gain = float(np.log1p((H @ cand - dens) / dens).sum())
            # close to the optimum the true gain sinks below the rounding of
            # this sum; tolerate noise-sized losses (the returned gap bound
            # holds whatever path the iterates take)
            if gain >= -noise:
                p = cand
                moved = True
                break
            t *= 0.5
        if not moved:
            break
    dens = H @ p
    return float(np.log(dens).sum() + off.sum()), p, gap


def deconvolve_mixed_poisson(xs, config: EMConfig | None = None, init=None) -> MixingPMF:
    """Estimate the mixed Poisson pmf behind ``X = (Y + Z)^2``, ``Y`` standard normal, ``Z >= 0``.

    Given ``Z = z``, ``X ~ chi2_1(z^2)``, i.e. Poisson mean ``z^2 / 2``, so the
    NPMLE of the chi-squared mixing pmf estimates
    ``p_k = int exp(-z^2/2) (z^2/2)^k / k! mu(dz)``.
    """
    return fit(xs, config, init).weights


def simulate_poisson_experiment(n: int, theta: float, rng) -> np.ndarray:
    """``n`` draws of ``chi2_1(2 theta)``."""
    return sample_noncentral(NoncentralChiSq(1, theta), rng, n, method="direct")


def simulate_deconvolution_experiment(n: int, rng, variant: str = "sqrt2w") -> np.ndarray:
    """``n`` draws of ``(Y + Z)^2`` with ``W ~ Exp(1)``.

    ``variant="sqrt2w"`` uses ``Z = sqrt(2 W)``, whose mixed Poisson pmf is
    geometric with success probability 1/2; ``variant="2sqrtw"`` uses
    ``Z = 2 sqrt(W)``, which gives success probability 1/3.
    """
    gen = simkit.as_generator(rng)
    w = gen.standard_exponential(n)
    if variant == "sqrt2w":
        z = np.sqrt(2.0 * w)
    elif variant == "2sqrtw":
        z = 2.0 * np.sqrt(w)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    y = gen.standard_normal(n)
    return (y + z) ** 2


def load_sample(path) -> np.ndarray:
    """Observations from a text file, one per line; blank lines and ``#`` comments skipped."""
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                vals.append(float(line))
    return _sample(vals)


def pmf_to_csv(p: Sequence[float] | MixingPMF) -> str:
    masses = p.masses if isinstance(p, MixingPMF) else np.asarray(p, dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "p_k"])
    for k, v in enumerate(masses):
        w.writerow([k, repr(float(v))])
    return buf.getvalue()
