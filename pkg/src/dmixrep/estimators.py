"""
Rao-Blackwellized estimators with exact variances.

Two families are covered.

Classical: ``X ~ chi2_1(2 theta)`` is the Poisson(theta) mixture of
``chi2_{2K+1}``. The moment estimator ``(X - 1) / 2`` has MSE ``1/2 + 2 theta``;
conditioning on ``K`` gives ``K`` itself, with MSE ``theta``.

Uniform: ``X ~ unif(0, theta)`` splits along the binary expansion
``theta = sum_m 2^-j_m`` into ``unif(a_{m-1}, a_m)`` with partial sums
``a_m``, weights ``(a_m - a_{m-1}) / theta``. Let ``T`` be the right end of the
piece containing ``X`` and ``d(T) = a_m - a_{m-1}`` its length. Conditioning
``2X`` on ``T`` gives ``2T - d(T)`` with variance

    phi(theta) = (1 / theta) sum_m a_m a_{m-1} (a_m - a_{m-1}).

``phi`` is right-continuous with a jump ``-(2 / (7 q)) 2^(-2L)`` at every
``theta = q 2^-L`` (``q`` odd). All of this is computed in exact rationals for
dyadic ``theta``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import simkit
from .chi2 import MixingPMF
from .dyadic import _digits, as_fraction, is_dyadic
from .simkit import MonteCarloReport, monte_carlo

__all__ = [
    "RBUniformModel",
    "rb_variance",
    "rb_variance_bound",
    "rb_jump",
    "rb_left_limit",
    "rb_left_limit_extrapolated",
    "rb_conditional_variance",
    "rb_sample_T",
    "conditioned_estimate",
    "classical_mse",
    "moment_estimator",
    "asymptotic_variance",
    "rb_variance_curve",
    "curve_to_csv",
    "classical_monte_carlo",
    "uniform_monte_carlo",
    "MomentAsymptotics",
    "moment_asymptotics",
]

DEFAULT_DEPTH = 64


def _dyadic_parts(theta: Fraction) -> tuple[int, int]:
    """``(q, L)`` with ``theta = q 2^-L`` and ``q`` odd."""
    if not is_dyadic(theta):
        raise ValueError(f"{theta} is not a binary rational")
    q, den = theta.numerator, theta.denominator
    return q, den.bit_length() - 1


@dataclass(frozen=True)
class RBUniformModel:
    """Anchors ``0 = a_0 < a_1 < ... < a_K`` of ``theta`` and the weights of ``T``.

    For non-dyadic ``theta`` the expansion is cut after ``depth`` binary digits
    and ``truncated`` is set; the anchors then stop at ``a_K < theta``.
    """

    theta: Fraction
    anchors: tuple[Fraction, ...]
    truncated: bool

    @classmethod
    def build(cls, theta, depth: int = DEFAULT_DEPTH) -> "RBUniformModel":
        th = as_fraction(theta)
        if not 0 < th < 1:
            raise ValueError(f"theta must lie in (0, 1), got {th}")
        anchors = [Fraction(0)]
        step = Fraction(1)
        for j, digit in enumerate(_digits(th), start=1):
            step /= 2
            if j > depth:
                break
            if digit:
                anchors.append(anchors[-1] + step)
        return cls(th, tuple(anchors), anchors[-1] != th)

    @property
    def lengths(self) -> tuple[Fraction, ...]:
        a = self.anchors
        return tuple(a[m] - a[m - 1] for m in range(1, len(a)))

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return tuple(d / self.theta for d in self.lengths)

    @property
    def estimates(self) -> tuple[Fraction, ...]:
        """Values ``a_m + a_{m-1}`` taken by the conditioned estimator."""
        a = self.anchors
        return tuple(a[m] + a[m - 1] for m in range(1, len(a)))

    def phi(self) -> Fraction:
        a = self.anchors
        return sum((a[m] * a[m - 1] * (a[m] - a[m - 1]) for m in range(1, len(a))), Fraction(0)) / self.theta


def rb_variance(theta, depth: int = DEFAULT_DEPTH):
    """``phi(theta)``: a Fraction for dyadic ``theta``, else a float truncated at ``depth`` digits.

    Binary digits of a float are exact, so float input is treated as the
    dyadic rational it represents. The truncation error for non-dyadic input
    is at most :func:`rb_variance_bound`.
    """
    th = as_fraction(theta)
    if is_dyadic(th):
        return RBUniformModel.build(th, depth=max(depth, th.denominator.bit_length())).phi()
    return float(RBUniformModel.build(th, depth).phi())


def rb_variance_bound(theta, depth: int = DEFAULT_DEPTH) -> float:
    """Bound ``theta 2^-depth`` on the truncation error of :func:`rb_variance`."""
    th = as_fraction(theta)
    if is_dyadic(th) and th.denominator.bit_length() - 1 <= depth:
        return 0.0
    return float(th) * 2.0**-depth


def rb_jump(theta) -> Fraction:
    """``phi(theta) - phi(theta-) = -(1 / (7 q)) 2^(-2L + 1)`` at ``theta = q 2^-L``."""
    th = as_fraction(theta)
    if not 0 < th < 1:
        raise ValueError(f"theta must lie in (0, 1), got {th}")
    q, L = _dyadic_parts(th)
    return -Fraction(2, 7 * q) / (1 << (2 * L))


def rb_left_limit(theta) -> Fraction:
    """``phi(theta-)`` in closed form.

    Just below ``theta`` the last binary digit ``2^-L`` is replaced by an
    infinite run of ones, whose contribution sums to
    ``a^2 h + a h^2 + (2/7) h^3`` with ``a = a_{K-1}`` and ``h = 2^-L``.
    """
    th = as_fraction(theta)
    if not 0 < th < 1:
        raise ValueError(f"theta must lie in (0, 1), got {th}")
    _, L = _dyadic_parts(th)
    model = RBUniformModel.build(th, depth=L)
    a = model.anchors
    head = sum((a[m] * a[m - 1] * (a[m] - a[m - 1]) for m in range(1, len(a) - 1)), Fraction(0))
    prev = a[-2]
    h = Fraction(1, 1 << L)
    return (head + prev * prev * h + prev * h * h + Fraction(2, 7) * h**3) / th


def rb_left_limit_extrapolated(theta, j_min: int = 10, j_max: int = 30) -> Fraction:
    """``phi(theta-)`` by Richardson extrapolation of exact ``phi(theta - 2^-j)``.

    ``phi(theta - e)`` is analytic in ``e`` near ``0`` along ``e = 2^-j``, so a
    Neville table with ratio 2 removes one power of ``e`` per column.
    """
    th = as_fraction(theta)
    _, L = _dyadic_parts(th)
    if j_min <= L:
        raise ValueError("j_min must exceed the binary length of theta")
    row: list[Fraction] = []
    for j in range(j_min, j_max + 1):
        new = [rb_variance(th - Fraction(1, 1 << j))]
        for k, prev in enumerate(row, start=1):
            f = 1 << k
            new.append((f * new[k - 1] - prev) / (f - 1))
        row = new
    return row[-1]


def rb_conditional_variance(theta, depth: int = DEFAULT_DEPTH) -> Fraction:
    """``E var(2X | T) = sum_m w_m d_m^2 / 3``; adds to ``phi`` to give ``theta^2 / 3``."""
    model = RBUniformModel.build(theta, depth)
    return sum((w * d * d / 3 for w, d in zip(model.weights, model.lengths)), Fraction(0))


def rb_sample_T(theta, rng, size=None, depth: int = DEFAULT_DEPTH):
    """Draw the anchor ``T`` (as float) for ``X ~ unif(0, theta)``."""
    model = RBUniformModel.build(theta, depth)
    w = np.array([float(v) for v in model.weights])
    w /= w.sum()
    idx = simkit.categorical(w, rng, size)
    return np.array([float(a) for a in model.anchors[1:]])[idx]


def _lowest_bit(t: np.ndarray) -> np.ndarray:
    mant, expo = np.frexp(t)
    m = np.round(np.ldexp(mant, 53)).astype(np.int64)
    return np.ldexp((m & -m).astype(float), expo - 53)


def conditioned_estimate(t):
    """``2t - d(t)``, where ``d(t)`` is the lowest binary digit of the anchor ``t``."""
    if isinstance(t, Fraction):
        _, L = _dyadic_parts(t)
        return 2 * t - Fraction(1, 1 << L)
    ts = np.asarray(t, dtype=float)
    if np.any(ts <= 0):
        raise ValueError("anchors are positive")
    out = 2.0 * ts - _lowest_bit(ts)
    return out if out.ndim else float(out)


def classical_mse(theta: float) -> tuple[float, float]:
    """``(MSE of K, MSE of (X - 1) / 2) = (theta, 1/2 + 2 theta)``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    return (theta, 0.5 + 2.0 * theta)


def moment_estimator(xs: Sequence[float]) -> float:
    """``T_n = (mean(xs) - 1) / 2``, unbiased for the mean of the mixing pmf."""
    arr = np.asarray(xs, dtype=float)
    if arr.size == 0:
        raise ValueError("empty sample")
    return float((arr.mean() - 1.0) / 2.0)


def asymptotic_variance(p: MixingPMF) -> float:
    """``v + kappa + 1/2``: limit of ``n var(T_n)`` when ``K ~ p``.

    ``var(X) = 4 v + 4 kappa + 2`` for ``X ~ chi2_{2K+1}``, and ``T_n`` scales by 1/2.
    """
    return p.variance() + p.mean() + 0.5


def rb_variance_curve(resolution: int = 12) -> list[tuple[Fraction, Fraction, Fraction]]:
    """Exact ``(theta, phi(theta), theta^2 / 3)`` for ``theta = i 2^-R``, ``0 < i < 2^R``."""
    if not 1 <= resolution <= 16:
        raise ValueError("resolution must lie in 1..16")
    n = 1 << resolution
    rows = []
    for i in range(1, n):
        th = Fraction(i, n)
        rows.append((th, RBUniformModel.build(th, resolution).phi(), th * th / 3))
    return rows


def curve_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "phi", "var_unconditioned"])
    for th, phi, var in rows:
        w.writerow([repr(float(th)), repr(float(phi)), repr(float(var))])
    return buf.getvalue()


# -- Monte Carlo checks --------------------------------------------------


def _classical_pair(theta: float, gen: np.random.Generator, size: int):
    # two-stage draw keeps the latent K, which is the conditioned estimator
    k = simkit.poisson(theta, gen, size)
    x = simkit.chi2(2 * k + 1.0, gen)
    return k, x


def classical_monte_carlo(theta: float, n: int, seed: int = 0) -> dict[str, MonteCarloReport]:
    """Squared-error reports for ``(X - 1) / 2`` and ``K`` under ``chi2_1(2 theta)``.

    Both reports use the same seed and therefore the same ``(K, X)`` pairs.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")

    def unconditioned(gen, size):
        _, x = _classical_pair(theta, gen, size)
        return ((x - 1.0) / 2.0 - theta) ** 2

    def conditioned(gen, size):
        k, _ = _classical_pair(theta, gen, size)
        return (k - theta) ** 2

    return {
        "unconditioned": monte_carlo(unconditioned, n, seed),
        "conditioned": monte_carlo(conditioned, n, seed),
    }


def uniform_monte_carlo(theta, n: int, seed: int = 0, depth: int = DEFAULT_DEPTH) -> dict[str, MonteCarloReport]:
    """Squared-error reports for ``2X`` and ``2T - d(T)`` under ``X ~ unif(0, theta)``.

    ``T`` is read off the simulated ``X`` as the right end of the anchor
    interval containing it, so the conditioning itself is exercised.
    """
    model = RBUniformModel.build(theta, depth)
    th = float(model.theta)
    upper = np.array([float(a) for a in model.anchors[1:]])
    est = np.array([float(v) for v in model.estimates])

    def pieces(gen, size):
        x = th * gen.random(size)
        idx = np.minimum(np.searchsorted(upper, x, side="left"), upper.size - 1)
        return x, idx

    def unconditioned(gen, size):
        x, _ = pieces(gen, size)
        return (2.0 * x - th) ** 2

    def conditioned(gen, size):
        _, idx = pieces(gen, size)
        return (est[idx] - th) ** 2

    return {
        "unconditioned": monte_carlo(unconditioned, n, seed),
        "conditioned": monte_carlo(conditioned, n, seed),
    }


@dataclass(frozen=True)
class MomentAsymptotics:
    scaled_variance: float
    """``n * var(T_n)`` across replications."""
    predicted: float
    n: int
    replications: int
    seed: int

    @property
    def relative_error(self) -> float:
        return abs(self.scaled_variance - self.predicted) / self.predicted


def moment_asymptotics(p: MixingPMF, n: int, replications: int, seed: int = 0) -> MomentAsymptotics:
    """Simulate ``T_n`` under ``X ~ sum_k p_k chi2_{2k+1}``, one stream per replication."""
    if n < 1 or replications < 2:
        raise ValueError("need n >= 1 and at least two replications")
    masses = p.masses / p.masses.sum()

    def one(gen, _):
        k = simkit.categorical(masses, gen, n)
        return moment_estimator(simkit.chi2(2 * k + 1.0, gen))

    t = np.array(simkit.replicate(one, replications, seed))
    return MomentAsymptotics(float(n * t.var(ddof=1)), asymptotic_variance(p), n, replications, seed)
