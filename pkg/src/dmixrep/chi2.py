"""
Central and noncentral chi-squared densities as Poisson mixtures.

``NoncentralChiSq(n, theta)`` is the law ``chi2_n(2 theta)``, which is the
Poisson(theta) mixture of central ``chi2_{n + 2k}`` densities. The Poisson
mean ``theta`` (half the usual noncentrality ``lambda``) is the parameter used
throughout the package.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import simkit
from ._jit import JIT_ENABLED, njit
from .mixtures import GridMeasure

__all__ = [
    "NoncentralChiSq",
    "MixingPMF",
    "SeriesResult",
    "central_logpdf",
    "central_density",
    "noncentral_series",
    "noncentral_density_series",
    "noncentral_density_closed",
    "poisson_pmf",
    "geometric_pmf",
    "mixed_poisson_pmf",
    "sample_noncentral",
]

LOG2 = math.log(2.0)
SERIES_TOL = 1e-16
MAX_TERMS = 100_000


@dataclass(frozen=True)
class NoncentralChiSq:
    """``chi2_df(2 * poisson_mean)``; ``poisson_mean = 0`` is the central law."""

    df: int
    poisson_mean: float = 0.0

    def __post_init__(self):
        if int(self.df) != self.df or self.df < 1:
            raise ValueError("df must be a positive integer")
        if not self.poisson_mean >= 0 or not math.isfinite(self.poisson_mean):
            raise ValueError("poisson_mean must be finite and nonnegative")

    @property
    def noncentrality(self) -> float:
        return 2.0 * self.poisson_mean

    @property
    def mean(self) -> float:
        return self.df + 2.0 * self.poisson_mean

    @property
    def variance(self) -> float:
        return 2.0 * self.df + 8.0 * self.poisson_mean


@dataclass(frozen=True, eq=False)
class MixingPMF:
    """pmf on ``{0, 1, ...}`` stored up to a finite index, plus the mass beyond it."""

    masses: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.masses, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("masses must be a nonempty vector")
        if np.any(p < 0) or self.tail_mass < 0:
            raise ValueError("masses must be nonnegative")
        if abs(math.fsum(p) + self.tail_mass - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {math.fsum(p) + self.tail_mass!r}, not 1")
        object.__setattr__(self, "masses", p)

    @classmethod
    def from_masses(cls, masses: Sequence[float]) -> "MixingPMF":
        """Normalize ``masses`` exactly onto their support (tail mass 0)."""
        p = np.asarray(masses, dtype=float)
        return cls(p / p.sum(), 0.0)

    @classmethod
    def poisson(cls, mean: float, kmax: int | None = None) -> "MixingPMF":
        if kmax is None:
            kmax = int(mean + 12 * math.sqrt(mean) + 30)
        p = poisson_pmf(mean, np.arange(kmax + 1))
        return cls(p, max(1.0 - math.fsum(p), 0.0))

    @classmethod
    def geometric(cls, success: float, kmax: int | None = None) -> "MixingPMF":
        if kmax is None:
            kmax = 60 if success >= 0.5 else int(60 / -math.log2(1 - success)) + 1
        p = geometric_pmf(success, np.arange(kmax + 1))
        return cls(p, max(1.0 - math.fsum(p), 0.0))

    @classmethod
    def point(cls, k: int) -> "MixingPMF":
        p = np.zeros(k + 1)
        p[k] = 1.0
        return cls(p)

    @property
    def support_size(self) -> int:
        return self.masses.size

    def pmf(self, k: int) -> float:
        return float(self.masses[k]) if 0 <= k < self.masses.size else 0.0

    def padded(self, size: int) -> np.ndarray:
        out = np.zeros(max(size, self.masses.size))
        out[: self.masses.size] = self.masses
        return out

    def mean(self) -> float:
        return float(np.dot(np.arange(self.masses.size), self.masses))

    def variance(self) -> float:
        k = np.arange(self.masses.size)
        mu = self.mean()
        return float(np.dot((k - mu) ** 2, self.masses))

    def total_variation(self, other) -> float:
        """Total variation distance, with the stored tails counted as extra mass."""
        q = other.masses if isinstance(other, MixingPMF) else np.asarray(other, dtype=float)
        size = max(self.masses.size, q.size)
        a = self.padded(size)
        b = np.zeros(size)
        b[: q.size] = q
        tail = self.tail_mass + (other.tail_mass if isinstance(other, MixingPMF) else 0.0)
        return 0.5 * (float(np.abs(a - b).sum()) + tail)

    def to_json_obj(self) -> dict:
        return {"masses": self.masses.tolist(), "tail_mass": self.tail_mass}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_obj(), **kwargs)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "MixingPMF":
        return cls(np.asarray(obj["masses"], dtype=float), float(obj.get("tail_mass", 0.0)))


def _positive(x) -> np.ndarray:
    xs = np.asarray(x, dtype=float)
    if np.any(~(xs > 0)):
        raise ValueError("density argument must be positive")
    return xs


def central_logpdf(n, x):
    """Log density of central ``chi2_n`` at ``x > 0``."""
    xs = _positive(x)
    nn = np.asarray(n, dtype=float)
    if np.any(nn <= 0):
        raise ValueError("degrees of freedom must be positive")
    half = nn / 2.0
    lg = np.vectorize(math.lgamma, otypes=[float])(half)
    out = (half - 1.0) * np.log(xs) - xs / 2.0 - half * LOG2 - lg
    return out if out.ndim else float(out)


def central_density(n, x):
    """``x^(n/2 - 1) exp(-x/2) / (2^(n/2) Gamma(n/2))``, evaluated via logs."""
    out = np.exp(central_logpdf(n, x))
    return out if np.ndim(out) else float(out)


# -- Poisson series ------------------------------------------------------


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: int
    """Index of the last term included."""


@njit
def _series_scalar(n, theta, x, tol, max_terms):
    # partial sum kept as exp(shift) * acc; t is the current term over exp(shift)
    half = 0.5 * n
    logt = -theta + (half - 1.0) * math.log(x) - 0.5 * x - half * 0.6931471805599453 - math.lgamma(half)
    if theta == 0.0:
        return logt, 0
    shift = logt
    acc = 1.0
    t = 1.0
    tx = theta * x
    k = 0
    while k < max_terms:
        # term k+1 over term k is theta x / ((k+1)(n+2k))
        t *= tx / ((k + 1.0) * (n + 2.0 * k))
        q = tx / ((k + 2.0) * (n + 2.0 * k + 2.0))
        # later ratios only shrink, so the tail is at most a geometric series
        if q < 1.0 and t < tol * acc * (1.0 - q):
            return shift + math.log(acc), k
        k += 1
        if t > 1.0:
            acc = acc / t + 1.0
            shift += math.log(t)
            t = 1.0
        else:
            acc += t
    return shift + math.log(acc), k


@njit
def _series_kernel(n, theta, xs, tol, max_terms, out, idx):
    for i in range(xs.size):
        v, k = _series_scalar(n, theta, xs[i], tol, max_terms)
        out[i] = v
        idx[i] = k


def _series_numpy(n, theta, xs, tol, max_terms):
    half = 0.5 * n
    logt = -theta + (half - 1.0) * np.log(xs) - 0.5 * xs - half * LOG2 - math.lgamma(half)
    if theta == 0.0:
        return logt, np.zeros(xs.size, dtype=np.int64)
    shift = logt.copy()
    acc = np.ones(xs.size)
    done = np.zeros(xs.size, dtype=bool)
    idx = np.zeros(xs.size, dtype=np.int64)
    value = np.empty(xs.size)
    logth, logx = math.log(theta), np.log(xs)
    for k in range(max_terms):
        nxt = logt + logth + logx - math.log((k + 1.0) * (n + 2.0 * k))
        q = theta * xs / ((k + 2.0) * (n + 2.0 * k + 2.0))
        tail = nxt - np.log1p(-np.where(q < 1.0, q, 0.0))
        stop = ~done & (q < 1.0) & (tail - shift - np.log(acc) < math.log(tol))
        value[stop] = shift[stop] + np.log(acc[stop])
        idx[stop] = k
        done |= stop
        if done.all():
            return value, idx
        logt = nxt
        up = logt > shift
        acc = np.where(up, acc * np.exp(np.minimum(shift - logt, 0.0)) + 1.0, acc + np.exp(np.minimum(logt - shift, 0.0)))
        shift = np.maximum(shift, logt)
    value[~done] = shift[~done] + np.log(acc[~done])
    idx[~done] = max_terms
    return value, idx


def _series_log(p: NoncentralChiSq, xs: np.ndarray, tol: float):
    flat = np.ascontiguousarray(xs, dtype=float).ravel()
    if JIT_ENABLED:
        out = np.empty(flat.size)
        idx = np.empty(flat.size, dtype=np.int64)
        _series_kernel(float(p.df), float(p.poisson_mean), flat, tol, MAX_TERMS, out, idx)
    else:
        out, idx = _series_numpy(float(p.df), float(p.poisson_mean), flat, tol, MAX_TERMS)
    return out.reshape(xs.shape), idx.reshape(xs.shape)


def noncentral_series(p: NoncentralChiSq, x: float, tol: float = SERIES_TOL) -> SeriesResult:
    """Poisson-series density at a single point, with the truncation index used.

    Terms ``Po(theta)({k}) f_{n+2k}(x)`` are summed until the geometric bound on
    the remaining tail drops below ``tol`` times the partial sum.
    """
    xs = _positive(np.array([x], dtype=float))
    v, k = _series_log(p, xs, tol)
    return SeriesResult(float(np.exp(v[0])), int(k[0]))


def noncentral_density_series(p: NoncentralChiSq, x, tol: float = SERIES_TOL):
    """Density of ``chi2_n(2 theta)`` as ``sum_k Po(theta)({k}) f_{n+2k}(x)``."""
    xs = _positive(x)
    v, _ = _series_log(p, xs, tol)
    out = np.exp(v)
    return out if out.ndim else float(out)


def _log_cosh(z):
    return z - LOG2 + np.log1p(np.exp(-2.0 * z))


def _log_sinh(z):
    return z - LOG2 + np.log(-np.expm1(-2.0 * z))


def noncentral_density_closed(df: int, theta: float, x):
    """Closed-form density of ``chi2_df(2 theta)`` for ``df`` 1 or 3.

    ``df = 1``: ``(2 pi x)^(-1/2) exp(-theta - x/2) cosh(sqrt(2 theta x))``.
    ``df = 3``: ``exp(-theta - x/2) sinh(sqrt(2 theta x)) / (2 sqrt(pi theta))``.
    Both are evaluated in log space, so large ``theta * x`` does not overflow.
    """
    xs = _positive(x)
    if df not in (1, 3):
        raise ValueError("closed form available for df 1 and 3 only")
    if not theta > 0:
        raise ValueError("theta must be positive for the closed form")
    z = np.sqrt(2.0 * theta * xs)
    if df == 1:
        logv = -0.5 * np.log(2.0 * math.pi * xs) - theta - xs / 2.0 + _log_cosh(z)
    else:
        logv = -theta - xs / 2.0 + _log_sinh(z) - LOG2 - 0.5 * math.log(math.pi * theta)
    out = np.exp(logv)
    return out if out.ndim else float(out)


# -- mixing pmfs ---------------------------------------------------------


def poisson_pmf(theta: float, k):
    if not theta >= 0:
        raise ValueError("poisson mean must be nonnegative")
    ks = np.asarray(k)
    if np.any(ks < 0):
        raise ValueError("k must be nonnegative")
    if theta == 0:
        out = np.where(ks == 0, 1.0, 0.0)
    else:
        lg = np.vectorize(math.lgamma, otypes=[float])(ks + 1.0)
        out = np.exp(-theta + ks * math.log(theta) - lg)
    return out if out.ndim else float(out)


def geometric_pmf(success: float, k):
    """``s (1 - s)^k`` on ``{0, 1, ...}``."""
    if not 0 < success <= 1:
        raise ValueError("success probability must lie in (0, 1]")
    ks = np.asarray(k)
    if np.any(ks < 0):
        raise ValueError("k must be nonnegative")
    out = success * np.power(1.0 - success, ks, dtype=float)
    return out if out.ndim else float(out)


def mixed_poisson_pmf(nu: GridMeasure, k):
    """``sum_j nu_j Po(lambda_j)({k})`` over the atoms of ``nu``."""
    ks = np.atleast_1d(np.asarray(k))
    if np.any(ks < 0):
        raise ValueError("k must be nonnegative")
    lam = nu.locations[:, None]
    lg = np.vectorize(math.lgamma, otypes=[float])(ks + 1.0)[None, :]
    terms = np.exp(-lam + ks[None, :] * np.log(lam) - lg)
    out = nu.masses @ terms
    return out if np.ndim(k) else float(out[0])


# -- sampling ------------------------------------------------------------


def sample_noncentral(p: NoncentralChiSq, rng, size=None, method: str = "direct"):
    """Draws from ``chi2_n(2 theta)``.

    ``direct`` squares a shifted normal ``(Z + sqrt(2 theta))^2`` and adds an
    independent central ``chi2_{n-1}``; ``two_stage`` draws ``K ~ Po(theta)``
    and then ``chi2_{n + 2K}``.
    """
    gen = simkit.as_generator(rng)
    if method == "direct":
        z = gen.standard_normal(size) + math.sqrt(2.0 * p.poisson_mean)
        out = z * z
        if p.df > 1:
            out = out + simkit.chi2(p.df - 1, gen, size)
        return out
    if method == "two_stage":
        k = simkit.poisson(p.poisson_mean, gen, size)
        return simkit.chi2(p.df + 2 * np.asarray(k), gen)
    raise ValueError(f"unknown method {method!r}; expected 'direct' or 'two_stage'")
