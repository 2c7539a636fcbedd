"""
Seeded random streams, variate generators and a small Monte Carlo harness.

Streams are Philox (counter-based) generators keyed by ``(seed, stream_id)``
through :class:`numpy.random.SeedSequence`, so replications can be farmed out
by stream index without overlap. Gamma variates use the Marsaglia-Tsang
squeeze method; Poisson variates use inversion below mean 10 and Hörmann's
transformed rejection with squeeze (PTRS) above.

The rejection samplers have a compiled per-draw kernel and a vectorized numpy
fallback (see :mod:`dmixrep._jit`). Each path is deterministic for a given
stream, but the two consume uniforms in a different order and therefore do
not produce the same variates.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from ._jit import JIT_ENABLED, njit

__all__ = [
    "RngStream",
    "MonteCarloReport",
    "as_generator",
    "standard_normal",
    "exponential",
    "uniform",
    "categorical",
    "geometric",
    "poisson",
    "gamma",
    "chi2",
    "monte_carlo",
    "replicate",
]

POISSON_INVERSION_LIMIT = 10.0


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_id < 2**64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, index)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError("rng must be a numpy Generator, an RngStream or an integer seed")


def standard_normal(rng, size=None):
    return as_generator(rng).standard_normal(size)


def exponential(rate: float, rng, size=None):
    if not rate > 0:
        raise ValueError("rate must be positive")
    return as_generator(rng).standard_exponential(size) / rate


def uniform(a: float, b: float, rng, size=None):
    if not a < b:
        raise ValueError("uniform requires a < b")
    return a + (b - a) * as_generator(rng).random(size)


def categorical(pmf: Sequence[float], rng, size=None):
    """Indices drawn from ``pmf`` by inversion of its cumulative sums."""
    p = np.asarray(pmf, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError("pmf must be a nonempty nonnegative vector summing to 1")
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    u = as_generator(rng).random(size)
    return np.searchsorted(cdf, u, side="right")


def geometric(success: float, rng, size=None):
    """Failures before the first success, on {0, 1, ...}."""
    if not 0 < success <= 1:
        raise ValueError("success probability must lie in (0, 1]")
    gen = as_generator(rng)
    if success == 1:
        return np.zeros(size, dtype=np.int64) if size is not None else 0
    u = gen.random(size)
    return np.floor(np.log1p(-u) / math.log1p(-success)).astype(np.int64)


# -- gamma ---------------------------------------------------------------


@njit
def _mt_draw(gen, alpha):
    d = alpha - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = gen.standard_normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = gen.random()
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v


@njit
def _gamma_kernel(gen, shape, out):
    for i in range(shape.size):
        a = shape[i]
        if a >= 1.0:
            out[i] = _mt_draw(gen, a)
        else:
            g = _mt_draw(gen, a + 1.0)
            out[i] = g * gen.random() ** (1.0 / a)


def _mt_numpy(gen, alpha):
    d = alpha - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(alpha.shape)
    pending = np.arange(alpha.size)
    while pending.size:
        dd, cc = d[pending], c[pending]
        x = gen.standard_normal(pending.size)
        v = 1.0 + cc * x
        u = gen.random(pending.size)
        ok = v > 0
        v = np.where(ok, v, 1.0) ** 3
        x2 = x * x
        with np.errstate(divide="ignore", invalid="ignore"):
            accept = ok & (
                (u < 1.0 - 0.0331 * x2 * x2)
                | (np.log(u) < 0.5 * x2 + dd * (1.0 - v + np.log(v)))
            )
        out[pending[accept]] = (dd * v)[accept]
        pending = pending[~accept]
    return out


def _gamma_numpy(gen, shape):
    small = shape < 1.0
    boosted = np.where(small, shape + 1.0, shape)
    g = _mt_numpy(gen, boosted)
    if np.any(small):
        u = gen.random(int(small.sum()))
        g[small] *= u ** (1.0 / shape[small])
    return g


def gamma(shape, scale: float, rng, size=None):
    """Gamma(shape, scale) variates; ``shape`` may be an array (broadcast with ``size``)."""
    gen = as_generator(rng)
    shp = np.asarray(shape, dtype=float)
    if size is not None:
        shp = np.broadcast_to(shp, size)
    if np.any(~(shp > 0)):
        raise ValueError("gamma shape must be positive")
    if not scale > 0:
        raise ValueError("gamma scale must be positive")
    flat = np.ascontiguousarray(shp, dtype=float).ravel()
    if JIT_ENABLED:
        out = np.empty(flat.size)
        _gamma_kernel(gen, flat, out)
    else:
        out = _gamma_numpy(gen, flat)
    out = out.reshape(shp.shape) * scale
    return out if out.ndim else float(out)


def chi2(df, rng, size=None):
    """Central chi-squared variates with (possibly array) degrees of freedom."""
    return gamma(np.asarray(df, dtype=float) / 2.0, 2.0, rng, size)


# -- poisson -------------------------------------------------------------


@njit
def _poisson_inversion(gen, lam):
    p = math.exp(-lam)
    s = p
    k = 0
    u = gen.random()
    while u > s and k < 10000:
        k += 1
        p *= lam / k
        s += p
    return k


@njit
def _poisson_ptrs(gen, lam):
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = gen.random() - 0.5
        v = gen.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b) <= -lam + k * loglam - math.lgamma(k + 1.0):
            return k


@njit
def _poisson_kernel(gen, lam, out):
    for i in range(lam.size):
        m = lam[i]
        if m == 0.0:
            out[i] = 0
        elif m < 10.0:
            out[i] = _poisson_inversion(gen, m)
        else:
            out[i] = _poisson_ptrs(gen, m)


def _poisson_inversion_numpy(gen, lam):
    u = gen.random(lam.size)
    p = np.exp(-lam)
    s = p.copy()
    k = np.zeros(lam.size, dtype=np.int64)
    active = u > s
    step = 0
    while np.any(active) and step < 10000:
        step += 1
        idx = np.nonzero(active)[0]
        k[idx] += 1
        p[idx] *= lam[idx] / k[idx]
        s[idx] += p[idx]
        active[idx] = u[idx] > s[idx]
    return k


def _poisson_ptrs_numpy(gen, lam):
    slam = np.sqrt(lam)
    loglam = np.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    out = np.empty(lam.size, dtype=np.int64)
    pending = np.arange(lam.size)
    from math import lgamma

    lgam = np.vectorize(lgamma, otypes=[float])
    while pending.size:
        aa, bb, ll = a[pending], b[pending], lam[pending]
        u = gen.random(pending.size) - 0.5
        v = gen.random(pending.size)
        us = 0.5 - np.abs(u)
        k = np.floor((2.0 * aa / us + bb) * u + ll + 0.43)
        fast = (us >= 0.07) & (v <= vr[pending])
        reject = ~fast & ((k < 0) | ((us < 0.013) & (v > us)))
        slow = ~fast & ~reject
        accept = fast.copy()
        if np.any(slow):
            ks = k[slow]
            lhs = np.log(v[slow]) + np.log(invalpha[pending][slow]) - np.log(aa[slow] / (us[slow] ** 2) + bb[slow])
            rhs = -ll[slow] + ks * loglam[pending][slow] - lgam(ks + 1.0)
            accept[np.nonzero(slow)[0][lhs <= rhs]] = True
        out[pending[accept]] = k[accept].astype(np.int64)
        pending = pending[~accept]
    return out


def poisson(mean, rng, size=None):
    """Poisson variates; ``mean`` may be an array (broadcast with ``size``)."""
    gen = as_generator(rng)
    lam = np.asarray(mean, dtype=float)
    if size is not None:
        lam = np.broadcast_to(lam, size)
    if np.any(~(lam >= 0)) or np.any(~np.isfinite(lam)):
        raise ValueError("poisson mean must be finite and nonnegative")
    flat = np.ascontiguousarray(lam, dtype=float).ravel()
    if JIT_ENABLED:
        out = np.empty(flat.size, dtype=np.int64)
        _poisson_kernel(gen, flat, out)
    else:
        out = np.zeros(flat.size, dtype=np.int64)
        small = (flat > 0) & (flat < POISSON_INVERSION_LIMIT)
        large = flat >= POISSON_INVERSION_LIMIT
        if np.any(small):
            out[small] = _poisson_inversion_numpy(gen, flat[small])
        if np.any(large):
            out[large] = _poisson_ptrs_numpy(gen, flat[large])
    out = out.reshape(lam.shape)
    return out if out.ndim else int(out)


# -- Monte Carlo harness -------------------------------------------------


@dataclass(frozen=True)
class MonteCarloReport:
    estimate: float
    standard_error: float
    n: int
    seed: int
    streams: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.estimate - target) <= k * self.standard_error


def _split(n: int, streams: int) -> list[int]:
    base, extra = divmod(n, streams)
    return [base + (i < extra) for i in range(streams)]


def monte_carlo(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    seed: int = 0,
    streams: int = 1,
) -> MonteCarloReport:
    """Mean and standard error of ``n`` values produced by ``draw(gen, size)``.

    The ``n`` draws are split over ``streams`` independent streams
    ``RngStream(seed, i)``; values are concatenated in stream order, so the
    report only depends on ``(seed, streams, n)``.
    """
    if n < 2:
        raise ValueError("monte_carlo needs n >= 2")
    if streams < 1:
        raise ValueError("streams must be positive")
    parts = []
    for i, size in enumerate(_split(n, streams)):
        if size == 0:
            continue
        vals = np.asarray(draw(RngStream(seed, i).generator(), size), dtype=float).ravel()
        if vals.size != size:
            raise ValueError(f"draw returned {vals.size} values, expected {size}")
        parts.append(vals)
    values = np.concatenate(parts)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite draw encountered")
    est = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n))
    return MonteCarloReport(est, se, n, seed, streams)


def replicate(fn: Callable[[np.random.Generator, int], object], reps: int, seed: int = 0) -> list:
    """``[fn(gen_i, i) for i in range(reps)]`` with one independent stream per replication."""
    return [fn(RngStream(seed, i).generator(), i) for i in range(reps)]
