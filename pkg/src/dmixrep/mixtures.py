"""
Mixtures of uniform distributions.

Covers point evaluation of mixture densities, mixing of mixtures, the
push-forward of a uniform law under ``x -> |x|``, and the decomposition of a
symmetric unimodal law into uniforms ``unif(-y, y)`` (the half-line density
``f`` is a mixture of ``unif(0, y)`` with mixing measure ``y * d(-f)(y)``).

The worked example is the noncentral double exponential: the law of
``|X + theta|`` with ``X`` Laplace, written as a mixture of dyadic uniforms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .dyadic import WEIGHT_TOL, DiscreteMixture, DyadicInterval, decompose

__all__ = [
    "UniformComponent",
    "GridMeasure",
    "component_bounds",
    "mixture_density",
    "mix_of_mixtures",
    "default_grid",
    "shepp_decompose",
    "shepp_reconstruct",
    "reflect_shift",
    "push_abs",
    "push_abs_mixture",
    "noncentral_dexp_density",
    "noncentral_dexp_derivative",
    "dexp_noncentral_dyadic",
    "l1_distance",
    "weight_l1",
]

DEFAULT_STEP = 2.0**-7
SUPPORT_FLOOR = 1e-12
SUPPORT_CAP = 60.0


@dataclass(frozen=True)
class UniformComponent:
    """``unif(lower, upper)``, with density ``1 / (upper - lower)`` on the open interval."""

    lower: object
    upper: object

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"uniform component needs lower < upper, got ({self.lower}, {self.upper})")

    @property
    def length(self):
        return self.upper - self.lower

    def density(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = float(self.lower), float(self.upper)
        return np.where((x > lo) & (x < hi), 1.0 / (hi - lo), 0.0)

    def mean(self):
        return (self.lower + self.upper) / 2

    def to_json_obj(self) -> dict:
        return {"lower": str(self.lower), "upper": str(self.upper)}

    def __str__(self) -> str:
        return f"unif({self.lower}, {self.upper})"


def component_bounds(c) -> tuple[float, float]:
    """Float endpoints of a uniform-type component (UniformComponent or DyadicInterval)."""
    if isinstance(c, DyadicInterval):
        return c.bounds()
    return float(c.lower), float(c.upper)


def mixture_density(mix: DiscreteMixture, x):
    """Density ``sum_i w_i / len_i * 1{lower_i < x < upper_i}``; residual mass contributes nothing.

    Works on scalars or arrays. Evaluation sorts the endpoints once, so cost is
    ``O((N + len(x)) log N)`` for ``N`` components.
    """
    xs = np.asarray(x, dtype=float)
    if len(mix) == 0:
        out = np.zeros(xs.shape)
        return out if out.ndim else float(out)
    bounds = np.array([component_bounds(c) for c in mix.descriptors()], dtype=float)
    w = np.array([float(v) for v in mix.weights()])
    height = w / (bounds[:, 1] - bounds[:, 0])
    lo_order = np.argsort(bounds[:, 0])
    hi_order = np.argsort(bounds[:, 1])
    lo_sorted = bounds[lo_order, 0]
    hi_sorted = bounds[hi_order, 1]
    lo_cum = np.concatenate(([0.0], np.cumsum(height[lo_order])))
    hi_cum = np.concatenate(([0.0], np.cumsum(height[hi_order])))
    # open intervals: count lowers strictly below x and uppers at or below x
    started = lo_cum[np.searchsorted(lo_sorted, xs, side="left")]
    ended = hi_cum[np.searchsorted(hi_sorted, xs, side="right")]
    out = np.maximum(started - ended, 0.0)
    return out if out.ndim else float(out)


def _close_to_one(total, exact: bool) -> bool:
    return total == 1 if exact else abs(float(total) - 1.0) <= WEIGHT_TOL


def mix_of_mixtures(
    outer: Iterable[tuple[object, object]], inner: Mapping[object, DiscreteMixture]
) -> DiscreteMixture:
    """Mix the family ``inner[theta]`` over ``theta ~ outer``.

    Component weights become ``sum_theta tau(theta) w_theta(i)`` and residuals
    combine the same way.
    """
    outer = list(outer)
    if not outer:
        raise ValueError("outer mixing distribution is empty")
    exact = all(isinstance(t, (Fraction, int)) for _, t in outer)
    taus = [t for _, t in outer]
    if any(t < 0 for t in taus) or not _close_to_one(sum(taus) if exact else math.fsum(taus), exact):
        raise ValueError("outer weights must be a probability vector")
    kinds = set()
    for key, _ in outer:
        if key not in inner:
            raise KeyError(f"no inner mixture for parameter {key!r}")
        kinds.update(type(c) for c in inner[key].descriptors())
    if len(kinds) > 1:
        raise TypeError(f"inner mixtures mix component types {sorted(k.__name__ for k in kinds)}")
    acc: dict = {}
    residual = Fraction(0) if exact else 0.0
    for key, tau in outer:
        if tau == 0:
            continue
        m = inner[key]
        for c, w in m:
            acc[c] = acc.get(c, 0) + tau * w
        residual = residual + tau * m.residual
    return DiscreteMixture(acc.items(), residual)


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Probability measure on a finite increasing set of positive locations.

    ``raw_total`` keeps the mass captured by the discretization before it was
    normalized to one; ``1 - raw_total`` measures what the grid missed.
    """

    locations: np.ndarray
    masses: np.ndarray
    raw_total: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.locations, dtype=float)
        p = np.asarray(self.masses, dtype=float)
        if y.ndim != 1 or y.shape != p.shape or y.size == 0:
            raise ValueError("locations and masses must be equal-length nonempty vectors")
        if np.any(y <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("locations must be positive and strictly increasing")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("masses must be nonnegative and sum to 1")
        object.__setattr__(self, "locations", y)
        object.__setattr__(self, "masses", p)

    @classmethod
    def point(cls, y: float) -> "GridMeasure":
        return cls(np.array([float(y)]), np.array([1.0]))

    def __len__(self) -> int:
        return self.locations.size

    def to_json_obj(self) -> dict:
        return {
            "locations": self.locations.tolist(),
            "masses": self.masses.tolist(),
            "raw_total": self.raw_total,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_obj(), **kwargs)


def default_grid(f: Callable, step: float = DEFAULT_STEP, floor: float = SUPPORT_FLOOR, cap: float = SUPPORT_CAP):
    """Equispaced grid ``step, 2 step, ...`` up to where ``f`` falls below ``floor`` (at most ``cap``).

    With a power-of-two ``step`` every grid point is a short dyadic rational.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    n_max = int(math.ceil(cap / step))
    y = step * np.arange(1, n_max + 1)
    vals = np.asarray(f(y), dtype=float)
    below = np.nonzero(vals < floor)[0]
    n = int(below[0]) + 1 if below.size else n_max
    return y[:n]


def shepp_decompose(f: Callable, grid: Sequence[float] | None = None) -> GridMeasure:
    """Mixing measure of a decreasing half-line density over ``unif(0, y)``.

    With ``rho([y, inf)) = f(y)`` the mixing measure is ``y rho(dy)``. On the
    grid ``y_0 < ... < y_J`` each cell ``[y_j, y_{j+1})`` gets the atom
    ``y_j (f(y_j) - f(y_{j+1}))`` at its left end and the tail gets
    ``y_J f(y_J)``. Left endpoints keep jumps of ``f`` at grid points in place
    (``unif(0, 1)`` maps to a point mass at 1), and the reconstruction
    ``sum_j p_j / y_j 1{x <= y_j}`` then matches ``f`` at every grid point up
    to the final normalization.

    Raises
    ------
    ValueError
        If ``f`` increases anywhere on the grid.
    """
    y = default_grid(f) if grid is None else np.asarray(grid, dtype=float)
    if y.ndim != 1 or y.size == 0 or y[0] <= 0 or np.any(np.diff(y) <= 0):
        raise ValueError("grid must be positive and strictly increasing")
    fy = np.asarray(f(y), dtype=float)
    if fy.shape != y.shape:
        fy = np.array([float(f(v)) for v in y])
    if np.any(fy < 0) or not np.all(np.isfinite(fy)):
        raise ValueError("density must be finite and nonnegative on the grid")
    drops = fy[:-1] - fy[1:]
    if np.any(drops < -1e-12 * max(fy.max(), 1.0)):
        j = int(np.argmin(drops))
        raise ValueError(f"density is not weakly decreasing near y={y[j]:g}")
    mass = np.empty_like(y)
    mass[:-1] = y[:-1] * np.maximum(drops, 0.0)
    mass[-1] = y[-1] * fy[-1]
    total = float(mass.sum())
    if not total > 0:
        raise ValueError("density vanishes on the grid")
    return GridMeasure(y, mass / total, total)


def shepp_reconstruct(nu: GridMeasure, x):
    """Density of ``int unif(0, y) nu(dy)`` at ``x > 0`` (closed interval convention at ``y``)."""
    xs = np.asarray(x, dtype=float)
    tail = np.concatenate((np.cumsum((nu.masses / nu.locations)[::-1])[::-1], [0.0]))
    out = tail[np.searchsorted(nu.locations, xs, side="left")]
    out = np.where(xs > 0, out, 0.0)
    return out if out.ndim else float(out)


def reflect_shift(nu: GridMeasure, theta) -> DiscreteMixture:
    """``int unif(theta - y, theta + y) nu(dy)`` as a finite mixture."""
    comps = [
        (UniformComponent(theta - y, theta + y), p)
        for y, p in zip(nu.locations.tolist(), nu.masses.tolist())
        if p > 0
    ]
    return DiscreteMixture(comps, max(1.0 - math.fsum(p for _, p in comps), 0.0))


def push_abs(c: UniformComponent) -> DiscreteMixture:
    """Law of ``|X|`` for ``X ~ unif(lower, upper)``, as at most two uniforms on the half-line.

    If the interval straddles zero, the overlap ``(0, min(-lower, upper))`` is
    hit from both sides and carries twice the density of the remaining tail.
    Arithmetic follows the endpoint type, so Fraction inputs stay exact.
    """
    lo, hi = c.lower, c.upper
    one = Fraction(1) if isinstance(lo, (Fraction, int)) and isinstance(hi, (Fraction, int)) else 1.0
    if lo >= 0:
        return DiscreteMixture([(c, one)], one - one)
    if hi <= 0:
        return DiscreteMixture([(UniformComponent(-hi, -lo), one)], one - one)
    near, far = min(-lo, hi), max(-lo, hi)
    width = hi - lo
    comps = [(UniformComponent(near - near, near), 2 * near * one / width)]
    if far > near:
        comps.append((UniformComponent(near, far), (far - near) * one / width))
    residual = one - sum(w for _, w in comps)
    return DiscreteMixture(comps, residual if residual > 0 else one - one)


def push_abs_mixture(mix: DiscreteMixture) -> DiscreteMixture:
    """Apply :func:`push_abs` to every component and merge equal pieces."""
    acc: dict = {}
    for c, w in mix:
        for piece, v in push_abs(c):
            acc[piece] = acc.get(piece, 0) + w * v
    return DiscreteMixture(acc.items(), mix.residual)


def noncentral_dexp_density(theta: float, y):
    """Density of ``|X + theta|`` for standard Laplace ``X``, at ``y > 0``.

    ``exp(-theta) cosh(y)`` on ``(0, theta]`` and ``exp(-y) cosh(theta)`` beyond.
    """
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    ys = np.asarray(y, dtype=float)
    inner = 0.5 * (np.exp(np.minimum(ys, theta) - theta) + np.exp(-theta - ys))
    outer = 0.5 * (np.exp(theta - ys) + np.exp(-theta - ys))
    out = np.where(ys <= theta, inner, outer)
    out = np.where(ys > 0, out, 0.0)
    return out if out.ndim else float(out)


def noncentral_dexp_derivative(theta: float, z):
    """Derivative of :func:`noncentral_dexp_density` in ``z``; jumps by ``-1`` at ``z = theta``."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    zs = np.asarray(z, dtype=float)
    inner = 0.5 * (np.exp(np.minimum(zs, theta) - theta) - np.exp(-theta - zs))
    outer = -0.5 * (np.exp(theta - zs) + np.exp(-theta - zs))
    out = np.where(zs <= theta, inner, outer)
    return out if out.ndim else float(out)


def _exp_density(y):
    return np.exp(-np.asarray(y, dtype=float))


def dexp_noncentral_dyadic(
    theta: float = 0.0, grid: Sequence[float] | None = None, eps: float = 0.0
) -> DiscreteMixture:
    """Law of ``|X + theta|``, ``X`` Laplace, as a mixture of dyadic uniforms.

    Pipeline: decompose the Laplace law as ``int unif(-y, y) nu(dy)`` (``nu``
    close to Gamma(2, 1)), shift by ``theta``, fold with ``|.|``, and split
    every folded uniform into dyadic intervals with :func:`decompose`. With
    the default power-of-two grid and a dyadic ``theta`` every endpoint is
    dyadic, so ``eps = 0`` is exact; a positive ``eps`` caps the per-piece
    residual instead.
    """
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    nu = shepp_decompose(_exp_density, grid)
    folded = push_abs_mixture(reflect_shift(nu, theta))
    acc: dict[DyadicInterval, float] = {}
    for piece, w in folded:
        for d, v in decompose(piece.lower, piece.upper, eps):
            acc[d] = acc.get(d, 0.0) + w * float(v)
    comps = list(acc.items())
    return DiscreteMixture(comps, max(1.0 - math.fsum(w for _, w in comps), 0.0))


def l1_distance(f: Callable, g: Callable, lower: float, upper: float, step: float = 1e-3) -> float:
    """Composite trapezoid estimate of ``int |f - g|`` over ``[lower, upper]``."""
    if not upper > lower or not step > 0:
        raise ValueError("need lower < upper and a positive step")
    n = int(math.ceil((upper - lower) / step))
    x = np.linspace(lower, upper, n + 1)
    d = np.abs(np.asarray(f(x), dtype=float) - np.asarray(g(x), dtype=float))
    return float(np.trapezoid(d, x))


def weight_l1(w: Mapping, v: Mapping) -> float:
    """``sum_i |w_i - v_i|`` over the union of keys."""
    keys = set(w) | set(v)
    return math.fsum(abs(float(w.get(k, 0)) - float(v.get(k, 0))) for k in keys)
