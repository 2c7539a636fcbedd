"""
Exact dyadic arithmetic and the decomposition of uniform laws into uniforms
on dyadic intervals.

A dyadic interval is ``(k * 2**m, (k + 1) * 2**m)`` for integers ``k, m``.
Every bounded open interval ``(a, b)`` is, up to a countable set, the disjoint
union of its *maximal* dyadic subintervals, so

    unif(a, b) = sum_{(p, q)} 2**m / (b - a) * unif(p, q)

where the sum runs over those maximal subintervals. :func:`decompose` produces
them, exactly when ``a`` and ``b`` are dyadic rationals and up to a reported
residual mass otherwise.

Endpoints may be given as ``int``, ``float``, ``str`` (parsed by
:class:`fractions.Fraction`), :class:`~fractions.Fraction` or
:class:`DyadicRational`. Floats are converted exactly; a finite double is
always a dyadic rational.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "DyadicRational",
    "DyadicInterval",
    "DiscreteMixture",
    "BinaryExpansion",
    "as_fraction",
    "is_dyadic",
    "binary_expansion",
    "is_maximal_member",
    "decompose",
    "one_sided_decompose",
    "affine_map",
    "dyadic_step_approximation",
]

WEIGHT_TOL = 1e-12


def as_fraction(x) -> Fraction:
    """Exact rational value of ``x``; floats are taken at their binary value."""
    if isinstance(x, DyadicRational):
        return x.to_fraction()
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(float(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def is_dyadic(x) -> bool:
    return _is_pow2(as_fraction(x).denominator)


def _pow2(e: int) -> Fraction:
    return Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e)


def _floor_log2(r: Fraction) -> int:
    """Largest ``j`` with ``2**j <= r`` for ``r > 0``."""
    j = r.numerator.bit_length() - r.denominator.bit_length()
    if _pow2(j) > r:
        j -= 1
    return j


def _valuation2(r: Fraction) -> float:
    """2-adic valuation of a dyadic ``r``; ``inf`` for zero."""
    if r == 0:
        return math.inf
    n, d = r.numerator, r.denominator
    v = (n & -n).bit_length() - 1
    return v - (d.bit_length() - 1)


@dataclass(frozen=True, order=False)
class DyadicRational:
    """The number ``numerator * 2**exponent``, kept in canonical form.

    Canonical form has an odd numerator, or ``(0, 0)`` for zero. Construct
    through :meth:`of` or :meth:`from_value` to get canonicalization; the
    plain constructor rejects non-canonical pairs.
    """

    numerator: int
    exponent: int

    def __post_init__(self):
        n, e = self.numerator, self.exponent
        if n == 0 and e != 0 or n != 0 and n % 2 == 0:
            raise ValueError(f"non-canonical dyadic pair ({n}, {e}); use DyadicRational.of")

    @classmethod
    def of(cls, numerator: int, exponent: int = 0) -> "DyadicRational":
        numerator = int(numerator)
        if numerator == 0:
            return cls(0, 0)
        tz = (numerator & -numerator).bit_length() - 1
        return cls(numerator >> tz, exponent + tz)

    @classmethod
    def from_value(cls, x) -> "DyadicRational":
        if isinstance(x, DyadicRational):
            return x
        fr = as_fraction(x)
        if not _is_pow2(fr.denominator):
            raise ValueError(f"{fr} is not a dyadic rational")
        return cls.of(fr.numerator, -(fr.denominator.bit_length() - 1))

    def to_fraction(self) -> Fraction:
        return self.numerator * _pow2(self.exponent)

    def __float__(self) -> float:
        return float(self.to_fraction())

    def __repr__(self) -> str:
        return f"DyadicRational({self.to_fraction()})"

    def _coerce(self, other):
        try:
            return DyadicRational.from_value(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        e = min(self.exponent, other.exponent)
        return DyadicRational.of(
            (self.numerator << (self.exponent - e)) + (other.numerator << (other.exponent - e)), e
        )

    __radd__ = __add__

    def __neg__(self):
        return DyadicRational.of(-self.numerator, self.exponent)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return DyadicRational.of(self.numerator * other.numerator, self.exponent + other.exponent)

    __rmul__ = __mul__

    def __lt__(self, other):
        return self.to_fraction() < as_fraction(other)

    def __le__(self, other):
        return self.to_fraction() <= as_fraction(other)

    def __gt__(self, other):
        return self.to_fraction() > as_fraction(other)

    def __ge__(self, other):
        return self.to_fraction() >= as_fraction(other)


@dataclass(frozen=True)
class DyadicInterval:
    """Open interval ``(k * 2**m, (k + 1) * 2**m)``."""

    k: int
    m: int

    @property
    def lower(self) -> Fraction:
        return self.k * _pow2(self.m)

    @property
    def upper(self) -> Fraction:
        return (self.k + 1) * _pow2(self.m)

    @property
    def length(self) -> Fraction:
        return _pow2(self.m)

    def parent(self) -> "DyadicInterval":
        return DyadicInterval(self.k // 2, self.m + 1)

    def contains(self, other: "DyadicInterval") -> bool:
        return self.lower <= other.lower and other.upper <= self.upper

    def bounds(self) -> tuple[float, float]:
        return float(self.lower), float(self.upper)

    def __str__(self) -> str:
        return f"({self.lower}, {self.upper})"

    @classmethod
    def from_bounds(cls, lower, upper) -> "DyadicInterval":
        lo, hi = as_fraction(lower), as_fraction(upper)
        width = hi - lo
        n, d = width.numerator, width.denominator
        if width <= 0 or not (_is_pow2(n) and _is_pow2(d) and (n == 1 or d == 1)):
            raise ValueError(f"({lo}, {hi}) does not have power-of-two length")
        m = _floor_log2(width)
        k = lo / width
        if k.denominator != 1:
            raise ValueError(f"({lo}, {hi}) is not aligned to its length")
        return cls(int(k), m)


@dataclass(frozen=True)
class BinaryExpansion:
    """Leading binary digits ``x = sum_k digits[k-1] * 2**-k`` of some ``x`` in [0, 1].

    ``exact`` is true when the stored digits represent ``x`` exactly, i.e. the
    expansion terminates within the stored length.
    """

    digits: tuple[int, ...]
    exact: bool

    def one_positions(self) -> list[int]:
        return [i + 1 for i, d in enumerate(self.digits) if d]

    def zero_positions(self) -> list[int]:
        return [i + 1 for i, d in enumerate(self.digits) if not d]

    def value(self) -> Fraction:
        return sum((_pow2(-j) for j in self.one_positions()), Fraction(0))


def _digits(x: Fraction) -> Iterator[int]:
    # terminating convention: a dyadic x yields finitely many 1s, then stops
    while x:
        x *= 2
        if x >= 1:
            x -= 1
            yield 1
        else:
            yield 0


def binary_expansion(x, nbits: int = 128, endpoint: str = "upper") -> BinaryExpansion:
    """Binary digits of ``x`` in (0, 1).

    For a dyadic ``x`` the expansion with finitely many 1s is used when
    ``endpoint == "upper"`` and the one with finitely many 0s (trailing ones)
    when ``endpoint == "lower"``; the latter is never exact.
    """
    fr = as_fraction(x)
    if not 0 < fr < 1:
        raise ValueError(f"expansion requires 0 < x < 1, got {fr}")
    if endpoint not in ("upper", "lower"):
        raise ValueError("endpoint must be 'upper' or 'lower'")
    digits = []
    rem = fr
    while rem and len(digits) < nbits:
        rem *= 2
        d = int(rem >= 1)
        rem -= d
        digits.append(d)
    terminated = rem == 0
    if endpoint == "lower" and terminated:
        last = max(i for i, d in enumerate(digits) if d)
        digits = digits[:last] + [0] + [1] * (nbits - last - 1)
        return BinaryExpansion(tuple(digits), exact=False)
    return BinaryExpansion(tuple(digits), exact=terminated)


class DiscreteMixture:
    """Finite weighted list of components plus unassigned residual mass.

    Weights are positive and, together with ``residual``, sum to one (exactly
    when they are :class:`~fractions.Fraction`, within ``1e-12`` otherwise).
    Components must be hashable and pairwise distinct.
    """

    __slots__ = ("_components", "_residual")

    def __init__(self, components: Iterable[tuple[Any, Any]] = (), residual=None):
        comps = tuple((c, w) for c, w in components)
        seen = set()
        for c, w in comps:
            if c in seen:
                raise ValueError(f"duplicate component {c!r}")
            seen.add(c)
            if not w > 0:
                raise ValueError(f"component {c!r} has non-positive weight {w!r}")
        exact = all(isinstance(w, (Fraction, int)) for _, w in comps) and (
            residual is None or isinstance(residual, (Fraction, int))
        )
        if exact:
            total = sum((w for _, w in comps), Fraction(0))
            if residual is None:
                residual = 1 - total
            if residual < 0 or total + residual != 1:
                raise ValueError(f"weights sum to {total} with residual {residual}, not 1")
        else:
            total = math.fsum(float(w) for _, w in comps)
            if residual is None:
                residual = max(1.0 - total, 0.0)
            if residual < -WEIGHT_TOL or abs(total + float(residual) - 1.0) > WEIGHT_TOL:
                raise ValueError(f"weights sum to {total!r} with residual {float(residual)!r}, not 1")
        self._components = comps
        self._residual = residual

    @classmethod
    def point(cls, component) -> "DiscreteMixture":
        return cls([(component, Fraction(1))], Fraction(0))

    @property
    def components(self) -> tuple[tuple[Any, Any], ...]:
        return self._components

    @property
    def residual(self):
        return self._residual

    def descriptors(self) -> list:
        return [c for c, _ in self._components]

    def weights(self) -> list:
        return [w for _, w in self._components]

    def total_weight(self):
        return sum((w for _, w in self._components), 0)

    def as_dict(self) -> dict:
        return dict(self._components)

    def sorted(self) -> "DiscreteMixture":
        def key(item):
            c = item[0]
            if isinstance(c, DyadicInterval):
                return (c.lower, -c.m)
            return (getattr(c, "lower", 0), getattr(c, "upper", 0))

        return DiscreteMixture(sorted(self._components, key=key), self._residual)

    def __len__(self) -> int:
        return len(self._components)

    def __iter__(self):
        return iter(self._components)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMixture):
            return NotImplemented
        return self.as_dict() == other.as_dict() and self._residual == other._residual

    def __repr__(self) -> str:
        body = ", ".join(f"{c}: {w}" for c, w in self._components[:6])
        more = ", ..." if len(self) > 6 else ""
        return f"DiscreteMixture({{{body}{more}}}, residual={self._residual})"

    def to_json_obj(self) -> dict:
        comps = []
        for c, w in self._components:
            if isinstance(c, DyadicInterval):
                item = {"k": c.k, "m": c.m, "lower": str(c.lower), "upper": str(c.upper)}
            elif hasattr(c, "to_json_obj"):
                item = c.to_json_obj()
            else:
                item = {"component": repr(c)}
            item["weight"] = f"{float(w):.17g}"
            item["weight_rational"] = str(Fraction(w))
            comps.append(item)
        res = self._residual
        return {
            "components": comps,
            "residual": f"{float(res):.17g}",
            "residual_rational": str(Fraction(res)),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_obj(), **kwargs)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DiscreteMixture":
        comps = [
            (DyadicInterval(int(c["k"]), int(c["m"])), Fraction(c["weight_rational"]))
            for c in obj["components"]
        ]
        return cls(comps, Fraction(obj["residual_rational"]))


def _check_interval(a: Fraction, b: Fraction) -> None:
    if not a < b:
        raise ValueError(f"invalid interval: need a < b, got a={a}, b={b}")


def is_maximal_member(d: DyadicInterval, a, b) -> bool:
    """Whether ``d`` is a maximal dyadic subinterval of ``(a, b)``.

    That is, ``d`` lies inside ``(a, b)`` while its parent does not: for even
    ``k`` the right sibling sticks out beyond ``b``, for odd ``k`` the left
    sibling sticks out below ``a``. Comparisons are exact.
    """
    fa, fb = as_fraction(a), as_fraction(b)
    _check_interval(fa, fb)
    p, q = d.lower, d.upper
    if p < fa or q > fb:
        return False
    step = _pow2(d.m)
    if d.k % 2 == 0:
        return (d.k + 2) * step > fb
    return (d.k - 1) * step < fa


def _split_point(a: Fraction, b: Fraction) -> Fraction:
    """The dyadic point in (a, b) with the coarsest binary level."""
    if a < 0 < b:
        return Fraction(0)
    m = _floor_log2(b - a) - 1
    while True:
        step = _pow2(m + 1)
        k = math.floor(a / step) + 1
        if k * step < b:
            m += 1
        else:
            break
    step = _pow2(m)
    return (math.floor(a / step) + 1) * step


def _chain_right(c: Fraction, b: Fraction, stop: Fraction, out: list) -> Fraction:
    """Greedy maximal dyadic intervals filling (c, b) from the left; returns the gap left."""
    cur = c
    while cur < b:
        rem = b - cur
        if rem < stop:
            return rem
        j = _floor_log2(rem)
        v = _valuation2(cur)
        if v < j:
            j = int(v)
        step = _pow2(j)
        out.append(DyadicInterval(int(cur / step), j))
        cur += step
    return Fraction(0)


def _chain_left(a: Fraction, c: Fraction, stop: Fraction, out: list) -> Fraction:
    cur = c
    while cur > a:
        rem = cur - a
        if rem < stop:
            return rem
        j = _floor_log2(rem)
        v = _valuation2(cur)
        if v < j:
            j = int(v)
        step = _pow2(j)
        cur -= step
        out.append(DyadicInterval(int(cur / step), j))
    return Fraction(0)


def decompose(a, b, eps=0) -> DiscreteMixture:
    """Mixture weights of ``unif(a, b)`` over maximal dyadic subintervals.

    Each emitted interval ``(k 2^m, (k+1) 2^m)`` gets weight ``2^m / (b - a)``.
    The interval is split at its coarsest dyadic point ``c``; ``(c, b)`` is then
    filled by walking the 1-digits of ``b - c`` and ``(a, c)`` by walking those
    of ``c - a``, which is the digit walk along the expansions of ``b`` and
    ``a``. With ``eps > 0`` each walk stops once the mass it has not covered
    falls below ``eps / 2``, and that mass is returned as the residual; this is
    what makes non-dyadic endpoints terminate.

    Raises
    ------
    ValueError
        If ``a >= b``, or ``eps == 0`` with a non-dyadic endpoint.
    """
    fa, fb = as_fraction(a), as_fraction(b)
    _check_interval(fa, fb)
    feps = as_fraction(eps)
    if feps < 0:
        raise ValueError("eps must be nonnegative")
    if feps == 0 and not (is_dyadic(fa) and is_dyadic(fb)):
        raise ValueError("eps = 0 requires dyadic endpoints; the expansion would not terminate")
    width = fb - fa
    stop = feps / 2 * width
    out: list[DyadicInterval] = []
    try:
        whole = DyadicInterval.from_bounds(fa, fb)
    except ValueError:
        whole = None
    if whole is not None:
        return DiscreteMixture([(whole, Fraction(1))], Fraction(0))
    c = _split_point(fa, fb)
    gap_left = _chain_left(fa, c, stop, out)
    out.reverse()
    gap_right = _chain_right(c, fb, stop, out)
    comps = [(d, d.length / width) for d in out]
    return DiscreteMixture(comps, (gap_left + gap_right) / width)


def one_sided_decompose(theta, eps=0) -> DiscreteMixture:
    """Decomposition of ``unif(0, theta)`` along the binary expansion of ``theta``.

    With ``theta = sum_k 2**-j_k`` and partial sums ``a_k``, the components are
    ``(a_{k-1}, a_k)`` with weights ``2**-j_k / theta``.
    """
    th = as_fraction(theta)
    if not 0 < th < 1:
        raise ValueError(f"theta must lie in (0, 1), got {th}")
    feps = as_fraction(eps)
    if feps < 0:
        raise ValueError("eps must be nonnegative")
    if feps == 0 and not is_dyadic(th):
        raise ValueError("eps = 0 requires a dyadic theta")
    stop = feps / 2 * th
    comps = []
    lo = Fraction(0)
    for j, digit in enumerate(_digits(th), start=1):
        if th - lo < stop:
            break
        if digit:
            step = _pow2(-j)
            comps.append((DyadicInterval(int(lo / step), -j), step / th))
            lo += step
    return DiscreteMixture(comps, (th - lo) / th)


def affine_map(d: DyadicInterval, j: int, r) -> DyadicInterval:
    """Image of ``d`` under ``x -> 2**j * x + r``.

    The image is again a dyadic interval only when ``r`` is a multiple of the
    image length ``2**(m + j)``; otherwise ``ValueError`` is raised.
    """
    shift = as_fraction(r)
    if not _is_pow2(shift.denominator):
        raise ValueError(f"shift {shift} is not a dyadic rational")
    m = d.m + j
    k = (d.k * _pow2(m) + shift) / _pow2(m)
    if k.denominator != 1:
        raise ValueError(f"shift {shift} is not a multiple of 2**{m}; image of {d} is not dyadic")
    return DyadicInterval(int(k), m)


def dyadic_step_approximation(
    f: Callable, M: int, depth: int, samples_per_cell: int = 17
) -> DiscreteMixture:
    """Lower step function of a density ``f`` on ``[M, M + 1]`` as a subprobability.

    Each of the ``2**depth`` dyadic cells gets mass ``inf_cell(f) * 2**-depth``;
    the infimum is approximated by the minimum over ``samples_per_cell``
    equispaced points including both cell endpoints. Cells with zero mass are
    omitted and the unassigned mass is reported as the residual.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if samples_per_cell < 2:
        raise ValueError("samples_per_cell must include both endpoints")
    ncell = 1 << depth
    h = 1.0 / ncell
    t = np.linspace(0.0, 1.0, samples_per_cell)
    x = M + h * (np.arange(ncell)[:, None] + t[None, :])
    vals = np.asarray(f(x), dtype=float)
    if vals.shape != x.shape:
        vals = np.vectorize(f, otypes=[float])(x)
    if np.any(vals < 0) or np.any(np.isnan(vals)):
        raise ValueError("density callback returned a negative or NaN value")
    inf = vals.min(axis=1)
    mass = inf * h
    comps = [(DyadicInterval(M * ncell + i, -depth), float(w)) for i, w in enumerate(mass) if w > 0]
    total = float(mass.sum())
    if total > 1 + WEIGHT_TOL:
        raise ValueError(f"step masses sum to {total} > 1; f is not a probability density")
    return DiscreteMixture(comps, max(1.0 - math.fsum(w for _, w in comps), 0.0))


def intervals_disjoint(intervals: Sequence[DyadicInterval]) -> bool:
    ordered = sorted(intervals, key=lambda d: d.lower)
    return all(x.upper <= y.lower for x, y in zip(ordered, ordered[1:]))
