"""
Fisher information lost by observing ``chi2_1(2 theta)`` instead of ``Po(theta)``.

Observing ``K ~ Po(theta)`` carries information ``i_E(theta) = 1 / theta``.
Observing the mixture ``X ~ chi2_1(2 theta)`` carries

    i_F(theta) = (1 / (2 theta)) int x tanh^2(sqrt(2 theta x)) g(x) dx - 1,

with ``g`` the ``chi2_1(2 theta)`` density. The normalized information
``r(theta) = theta i_F(theta)`` equals ``(1 - s(theta)) / 2`` where

    s(theta) = int x sech^2(sqrt(2 theta x)) g(x) dx,

and satisfies ``1 / (2 + 1 / (2 theta)) < r(theta) < 1/2``.

Both integrals are computed after the substitution ``x = u^2``, which turns
the ``x^(-1/2)`` singularity of ``g`` into an analytic integrand, on
``[0, max(200, 40 (1 + theta))]``. The tail beyond that point is negligible by
the envelope ``g(x) <= (2 pi x)^(-1/2) exp(-(sqrt(x/2) - sqrt(theta))^2)``.

``s`` is integrated to a relative tolerance. For large ``theta``, ``s`` is far
below the double-precision resolution of ``r`` near ``1/2`` (at ``theta = 50``,
``s`` is about ``1e-22``), so the strict checks ``r < 1/2`` and "r strictly
increasing" are carried out on ``s``: ``1/2 - r = s / 2`` and ``s`` strictly
decreasing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .quadrature import DEFAULT_BUDGET, QuadratureResult, integrate

__all__ = [
    "FisherRow",
    "truncation_point",
    "fisher_E",
    "fisher_F",
    "r",
    "s",
    "r_quadrature",
    "s_quadrature",
    "lower_bound",
    "fisher_curve",
    "check_curve",
    "curve_to_csv",
]

DEFAULT_TOL = 1e-10
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _check_theta(theta: float) -> None:
    if not theta > 0 or not math.isfinite(theta):
        raise ValueError(f"theta must be positive and finite, got {theta!r}")


def truncation_point(theta: float) -> float:
    return max(200.0, 40.0 * (1.0 + theta))


def _gauss_pair(u, c):
    # exp(-theta - u^2/2) cosh(c u) with c = sqrt(2 theta)
    return 0.5 * (np.exp(-0.5 * (u - c) ** 2) + np.exp(-0.5 * (u + c) ** 2))


def r_quadrature(theta: float, tol: float = DEFAULT_TOL, max_evals: int = DEFAULT_BUDGET) -> QuadratureResult:
    """``(1/2) int x tanh^2(sqrt(2 theta x)) g(x) dx``, so that ``r = value - theta``."""
    _check_theta(theta)
    c = math.sqrt(2.0 * theta)

    def integrand(u):
        # x tanh^2 g(x) dx with x = u^2, dx = 2u du and g(u^2) = pair / (sqrt(2 pi) u)
        return u * u * np.tanh(c * u) ** 2 * _gauss_pair(u, c) * INV_SQRT_2PI

    return integrate(integrand, 0.0, math.sqrt(truncation_point(theta)), tol=tol, max_evals=max_evals)


def s_quadrature(theta: float, tol: float = DEFAULT_TOL, max_evals: int = DEFAULT_BUDGET) -> QuadratureResult:
    """``s(theta) = int x^(1/2) (2 pi)^(-1/2) exp(-theta - x/2) sech(sqrt(2 theta x)) dx`` to relative ``tol``."""
    _check_theta(theta)
    c = math.sqrt(2.0 * theta)

    def integrand(u):
        # exp(-theta - u^2/2) sech(c u) = exp(-(u + c)^2 / 2) * 2 / (1 + exp(-2 c u))
        return 2.0 * u * u * INV_SQRT_2PI * 2.0 * np.exp(-0.5 * (u + c) ** 2) / (1.0 + np.exp(-2.0 * c * u))

    return integrate(
        integrand, 0.0, math.sqrt(truncation_point(theta)), tol=1e-300, rel_tol=tol, max_evals=max_evals
    )


def fisher_E(theta: float) -> float:
    """Fisher information of ``Po(theta)``."""
    _check_theta(theta)
    return 1.0 / theta


def r(theta: float, tol: float = DEFAULT_TOL) -> float:
    """``theta * i_F(theta)`` from the tanh integral."""
    return r_quadrature(theta, tol).value - theta


def fisher_F(theta: float, tol: float = DEFAULT_TOL) -> float:
    """Fisher information of ``chi2_1(2 theta)`` about ``theta``."""
    return r(theta, tol) / theta


def s(theta: float, tol: float = DEFAULT_TOL) -> float:
    return s_quadrature(theta, tol).value


def lower_bound(theta: float) -> float:
    _check_theta(theta)
    return 1.0 / (2.0 + 1.0 / (2.0 * theta))


@dataclass(frozen=True)
class FisherRow:
    """One curve point; ``r`` comes from the tanh integral and ``s`` from its own integral."""

    theta: float
    r: float
    lower: float
    upper: float
    s: float

    @property
    def r_from_s(self) -> float:
        return 0.5 * (1.0 - self.s)

    @property
    def gap(self) -> float:
        """``1/2 - r``, equal to ``s / 2`` and resolved to relative precision."""
        return 0.5 * self.s

    def within_bounds(self) -> bool:
        return self.lower < self.r and self.gap > 0


def fisher_curve(theta_grid: Iterable[float], tol: float = DEFAULT_TOL) -> list[FisherRow]:
    """Rows ``(theta, r, lower_bound, 1/2)`` with ``s`` alongside for the strict checks."""
    rows = []
    for th in theta_grid:
        th = float(th)
        rows.append(FisherRow(th, r(th, tol), lower_bound(th), 0.5, s(th, tol)))
    return rows


def check_curve(rows: Sequence[FisherRow], agreement: float | None = None) -> list[str]:
    """Property violations on a curve sorted by theta: bounds, monotonicity and two-formula agreement."""
    problems = []
    for row in rows:
        if not row.within_bounds():
            problems.append(f"theta={row.theta:g}: r={row.r!r} outside ({row.lower!r}, 1/2)")
        if agreement is not None and abs(row.r - row.r_from_s) > agreement:
            problems.append(f"theta={row.theta:g}: r and (1-s)/2 differ by {abs(row.r - row.r_from_s):.3g}")
    for a, b in zip(rows, rows[1:]):
        if not b.theta > a.theta:
            problems.append(f"grid not increasing at theta={b.theta:g}")
        elif not b.s < a.s:
            # r = (1 - s) / 2, so r strictly increases exactly when s strictly decreases
            problems.append(f"r not increasing between theta={a.theta:g} and theta={b.theta:g}")
    return problems


def curve_to_csv(rows: Sequence[FisherRow]) -> str:
    """CSV with header ``theta,r,lower,upper``.

    The ``r`` column is ``(1 - s) / 2``, which avoids the cancellation in
    ``tanh integral - theta`` and so is the better-rounded of the two values.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "r", "lower", "upper"])
    for row in rows:
        w.writerow([repr(row.theta), repr(row.r_from_s), repr(row.lower), repr(row.upper)])
    return buf.getvalue()
