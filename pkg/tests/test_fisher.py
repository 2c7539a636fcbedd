import math

import mpmath
import numpy as np
import pytest

from dmixrep import fisher

# i_F(1) from mpmath quadrature at 30 digits of the tanh integral (see test_fisher_F_mpmath)
FISHER_F_1 = 0.4479585096239673


def mp_fisher_F(theta: float) -> float:
    mpmath.mp.dps = 30
    th = mpmath.mpf(theta)
    c = mpmath.sqrt(2 * th)

    def integrand(u):
        # x tanh^2(sqrt(2 theta x)) g(x) dx with x = u^2
        g = mpmath.exp(-th - u * u / 2) * mpmath.cosh(c * u) / mpmath.sqrt(2 * mpmath.pi)
        return 2 * u * u * mpmath.tanh(c * u) ** 2 * g

    val = mpmath.quad(integrand, [0, 2, 6, 12, 40])
    return float(val / (2 * th) - 1)


def test_fisher_F_mpmath():
    assert mp_fisher_F(1.0) == pytest.approx(FISHER_F_1, abs=1e-14)
    assert fisher.fisher_F(1.0) == pytest.approx(FISHER_F_1, abs=1e-8)
    assert fisher.r(1.0, tol=1e-11) == pytest.approx(0.5 * (1 - fisher.s(1.0, tol=1e-11)), abs=1e-9)


@pytest.mark.parametrize("theta", [0.1, 1.0, 10.0])
def test_bounds(theta):
    r = theta * fisher.fisher_F(theta)
    assert fisher.lower_bound(theta) < r < 0.5
    assert 0.5 * (1 - fisher.s(theta)) == pytest.approx(r, abs=1e-9)


def test_half_of_poisson_information():
    assert fisher.fisher_F(0.5) <= 0.5 * fisher.fisher_E(0.5)


def test_s_tail_bound():
    assert fisher.s(5.0) <= 4 * math.exp(-5.0)
    assert 4 * math.exp(-5.0) == pytest.approx(0.02695, abs=1e-5)


def test_monotone_and_limits():
    vals = [fisher.r(t) for t in (0.01, 0.1, 1.0, 10.0)]
    assert vals == sorted(vals) and len(set(vals)) == 4
    assert 0.48780 < fisher.r(10.0) < 0.5
    assert fisher.r(1e-3) < 0.01
    assert fisher.r(50.0) > 0.49


def test_curve_rows_and_checks():
    grid = np.geomspace(0.1, 10, 12)
    rows = fisher.fisher_curve(grid)
    assert len(rows) == grid.size
    assert fisher.check_curve(rows, agreement=1e-9) == []
    # doubled resolution still interleaves monotonically
    fine = fisher.fisher_curve(np.geomspace(0.1, 10, 23))
    assert fisher.check_curve(fine) == []
    merged = sorted(rows + fine, key=lambda r: r.theta)
    dedup = [r for i, r in enumerate(merged) if i == 0 or r.theta > merged[i - 1].theta * (1 + 1e-12)]
    assert fisher.check_curve(dedup) == []


def test_check_curve_flags_violations():
    good = fisher.fisher_curve([0.5, 1.0])
    bad = [good[1], good[0]]
    assert fisher.check_curve(bad)
    broken = fisher.FisherRow(1.0, 0.1, fisher.lower_bound(1.0), 0.5, 0.8)
    assert any("outside" in p for p in fisher.check_curve([broken]))


def test_csv_header_and_shape():
    text = fisher.curve_to_csv(fisher.fisher_curve([0.5, 2.0]))
    lines = text.strip().splitlines()
    assert lines[0] == "theta,r,lower,upper"
    assert len(lines) == 3 and lines[1].endswith(",0.5")


def test_truncation_point_envelope():
    # the tail envelope (2 pi x)^(-1/2) exp(-(sqrt(x/2) - sqrt(theta))^2) is negligible at the cap
    for theta in (0.01, 1.0, 50.0):
        x = fisher.truncation_point(theta)
        env = math.exp(-((math.sqrt(x / 2) - math.sqrt(theta)) ** 2)) / math.sqrt(2 * math.pi * x)
        assert x * env < 1e-16


def test_invalid_theta():
    with pytest.raises(ValueError):
        fisher.r(0.0)
    with pytest.raises(ValueError):
        fisher.fisher_E(-1.0)
