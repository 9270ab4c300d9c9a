import json
import math

import numpy as np
import pytest

from vswap.errors import DomainError, FormatError, ParameterError
from vswap.payoff import Payoff, QuadraticPiece, avoid_knots, shift_gauge, table_csv, to_price_space


def test_linear_derivative():
    assert Payoff(linear=-2.0).eval(1.5, 1) == -2.0


def test_quadratic_second_derivative_inside():
    p = Payoff(pieces=(QuadraticPiece(0.0, 0.1, -10.4, -10.2),))
    assert p.eval(-10.3, 2) == pytest.approx(0.2)


def test_second_derivative_left_limit_at_knots():
    p = Payoff(pieces=(QuadraticPiece(0.0, 0.1, -10.4, -10.2),))
    assert p.eval(-10.4, 2) == 0.0
    assert p.eval(-10.2, 2) == pytest.approx(0.2)


def test_exponential_at_zero():
    assert Payoff.exponential(1.0, 0.23)(0.0) == 1.0


def test_c1_continuity_at_knots():
    p = Payoff(pieces=(QuadraticPiece(0.3, -0.2, 1.0, 2.0),))
    for k in (1.0, 2.0):
        for order in (0, 1):
            gaps = [abs(p.eval(k - e, order) - p.eval(k + e, order)) for e in (1e-3, 1e-4)]
            assert gaps[1] <= gaps[0] / 5 + 1e-15


def test_derivatives_match_finite_differences():
    p = Payoff(constant=1.0, linear=-2.0, exps=((0.3, 0.7), (-0.1, -1.2)), pieces=(QuadraticPiece(0.1, 0.2, -1.0, 1.0),))
    x = np.array([-2.3, -0.4, 0.5, 2.1])
    h = 1e-5
    np.testing.assert_allclose(p.eval(x, 1), (p(x + h) - p(x - h)) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(p.eval(x, 2), (p.eval(x + h, 1) - p.eval(x - h, 1)) / (2 * h), atol=1e-8)


def test_algebra():
    a = Payoff(linear=1.0, exps=((2.0, 0.5),))
    b = Payoff(constant=3.0, pieces=(QuadraticPiece(1.0, 1.0, 0.0, 1.0),))
    x = np.linspace(-1, 2, 7)
    np.testing.assert_allclose((2 * a - b)(x), 2 * a(x) - b(x))


def test_large_series_no_overflow():
    p = Payoff(exps=((1e-300, 100.0),))
    assert np.isfinite(p(5.0))
    assert p(5.0) == pytest.approx(1e-300 * math.exp(500.0))


def test_shift_gauge_identity_and_constant():
    p = Payoff(linear=-2.0)
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(shift_gauge(p, 0, 0)(x), p(x))
    np.testing.assert_allclose(shift_gauge(p, 1, 0)(x), 1 - 2 * x)


def test_price_space_examples():
    h = to_price_space(Payoff(linear=-2.0), 10.0)
    assert h(10.0) == 0.0
    assert h(20.0) == pytest.approx(-2 * math.log(2.0), abs=1e-15)
    with pytest.raises(DomainError):
        h(0.0)
    with pytest.raises(DomainError):
        to_price_space(Payoff(), -1.0)


def test_price_space_derivatives():
    G = Payoff(linear=-1.3, exps=((0.2, 0.4),))
    h = to_price_space(G, 10.0, 0.05)
    F = np.array([3.0, 10.0, 25.0])
    eps = 1e-5
    np.testing.assert_allclose(h.d1(F), (h(F + eps) - h(F - eps)) / (2 * eps), rtol=1e-8)
    np.testing.assert_allclose(h.d2(F), (h.d1(F + eps) - h.d1(F - eps)) / (2 * eps), rtol=1e-6)


def test_json_roundtrip():
    p = Payoff(1.0, -2.0, ((0.5, 0.3),), (QuadraticPiece(0.1, 0.2, -1.0, 1.0),))
    assert Payoff.from_json(p.to_json()) == p


def test_bad_json():
    with pytest.raises(FormatError):
        Payoff.from_json("{not json")
    with pytest.raises(FormatError):
        Payoff.from_json(json.dumps({"exps": [[1.0]]}))


def test_bad_order_and_knots():
    with pytest.raises(ParameterError):
        Payoff().eval(0.0, 3)
    with pytest.raises(ParameterError):
        QuadraticPiece(0.0, 1.0, 2.0, 1.0)


def test_avoid_knots_and_table():
    p = Payoff(pieces=(QuadraticPiece(0.0, 1.0, 0.0, 1.0),))
    x = avoid_knots(p, np.array([-1.0, 0.0, 0.5, 1.0]))
    assert 0.0 not in x and 1.0 not in x
    lines = table_csv(p, [0.5]).splitlines()
    assert lines[0] == "x,G,G1,G2" and lines[1].startswith("0.5,0.25,1.0,2.0")
