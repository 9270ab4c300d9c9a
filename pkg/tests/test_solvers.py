import math

import numpy as np
import pytest

from vswap.errors import ConvergenceError, ModelValidationError, ParameterError, RangeError, ResonanceError
from vswap.kernel import EMPTY, kernel_moment
from vswap.model import ConstVol, ExpVol, apply_generator, mixture_model, qv_rate
from vswap.payoff import Payoff
from vswap.solvers import (
    check_mixture_condition,
    eigen_chi,
    eigen_phi,
    fraclin_beta_bound,
    fraclin_bounds,
    fraclin_model,
    fraclin_solve,
    generator_residual,
    kernel_ratio,
    mixture_coefficients,
    slope_match_constant,
    solve_mixture,
    solve_proportional,
)

from conftest import atoms

# independent arithmetic (plain math module), see notes in the ledger
Q_PROP_EXAMPLE = (0.04 + 0.5 * 0.09) / (0.02 + 0.5 * (math.exp(0.3) - 1.3))
GAMMA0_EXAMPLE = -10.560340122127176
C_MINUS_11 = 0.05630585492871755


# -- proportional -------------------------------------------------------------


def test_no_jumps_gives_two():
    Q, G = solve_proportional(0.3)
    assert Q == 2.0 and G == Payoff(linear=-2.0)


def test_pure_jumps_gives_e():
    Q, _ = solve_proportional(0.0, atoms((-1.0, 1.0)))
    assert Q == pytest.approx(math.e, rel=1e-14)


def test_proportional_example_value():
    Q, _ = solve_proportional(0.2, atoms((0.3, 0.5)))
    assert Q == pytest.approx(Q_PROP_EXAMPLE, rel=1e-14)
    assert Q == pytest.approx(1.8922, abs=5e-4)


def test_proportional_degenerate():
    with pytest.raises(ModelValidationError):
        solve_proportional(0.0)


def test_proportional_residual_on_gamma_model(models):
    m = models["proportional_gamma"]
    Q, G = solve_proportional(0.25, atoms((-0.5, 0.4), (0.2, 0.3)))
    r = generator_residual(m, G, m.grid())
    assert np.max(np.abs(r)) <= 1e-12 * np.max(qv_rate(m, m.grid()))


# -- fractional-linear --------------------------------------------------------


def test_fraclin_bounds_example():
    g0, g3 = fraclin_bounds(0.0, 0.1, -0.5)
    assert g3 == pytest.approx(-10.0, abs=1e-12)
    assert g0 == pytest.approx(GAMMA0_EXAMPLE, abs=1e-12)
    assert g0 == pytest.approx(-10.563, abs=5e-3)


def test_fraclin_gap_closes_at_beta_bound():
    b = fraclin_beta_bound(-0.5)
    gaps = [np.subtract(*fraclin_bounds(0.0, b * (1 - e), -0.5))[()] for e in (1e-2, 1e-4, 1e-6)]
    gaps = [abs(g) for g in gaps]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-4


def test_fraclin_beta_too_large():
    with pytest.raises(ParameterError, match="0.147"):
        fraclin_bounds(0.0, 0.2, -0.5)


def test_fraclin_intensity_example():
    G, c = fraclin_solve(0.0, 0.1, -0.5, -10.4, -10.2, ConstVol(0.2))
    assert c(-11.0) == pytest.approx(C_MINUS_11, rel=1e-12)
    assert c(-11.0) == pytest.approx(0.0561, rel=1e-2)


def test_fraclin_denominator_bound_left_of_knots():
    a, b, z0, g1, g2 = 0.0, 0.1, -0.5, -10.4, -10.2
    G, _ = fraclin_solve(a, b, z0, g1, g2, ConstVol(0.2))
    x = np.linspace(g1 - 5, g1, 400, endpoint=False)
    den = G(x) - G(x + z0) + math.expm1(z0) * G.eval(x, 1) + z0 * z0
    assert np.min(den) >= b * z0 * z0 - 1e-12


def test_fraclin_intensity_constant_outside_knots():
    a, b, z0, g1, g2 = 0.0, 0.1, -0.5, -10.4, -10.2
    vol = ExpVol(0.2, 0.05)
    G, c = fraclin_solve(a, b, z0, g1, g2, vol)
    left = np.linspace(g1 - 3, g1, 20)
    right = np.linspace(g2 - z0, g2 - z0 + 3, 20)
    for x in (left, right):
        r = c(x) / vol(x) ** 2
        np.testing.assert_allclose(r, r[0], rtol=1e-12)
        assert r[0] > 0


def test_fraclin_knot_order():
    with pytest.raises(ParameterError):
        fraclin_solve(0.0, 0.1, -0.5, -10.2, -10.4, ConstVol(0.2))
    with pytest.raises(ParameterError):
        fraclin_solve(0.0, 0.1, -0.5, -11.0, -10.2, ConstVol(0.2))


@pytest.mark.parametrize(
    "params",
    [(0.0, 0.1, -0.5, -10.4, -10.2), (-2.33, 0.05, -0.5, 1.5, 3.0), (1.0, 0.3, -1.5, -5.2, -5.1)],
)
def test_fraclin_residual(params):
    m, G = fraclin_model(*params, vol=ExpVol(0.2, 0.03))
    x = m.grid()
    r = generator_residual(m, G, x)
    assert np.max(np.abs(r)) <= 1e-8 * np.max(qv_rate(m, x))


# -- eigenvalues --------------------------------------------------------------


def test_eigen_examples():
    nu = atoms((1.0, 1.0))
    assert eigen_phi(1.0, 0.7, nu) == pytest.approx(0.0, abs=1e-15)
    assert eigen_phi(0.0, 0.7, nu) == 0.0
    assert eigen_phi(2.0, 1.0) == 2.0
    lam = np.array([0.23, 1.7, 3.1])
    np.testing.assert_allclose(eigen_phi(lam, 0.0, nu), np.exp(lam) - 1 + (1 - math.e) * lam, rtol=1e-14)
    assert eigen_chi(2.0, 1.0) == 2.0


def test_eigen_complex():
    v = eigen_phi(1j, 1.0, atoms((-1.0, 1.0)))
    expected = (1j) ** 2 - 1j + np.exp(-1j) - 1 + (1 - math.exp(-1)) * 1j
    assert v == pytest.approx(expected)


def test_eigen_overflow():
    with pytest.raises(RangeError, match="lambda=800"):
        eigen_phi(800.0, 1.0, atoms((1.0, 1.0)))


# -- mixture ------------------------------------------------------------------


def test_mixture_q0_q1_figure3():
    co = mixture_coefficients(1.0, 0.0, 0.39, 1.25, EMPTY, atoms((-1.5, 1.0)))
    assert co.Q0 == 2.0
    assert co.Q1 == pytest.approx(2.25 - 2 * (math.exp(-1.5) - 1 + 1.5), rel=1e-14)
    assert co.Q1 == pytest.approx(0.80374, abs=1e-5)


def test_mixture_q0_figure1_matches_kernel_ratio():
    nu0 = atoms((1.0, 1.0))
    co = mixture_coefficients(0.0, 1.0, 0.23, 0.22, nu0, EMPTY)
    assert co.Q0 == pytest.approx(kernel_moment(nu0, lambda z: z * z) / kernel_moment(nu0, lambda z: np.expm1(z) - z))
    assert co.Q0 == pytest.approx(1.0 / (math.e - 2.0), rel=1e-14)
    assert kernel_ratio(nu0) == pytest.approx(co.Q0)


def test_mixture_resonance():
    with pytest.raises(ResonanceError, match="k=1"):
        mixture_coefficients(1.0, 0.0, 1.0, 1.0, EMPTY, atoms((-1.0, 1.0)))
    # c = 0 is the constant-intensity case: excluded by phi_0 = 0
    with pytest.raises(ResonanceError):
        mixture_coefficients(1.0, 0.5, 0.0, 1.0)


def test_condition_examples():
    assert check_mixture_condition(0.0, 1.0, 0.23, atoms((1.0, 1.0)), EMPTY, n_max=2000).passed
    assert not check_mixture_condition(1.0, 0.0, 0.3, EMPTY, atoms((1.75, 1.0)), n_max=2000).passed
    rep = check_mixture_condition(1.0, 0.5, 0.3, n_max=2000)
    assert not rep.passed and rep.last == pytest.approx(0.5, rel=1e-2)
    assert check_mixture_condition(1.0, 0.0, 0.3, n_max=2000).passed


def test_condition_closed_form_ratio():
    c = 0.23
    rep = check_mixture_condition(0.0, 1.0, c, atoms((1.0, 1.0)), EMPTY, n_max=40)
    n = rep.n
    expected = (n * c) ** 2 - n * c
    expected = np.abs(expected / (np.exp((n + 1) * c) - 1 + (1 - math.e) * (n + 1) * c))
    np.testing.assert_allclose(rep.r, expected, rtol=1e-12)


def test_solve_mixture_delta_zero():
    co = mixture_coefficients(1.0, 0.0, 0.39, 0.0, EMPTY, atoms((-1.5, 1.0)))
    G, N = solve_mixture(co)
    assert N == 0 and G == Payoff(linear=-2.0)


def test_solve_mixture_figure3_residual():
    nu1 = atoms((-1.5, 1.0))
    co = mixture_coefficients(1.0, 0.0, 0.39, 1.25, EMPTY, nu1)
    G, N = solve_mixture(co)
    m = mixture_model(1.0, 0.0, 1.25, 0.39, EMPTY, nu1, domain=(math.log(2), math.log(30)))
    x = m.grid()
    q = qv_rate(m, x)
    assert np.max(np.abs(apply_generator(m, G, x) - q) / q) <= 1e-6


def test_solve_mixture_convergence_error():
    co = mixture_coefficients(1.0, 0.0, 0.39, 1.25, EMPTY, atoms((-1.5, 1.0)))
    with pytest.raises(ConvergenceError, match="after 3 terms"):
        solve_mixture(co, tail_tol=1e-12, n_max=3)


def test_truncated_residual_shrinks_with_tolerance():
    nu1 = atoms((-1.5, 1.0))
    co = mixture_coefficients(1.0, 0.0, 0.39, 1.25, EMPTY, nu1)
    m = mixture_model(1.0, 0.0, 1.25, 0.39, EMPTY, nu1, domain=(math.log(2), math.log(30)))
    x = m.grid(51)
    errs = []
    for tol in (1e-3, 1e-6, 1e-9):
        G, _ = solve_mixture(co, tail_tol=tol)
        errs.append(np.max(np.abs(generator_residual(m, G, x))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] <= 10 * 1e-6


def test_slope_match_gives_minus_q0_over_f0():
    co = mixture_coefficients(1.0, 0.0, 0.39, 1.25, EMPTY, atoms((-1.5, 1.0)))
    G, _ = solve_mixture(co)
    A = slope_match_constant(G, co.Q0, 10.0)
    from vswap.payoff import to_price_space

    h = to_price_space(G, 10.0, A)
    assert h.d1(10.0) == pytest.approx(-0.2, abs=1e-12)


def test_constant_intensity_routes_to_proportional():
    # c = 0 mixture equals a proportional model; its payoff is linear
    nu = atoms((-0.7, 0.8))
    m = mixture_model(1.0, 0.5, 1.0, 0.0, nu, nu.scaled(0.5), sigma0_sq=0.1)
    sigma = math.sqrt(0.1 * (1.0 + 0.5))
    Q, G = solve_proportional(sigma, nu.scaled(0.05 + 0.025))
    x = m.grid(41)
    np.testing.assert_allclose(apply_generator(m, G, x), qv_rate(m, x), rtol=1e-12)
