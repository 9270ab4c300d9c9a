import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vswap.kernel import EMPTY
from vswap.mc import ClockSpec, SimConfig, simulate_paths
from vswap.model import ConstVol, apply_generator, qv_rate
from vswap.payoff import Payoff, shift_gauge
from vswap.replication import black_scholes_smile, vs_strike_from_smile
from vswap.solvers import fraclin_bounds, fraclin_beta_bound, fraclin_model, mixture_coefficients, sub_generators

from conftest import X0, atoms, registry_models

MODELS = registry_models()
NAMES = sorted(MODELS)
coef = st.floats(-3.0, 3.0, allow_nan=False)


def grid(m):
    return m.grid(41)


@pytest.mark.parametrize("name", NAMES)
def test_martingale_null_directions(name):
    m = MODELS[name]
    x = grid(m)
    scale = qv_rate(m, x) + np.exp(x)
    assert np.all(np.abs(apply_generator(m, Payoff(constant=1.0), x)) <= 1e-12 * scale)
    assert np.all(np.abs(apply_generator(m, Payoff(exps=((1.0, 1.0),)), x)) <= 1e-10 * scale)


@settings(max_examples=30)
@given(name=st.sampled_from(NAMES), c0=coef, c1=coef)
def test_generator_gauge_invariance(name, c0, c1):
    m = MODELS[name]
    x = grid(m)
    G = Payoff(linear=-2.0, exps=((0.3, 0.5),))
    a = apply_generator(m, G, x)
    b = apply_generator(m, shift_gauge(G, c0, c1), x)
    scale = qv_rate(m, x) + np.exp(x)
    assert np.all(np.abs(a - b) <= 1e-10 * scale * (1 + abs(c1)))


@settings(max_examples=30)
@given(name=st.sampled_from(NAMES), a=coef, b=coef, r=st.floats(-1.0, 1.5))
def test_generator_linearity(name, a, b, r):
    m = MODELS[name]
    x = grid(m)
    g1, g2 = Payoff(linear=1.0), Payoff(exps=((1.0, r),))
    lhs = apply_generator(m, g1 * a + g2 * b, x)
    rhs = a * apply_generator(m, g1, x) + b * apply_generator(m, g2, x)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (abs(a) + abs(b)) * np.max(np.abs(rhs) + 1))


SMILE = black_scholes_smile(100.0, 0.25, 0.5)


@settings(max_examples=20)
@given(c0=coef, c1=coef)
def test_replication_gauge_invariance(c0, c1):
    G = Payoff(linear=-2.0)
    base = vs_strike_from_smile(G, SMILE)
    assert vs_strike_from_smile(shift_gauge(G, c0, c1), SMILE) == pytest.approx(base, abs=1e-10)


@settings(max_examples=5)
@given(seed=st.integers(0, 2**63), workers=st.integers(2, 4), rho=st.floats(-0.9, 0.9))
def test_seed_determinism(seed, workers, rho):
    cfg = SimConfig(paths=10000, steps=5, seed=seed)
    m = MODELS["proportional_gamma"]
    clock = ClockSpec.activity(rho=rho)
    a = simulate_paths(m, clock, X0, cfg, workers=1)
    b = simulate_paths(m, clock, X0, cfg, workers=workers)
    for col in ("X_T", "QV", "tau_T", "jumps"):
        np.testing.assert_array_equal(getattr(a, col), getattr(b, col))


NESTED_CASES = [
    (0.0, 1.0, 0.23, atoms((1.0, 1.0)), EMPTY),
    (0.0, 1.0, -0.21, atoms((-1.0, 1.0)), EMPTY),
    (1.0, 0.0, 0.39, EMPTY, atoms((-1.5, 1.0))),
    (1.0, 0.4, 0.3, atoms((-0.5, 0.6)), atoms((-1.0, 0.8), (0.4, 0.2))),
]


@pytest.mark.parametrize("case", range(len(NESTED_CASES)))
def test_nested_oide(case):
    alpha, beta, c, nu0, nu1 = NESTED_CASES[case]
    co = mixture_coefficients(alpha, beta, c, 1.0, nu0, nu1, N=3)
    A0, A1 = sub_generators(alpha, beta, nu0, nu1)
    x = np.linspace(-1.0, 1.0, 21)
    ec = np.exp(c * x)
    Gs = [Payoff(linear=-co.Q0)] + [Payoff(exps=((co.Q1 * co.a_n[n - 1], n * c),)) for n in (1, 2, 3)]
    for n in (1, 2, 3):
        lhs = apply_generator(A0, Gs[n], x) + ec * apply_generator(A1, Gs[n - 1], x)
        # order-one terms also carry the state-dependent part of the QV rate
        rhs = ec * qv_rate(A1, x) if n == 1 else 0.0
        assert np.max(np.abs(lhs - rhs)) <= 1e-10


@st.composite
def fraclin_draw(draw):
    z0 = draw(st.floats(-2.0, -0.1))
    beta = fraclin_beta_bound(z0) * draw(st.floats(0.05, 0.95))
    alpha = draw(st.floats(-3.0, 3.0))
    g0, g3 = fraclin_bounds(alpha, beta, z0)
    g1 = g0 + (g3 - g0) * draw(st.floats(0.05, 0.9))
    g2 = g1 + (g3 - g1) * draw(st.floats(0.05, 0.95))
    return alpha, beta, z0, g1, g2


@settings(max_examples=20)
@given(params=fraclin_draw(), sigma=st.floats(0.05, 0.5))
def test_fraclin_intensity_positive_bounded(params, sigma):
    m, G = fraclin_model(*params, vol=ConstVol(sigma))
    g1, g2 = params[3], params[4]
    x = np.linspace(g1 - 5.0, g2 - params[2] + 5.0, 2001)
    w = m.jump_weights(x)[..., 0]
    assert np.all(np.isfinite(w)) and np.min(w) > 0
    assert np.max(w) <= float(np.max(m.intensity_bound(x - 1.0, x + 1.0))) * (1 + 1e-9)
    assert math.isfinite(np.max(w))
