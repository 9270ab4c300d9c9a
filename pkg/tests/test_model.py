import math

import numpy as np
import pytest

from vswap.errors import ModelValidationError
from vswap.kernel import EMPTY
from vswap.model import (
    ConstVol,
    ExpVol,
    ModelSpec,
    PiecewiseVol,
    apply_generator,
    drift_b,
    mixture_model,
    proportional_model,
    qv_rate,
    single_atom_model,
    validate_model,
)
from vswap.payoff import Payoff
from vswap.solvers import solve_proportional

from conftest import atoms


def test_drift_pure_diffusion():
    assert drift_b(proportional_model(0.2), 0.3) == pytest.approx(-0.02, abs=1e-15)


def test_drift_single_down_jump():
    m = proportional_model(0.0, atoms((-1.0, 1.0)))
    assert drift_b(m, 0.0) == pytest.approx(-math.exp(-1.0), abs=1e-15)


def test_drift_zero_model():
    assert drift_b(proportional_model(0.0), 1.0) == 0.0


def test_qv_rate_examples():
    assert qv_rate(proportional_model(0.2, atoms((0.3, 0.5))), 0.0) == pytest.approx(0.085, abs=1e-15)
    assert qv_rate(proportional_model(0.37), 2.0) == pytest.approx(0.37**2)
    m = single_atom_model(ConstVol(0.0), -0.4, lambda x: np.full(np.shape(x), 1.7), domain=(-1, 1))
    assert qv_rate(m, 0.0) == pytest.approx(1.7 * 0.16)


def test_generator_kills_exp(models):
    g = Payoff.exponential(1.0, 1.0)
    for name, m in models.items():
        x = m.grid(21)
        assert np.max(np.abs(apply_generator(m, g, x))) <= 1e-10 * np.max(qv_rate(m, x) + np.exp(x)), name


def test_generator_of_log_contract_pure_diffusion():
    assert apply_generator(proportional_model(0.3), Payoff(linear=-2.0), 0.5) == pytest.approx(0.09, abs=1e-15)


def test_generator_proportional_matches_qv_rate():
    nu = atoms((-0.3, 0.5), (0.1, 2.0))
    m = proportional_model(0.2, nu)
    Q, G = solve_proportional(0.2, nu)
    x = m.grid()
    np.testing.assert_allclose(apply_generator(m, G, x), qv_rate(m, x), rtol=1e-12)


def test_generator_scalar_and_array_agree():
    m = mixture_model(1.0, 0.0, 1.0, 0.3, EMPTY, atoms((-1.0, 1.0)))
    g = Payoff(linear=0.3, exps=((0.2, 0.7),))
    x = np.array([-1.0, 0.0, 1.3])
    np.testing.assert_allclose(apply_generator(m, g, x), [apply_generator(m, g, float(v)) for v in x])


def test_validate_bounded_proportional_passes():
    rep = validate_model(proportional_model(0.2, atoms((-0.3, 0.5))))
    assert rep.passed
    assert rep.check("second_moment").value == pytest.approx(0.045)


def test_validate_empty_kernel():
    rep = validate_model(ModelSpec(vol=ConstVol(0.3)))
    assert rep.passed
    assert rep.check("a2").value == pytest.approx(0.09)
    assert rep.check("second_moment").value == 0.0
    assert rep.check("exp_moment").value == 0.0


def test_validate_mixture_warns_about_growth():
    c = 0.39
    m = mixture_model(1.0, 0.0, 1.25, c, EMPTY, atoms((-1.5, 1.0)))
    rep = validate_model(m, grid=np.linspace(0.0, 40.0, 201))
    assert rep.passed
    assert any("grow" in w for w in rep.warnings)
    assert rep.intensity_growth_rate == pytest.approx(c, rel=1e-6)


def test_validate_reports_exponential_moments():
    rep = validate_model(proportional_model(0.2, atoms((-0.3, 0.5))))
    assert rep.max_exponential_p == 20.0


def test_vol_registry():
    assert ExpVol(0.2, 0.1)(0.0) == pytest.approx(0.2)
    pw = PiecewiseVol((0.0,), (0.1, 0.3))
    np.testing.assert_allclose(pw(np.array([-1.0, 0.0, 1.0])), [0.1, 0.3, 0.3])
    with pytest.raises(ModelValidationError):
        PiecewiseVol((0.0, 1.0), (0.1,))


def test_negative_sigma_rejected():
    with pytest.raises(ModelValidationError):
        proportional_model(-0.1)


def test_kernel_at_location_scales_with_state():
    m = mixture_model(1.0, 0.0, 2.0, 0.5, EMPTY, atoms((-1.0, 1.0)), sigma0_sq=0.18)
    k = m.kernel(1.0)
    assert k.atoms[0][1] == pytest.approx(2.0 * 0.09 * math.exp(0.5))
