import math
import sys

import pytest
from hypothesis import HealthCheck, settings

from vswap.kernel import EMPTY, LevyKernelAtLocation
from vswap.model import ConstVol, LogisticGamma, mixture_model, proportional_model
from vswap.solvers import fraclin_model

settings.register_profile("ci", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True)
settings.load_profile("ci")

X0 = math.log(10.0)


def atoms(*pairs):
    return LevyKernelAtLocation.from_atoms(pairs)


def registry_models():
    """One representative per model family, keyed by name."""
    return {
        "diffusion": proportional_model(0.2, EMPTY, domain=(0.0, 5.0)),
        "proportional": proportional_model(0.2, atoms((-0.3, 0.5)), domain=(0.0, 5.0)),
        "proportional_gamma": proportional_model(
            0.25, atoms((-0.5, 0.4), (0.2, 0.3)), LogisticGamma(0.5, 1.5, X0, 0.5), domain=(0.0, 5.0)
        ),
        "fraclin": fraclin_model(-0.1 * (X0 + 21.0), 0.05, -0.5, 1.5, 3.0, ConstVol(0.2))[0],
        "mixture_fig1": mixture_model(0.0, 1.0, 0.22, 0.23, atoms((1.0, 1.0)), EMPTY, domain=(math.log(2), math.log(30))),
        "mixture_fig3": mixture_model(1.0, 0.0, 1.25, 0.39, EMPTY, atoms((-1.5, 1.0)), domain=(math.log(2), math.log(30))),
    }


@pytest.fixture(scope="session")
def models():
    return registry_models()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
