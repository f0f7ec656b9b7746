import os

import hypothesis
import numpy as np
import pytest

from ergodic_hjb.core import CoefficientFns, build_grid, make_problem
from ergodic_hjb.presets import get_preset

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=400, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def preset_problem(name, grid_n=None, grid_l=None, dim=None, **params):
    p = get_preset(name)
    grid = build_grid(dim or p.dim, grid_l or p.halfwidth, grid_n or p.n_per_dim)
    return make_problem(p.fns(params), grid, mode=p.mode, pucci_lambda=p.pucci_lambda,
                        pucci_Lambda=p.pucci_Lambda)


@pytest.fixture(scope="session")
def example_problem():
    return preset_problem("paper-example")


@pytest.fixture
def ou_fns():
    return CoefficientFns(a=lambda x, al: 1.0, b=lambda x, al: -x)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
