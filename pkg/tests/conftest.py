import numpy as np
import pytest

from pfsi.driver import SolverConfig, Stage, build_context, initial_state, run_stage
from pfsi.geometry import DomainSpec

#: forcing used by the end-to-end runs: one beam mode and one body-force mode
ACCEPTANCE_FORCING = dict(f_modes=((1.0, 1, 1),), F_modes=((0.1, 2, 1),))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def unit_domain():
    return DomainSpec(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def forced_config(unit_domain):
    return SolverConfig(unit_domain, **ACCEPTANCE_FORCING)


@pytest.fixture(scope="session")
def forced_run(forced_config):
    """Converged forced state at ``eps = delta = 0.1``, ``(m, n_beam, n_fluid) = (2, 4, 12)``."""
    ctx = build_context(Stage(2, 4, 12, 0.1, 0.1), forced_config)
    state = run_stage(initial_state(ctx), ctx)
    assert state.converged
    return state, ctx


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_LOG_KEY, [])
    return lines


_LOG_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LOG_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
