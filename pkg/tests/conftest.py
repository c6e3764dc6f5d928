import numpy as np
import pytest

from spatial_hom.wavepacket import envelope, make_gaussian, make_tabulated

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def gauss_env():
    return envelope(make_gaussian(1.0))


@pytest.fixture(scope="session")
def tabulated_gaussian():
    k = np.arange(-10.0, 10.0 + 1e-12, 1.0 / 32)
    return make_tabulated(k, np.exp(-k ** 2 / 2))


@pytest.fixture(scope="session")
def skewed_dist():
    # Gamma(3, 1)-shaped density: mean 3, variance 3, strongly asymmetric.
    k = np.arange(0.0, 45.0 + 1e-12, 0.01)
    return make_tabulated(k, k ** 2 * np.exp(-k))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


MASTER_SEED = 20260001


@pytest.fixture(scope="session")
def trials():
    """Session cache of Monte Carlo runs, shared by the estimator and acceptance suites."""
    from spatial_hom.detection import DetectorModel, SceneParams
    from spatial_hom.estimator import TrialConfig, run_trials

    cache = {}
    env = envelope(make_gaussian(1.0))

    def get(nu, dx, n, n_trials, seed=MASTER_SEED):
        key = (nu, dx, n, n_trials, seed)
        if key not in cache:
            config = TrialConfig(SceneParams(dx, nu, env), DetectorModel.default(1.0), n, n_trials, seed)
            cache[key] = run_trials(config)
        return cache[key]
    return get
