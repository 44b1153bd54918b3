import numpy as np
import pytest

from fleetpdm.features import FeatureConfig, build_matrix
from fleetpdm.synthgen import FleetConfig, generate_fleet


@pytest.fixture(scope="session")
def fleet():
    """Default desk-scale fleet: 10 machines x 2160 hours, seed 42."""
    return generate_fleet(FleetConfig())


@pytest.fixture(scope="session")
def small_fleet():
    return generate_fleet(FleetConfig(n_machines=3, horizon_hours=600, seed=7))


@pytest.fixture(scope="session")
def matrix(fleet):
    return build_matrix(fleet, FeatureConfig())


def blobs(n=100, p=4, sep=4.0, seed=0):
    """Two spherical Gaussian classes ``sep`` apart along every axis."""
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, (n, p)), rng.normal(sep, 1, (n, p))])
    y = np.repeat([0, 1], n)
    return X, y


@pytest.fixture(scope="session")
def default_bench(matrix):
    """Six learners on the default fleet with the default split."""
    from fleetpdm.config import RunConfig
    from fleetpdm.evalbench import run_benchmark

    cfg = RunConfig.from_flat()
    return run_benchmark(matrix, cfg.learner_specs(), cfg.split_spec(), cfg.get_int("repetitions"))


@pytest.fixture(scope="session")
def default_importance(matrix):
    from fleetpdm.config import RunConfig
    from fleetpdm.evalbench import rank_features

    cfg = RunConfig.from_flat()
    return rank_features(matrix, cfg.rf_spec(), cfg.split_spec())


# acceptance results, filled by test_acceptance and printed after the run
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
