import pytest

from amdkit.datasets import SyntheticConfig, generate_synthetic
from amdkit.isc import train
from helpers import ACCEPTANCE_LINES, MICRO_DIMS, MICRO_HYPER


@pytest.fixture(scope="session")
def micro_ds():
    # 5 items, 2 tasks, 10 features: small enough for exhaustive oracles
    return generate_synthetic(SyntheticConfig(
        n_items=5, n_classes=2, features_per_class=5, seed=3))


@pytest.fixture(scope="session")
def micro_trained(micro_ds):
    model, trace = train(micro_ds, MICRO_HYPER, MICRO_DIMS)
    return model, trace


@pytest.fixture(scope="session")
def micro_model(micro_trained):
    return micro_trained[0]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
