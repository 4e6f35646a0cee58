import numpy as np
import pytest

from echocons.reservoir import NetworkSpec, build_network


@pytest.fixture(scope="session")
def small_net():
    return build_network(NetworkSpec(size=30, p=0.2, rho=0.9, seed=3))


@pytest.fixture(scope="session")
def memory_net():
    """The reference memory-task reservoir: N=500, p=0.1, rho=1."""
    return build_network(NetworkSpec(size=500, p=0.10, rho=1.0, seed=1))


@pytest.fixture(scope="session")
def sparse_net():
    """N=200, p=0.025 reservoir at unit spectral radius (rescale as needed)."""
    return build_network(NetworkSpec(size=200, p=0.025, rho=1.0, seed=2))


def standardize(v):
    v = np.asarray(v, dtype=float)
    return (v - v.mean(axis=0)) / v.std(axis=0)


# one pass/fail line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
