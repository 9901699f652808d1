import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def rng():
    from selfopt.core import RandomSource
    return RandomSource(12345)


def random_ergodic_tables(seed: int, n_states: int = 3, n_actions: int = 2):
    """Dense transition tables (every policy chain irreducible) and rewards in [0, 1]."""
    g = np.random.default_rng(seed)
    P = g.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    R = g.random((n_states, n_actions))
    return P, R


ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    """One line per acceptance criterion, echoed in the terminal summary."""
    line = f"{name} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
