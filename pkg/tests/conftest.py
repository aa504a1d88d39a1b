import numpy as np
import pytest
from hypothesis import settings

from colearn.game import GameSpec

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_game(transition, cost0, cost1=None, z0=None, z1=None, b1=None, discount=0.9):
    f = np.asarray(transition, dtype=float)
    S, A0, A1, _ = f.shape
    c0 = np.asarray(cost0, dtype=float)
    c1 = -c0 if cost1 is None else np.asarray(cost1, dtype=float)
    return GameSpec(
        num_states=S,
        actions=(A0, A1),
        num_obs=(S if z0 is None else np.shape(z0)[1], S if z1 is None else np.shape(z1)[1]),
        obs_kernel=(np.eye(S) if z0 is None else z0, np.eye(S) if z1 is None else z1),
        transition=f,
        cost=(c0, c1),
        initial_belief=np.full(S, 1.0 / S) if b1 is None else b1,
        discount=discount,
    )


@pytest.fixture
def single_state_game():
    """One state, one action each, stage cost 1 for both, discount 0.5."""
    return make_game(np.ones((1, 1, 1, 1)), np.ones((1, 1, 1)), np.ones((1, 1, 1)), discount=0.5)


@pytest.fixture
def two_state_game():
    f = np.zeros((2, 2, 2, 2))
    f[0, 0, 0] = [0.9, 0.1]
    f[0, 0, 1] = [0.4, 0.6]
    f[0, 1, 0] = [0.7, 0.3]
    f[0, 1, 1] = [0.2, 0.8]
    f[1, 0, 0] = [0.5, 0.5]
    f[1, 0, 1] = [0.1, 0.9]
    f[1, 1, 0] = [0.6, 0.4]
    f[1, 1, 1] = [0.3, 0.7]
    c0 = np.array([[[1.0, 0.0], [0.5, 2.0]], [[0.0, 1.5], [1.0, -1.0]]])
    z = np.array([[0.8, 0.2], [0.3, 0.7]])
    return make_game(f, c0, z0=z, z1=np.array([[0.6, 0.4], [0.1, 0.9]]),
                     b1=np.array([0.6, 0.4]), discount=0.8)
