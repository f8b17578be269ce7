import numpy as np
import pytest

from modcoord.game import Game, GameConfig, PlayerSpec
from modcoord.harness.scenario import default_scenario
from modcoord.topology import build_graph, ring_graph


@pytest.fixture
def ring3():
    return ring_graph(3)


@pytest.fixture
def line2():
    return build_graph([1, 2], [(1, 2), (2, 1)], {(1, 2): 1.0, (2, 1): 1.0})


def make_game(graph, eps=0.1, tau=0.01, n_players=2, margin=0.05, **spec):
    spec = {"beta_max": 3.0, "alpha_max": 3.0, **spec}
    return Game(graph, [PlayerSpec(**spec)] * n_players, GameConfig(eps, tau, margin=margin))


@pytest.fixture
def game3(ring3):
    return make_game(ring3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


# acceptance results, filled by test_acceptance.py
RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(k.rstrip("ab")), k)):
        passed, detail = RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {key}: {detail}")
