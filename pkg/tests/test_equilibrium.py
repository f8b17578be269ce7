import numpy as np
import pytest

from conftest import make_game
from modcoord.equilibrium import approximation_report, bound_constants, interior_floor, solve_ne
from modcoord.errors import NoConvergence
from modcoord.game import game_map, multiplier_map, sample_interior
from modcoord.topology import build_graph
from oracles import descent_oracle

ZETA = np.array([2.0, 2.5, 1.5])


def test_residual(game3):
    eta = solve_ne(game3, ZETA)
    assert np.max(np.abs(game_map(game3, eta, ZETA))) <= 1e-10


def test_unique_from_any_start(game3, rng):
    ref = solve_ne(game3, ZETA)
    for _ in range(5):
        init = sample_interior(game3, rng, mult_range=(0.01, 20.0))
        np.testing.assert_allclose(solve_ne(game3, ZETA, init=init), ref, atol=1e-8)


def test_symmetric_players_and_independent_oracle():
    g = build_graph([1, 2], [(1, 2), (2, 1)], {(1, 2): 1.0, (2, 1): 1.0})
    game = make_game(g, eps=0.2, tau=0.05)
    zeta = np.array([1.5, 2.0])
    eta = solve_ne(game, zeta)
    L = game.layout
    np.testing.assert_allclose(eta[L.beta(0)], eta[L.beta(1)], atol=1e-8)
    ref = descent_oracle(game, zeta)
    np.testing.assert_allclose(eta, ref, atol=1e-6)


def test_multiplier_ranges(game3):
    eta = solve_ne(game3, ZETA)
    k = bound_constants(game3)
    cfg, L = game3.config, game3.layout
    mu, lam = eta[L.mu], eta[L.lam_all]
    assert np.all(mu >= multiplier_map(-k.varsigma_g, cfg.epsilon, cfg.tau) - 1e-12)
    assert np.all(mu <= multiplier_map(k.varsigma_g, cfg.epsilon, cfg.tau) + 1e-12)
    assert np.all(lam >= multiplier_map(-k.varsigma_h, cfg.epsilon, cfg.tau) - 1e-12)
    assert np.all(lam <= multiplier_map(k.varsigma_h, cfg.epsilon, cfg.tau) + 1e-12)


def test_coupling_bound_formula(game3):
    k = bound_constants(game3)
    cfg, L = game3.config, game3.layout
    expect = np.sqrt(L.n_players * cfg.epsilon * (k.delta.max() + L.p * cfg.tau))
    assert k.varsigma_g == pytest.approx(expect)
    # hand value for N=2, delta=1, p=4, eps=tau=0.01
    assert np.sqrt(2 * 0.01 * (1 + 4 * 0.01)) == pytest.approx(0.1442, abs=1e-4)


def test_bounds_vanish_with_epsilon(ring3):
    vals = [bound_constants(make_game(ring3, eps=e, tau=0.01)) for e in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert all(a.varsigma_g > b.varsigma_g for a, b in zip(vals, vals[1:]))
    assert vals[-1].varsigma_g < 1e-3 and vals[-1].varsigma_h < 1e-3


@pytest.mark.parametrize("eps", [0.1, 0.03, 0.01])
@pytest.mark.parametrize("tau", [0.01, 0.003, 0.001])
def test_approximation_bounds_on_grid(ring3, eps, tau):
    game = make_game(ring3, eps=eps, tau=tau, margin=0.001)
    eta = solve_ne(game, ZETA)
    rep = approximation_report(game, eta, ZETA)
    assert rep.passed, rep.flags
    assert rep.max_G <= bound_constants(game).varsigma_g


def test_more_demand_raises_delivery(game3):
    lo = solve_ne(game3, ZETA)
    hi = solve_ne(game3, ZETA + np.array([0.5, 0.0, 0.0]))
    L = game3.layout
    total = lambda e: sum(e[L.beta(i)][0] for i in range(L.n_players))
    assert total(hi) > total(lo)


def test_interior_floor_formula():
    assert interior_floor(0.1, 4.0, 1.0) == pytest.approx(0.4 / 4.2)
    assert interior_floor(0.0, 4.0, 1.0) == 0.0


def test_iteration_budget(game3):
    with pytest.raises(NoConvergence):
        solve_ne(game3, ZETA, init=sample_interior(game3, np.random.default_rng(1)), max_iter=1)
