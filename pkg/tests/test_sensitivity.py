import numpy as np
import pytest

from conftest import make_game
from modcoord.equilibrium import solve_ne
from modcoord.game import rho_omega, sample_interior
from modcoord.harness.checks import fd_jacobian
from modcoord.harness.ledger import appendix_constants
from modcoord.sensitivity import (assemble_jacobians, jacobian_matrix, lipschitz_estimates,
                                  parameter_jacobian, prediction_term, split_prediction)

ZETA = np.array([2.0, 2.5, 1.5])


def test_dual_diagonal_example(ring3):
    game = make_game(ring3, eps=0.1, tau=0.01)
    eta = sample_interior(game, np.random.default_rng(0))
    eta[game.layout.mu] = 1.0
    b = assemble_jacobians(game, eta)
    np.testing.assert_allclose(np.diag(b.R4), 0.11)


def test_coupling_block_pattern(game3):
    b = assemble_jacobians(game3, sample_interior(game3, np.random.default_rng(0)))
    assert set(np.unique(b.R2)) <= {-1.0, 0.0, 1.0}
    L = game3.layout
    for i in range(L.n_players):
        blk = b.R2[:, L.beta(i)]
        np.testing.assert_array_equal(blk, np.vstack([np.eye(3), -np.eye(3)]))


def test_jm_matches_finite_differences(game3, rng):
    for _ in range(10):
        eta = sample_interior(game3, rng, mult_range=(0.1, 10.0))
        J = jacobian_matrix(game3, eta)
        fd = fd_jacobian(game3, eta, ZETA)
        assert np.linalg.norm(J - fd) / np.linalg.norm(fd) <= 1e-6


def test_sensitivity_matches_equilibrium_drift(game3):
    # slowly varying target zeta(t) = ZETA + t * w
    w = np.array([0.3, -0.2, 0.1])
    eta = solve_ne(game3, ZETA)
    v = prediction_term(assemble_jacobians(game3, eta), np.eye(3), w)
    d = 1e-5
    fd = (solve_ne(game3, ZETA + d * w, init=eta) - solve_ne(game3, ZETA - d * w, init=eta)) / (2 * d)
    assert np.linalg.norm(v - fd) / np.linalg.norm(fd) <= 1e-4


def test_prediction_is_linear(game3, rng):
    b = assemble_jacobians(game3, solve_ne(game3, ZETA))
    dU = rng.normal(size=(3, 6))
    np.testing.assert_array_equal(prediction_term(b, dU, np.zeros(6)), 0.0)
    x, y = rng.normal(size=6), rng.normal(size=6)
    np.testing.assert_allclose(prediction_term(b, dU, 2 * x + y),
                               2 * prediction_term(b, dU, x) + prediction_term(b, dU, y), atol=1e-12)


def test_quadratic_form_dominated_by_diagonal(game3, rng):
    # the off-diagonal coupling is skew, so only the diagonal survives in x' J_M x
    for _ in range(20):
        eta = sample_interior(game3, rng)
        b = assemble_jacobians(game3, eta)
        x = rng.normal(size=b.J_M.shape[0])
        diag = np.diag(b.J_M)
        assert x @ b.J_M @ x == pytest.approx(np.sum(diag * x * x), rel=1e-10)
        assert np.min(diag) >= rho_omega(game3)


def test_parameter_jacobian_norm(game3):
    assert np.linalg.norm(parameter_jacobian(game3), 2) == pytest.approx(np.sqrt(2))


def test_split_blocks(game3, rng):
    v = rng.normal(size=game3.layout.dim)
    parts = split_prediction(game3, v)
    assert sum(np.size(p) for p in parts.values()) == v.size


def test_sampled_slopes_below_analytic(scenario):
    c = appendix_constants(scenario)
    k = c["bounds"]
    lo, hi = c["region"]
    est = lipschitz_estimates(scenario.game, scenario.regulation, lo, hi, c["D_U1"], c["D_U2"],
                              k.varsigma_g, k.varsigma_h, sample_count=2000, seed=4)
    assert est.L_Omega_empirical <= est.L_Omega
    assert est.L_J_empirical <= est.L_J
    assert est.rho_Omega == rho_omega(scenario.game)
