import numpy as np
import pytest

from modcoord.coordinator import (balance_project, box_project, coordinator_step,
                                  naive_balance_correction, state_bounds)
from modcoord.equilibrium import solve_ne
from modcoord.errors import BadBounds, DimensionMismatch, Infeasible, NegativeDt
from modcoord.harness.scenario import default_scenario
from modcoord.regulation import control_target
from oracles import qp_oracle


def test_clamp_example():
    np.testing.assert_array_equal(box_project([-1.0, 5.0, 0.5], 0.0, 1.0), [0.0, 1.0, 0.5])
    x = np.array([0.2, 0.7])
    np.testing.assert_array_equal(box_project(x, 0.0, 1.0), x)
    with pytest.raises(BadBounds):
        box_project(x, 1.0, 0.0)


def test_two_station_examples(line2):
    np.testing.assert_allclose(balance_project(line2, [2.0, 1.0], [1.0, 1.0], 0.1, 9.9), [0.5, 1.5], atol=1e-10)
    np.testing.assert_allclose(balance_project(line2, [0.0, 0.0], [3.0, 7.0], 0.1, 9.9), [5.0, 5.0], atol=1e-10)
    np.testing.assert_allclose(balance_project(line2, [1.0, 1.0], [4.0, 4.0], 0.1, 9.9), [4.0, 4.0])


def test_matches_active_set_oracle(ring3, rng):
    for _ in range(30):
        beta = rng.uniform(0.1, 2.9, 3)
        ah = rng.uniform(-1.0, 4.0, ring3.n_edges)
        ref = qp_oracle(ring3, beta, ah, 0.05, 2.95)
        if ref is None:
            continue
        got = balance_project(ring3, beta, ah, 0.05, 2.95)
        np.testing.assert_allclose(got, ref, atol=1e-7)


def test_naive_correction_can_leave_box(ring3):
    # the plain affine correction ignores the box; the projection does not
    beta = np.array([2.9, 0.1, 0.1])
    ah = np.zeros(ring3.n_edges)
    naive = naive_balance_correction(ring3, beta, ah)
    proj = balance_project(ring3, beta, ah, 0.05, 2.95)
    assert naive.min() < 0.05
    assert proj.min() >= 0.05 - 1e-12


def test_infeasible_and_shape_errors(line2):
    with pytest.raises(Infeasible):
        balance_project(line2, [9.0, 0.0], [1.0, 1.0], 0.1, 0.2, max_iter=200)
    with pytest.raises(DimensionMismatch):
        balance_project(line2, [1.0, 1.0], [1.0, 1.0, 1.0], 0.1, 0.2)


@pytest.fixture(scope="module")
def setup():
    # regulated state Q = q_bar: the equilibrium lies strictly inside K there
    s = default_scenario()
    xi = np.concatenate([s.regulation.q_bar, s.plant0.c])
    zeta = control_target(s.regulation.q_bar, s.plant0.c, s.regulation)
    eta = solve_ne(s.game, zeta)
    lo, hi = state_bounds(s.game)
    assert np.all(eta > lo) and np.all(eta < hi)
    return s, xi, eta


def test_stationary_at_equilibrium(setup):
    s, xi, eta = setup
    out = coordinator_step(s.game, s.regulation, eta, xi, np.zeros(6), 1e-3)
    np.testing.assert_allclose(out, eta, atol=1e-12)


def test_step_contracts_towards_equilibrium(setup, rng):
    s, xi, eta_ne = setup
    lo, hi = state_bounds(s.game)
    for _ in range(10):
        eta = np.clip(eta_ne + 1e-3 * rng.normal(size=eta_ne.size), lo, hi)
        out = coordinator_step(s.game, s.regulation, eta, xi, np.zeros(6), 1e-3)
        assert np.linalg.norm(out - eta_ne) < np.linalg.norm(eta - eta_ne)


def test_face_is_kept_under_outward_push(setup):
    s, xi, eta = setup
    lo, hi = state_bounds(s.game)
    L = s.game.layout
    k = L.beta(0).start
    x = eta.copy()
    x[k] = lo[k]
    # huge target at this coordinate pushes beta down through the face
    big = s.game.with_config(type(s.config)(s.config.epsilon, s.config.tau, 1e6, s.config.margin))
    out = coordinator_step(big, s.regulation, x, xi, np.zeros(6), 1e-3)
    assert out[k] >= lo[k] - 1e-15


def test_step_argument_checks(setup):
    s, xi, eta = setup
    with pytest.raises(NegativeDt):
        coordinator_step(s.game, s.regulation, eta, xi, np.zeros(6), 0.0)
    with pytest.raises(DimensionMismatch):
        coordinator_step(s.game, s.regulation, eta[:-1], xi, np.zeros(6), 1e-3)
