"""Pure-Python closed-loop stepping, assembled from the library functions.

Used when the compiled kernel is unavailable and as its reference.
"""

from __future__ import annotations

import numpy as np

from .coordinator import balance_project
from .game import game_map
from .plant import PlantState, arrival_derivative, plant_step, queue_derivative
from .regulation import control_jacobian, control_target
from .sensitivity import jacobian_matrix


def run_steps(problem, scenario):
    """Run ``problem.n_steps`` steps; returns ``(rows, snapshots)``.

    ``rows`` has one line per recorded time ``k dt``, ``k = 0..n_steps``;
    ``snapshots`` holds the coordinator state every ``snap_every`` steps.
    """
    P = problem
    game, reg, arr, graph = scenario.game, scenario.regulation, scenario.arrivals, scenario.graph
    L = game.layout
    n, N = P.n_s, P.N
    rows = np.empty((P.n_steps + 1, P.n_cols))
    snaps = np.empty((P.n_steps // P.snap_every + 1, P.dim))
    state = PlantState(P.Q0.copy(), P.c0.copy(), P.v0.copy(), 0.0)
    eta = P.eta0.copy()
    for k in range(P.n_steps + 1):
        t = k * P.dt
        Q, c = state.Q, state.c
        zeta = control_target(Q, c, reg)
        beta = np.empty((N, n))
        alpha = np.empty((N, P.n_e))
        for i in range(N):
            beta[i] = eta[L.beta(i)]
            alpha[i] = balance_project(graph, beta[i], eta[L.alpha(i)], P.alpha_lo[i], P.alpha_hi[i],
                                       tol=P.balance_tol, max_iter=P.balance_max_iter)
        u = beta.sum(axis=0)
        xi_dot = np.concatenate([queue_derivative(Q, c, u), arrival_derivative(arr, c, Q, t)])
        resid = alpha @ P.A.T - beta @ P.B.T
        cost = (P.c_lin * alpha.sum(1) + P.c_quad * (alpha ** 2).sum(1)
                - P.p_lin * beta.sum(1) + P.p_quad * (beta ** 2).sum(1))
        rows[k] = np.concatenate([
            [t], Q, c, state.v.ravel(), u, beta.ravel(), alpha.ravel(), eta[L.mu], eta[L.lam_all],
            [np.max(np.abs(u - zeta)), np.max(np.abs(resid))], cost])
        if k % P.snap_every == 0:
            snaps[k // P.snap_every] = eta
        if k == P.n_steps:
            break

        dU, _ = control_jacobian(Q, c, reg)
        rhs = P.J_N @ (dU @ xi_dot)
        v = np.linalg.solve(jacobian_matrix(game, eta), rhs)
        target = eta - P.gamma * game_map(game, eta, zeta) + v
        eta = eta + P.dt * (np.minimum(np.maximum(target, P.k_lo), P.k_hi) - eta)
        state = plant_step(graph, arr, state, beta, alpha, P.dt, xi_dot=xi_dot)
        state = PlantState(state.Q, state.c, state.v, (k + 1) * P.dt)
    return rows, snaps
