"""Projected prediction-correction coordinator and its projection operators."""

from __future__ import annotations

import numpy as np

from .errors import BadBounds, DimensionMismatch, Infeasible, NegativeDt
from .game import Game, game_map
from .regulation import control_jacobian, control_target
from .sensitivity import assemble_jacobians, prediction_term

BALANCE_TOL = 1e-10
BALANCE_MAX_ITER = 20_000


def box_project(x, lower, upper) -> np.ndarray:
    """Componentwise clamp onto ``[lower, upper]``."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower > upper):
        raise BadBounds("lower bound exceeds upper bound")
    return np.minimum(np.maximum(np.asarray(x, dtype=float), lower), upper)


def incidence_pinv(graph) -> np.ndarray:
    cached = graph.__dict__.get("_incidence_pinv")
    if cached is None:
        cached = np.linalg.pinv(graph.incidence)
        cached.setflags(write=False)
        object.__setattr__(graph, "_incidence_pinv", cached)
    return cached


def balance_project(graph, beta_i, alpha_hat, lower, upper, *, tol=BALANCE_TOL,
                    max_iter=BALANCE_MAX_ITER) -> np.ndarray:
    """Euclidean projection of ``alpha_hat`` onto ``{A alpha = b(beta), lower <= alpha <= upper}``.

    The affine part is handled through the pseudoinverse of ``A``; the box is
    then reconciled with Dykstra's alternating projections.

    Raises
    ------
    Infeasible
        The iteration does not settle, which happens when the balanced set is
        empty for this ``beta``.
    """
    A = graph.incidence
    Ap = incidence_pinv(graph)
    b = graph.balance_matrix @ np.asarray(beta_i, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    if alpha_hat.shape != (graph.n_edges,):
        raise DimensionMismatch(f"alpha_hat has shape {alpha_hat.shape}")
    lower = np.broadcast_to(np.asarray(lower, dtype=float), alpha_hat.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), alpha_hat.shape)
    if np.any(lower > upper):
        raise BadBounds("lower bound exceeds upper bound")

    y = alpha_hat - Ap @ (A @ alpha_hat - b)
    if np.all(y >= lower) and np.all(y <= upper):
        return y

    x = alpha_hat.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        w = x + p
        y = w - Ap @ (A @ w - b)
        p = w - y
        w = y + q
        x_new = np.minimum(np.maximum(w, lower), upper)
        q = w - x_new
        change = np.max(np.abs(x_new - x))
        x = x_new
        if change <= tol and np.max(np.abs(A @ x - b)) <= tol:
            return x
    raise Infeasible("balanced transfer set appears empty for this delivery vector")


def naive_balance_correction(graph, beta_i, alpha_hat) -> np.ndarray:
    """One-shot correction ``alpha_hat - A^T (A alpha_hat - b)``.

    Diagnostic only: it ignores the box and is exact only when ``A A^T`` is
    the identity on the range of ``A``, which never holds for an incidence
    matrix.
    """
    A = graph.incidence
    b = graph.balance_matrix @ np.asarray(beta_i, dtype=float)
    return alpha_hat - A.T @ (A @ alpha_hat - b)


def state_bounds(game: Game):
    """Faces of ``K = Z x M x Lambda``."""
    L, cfg = game.layout, game.config
    lo = np.zeros(L.dim)
    hi = np.empty(L.dim)
    lo[L.primal], hi[L.primal] = game.z_bounds()
    hi[L.mu] = np.inf if cfg.mu_cap is None else cfg.mu_cap
    hi[L.lam_all] = np.inf if cfg.lambda_cap is None else cfg.lambda_cap
    return lo, hi


def applied_controls(game: Game, eta):
    """Delivery rates and balanced transfer rates actually sent to the plant."""
    L = game.layout
    a = game.config.margin
    beta = np.empty((L.n_players, L.n_stations))
    alpha = np.empty((L.n_players, L.n_edges))
    for i, sp in enumerate(game.players):
        beta[i] = eta[L.beta(i)]
        alpha[i] = balance_project(game.graph, beta[i], eta[L.alpha(i)], a, sp.alpha_max - a)
    return beta, alpha


def coordinator_step(game: Game, reg, eta, xi, xi_dot, dt, predict=True) -> np.ndarray:
    """One explicit Euler step of the projected prediction-correction flow.

    ``eta' = eta + dt * (P_K[eta - gamma * F(eta, U(xi)) + v] - eta)`` where
    ``F`` is the game map (descent in the primal blocks, ascent in the
    multiplier blocks) and ``v`` the sensitivity feed-forward.
    """
    if not dt > 0:
        raise NegativeDt(f"dt must be positive, got {dt!r}")
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    n_s = game.layout.n_stations
    if eta.shape != (game.layout.dim,) or xi.shape != (2 * n_s,):
        raise DimensionMismatch(f"eta {eta.shape}, xi {xi.shape}")
    Q, c = xi[:n_s], xi[n_s:]
    zeta = control_target(Q, c, reg)
    target = eta - game.config.gamma * game_map(game, eta, zeta)
    if predict:
        dU, _ = control_jacobian(Q, c, reg)
        target += prediction_term(assemble_jacobians(game, eta), dU, xi_dot)
    lo, hi = state_bounds(game)
    return eta + dt * (box_project(target, lo, hi) - eta)
