"""Parametric sensitivity of the regularized equilibrium.

The first-order system ``F(eta, zeta) = 0`` (the game map) has Jacobian
``J_M`` in ``eta``. With ``J_N = -dF/dzeta`` the equilibrium moves as
``d eta / d zeta = J_M^{-1} J_N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularJM
from .game import Game, game_map, rho_omega


@dataclass(eq=False)
class SensitivityBundle:
    R1: np.ndarray
    R2: np.ndarray
    R3: np.ndarray
    R4: np.ndarray
    R5: np.ndarray
    J_M: np.ndarray
    J_N: np.ndarray
    J: np.ndarray


def jacobian_diagonal(game: Game, eta) -> np.ndarray:
    """Diagonal of ``J_M``: primal curvatures, then ``eps + tau / mult^2``."""
    L, cfg = game.layout, game.config
    eta = np.asarray(eta, dtype=float)
    z = eta[L.primal]
    gap = game.z_upper - z
    diag = np.empty(L.dim)
    diag[L.primal] = 2.0 * game.f_quad + cfg.tau / z ** 2 + cfg.tau / gap ** 2
    diag[L.n:] = cfg.epsilon + cfg.tau / eta[L.n:] ** 2
    return diag


def jacobian_matrix(game: Game, eta) -> np.ndarray:
    """``J_M`` assembled from its constant skew part and the state-dependent diagonal."""
    J_M = game.jm_offdiag.copy()
    J_M[np.diag_indices_from(J_M)] += jacobian_diagonal(game, eta)
    return J_M


def parameter_jacobian(game: Game) -> np.ndarray:
    """Constant ``J_N = -dF/dzeta``: ``-I`` on the first half of ``mu``, ``+I`` on the second."""
    L = game.layout
    n_s = L.n_stations
    J_N = np.zeros((L.dim, n_s))
    J_N[L.n:L.n + n_s] = -np.eye(n_s)
    J_N[L.n + n_s:L.n + 2 * n_s] = np.eye(n_s)
    return J_N


def assemble_jacobians(game: Game, eta, zeta=None) -> SensitivityBundle:
    """Assemble ``R1..R5``, ``J_M``, ``J_N`` and solve for ``J = J_M^{-1} J_N``.

    ``zeta`` is accepted for symmetry with the other evaluators; the blocks do
    not depend on it because the coupling constraint is affine in ``zeta``.
    """
    L = game.layout
    diag = jacobian_diagonal(game, eta)
    J_M = game.jm_offdiag.copy()
    J_M[np.diag_indices_from(J_M)] += diag
    J_N = parameter_jacobian(game)
    try:
        J = np.linalg.solve(J_M, J_N)
    except np.linalg.LinAlgError as exc:
        raise SingularJM(str(exc)) from exc
    if not np.all(np.isfinite(J)):
        raise SingularJM("non-finite sensitivity")
    return SensitivityBundle(
        R1=np.diag(diag[L.primal]), R2=game.Gz, R3=game.Hz,
        R4=np.diag(diag[L.mu]), R5=np.diag(diag[L.lam_all]),
        J_M=J_M, J_N=J_N, J=J)


def prediction_term(bundle: SensitivityBundle, dU_dxi, xi_dot) -> np.ndarray:
    """Feed-forward estimate ``v = J (dU/dxi) xi_dot`` of the equilibrium drift."""
    return bundle.J @ (np.asarray(dU_dxi) @ np.asarray(xi_dot, dtype=float))


def split_prediction(game: Game, v) -> dict:
    """Per-recipient blocks of ``v``: primal ``p``, operator ``mu``, dual ``d``."""
    L = game.layout
    return {"p": [v[L.z(i)] for i in range(L.n_players)], "mu": v[L.mu],
            "d": [v[L.lam(i)] for i in range(L.n_players)]}


@dataclass(frozen=True)
class LipschitzEstimates:
    L_J: float
    L_Omega: float
    rho_Omega: float
    L_J_empirical: float
    L_Omega_empirical: float


def curvature_slope_bound(game: Game, lower, upper) -> float:
    """``sup |d R1 / d eta|`` over the box: the primal curvature slope
    ``-2 tau/x^3 + 2 tau/(x_max - x)^3`` is increasing, so endpoints suffice."""
    L, tau = game.layout, game.config.tau
    lo, hi = lower[L.primal], upper[L.primal]
    xm = game.z_upper
    slope = lambda x: -2.0 * tau / x ** 3 + 2.0 * tau / (xm - x) ** 3
    return float(np.max(np.maximum(np.abs(slope(lo)), np.abs(slope(hi)))))


def analytic_lipschitz(game: Game, lower, upper, d_u1, d_u2, varsigma_g, varsigma_h):
    """Closed-form ``(L_J, L_Omega)`` over the box ``[lower, upper]``."""
    L, cfg = game.layout, game.config
    eps, tau = cfg.epsilon, cfg.tau
    min_rho = min(min(sp.rho, sp.rho_prime) for sp in game.players)
    jn = np.linalg.norm(parameter_jacobian(game), 2)
    s_r1 = curvature_slope_bound(game, lower, upper)
    root = np.sqrt(s_r1 ** 2 + 4 * tau ** 2 * (L.m ** 2 / varsigma_g ** 6
                                               + (L.n_players * L.p) ** 2 / varsigma_h ** 6))
    em = eps * min_rho
    L_J = root * jn * d_u1 / em ** 2 + jn * d_u2 / em

    xm = game.z_upper
    r1 = lambda x: 2.0 * game.f_quad + tau / x ** 2 + tau / (xm - x) ** 2
    diag_max = np.maximum(r1(lower[L.primal]), r1(upper[L.primal])).max()
    mult_lo = lower[L.n:]
    diag_max = max(diag_max, float(np.max(eps + tau / mult_lo ** 2)))
    L_Omega = diag_max + np.linalg.norm(game.jm_offdiag, 2)
    return float(L_J), float(L_Omega)


def _sample_box(rng, lower, upper, size):
    return lower + rng.uniform(size=(size, lower.size)) * (upper - lower)


def lipschitz_estimates(game: Game, reg, lower, upper, d_u1, d_u2, varsigma_g, varsigma_h,
                        sample_count=10_000, seed=0, q_span=None) -> LipschitzEstimates:
    """Analytic Lipschitz constants plus sampled difference quotients on the box.

    Half of the pairs are drawn independently in the box, the other half as
    small perturbations, so both global and local slopes are probed. The
    ``xi`` coordinates range over ``Q in [0, q_span]`` and ``c in [c_min, c_max]``.
    """
    from .regulation import control_jacobian, control_target

    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    L_J, L_Om = analytic_lipschitz(game, lower, upper, d_u1, d_u2, varsigma_g, varsigma_h)
    rng = np.random.default_rng(seed)
    n_s = game.layout.n_stations
    q_span = float(np.max(reg.q_bar)) + 10.0 if q_span is None else q_span
    xlo = np.concatenate([np.zeros(n_s), np.full(n_s, reg.c_min)])
    xhi = np.concatenate([np.full(n_s, q_span), np.full(n_s, reg.c_max)])

    half = max(sample_count // 2, 1)
    X = _sample_box(rng, lower, upper, sample_count)
    Xi = _sample_box(rng, xlo, xhi, sample_count)
    Y = _sample_box(rng, lower, upper, sample_count)
    Yi = _sample_box(rng, xlo, xhi, sample_count)
    scale = 1e-4 * (upper - lower)
    Y[half:] = np.clip(X[half:] + scale * rng.standard_normal((sample_count - half, lower.size)),
                       lower, upper)
    Yi[half:] = np.clip(Xi[half:] + 1e-4 * (xhi - xlo)
                        * rng.standard_normal((sample_count - half, xlo.size)), xlo, xhi)

    def sens(eta, xi):
        J = assemble_jacobians(game, eta).J
        dU, _ = control_jacobian(xi[:n_s], xi[n_s:], reg)
        return J @ dU

    zeta = control_target(xlo[:n_s] + 1.0, xlo[n_s:], reg)
    emp_om = emp_j = 0.0
    for k in range(sample_count):
        d = np.linalg.norm(X[k] - Y[k])
        if d > 0:
            q = np.linalg.norm(game_map(game, X[k], zeta) - game_map(game, Y[k], zeta)) / d
            emp_om = max(emp_om, q)
        dj = np.hypot(d, np.linalg.norm(Xi[k] - Yi[k]))
        if dj > 0:
            q = np.linalg.norm(sens(X[k], Xi[k]) - sens(Y[k], Yi[k]), 2) / dj
            emp_j = max(emp_j, q)
    return LipschitzEstimates(L_J, L_Om, rho_omega(game), float(emp_j), float(emp_om))
