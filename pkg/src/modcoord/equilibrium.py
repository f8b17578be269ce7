"""Reference equilibrium solver and checks of the (eps, tau) approximation bounds."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryState, LeftDomain, NoConvergence
from .game import Game, game_map, multiplier_map
from .sensitivity import jacobian_matrix

NE_TOL = 1e-10
MAX_ITER = 100_000
MAX_BACKTRACK = 60


def _residual(game, eta, zeta):
    try:
        return game_map(game, eta, zeta)
    except BoundaryState:
        return None


def _flow(game, eta, zeta, F, steps=200):
    """Explicit gradient-flow steps ``eta -= h F`` with ``h`` halved until the
    state stays interior and the residual drops."""
    h = 1.0
    nrm = np.linalg.norm(F)
    for _ in range(steps):
        for _ in range(MAX_BACKTRACK):
            cand = eta - h * F
            Fc = _residual(game, cand, zeta) if game.interior(cand) else None
            if Fc is not None and np.linalg.norm(Fc) < nrm:
                break
            h *= 0.5
        else:
            return None, None
        eta, F, nrm = cand, Fc, np.linalg.norm(Fc)
        h = min(2.0 * h, 1.0)
    return eta, F


def solve_ne(game: Game, zeta, init=None, tol=NE_TOL, max_iter=MAX_ITER) -> np.ndarray:
    """Nash equilibrium of the regularized game for a fixed service target.

    Damped Newton on the game map, whose Jacobian is ``J_M``. Steps are halved
    (at most 60 times) until the iterate stays strictly inside the barrier
    domain and the residual norm decreases; if that fails the solver falls
    back to a stretch of gradient-flow integration.

    Parameters
    ----------
    zeta : ndarray, shape (n_stations,)
    init : ndarray, optional
        Interior starting point; defaults to ``game.default_state(zeta)``.

    Returns
    -------
    ndarray
        The stacked equilibrium ``eta`` with ``|F|_inf <= tol``. Use
        ``GameState.from_vector`` for a structured view.
    """
    zeta = np.asarray(zeta, dtype=float)
    eta = game.default_state(zeta) if init is None else np.array(init, dtype=float)
    if not game.interior(eta):
        raise LeftDomain("initial point is not strictly interior")
    F = game_map(game, eta, zeta)
    stalls = 0
    for _ in range(max_iter):
        if np.max(np.abs(F)) <= tol:
            return _polish(game, eta, zeta, F)
        step = np.linalg.solve(jacobian_matrix(game, eta), -F)
        nrm = np.linalg.norm(F)
        s = 1.0
        for _ in range(MAX_BACKTRACK):
            cand = eta + s * step
            if game.interior(cand):
                Fc = _residual(game, cand, zeta)
                if Fc is not None and np.linalg.norm(Fc) <= (1.0 - 1e-4 * s) * nrm:
                    eta, F = cand, Fc
                    break
            s *= 0.5
        else:
            stalls += 1
            eta, F = _flow(game, eta, zeta, F)
            if eta is None or stalls > 20:
                raise LeftDomain("line search exhausted without leaving the barrier domain")
    raise NoConvergence(f"no convergence in {max_iter} iterations")


def _polish(game, eta, zeta, F, steps=2):
    # a couple of extra full steps buy the accuracy finite differencing needs
    for _ in range(steps):
        cand = eta + np.linalg.solve(jacobian_matrix(game, eta), -F)
        if not game.interior(cand):
            break
        Fc = _residual(game, cand, zeta)
        if Fc is None or np.linalg.norm(Fc) >= np.linalg.norm(F):
            break
        eta, F = cand, Fc
    return eta


def _quadratic_range(lin, quad, lo, hi):
    """Min and max of ``lin x + quad x^2`` (``quad > 0``) over ``[lo, hi]``."""
    f = lambda x: lin * x + quad * x * x
    vertex = np.clip(-lin / (2 * quad), lo, hi)
    return f(vertex), np.maximum(f(lo), f(hi))


@dataclass(frozen=True)
class BoundConstants:
    """Per-player constants of the approximation bounds."""

    delta: np.ndarray
    varsigma_h: float
    varsigma_g: float
    delta_prime: np.ndarray
    delta_dprime: np.ndarray
    grad_beta_sup: np.ndarray
    grad_alpha_sup: np.ndarray


def _psi(s, a):
    return np.log(s / a)


def bound_constants(game: Game) -> BoundConstants:
    """``delta_i``, ``varsigma_h``, ``varsigma_G``, ``delta'_i``, ``delta''_i``.

    ``delta_i`` is the spread of ``f_i`` over ``Z_i`` plus the barrier
    contribution; the quadratic costs give closed-form extremes per
    coordinate.
    """
    L, cfg = game.layout, game.config
    eps, tau, a = cfg.epsilon, cfg.tau, cfg.margin
    n_s, n_e = L.n_stations, L.n_edges
    lo, hi = game.z_bounds()
    fmin, fmax = _quadratic_range(game.f_lin, game.f_quad, lo, hi)
    gsup = np.maximum(np.abs(game.f_lin + 2 * game.f_quad * lo),
                      np.abs(game.f_lin + 2 * game.f_quad * hi))
    delta, gb, ga = [], [], []
    for i, sp in enumerate(game.players):
        sl = L.z(i)
        spread = fmax[sl].sum() - fmin[sl].sum()
        barrier = 2 * tau * (n_s * _psi(sp.beta_max, a) + n_e * _psi(sp.alpha_max, a))
        delta.append(spread + barrier)
        gb.append(gsup[L.beta(i)].max())
        ga.append(gsup[L.alpha(i)].max())
    delta = np.array(delta)
    vs_h = float(np.sqrt(np.max(eps * (delta + (L.p - 1) * tau))))
    vs_g = float(np.sqrt(np.max(L.n_players * eps * (delta + L.p * tau))))
    g_g = multiplier_map(vs_g, eps, tau)
    g_h = multiplier_map(vs_h, eps, tau)
    gb, ga = np.array(gb), np.array(ga)
    return BoundConstants(delta, vs_h, vs_g, gb + 2 * n_s * (g_g + g_h), ga + 2 * n_s * g_h, gb, ga)


def interior_floor(tau, x_max, slope):
    """Distance from the box faces that the barrier enforces given a gradient bound."""
    return tau * x_max / (2 * tau + slope * x_max)


@dataclass
class ApproximationReport:
    max_G: float
    max_h: float
    mu_range: tuple
    lambda_range: tuple
    beta_range: tuple
    alpha_range: tuple
    constants: BoundConstants
    p3_gap: float | None = None
    p3_bound: float | None = None
    flags: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


def _balanced_candidates(game, i, beta_hat, points_per_axis):
    from .coordinator import balance_project
    from .errors import Infeasible

    sp = game.players[i]
    a = game.config.margin
    axis = np.linspace(a, sp.alpha_max - a, points_per_axis)
    out = []
    for alpha in itertools.product(axis, repeat=game.layout.n_edges):
        try:
            out.append(balance_project(game.graph, beta_hat, np.array(alpha), a, sp.alpha_max - a))
        except Infeasible:
            continue
    return out


def p3_check(game: Game, eta, zeta, points_per_axis=3):
    """Worst gap ``f_i(z~) - min f_i(comparison)`` over feasible comparison points.

    For player ``i`` the comparison delivery vector is the one that closes
    the coupling constraint given the others' equilibrium deliveries; its
    transfers come from a coarse grid mapped onto the balanced set. Players
    whose comparison vector leaves the box are skipped. Returns
    ``(gap, bound)`` or ``(None, bound)`` if no player has a comparison point.
    """
    L, cfg = game.layout, game.config
    tau, a = cfg.tau, cfg.margin
    n_s, n_e = L.n_stations, L.n_edges
    costs = game.costs(eta)
    worst = None
    bound = -np.inf
    for i, sp in enumerate(game.players):
        others = sum(eta[L.beta(j)] for j in range(L.n_players) if j != i)
        beta_hat = np.asarray(zeta) - (others if L.n_players > 1 else 0.0)
        b_i = tau * (L.p + L.m) + 2 * tau * (n_s * _psi(sp.beta_max, a) + n_e * _psi(sp.alpha_max, a))
        bound = max(bound, b_i)
        if np.any(beta_hat < a) or np.any(beta_hat > sp.beta_max - a):
            continue
        cands = _balanced_candidates(game, i, beta_hat, points_per_axis)
        if not cands:
            continue
        best = min(float(np.sum(sp.cost(al)) - np.sum(sp.profit(beta_hat))) for al in cands)
        gap = costs[i] - best - b_i
        worst = gap if worst is None else max(worst, gap)
    return worst, bound


def approximation_report(game: Game, eta, zeta, check_p3=False) -> ApproximationReport:
    """Compare an equilibrium against the approximation bounds.

    Flags: ``P1`` primal point inside ``Z``, ``P2`` constraint violations within
    ``varsigma``, ``P3`` cost suboptimality (optional, small instances only),
    ``P4`` multiplier ranges, ``P5`` interior primal boxes. Each check allows
    a slack of ``1e-9``.
    """
    L, cfg = game.layout, game.config
    eps, tau = cfg.epsilon, cfg.tau
    eta = np.asarray(eta, dtype=float)
    k = bound_constants(game)
    slack = 1e-9
    G = game.coupling(eta, zeta)
    h = game.balance(eta)
    mu, lam = eta[L.mu], eta[L.lam_all]
    beta = np.concatenate([eta[L.beta(i)] for i in range(L.n_players)])
    alpha = np.concatenate([eta[L.alpha(i)] for i in range(L.n_players)])

    flags = {}
    z = eta[L.primal]
    flags["P1"] = bool(np.all(z > 0) and np.all(z < game.z_upper))
    flags["P2"] = bool(np.max(np.abs(G)) <= k.varsigma_g + slack
                       and np.max(np.abs(h)) <= k.varsigma_h + slack)
    mu_lo, mu_hi = multiplier_map(-k.varsigma_g, eps, tau), multiplier_map(k.varsigma_g, eps, tau)
    la_lo, la_hi = multiplier_map(-k.varsigma_h, eps, tau), multiplier_map(k.varsigma_h, eps, tau)
    flags["P4"] = bool(np.all(mu >= mu_lo - slack) and np.all(mu <= mu_hi + slack)
                       and np.all(lam >= la_lo - slack) and np.all(lam <= la_hi + slack))
    ok5 = True
    for i, sp in enumerate(game.players):
        fb = interior_floor(tau, sp.beta_max, k.delta_prime[i])
        fa = interior_floor(tau, sp.alpha_max, k.delta_dprime[i])
        b, al = eta[L.beta(i)], eta[L.alpha(i)]
        ok5 &= bool(np.all(b >= fb - slack) and np.all(b <= sp.beta_max - fb + slack)
                    and np.all(al >= fa - slack) and np.all(al <= sp.alpha_max - fa + slack))
    flags["P5"] = ok5
    gap = bound = None
    if check_p3:
        gap, bound = p3_check(game, eta, zeta)
        flags["P3"] = gap is None or gap <= slack
    return ApproximationReport(
        float(np.max(np.abs(G))), float(np.max(np.abs(h))),
        (float(mu.min()), float(mu.max())), (float(lam.min()), float(lam.max())),
        (float(beta.min()), float(beta.max())), (float(alpha.min()), float(alpha.max())),
        k, gap, bound, flags)
