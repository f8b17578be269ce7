"""Constants behind the tracking and regulation guarantees, computed from a scenario."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..equilibrium import bound_constants, interior_floor
from ..errors import DeltaMaxUndefined
from ..game import multiplier_map
from ..regulation import derivative_bounds
from ..sensitivity import lipschitz_estimates, parameter_jacobian


@dataclass(frozen=True)
class ConstantsLedger:
    rho_Omega: float
    L_J: float
    L_Omega: float
    L_J_empirical: float
    L_Omega_empirical: float
    D_U1: float
    D_U2: float
    delta_c: float
    delta_xi: float
    delta_v: float
    varsigma_G: float
    varsigma_h: float
    Delta_mu: float
    Delta_lambda: float
    d_beta: float
    d_alpha: float
    d_mu: float
    d_lambda: float
    delta_beta_min: float
    delta_beta_max: float
    delta_alpha_min: float
    delta_alpha_max: float
    delta_mu_min: float
    delta_mu_max: float
    delta_lambda_min: float
    delta_lambda_max: float
    gamma: float
    theta: float
    theta_below_one: bool
    theta_min: float
    gamma_at_theta_min: float
    Delta_min: float
    Delta_max: float
    lemma4_product: float

    @property
    def regulation_radius(self) -> float:
        return max(self.Delta_min, self.Delta_max)

    def to_dict(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                for k, v in asdict(self).items()}


def theta(gamma, rho, L_omega, L_j, d_u1, delta_xi) -> float:
    """Contraction factor of the coordinator for gain ``gamma``."""
    x = L_j * d_u1 * delta_xi
    val = 1.0 - gamma * rho + (gamma * L_omega) ** 2 + x ** 2 + (1.0 + gamma * L_omega) * x
    return float(np.sqrt(val)) if val >= 0 else 0.0


def theta_minimizer(rho, L_omega, L_j, d_u1, delta_xi):
    """Gain minimizing ``theta`` (the radicand is quadratic in ``gamma``) and the minimum."""
    x = L_j * d_u1 * delta_xi
    g = max((rho - L_omega * x) / (2.0 * L_omega ** 2), 0.0)
    return g, theta(g, rho, L_omega, L_j, d_u1, delta_xi)


def regulation_bounds(varsigma_g, slack_a, c_min, q_bar_max):
    """Steady-state queue error bounds ``(Delta_min, Delta_max)``.

    ``slack_a`` is ``beta_max - c_max - a``.
    """
    ratio = 2.0 * varsigma_g / slack_a
    if ratio >= 1.0:
        raise DeltaMaxUndefined(
            f"equilibrium approximation error {varsigma_g:.4g} too large for capacity slack {slack_a:.4g}")
    d_min = np.log1p(ratio * (1.0 + slack_a / c_min * np.exp(q_bar_max)))
    d_max = -np.log1p(-ratio)
    return float(d_min), float(d_max)


def _box_sup(coef, lo, hi):
    """Row-wise supremum of ``coef @ x`` over the box ``[lo, hi]``."""
    return np.sum(np.maximum(coef * lo, coef * hi), axis=1)


def appendix_constants(scenario) -> dict:
    """All constants that do not need sampling: bounds, boxes and the region ``Y``."""
    game, reg, cfg = scenario.game, scenario.regulation, scenario.config
    L = game.layout
    eps, tau, a = cfg.epsilon, cfg.tau, cfg.margin
    n_s = L.n_stations
    N = L.n_players
    k = bound_constants(game)
    d_u1, d_u2 = derivative_bounds(reg)
    delta_c = scenario.arrivals.rate_bound
    u_lo, u_hi = N * a, reg.beta_max - N * a
    gap = max(reg.c_max - u_lo, u_hi - reg.c_min)
    delta_xi = np.sqrt(n_s) * (delta_c + gap)
    min_rho = min(min(sp.rho, sp.rho_prime) for sp in game.players)
    jn = np.linalg.norm(parameter_jacobian(game), 2)
    delta_v = jn * d_u1 * delta_xi / (eps * min_rho)
    g_g = multiplier_map(k.varsigma_g, eps, tau)
    g_h = multiplier_map(k.varsigma_h, eps, tau)
    Delta_mu = g_g + delta_v
    Delta_lambda = g_h + delta_v
    d_beta = float(k.grad_beta_sup.max() + 2 * n_s * (Delta_mu + Delta_lambda))
    d_alpha = float(k.grad_alpha_sup.max() + 2 * n_s * Delta_lambda)
    d_mu = max(reg.beta_max - N * a - reg.c_min / 2, reg.beta_max - 2 * N * a) + delta_v
    zlo, zhi = game.z_bounds()
    d_lambda = float(np.max(_box_sup(game.Hz, zlo, zhi))) + delta_v

    lower = np.empty(L.dim)
    upper = np.empty(L.dim)
    b_min, a_min = [], []
    for i, sp in enumerate(game.players):
        fb = interior_floor(tau, sp.beta_max, d_beta)
        fa = interior_floor(tau, sp.alpha_max, d_alpha)
        lower[L.beta(i)], upper[L.beta(i)] = fb, sp.beta_max - fb
        lower[L.alpha(i)], upper[L.alpha(i)] = fa, sp.alpha_max - fa
        b_min.append(fb)
        a_min.append(fa)
    mu_min = tau / (eps + d_mu)
    lam_min = tau / (eps + d_lambda)
    lower[L.mu], upper[L.mu] = mu_min, Delta_mu
    lower[L.lam_all], upper[L.lam_all] = lam_min, Delta_lambda
    bmax = max(sp.beta_max for sp in game.players)
    amax = max(sp.alpha_max for sp in game.players)
    return dict(
        bounds=k, D_U1=d_u1, D_U2=d_u2, delta_c=delta_c, delta_xi=float(delta_xi),
        delta_v=float(delta_v), Delta_mu=float(Delta_mu), Delta_lambda=float(Delta_lambda),
        d_beta=d_beta, d_alpha=d_alpha, d_mu=float(d_mu), d_lambda=d_lambda,
        delta_beta_min=float(min(b_min)), delta_beta_max=float(bmax - min(b_min)),
        delta_alpha_min=float(min(a_min)), delta_alpha_max=float(amax - min(a_min)),
        delta_mu_min=float(mu_min), delta_mu_max=float(Delta_mu),
        delta_lambda_min=float(lam_min), delta_lambda_max=float(Delta_lambda),
        region=(lower, upper), min_rho=min_rho)


def constants_ledger(scenario, sample_count=10_000, seed=None) -> ConstantsLedger:
    """Evaluate every constant used by the tracking and regulation guarantees.

    Raises
    ------
    DeltaMaxUndefined
        The upper queue-error bound has no finite value for this scenario.
    """
    game, reg, cfg = scenario.game, scenario.regulation, scenario.config
    c = appendix_constants(scenario)
    k = c["bounds"]
    lower, upper = c["region"]
    seed = scenario.seed if seed is None else seed
    lip = lipschitz_estimates(game, reg, lower, upper, c["D_U1"], c["D_U2"],
                              k.varsigma_g, k.varsigma_h, sample_count=sample_count, seed=seed)
    th = theta(cfg.gamma, lip.rho_Omega, lip.L_Omega, lip.L_J, c["D_U1"], c["delta_xi"])
    g_star, th_min = theta_minimizer(lip.rho_Omega, lip.L_Omega, lip.L_J, c["D_U1"], c["delta_xi"])
    slack_a = reg.beta_max - reg.c_max - cfg.margin
    d_min, d_max = regulation_bounds(k.varsigma_g, slack_a, reg.c_min, float(np.max(reg.q_bar)))
    return ConstantsLedger(
        rho_Omega=lip.rho_Omega, L_J=lip.L_J, L_Omega=lip.L_Omega,
        L_J_empirical=lip.L_J_empirical, L_Omega_empirical=lip.L_Omega_empirical,
        D_U1=c["D_U1"], D_U2=c["D_U2"], delta_c=c["delta_c"], delta_xi=c["delta_xi"],
        delta_v=c["delta_v"], varsigma_G=k.varsigma_g, varsigma_h=k.varsigma_h,
        Delta_mu=c["Delta_mu"], Delta_lambda=c["Delta_lambda"], d_beta=c["d_beta"],
        d_alpha=c["d_alpha"], d_mu=c["d_mu"], d_lambda=c["d_lambda"],
        delta_beta_min=c["delta_beta_min"], delta_beta_max=c["delta_beta_max"],
        delta_alpha_min=c["delta_alpha_min"], delta_alpha_max=c["delta_alpha_max"],
        delta_mu_min=c["delta_mu_min"], delta_mu_max=c["delta_mu_max"],
        delta_lambda_min=c["delta_lambda_min"], delta_lambda_max=c["delta_lambda_max"],
        gamma=cfg.gamma, theta=th, theta_below_one=bool(th < 1.0), theta_min=th_min,
        gamma_at_theta_min=g_star, Delta_min=d_min, Delta_max=d_max,
        lemma4_product=cfg.epsilon * c["min_rho"])
