"""Invariant suite run by the ``check`` command."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coordinator import balance_project
from ..equilibrium import approximation_report, solve_ne
from ..game import game_map, lagrangian_value, monotonicity_certificate, rho_omega, sample_interior
from ..regulation import control_target
from ..sensitivity import assemble_jacobians, jacobian_matrix
from .ledger import constants_ledger
from .simulate import oracle_residual, run_closed_loop


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def fd_game_map(game, eta, zeta, h=1e-6):
    """Game map by central differences of the players' Lagrangians and ``H``."""
    L = game.layout
    out = np.empty(L.dim)

    def partial(which, k, sign):
        step = h * max(1.0, abs(eta[k]))
        e = np.zeros(L.dim)
        e[k] = step
        return sign * (lagrangian_value(game, eta + e, zeta, which)
                       - lagrangian_value(game, eta - e, zeta, which)) / (2 * step)

    for i in range(L.n_players):
        for k in range(L.z(i).start, L.z(i).stop):
            out[k] = partial(i, k, 1.0)
        for k in range(L.lam(i).start, L.lam(i).stop):
            out[k] = partial(i, k, -1.0)
    for k in range(L.mu.start, L.mu.stop):
        out[k] = partial("operator", k, -1.0)
    return out


def fd_jacobian(game, eta, zeta, h=1e-6):
    L = game.layout
    J = np.empty((L.dim, L.dim))
    for k in range(L.dim):
        step = h * max(1.0, abs(eta[k]))
        e = np.zeros(L.dim)
        e[k] = step
        J[:, k] = (game_map(game, eta + e, zeta) - game_map(game, eta - e, zeta)) / (2 * step)
    return J


def run_checks(scenario, seed=0, samples=200, horizon=5.0) -> list:
    """Run every invariant on ``scenario``; returns one :class:`CheckResult` per item."""
    game, reg = scenario.game, scenario.regulation
    L = game.layout
    rng = np.random.default_rng(seed)
    out = []
    zeta0 = control_target(scenario.plant0.Q, scenario.plant0.c, reg)

    worst = 0.0
    for _ in range(10):
        eta = sample_interior(game, rng, mult_range=(0.1, 10.0))
        worst = max(worst, _rel(game_map(game, eta, zeta0), fd_game_map(game, eta, zeta0)))
    out.append(CheckResult("game map vs finite differences", worst <= 1e-6, f"max rel err {worst:.2e}"))

    worst = 0.0
    for _ in range(5):
        eta = sample_interior(game, rng, mult_range=(0.1, 10.0))
        worst = max(worst, _rel(jacobian_matrix(game, eta), fd_jacobian(game, eta, zeta0)))
    out.append(CheckResult("J_M vs finite differences", worst <= 1e-6, f"max rel err {worst:.2e}"))

    cert = monotonicity_certificate(game, samples * 10, seed=seed, zeta=zeta0)
    rho = rho_omega(game)
    out.append(CheckResult("strong monotonicity", cert >= rho - 1e-9,
                           f"certificate {cert:.4g} vs rho_Omega {rho:.4g}"))

    eta_ne = solve_ne(game, zeta0)
    res = float(np.max(np.abs(game_map(game, eta_ne, zeta0))))
    out.append(CheckResult("equilibrium residual", res <= 1e-10, f"|F|_inf {res:.2e}"))

    J = assemble_jacobians(game, eta_ne).J
    d = 1e-5
    worst = 0.0
    for k in range(L.n_stations):
        e = np.zeros(L.n_stations)
        e[k] = d
        fd = (solve_ne(game, zeta0 + e, init=eta_ne) - solve_ne(game, zeta0 - e, init=eta_ne)) / (2 * d)
        worst = max(worst, _rel(J[:, k], fd))
    out.append(CheckResult("sensitivity vs finite differences", worst <= 1e-4, f"max rel err {worst:.2e}"))

    rep = approximation_report(game, eta_ne, zeta0, check_p3=L.n_stations <= 3 and L.n_players <= 2)
    out.append(CheckResult("approximation bounds", rep.passed,
                           ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in rep.flags.items())))

    worst = 0.0
    a = scenario.config.margin
    for i, sp in enumerate(game.players):
        for _ in range(20):
            beta = rng.uniform(a, sp.beta_max - a, L.n_stations)
            al = balance_project(scenario.graph, beta, rng.uniform(0, sp.alpha_max, L.n_edges),
                                 a, sp.alpha_max - a)
            worst = max(worst, float(np.max(np.abs(game.A @ al - game.B @ beta))))
    out.append(CheckResult("balance projection feasibility", worst <= 1e-10, f"max residual {worst:.2e}"))

    Q = rng.uniform(0, 5 * float(np.max(reg.q_bar)) + 5, (samples * 10, L.n_stations))
    c = rng.uniform(reg.c_min, reg.c_max, Q.shape)
    U = np.array([control_target(q, cc, reg) for q, cc in zip(Q, c)])
    lo, hi = reg.u_range
    ok = bool(np.all(U >= lo) and np.all(U <= hi))
    out.append(CheckResult("controller range", ok, f"U in [{U.min():.4g}, {U.max():.4g}] vs [{lo:.4g}, {hi:.4g}]"))

    led = constants_ledger(scenario, sample_count=samples * 10, seed=seed)
    finite = all(np.isfinite(v) for v in led.to_dict().values())
    out.append(CheckResult("ledger constants finite", finite,
                           f"theta={led.theta:.3g} (below one: {led.theta_below_one})"))
    out.append(CheckResult("Lipschitz samples within analytic bounds",
                           led.L_Omega_empirical <= led.L_Omega and led.L_J_empirical <= led.L_J,
                           f"L_Omega {led.L_Omega_empirical:.3g} <= {led.L_Omega:.3g}, "
                           f"L_J {led.L_J_empirical:.3g} <= {led.L_J:.3g}"))

    short = scenario.with_options(horizon=min(horizon, scenario.horizon))
    tr = run_closed_loop(short)
    v = tr.block("v_").reshape(len(tr), L.n_players, L.n_stations)
    drift = float(np.max(np.abs(np.diff(v.sum(axis=2), axis=0)))) if len(tr) > 1 else 0.0
    out.append(CheckResult("vehicle totals conserved", drift <= 1e-12, f"max per-step drift {drift:.2e}"))
    tr2 = run_closed_loop(short)
    same = np.array_equal(tr.data, tr2.data, equal_nan=True)
    out.append(CheckResult("deterministic replay", same, "identical traces" if same else "traces differ"))
    orc = oracle_residual(short, tr)
    out.append(CheckResult("oracle samples stationary", orc <= 1e-8, f"max |F| {orc:.2e}"))
    return out
