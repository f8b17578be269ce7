"""Flat numeric description of one closed-loop run, shared by both stepping backends."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..coordinator import incidence_pinv, state_bounds
from ..equilibrium import solve_ne
from ..regulation import control_target
from ..sensitivity import parameter_jacobian

KIND_CODES = {"constant": 0, "sinusoid": 1, "piecewise": 2}


@dataclass(eq=False)
class StepProblem:
    """Contiguous float64 arrays and scalars consumed by the stepping loop.

    The trace row layout is ``t, Q, c, v, u, beta, alpha, mu, lambda, err_G,
    err_balance, cost``; ``columns`` names each entry.
    """

    n_s: int
    n_e: int
    N: int
    dim: int
    dt: float
    n_steps: int
    snap_every: int
    # game
    A: np.ndarray
    A_pinv: np.ndarray
    B: np.ndarray
    R: np.ndarray
    A_pos: np.ndarray
    f_lin: np.ndarray
    f_quad: np.ndarray
    z_upper: np.ndarray
    jm_offdiag: np.ndarray
    J_N: np.ndarray
    k_lo: np.ndarray
    k_hi: np.ndarray
    alpha_lo: np.ndarray
    alpha_hi: np.ndarray
    eps: float
    tau: float
    gamma: float
    balance_tol: float
    balance_max_iter: int
    # regulation
    c_min: float
    c_max: float
    lift: float
    ratio: float
    q_bar: np.ndarray
    # arrivals
    kind: int
    amp: np.ndarray
    omega: np.ndarray
    phase: np.ndarray
    breakpoints: np.ndarray
    levels: np.ndarray
    rate: float
    gain: float
    # player costs
    p_lin: np.ndarray
    p_quad: np.ndarray
    c_lin: np.ndarray
    c_quad: np.ndarray
    # initial state
    Q0: np.ndarray
    c0: np.ndarray
    v0: np.ndarray
    eta0: np.ndarray
    columns: tuple

    @property
    def n_cols(self) -> int:
        return len(self.columns)


def trace_columns(scenario) -> tuple:
    g = scenario.graph
    st = [str(k) for k in g.stations]
    ed = [f"{k}-{kk}" for k, kk in g.edges]
    N = len(scenario.players)
    L = scenario.game.layout
    cols = ["t"] + [f"Q_{k}" for k in st] + [f"c_{k}" for k in st]
    cols += [f"v_{i + 1}_{k}" for i in range(N) for k in st]
    cols += [f"u_{k}" for k in st]
    cols += [f"beta_{i + 1}_{k}" for i in range(N) for k in st]
    cols += [f"alpha_{i + 1}_{e}" for i in range(N) for e in ed]
    cols += [f"mu_{j + 1}" for j in range(L.m)]
    cols += [f"lambda_{i + 1}_{j + 1}" for i in range(N) for j in range(L.p)]
    cols += ["err_G", "err_balance"] + [f"cost_{i + 1}" for i in range(N)]
    return tuple(cols)


def initial_game_state(scenario) -> np.ndarray:
    """Coordinator state at ``t = 0`` projected into ``K``."""
    game = scenario.game
    lo, hi = state_bounds(game)
    if isinstance(scenario.game_init, str) and scenario.game_init == "auto":
        zeta = control_target(scenario.plant0.Q, scenario.plant0.c, scenario.regulation)
        eta = solve_ne(game, zeta)
    elif isinstance(scenario.game_init, str):
        from ..game import sample_interior

        eta = sample_interior(game, np.random.default_rng(scenario.seed), mult_range=(0.1, 10.0))
    else:
        eta = np.array(scenario.game_init, dtype=float)
    return np.minimum(np.maximum(eta, lo), hi)


def build_problem(scenario, mu_cap=None, lambda_cap=None) -> StepProblem:
    """Flatten a scenario; ``mu_cap``/``lambda_cap`` override the configured caps."""
    game, reg, arr = scenario.game, scenario.regulation, scenario.arrivals
    L, cfg = game.layout, game.config
    if mu_cap is not None or lambda_cap is not None:
        game = game.with_config(type(cfg)(cfg.epsilon, cfg.tau, cfg.gamma, cfg.margin,
                                          cfg.mu_cap if mu_cap is None else mu_cap,
                                          cfg.lambda_cap if lambda_cap is None else lambda_cap))
    k_lo, k_hi = state_bounds(game)
    n, N = L.n_stations, L.n_players
    a = cfg.margin
    f64 = lambda x: np.array(x, dtype=np.float64, order="C")
    if arr.kind == "sinusoid":
        amp, omega, phase = arr.amplitude, arr.omega, arr.phase
    else:
        amp = omega = phase = np.zeros(n)
    if arr.kind == "piecewise":
        bp, lv = arr.breakpoints, arr.levels
    else:
        bp, lv = np.zeros(0), np.zeros((1, n))
    A = game.A
    players = game.players
    eta0 = initial_game_state(scenario)
    eta0 = np.minimum(np.maximum(eta0, k_lo), k_hi)
    from ..coordinator import BALANCE_MAX_ITER, BALANCE_TOL

    return StepProblem(
        n_s=n, n_e=L.n_edges, N=N, dim=L.dim, dt=float(scenario.dt), n_steps=scenario.n_steps,
        snap_every=max(int(scenario.oracle_every), 1),
        A=f64(A), A_pinv=f64(incidence_pinv(game.graph)), B=f64(game.B),
        R=f64(game.graph.routing_matrix), A_pos=f64(np.where(A > 0, A, 0.0)),
        f_lin=f64(game.f_lin), f_quad=f64(game.f_quad), z_upper=f64(game.z_upper),
        jm_offdiag=f64(game.jm_offdiag), J_N=f64(parameter_jacobian(game)),
        k_lo=f64(k_lo), k_hi=f64(k_hi),
        alpha_lo=f64(np.full(N, a)), alpha_hi=f64([sp.alpha_max - a for sp in players]),
        eps=cfg.epsilon, tau=cfg.tau, gamma=cfg.gamma,
        balance_tol=BALANCE_TOL, balance_max_iter=BALANCE_MAX_ITER,
        c_min=reg.c_min, c_max=reg.c_max, lift=reg.lift, ratio=reg.ratio, q_bar=f64(reg.q_bar),
        kind=KIND_CODES[arr.kind], amp=f64(amp), omega=f64(omega), phase=f64(phase),
        breakpoints=f64(bp), levels=f64(lv), rate=float(arr.rate), gain=float(arr.gain),
        p_lin=f64([sp.profit_linear for sp in players]),
        p_quad=f64([sp.profit_quadratic for sp in players]),
        c_lin=f64([sp.cost_linear for sp in players]),
        c_quad=f64([sp.cost_quadratic for sp in players]),
        Q0=f64(scenario.plant0.Q), c0=f64(scenario.plant0.c), v0=f64(scenario.plant0.v),
        eta0=f64(eta0), columns=trace_columns(scenario))
