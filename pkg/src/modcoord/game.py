"""Barrier-regularized Nash game among the vehicle-sharing companies.

The joint state is the flat vector ``eta = (z^1, ..., z^N, mu, lam^1, ..., lam^N)``
where ``z^i = (beta^i, alpha^i)`` stacks player ``i``'s delivery rates (one
per station) and empty-vehicle transfer rates (one per directed edge),
``mu`` holds the operator's multipliers of the coupling constraint and
``lam^i`` player ``i``'s multipliers of its vehicle-balance constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolated, BoundaryState, DimensionMismatch


@dataclass(frozen=True)
class PlayerSpec:
    """One company: box ceilings plus quadratic profit and transfer cost.

    Profit per station is ``profit_linear * beta - profit_quadratic * beta**2``
    and cost per directed edge ``cost_linear * alpha + cost_quadratic * alpha**2``.
    """

    beta_max: float
    alpha_max: float
    profit_linear: float = 1.0
    profit_quadratic: float = 0.5
    cost_linear: float = 0.0
    cost_quadratic: float = 0.5

    def __post_init__(self):
        if not (self.profit_quadratic > 0 and self.cost_quadratic > 0):
            raise AssumptionViolated("profit must be strongly concave and cost strongly convex")
        if not (self.beta_max > 0 and self.alpha_max > 0):
            raise AssumptionViolated("box ceilings must be positive")

    @property
    def rho(self) -> float:
        """Strong concavity modulus of the profit."""
        return 2.0 * self.profit_quadratic

    @property
    def rho_prime(self) -> float:
        """Strong convexity modulus of the transfer cost."""
        return 2.0 * self.cost_quadratic

    def profit(self, beta):
        return self.profit_linear * beta - self.profit_quadratic * beta ** 2

    def cost(self, alpha):
        return self.cost_linear * alpha + self.cost_quadratic * alpha ** 2


@dataclass(frozen=True)
class GameConfig:
    """Regularization weights, coordinator gain and multiplier boxes.

    ``gamma`` is the coordinator's step gain. ``mu_cap`` and ``lambda_cap``
    are the upper faces of the multiplier boxes; they are filled in from the
    constants ledger before a closed-loop run.
    """

    epsilon: float
    tau: float
    gamma: float = 1.0
    margin: float = 0.1
    mu_cap: float | None = None
    lambda_cap: float | None = None

    def __post_init__(self):
        if not (self.epsilon > 0 and self.tau >= 0 and self.gamma > 0 and self.margin > 0):
            raise AssumptionViolated(
                f"need epsilon, gamma, margin > 0 and tau >= 0, got {self}")


@dataclass(frozen=True)
class GameLayout:
    n_stations: int
    n_edges: int
    n_players: int

    @property
    def n_i(self) -> int:
        return self.n_stations + self.n_edges

    @property
    def n(self) -> int:
        return self.n_players * self.n_i

    @property
    def m(self) -> int:
        return 2 * self.n_stations

    @property
    def p(self) -> int:
        return 2 * self.n_stations

    @property
    def dim(self) -> int:
        return self.n + self.m + self.n_players * self.p

    def z(self, i) -> slice:
        return slice(i * self.n_i, (i + 1) * self.n_i)

    def beta(self, i) -> slice:
        return slice(i * self.n_i, i * self.n_i + self.n_stations)

    def alpha(self, i) -> slice:
        return slice(i * self.n_i + self.n_stations, (i + 1) * self.n_i)

    @property
    def mu(self) -> slice:
        return slice(self.n, self.n + self.m)

    def lam(self, i) -> slice:
        start = self.n + self.m + i * self.p
        return slice(start, start + self.p)

    @property
    def lam_all(self) -> slice:
        return slice(self.n + self.m, self.dim)

    @property
    def primal(self) -> slice:
        return slice(0, self.n)


@dataclass(eq=False)
class GameState:
    """Structured view of ``eta``."""

    beta: np.ndarray
    alpha: np.ndarray
    mu: np.ndarray
    lam: np.ndarray

    def to_vector(self) -> np.ndarray:
        z = np.hstack([self.beta, self.alpha]).ravel()
        return np.concatenate([z, self.mu, self.lam.ravel()])

    @classmethod
    def from_vector(cls, eta, layout: GameLayout) -> "GameState":
        eta = np.asarray(eta, dtype=float)
        if eta.shape != (layout.dim,):
            raise DimensionMismatch(f"eta has shape {eta.shape}, expected ({layout.dim},)")
        N, n = layout.n_players, layout.n_stations
        z = eta[:layout.n].reshape(N, layout.n_i)
        return cls(z[:, :n].copy(), z[:, n:].copy(), eta[layout.mu].copy(),
                   eta[layout.lam_all].reshape(N, layout.p).copy())

    def __eq__(self, other):
        if not isinstance(other, GameState):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("beta", "alpha", "mu", "lam"))


@dataclass(eq=False)
class Game:
    """The regularized game on a station graph.

    Caches the affine constraint data (``G`` and ``h`` are affine, so their
    Jacobians are constant) and per-coordinate cost coefficients.
    """

    graph: object
    players: tuple
    config: GameConfig
    layout: GameLayout = field(init=False)

    def __post_init__(self):
        self.players = tuple(self.players)
        g = self.graph
        N = len(self.players)
        if N < 1:
            raise AssumptionViolated("need at least one player")
        if len({sp.beta_max for sp in self.players}) > 1:
            raise AssumptionViolated("all players must share the same delivery ceiling beta_max")
        self.layout = L = GameLayout(g.n_stations, g.n_edges, N)
        n_s, n_e = g.n_stations, g.n_edges
        self.A = np.asarray(g.incidence)
        self.B = g.balance_matrix

        lin, quad, upper = [], [], []
        for sp in self.players:
            lin += [np.full(n_s, -sp.profit_linear), np.full(n_e, sp.cost_linear)]
            quad += [np.full(n_s, sp.profit_quadratic), np.full(n_e, sp.cost_quadratic)]
            upper += [np.full(n_s, sp.beta_max), np.full(n_e, sp.alpha_max)]
        self.f_lin = np.concatenate(lin)
        self.f_quad = np.concatenate(quad)
        self.z_upper = np.concatenate(upper)

        # dG/dz (m x n) and dh/dz (N p x n, block diagonal)
        Gz = np.zeros((L.m, L.n))
        Hz = np.zeros((N * L.p, L.n))
        I = np.eye(n_s)
        for i in range(N):
            Gz[:n_s, L.beta(i)] = I
            Gz[n_s:, L.beta(i)] = -I
            rows = slice(i * L.p, (i + 1) * L.p)
            Hz[rows, L.beta(i)] = np.vstack([-self.B, self.B])
            Hz[rows, L.alpha(i)] = np.vstack([self.A, -self.A])
        self.Gz, self.Hz = Gz, Hz

        d = L.dim
        skew = np.zeros((d, d))
        skew[L.primal, L.mu] = Gz.T
        skew[L.primal, L.lam_all] = Hz.T
        skew[L.mu, L.primal] = -Gz
        skew[L.lam_all, L.primal] = -Hz
        self.jm_offdiag = skew

    @property
    def n_players(self) -> int:
        return len(self.players)

    def with_config(self, config: GameConfig) -> "Game":
        return Game(self.graph, self.players, config)

    def z_bounds(self, margin=None):
        """Lower and upper faces of ``Z`` (``[a, max - a]`` per coordinate)."""
        a = self.config.margin if margin is None else margin
        return np.full(self.layout.n, a), self.z_upper - a

    def coupling(self, eta, zeta) -> np.ndarray:
        """``G(beta, zeta) = [sum_i beta^i - zeta; zeta - sum_i beta^i]``."""
        return self.Gz @ eta[self.layout.primal] + np.concatenate([-zeta, zeta])

    def balance(self, eta) -> np.ndarray:
        """Stacked ``h^i(z^i) = [A alpha^i - b^i; -(A alpha^i - b^i)]`` for all players."""
        return self.Hz @ eta[self.layout.primal]

    def costs(self, eta) -> np.ndarray:
        """Per-player net cost ``f_i``."""
        z = eta[self.layout.primal]
        terms = (self.f_lin * z + self.f_quad * z ** 2).reshape(self.n_players, -1)
        return terms.sum(axis=1)

    def interior(self, eta) -> bool:
        L = self.layout
        z = eta[L.primal]
        return bool(np.all(z > 0) and np.all(z < self.z_upper) and np.all(eta[L.n:] > 0))

    def default_state(self, zeta) -> np.ndarray:
        """Deterministic interior starting point for equilibrium solves."""
        L = self.layout
        eta = np.empty(L.dim)
        a = self.config.margin
        for i, sp in enumerate(self.players):
            eta[L.beta(i)] = np.clip(np.asarray(zeta) / self.n_players, a, sp.beta_max - a)
            eta[L.alpha(i)] = sp.alpha_max / 2.0
        eta[L.n:] = multiplier_map(0.0, self.config.epsilon, self.config.tau)
        return eta


def player_cost(spec: PlayerSpec, beta, alpha) -> float:
    """Net cost ``sum_edges C(alpha) - sum_stations B(beta)`` of one player."""
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if beta.ndim != 1 or alpha.ndim != 1:
        raise DimensionMismatch("beta and alpha must be one-dimensional")
    return float(np.sum(spec.cost(alpha)) - np.sum(spec.profit(beta)))


def _psi(s, a):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, np.log(np.where(s > 0, s, 1.0) / a), -np.inf)


def lagrangian_value(game: Game, eta, zeta, which) -> float:
    """Regularized Lagrangian of player ``which`` (0-based) or, for
    ``which="operator"``, the operator's objective ``H``.

    Outside the barrier domain the value is ``+inf`` when a primal barrier is
    violated and ``-inf`` when a multiplier barrier is violated.
    """
    eta = np.asarray(eta, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    L, cfg = game.layout, game.config
    a, eps, tau = cfg.margin, cfg.epsilon, cfg.tau
    mu = eta[L.mu]
    G = game.coupling(eta, zeta)
    mu_bar = np.sum(_psi(mu, a)) if tau > 0 else 0.0
    H = float(mu @ G - 0.5 * eps * mu @ mu + tau * mu_bar)
    if isinstance(which, str):
        if which not in ("operator", "H"):
            raise ValueError(f"unknown objective {which!r}")
        return H if np.all(mu > 0) or tau == 0 else -np.inf

    i = int(which)
    sp = game.players[i]
    beta, alpha, lam = eta[L.beta(i)], eta[L.alpha(i)], eta[L.lam(i)]
    h = game.balance(eta)[i * L.p:(i + 1) * L.p]
    if tau > 0:
        if (np.any(beta <= 0) or np.any(beta >= sp.beta_max)
                or np.any(alpha <= 0) or np.any(alpha >= sp.alpha_max)):
            return np.inf
        if np.any(mu <= 0) or np.any(lam <= 0):
            return -np.inf
    val = player_cost(sp, beta, alpha) + mu @ G + lam @ h
    if tau > 0:
        val -= tau * np.sum(_psi(beta, a) + _psi(sp.beta_max - beta, a))
        val -= tau * np.sum(_psi(alpha, a) + _psi(sp.alpha_max - alpha, a))
        val += tau * (np.sum(_psi(mu, a)) + np.sum(_psi(lam, a)))
    val -= 0.5 * eps * (mu @ mu + lam @ lam)
    return float(val)


def game_map(game: Game, eta, zeta) -> np.ndarray:
    """Stacked partial gradients ``[grad_z L_i; -grad_mu H; -grad_lam L_i]``.

    Raises
    ------
    BoundaryState
        If a barrier argument is not strictly positive.
    """
    eta = np.asarray(eta, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    L, cfg = game.layout, game.config
    eps, tau = cfg.epsilon, cfg.tau
    if eta.shape != (L.dim,) or zeta.shape != (L.n_stations,):
        raise DimensionMismatch(f"eta {eta.shape}, zeta {zeta.shape}")
    z, mu, lam = eta[L.primal], eta[L.mu], eta[L.lam_all]
    gap = game.z_upper - z
    if tau > 0 and (np.any(z <= 0) or np.any(gap <= 0) or np.any(eta[L.n:] <= 0)):
        raise BoundaryState("game map evaluated outside the barrier domain")
    out = np.empty(L.dim)
    out[L.primal] = game.f_lin + 2.0 * game.f_quad * z + game.Gz.T @ mu + game.Hz.T @ lam
    out[L.mu] = eps * mu - game.coupling(eta, zeta)
    out[L.lam_all] = eps * lam - game.balance(eta)
    if tau > 0:
        out[L.primal] += tau / gap - tau / z
        out[L.n:] -= tau / eta[L.n:]
    return out


def multiplier_map(s, epsilon, tau):
    """Closed-form maximizer ``g(s) = (s + sqrt(s^2 + 4 eps tau)) / (2 eps)``.

    Solves ``eps g - s - tau / g = 0`` for ``tau > 0``; reduces to
    ``max(s, 0) / eps`` when ``tau = 0``.
    """
    s = np.asarray(s, dtype=float)
    root = np.sqrt(s * s + 4.0 * epsilon * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        # the second branch avoids cancellation for s << 0
        neg = np.where(root - s > 0, 2.0 * tau / (root - s), 0.0)
    out = np.where(s >= 0, (s + root) / (2.0 * epsilon), neg)
    return out if out.ndim else float(out)


def sample_interior(game: Game, rng, size=None, mult_range=(1e-2, 1e2)):
    """Uniform primal coordinates in the open box, log-uniform multipliers."""
    L = game.layout
    shape = (L.dim,) if size is None else (size, L.dim)
    out = np.empty(shape)
    u = rng.uniform(0.02, 0.98, size=shape[:-1] + (L.n,))
    out[..., :L.n] = u * game.z_upper
    lo, hi = np.log(mult_range[0]), np.log(mult_range[1])
    out[..., L.n:] = np.exp(rng.uniform(lo, hi, size=shape[:-1] + (L.dim - L.n,)))
    return out


def monotonicity_certificate(game: Game, sample_count, seed=0, zeta=None) -> float:
    """Smallest sampled ratio ``<F(x) - F(y), x - y> / |x - y|^2`` of the game map.

    Pairs are drawn from the open primal box times positive multipliers;
    near-coincident pairs are redrawn.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    rng = np.random.default_rng(seed)
    if zeta is None:
        zeta = np.ones(game.layout.n_stations)
    best = np.inf
    done = 0
    while done < sample_count:
        x = sample_interior(game, rng)
        y = sample_interior(game, rng)
        d = x - y
        nrm2 = d @ d
        if nrm2 < 1e-20:
            continue
        ratio = (game_map(game, x, zeta) - game_map(game, y, zeta)) @ d / nrm2
        best = min(best, ratio)
        done += 1
    return float(best)


def rho_omega(game: Game) -> float:
    """Strong monotonicity modulus ``min(min_i(rho_i, rho'_i), eps)``."""
    return min(min(min(sp.rho, sp.rho_prime) for sp in game.players), game.config.epsilon)
