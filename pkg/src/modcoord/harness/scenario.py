"""Scenario container and its YAML representation.

Schema (all keys required unless marked optional)::

    name: ring3                       # optional
    stations: [1, 2, 3]
    routing:                          # [origin, destination, fraction]
      - [1, 2, 0.5]
      - ...
    arrivals:
      kind: constant | sinusoid | piecewise
      base: [..]                      # initial rates, one per station
      c_min: 1.0
      c_max: 2.5
      amplitude/omega/phase: [..]     # sinusoid only (phase optional)
      breakpoints/levels/rate/gain    # piecewise only (gain optional)
    players:
      - beta_max: 3.0
        alpha_max: 3.0
        profit: {linear: 1.0, quadratic: 0.5}   # optional
        cost: {linear: 0.0, quadratic: 0.5}     # optional
    game: {epsilon: 1e-3, tau: 1e-3, gamma: 50.0, margin: 0.005}
    regulation: {q_bar: [..]}
    initial:
      Q: [..]
      v: [[..], ..]                   # one row per player
      game: auto | random | {beta: .., alpha: .., mu: .., lambda: ..}
    simulation: {horizon: 300, dt: 0.001, seed: 0, oracle_every: 100}

``c`` starts at ``arrivals.base``. ``initial.game: auto`` starts the
coordinator at the equilibrium for the initial service target.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np
import yaml
from scipy.optimize import linprog

from ..errors import AssumptionViolated, MissingField, ParseError
from ..game import Game, GameConfig, GameLayout, GameState, PlayerSpec
from ..plant import ArrivalModel, PlantState
from ..regulation import RegulationParams
from ..topology import build_graph

GAME_INITS = ("auto", "random")


@dataclass(eq=False)
class Scenario:
    """Everything a closed-loop run needs.

    ``game_init`` is ``"auto"``, ``"random"`` or an explicit stacked state
    vector.
    """

    graph: object
    arrivals: ArrivalModel
    players: tuple
    config: GameConfig
    regulation: RegulationParams
    plant0: PlantState
    game_init: object = "auto"
    horizon: float = 300.0
    dt: float = 1e-3
    seed: int = 0
    oracle_every: int = 100
    name: str = "scenario"
    game: Game = field(init=False, repr=False)

    def __post_init__(self):
        self.players = tuple(self.players)
        self.game = Game(self.graph, self.players, self.config)
        if not isinstance(self.game_init, str):
            self.game_init = np.asarray(self.game_init, dtype=float)

    @property
    def n_steps(self) -> int:
        return int(np.floor(self.horizon / self.dt + 1e-9))

    def with_options(self, **kw) -> "Scenario":
        """Copy with simulation options (``dt``, ``horizon``, ``seed``, ...)
        or a replaced ``config`` overridden."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return scenario_to_dict(self) == scenario_to_dict(other)

    __hash__ = None


def _num(value, path):
    if isinstance(value, bool):
        raise ParseError(path, "expected a number, got a boolean")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError(path, f"expected a number, got {value!r}") from None


def _vec(value, path, size=None):
    if not isinstance(value, (list, tuple)):
        raise ParseError(path, f"expected a list, got {value!r}")
    out = np.array([_num(x, f"{path}[{k}]") for k, x in enumerate(value)])
    if size is not None and out.size != size:
        raise ParseError(path, f"expected {size} entries, got {out.size}")
    return out


def _mat(value, path, shape):
    if not isinstance(value, (list, tuple)) or len(value) != shape[0]:
        raise ParseError(path, f"expected {shape[0]} rows")
    return np.vstack([_vec(row, f"{path}[{k}]", shape[1]) for k, row in enumerate(value)])


def _get(d, key, path):
    if not isinstance(d, dict):
        raise ParseError(path, "expected a mapping")
    if key not in d:
        raise MissingField(f"{path}.{key}" if path else key)
    return d[key]


def _opt(d, key, default):
    return d.get(key, default) if isinstance(d, dict) else default


def scenario_from_dict(data: dict) -> Scenario:
    """Build and validate a scenario from plain data (parsed YAML)."""
    if not isinstance(data, dict):
        raise ParseError("<root>", "expected a mapping")
    stations = _get(data, "stations", "")
    if not isinstance(stations, list):
        raise ParseError("stations", "expected a list")
    routes = _get(data, "routing", "")
    if not isinstance(routes, list):
        raise ParseError("routing", "expected a list of [origin, destination, fraction]")
    routing = {}
    for k, r in enumerate(routes):
        if not isinstance(r, (list, tuple)) or len(r) != 3:
            raise ParseError(f"routing[{k}]", "expected [origin, destination, fraction]")
        routing[(r[0], r[1])] = _num(r[2], f"routing[{k}][2]")
    graph = build_graph(stations, list(routing), routing)
    n = graph.n_stations

    arr = _get(data, "arrivals", "")
    kind = _get(arr, "kind", "arrivals")
    kw = dict(kind=kind, base=_vec(_get(arr, "base", "arrivals"), "arrivals.base", n),
              c_min=_num(_get(arr, "c_min", "arrivals"), "arrivals.c_min"),
              c_max=_num(_get(arr, "c_max", "arrivals"), "arrivals.c_max"))
    if kind == "sinusoid":
        for key in ("amplitude", "omega"):
            kw[key] = _vec(_get(arr, key, "arrivals"), f"arrivals.{key}", n)
        kw["phase"] = _vec(_opt(arr, "phase", [0.0] * n), "arrivals.phase", n)
    elif kind == "piecewise":
        bp = _vec(_get(arr, "breakpoints", "arrivals"), "arrivals.breakpoints")
        kw["breakpoints"] = bp
        kw["levels"] = _mat(_get(arr, "levels", "arrivals"), "arrivals.levels", (bp.size + 1, n))
        kw["rate"] = _num(_get(arr, "rate", "arrivals"), "arrivals.rate")
        kw["gain"] = _num(_opt(arr, "gain", 10.0), "arrivals.gain")
    elif kind != "constant":
        raise ParseError("arrivals.kind", f"unknown kind {kind!r}")
    arrivals = ArrivalModel(**kw)

    plist = _get(data, "players", "")
    if not isinstance(plist, list) or not plist:
        raise ParseError("players", "expected a non-empty list")
    players = []
    for k, p in enumerate(plist):
        path = f"players[{k}]"
        prof = _opt(p, "profit", {})
        cost = _opt(p, "cost", {})
        players.append(PlayerSpec(
            beta_max=_num(_get(p, "beta_max", path), f"{path}.beta_max"),
            alpha_max=_num(_get(p, "alpha_max", path), f"{path}.alpha_max"),
            profit_linear=_num(_opt(prof, "linear", 1.0), f"{path}.profit.linear"),
            profit_quadratic=_num(_opt(prof, "quadratic", 0.5), f"{path}.profit.quadratic"),
            cost_linear=_num(_opt(cost, "linear", 0.0), f"{path}.cost.linear"),
            cost_quadratic=_num(_opt(cost, "quadratic", 0.5), f"{path}.cost.quadratic")))
    N = len(players)

    g = _get(data, "game", "")
    caps = {key: (None if _opt(g, key, None) is None else _num(g[key], f"game.{key}"))
            for key in ("mu_cap", "lambda_cap")}
    config = GameConfig(epsilon=_num(_get(g, "epsilon", "game"), "game.epsilon"),
                        tau=_num(_get(g, "tau", "game"), "game.tau"),
                        gamma=_num(_opt(g, "gamma", 1.0), "game.gamma"),
                        margin=_num(_get(g, "margin", "game"), "game.margin"), **caps)
    reg_data = _get(data, "regulation", "")
    regulation = RegulationParams(
        c_min=arrivals.c_min, c_max=arrivals.c_max,
        beta_max=sum(p.beta_max for p in players), n_players=N, margin=config.margin,
        q_bar=_vec(_get(reg_data, "q_bar", "regulation"), "regulation.q_bar", n))

    init = _get(data, "initial", "")
    plant0 = PlantState(Q=_vec(_get(init, "Q", "initial"), "initial.Q", n), c=arrivals.base.copy(),
                        v=_mat(_get(init, "v", "initial"), "initial.v", (N, n)))
    gi = _opt(init, "game", "auto")
    layout = GameLayout(n, graph.n_edges, N)
    if isinstance(gi, str):
        if gi not in GAME_INITS:
            raise ParseError("initial.game", f"expected one of {GAME_INITS} or a mapping")
        game_init = gi
    else:
        game_init = GameState(
            _mat(_get(gi, "beta", "initial.game"), "initial.game.beta", (N, n)),
            _mat(_get(gi, "alpha", "initial.game"), "initial.game.alpha", (N, graph.n_edges)),
            _vec(_get(gi, "mu", "initial.game"), "initial.game.mu", layout.m),
            _mat(_get(gi, "lambda", "initial.game"), "initial.game.lambda", (N, layout.p)),
        ).to_vector()

    sim = _get(data, "simulation", "")
    scenario = Scenario(
        graph=graph, arrivals=arrivals, players=players, config=config,
        regulation=regulation, plant0=plant0, game_init=game_init,
        horizon=_num(_get(sim, "horizon", "simulation"), "simulation.horizon"),
        dt=_num(_get(sim, "dt", "simulation"), "simulation.dt"),
        seed=int(_num(_opt(sim, "seed", 0), "simulation.seed")),
        oracle_every=int(_num(_opt(sim, "oracle_every", 100), "simulation.oracle_every")),
        name=str(_opt(data, "name", "scenario")))
    check_assumptions(scenario)
    return scenario


def _plain(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def scenario_to_dict(s: Scenario) -> dict:
    """Plain-data form with a fixed key order."""
    g, cfg = s.graph, s.config
    arrivals = s.arrivals.to_dict()
    c_min, c_max = arrivals.pop("c_min"), arrivals.pop("c_max")
    arr = {"kind": arrivals.pop("kind"), "base": arrivals.pop("base"), "c_min": c_min, "c_max": c_max}
    arr.update(arrivals)
    game = {"epsilon": cfg.epsilon, "tau": cfg.tau, "gamma": cfg.gamma, "margin": cfg.margin}
    if cfg.mu_cap is not None:
        game["mu_cap"] = cfg.mu_cap
    if cfg.lambda_cap is not None:
        game["lambda_cap"] = cfg.lambda_cap
    if isinstance(s.game_init, str):
        gi = s.game_init
    else:
        st = GameState.from_vector(s.game_init, s.game.layout)
        gi = {"beta": st.beta.tolist(), "alpha": st.alpha.tolist(), "mu": st.mu.tolist(),
              "lambda": st.lam.tolist()}
    return {
        "name": s.name,
        "stations": [_plain(k) for k in g.stations],
        "routing": [[_plain(k), _plain(kk), float(a)] for (k, kk), a in zip(g.edges, g.routing)],
        "arrivals": arr,
        "players": [{"beta_max": p.beta_max, "alpha_max": p.alpha_max,
                     "profit": {"linear": p.profit_linear, "quadratic": p.profit_quadratic},
                     "cost": {"linear": p.cost_linear, "quadratic": p.cost_quadratic}}
                    for p in s.players],
        "game": game,
        "regulation": {"q_bar": s.regulation.q_bar.tolist()},
        "initial": {"Q": s.plant0.Q.tolist(), "v": s.plant0.v.tolist(), "game": gi},
        "simulation": {"horizon": float(s.horizon), "dt": float(s.dt), "seed": int(s.seed),
                       "oracle_every": int(s.oracle_every)},
    }


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ParseError(str(path), str(exc)) from exc
    return scenario_from_dict(data)


def dump_scenario(scenario: Scenario, path=None) -> str:
    text = yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False, default_flow_style=None)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def balanced_set_nonempty(graph, beta, lower, upper) -> bool:
    """LP feasibility of ``{A alpha = B beta, lower <= alpha <= upper}``."""
    res = linprog(np.zeros(graph.n_edges), A_eq=graph.incidence, b_eq=graph.balance_matrix @ beta,
                  bounds=list(zip(np.broadcast_to(lower, graph.n_edges),
                                  np.broadcast_to(upper, graph.n_edges))), method="highs")
    return res.status == 0


def check_assumptions(s: Scenario) -> None:
    """Re-check the modelling assumptions.

    1. Capacity ordering ``2Na <= c_min < c_max < beta_max - Na`` (checked by
       ``RegulationParams``).
    2. Positive initial queues and vehicle stocks.
    3. Every delivery vector in the box admits balanced transfers. The
       balanced set is convex in ``(beta, alpha)``, so checking the vertices
       of the delivery box suffices.
    """
    if np.any(s.plant0.Q <= 0) or np.any(s.plant0.v <= 0):
        raise AssumptionViolated("initial queues and vehicle stocks must be positive")
    a = s.config.margin
    n = s.graph.n_stations
    if n > 12:
        return  # vertex enumeration is out of reach; rely on balance_project at run time
    for sp in s.players:
        if a >= sp.beta_max / 2 or a >= sp.alpha_max / 2:
            raise AssumptionViolated("margin leaves an empty box")
        for corner in itertools.product((a, sp.beta_max - a), repeat=n):
            if not balanced_set_nonempty(s.graph, np.array(corner), a, sp.alpha_max - a):
                raise AssumptionViolated(
                    f"no balanced transfers for deliveries {corner} (alpha_max={sp.alpha_max})")


DEFAULT_SCENARIO = {
    "name": "ring3",
    "stations": [1, 2, 3],
    "routing": [[1, 2, 0.5], [1, 3, 0.5], [2, 1, 0.5], [2, 3, 0.5], [3, 1, 0.5], [3, 2, 0.5]],
    "arrivals": {"kind": "constant", "base": [1.5, 2.0, 1.8], "c_min": 1.0, "c_max": 2.5},
    "players": [{"beta_max": 3.0, "alpha_max": 3.0}, {"beta_max": 3.0, "alpha_max": 3.0}],
    "game": {"epsilon": 1e-3, "tau": 1e-3, "gamma": 50.0, "margin": 0.005},
    "regulation": {"q_bar": [2.0, 2.0, 2.0]},
    "initial": {"Q": [4.0, 0.5, 2.5], "v": [[5.0, 5.0, 5.0], [4.0, 6.0, 5.0]], "game": "auto"},
    "simulation": {"horizon": 300.0, "dt": 1e-3, "seed": 0, "oracle_every": 100},
}


def default_scenario(**overrides) -> Scenario:
    """The 3-station ring with two companies and constant arrivals."""
    import copy

    data = copy.deepcopy(DEFAULT_SCENARIO)
    for key, val in overrides.items():
        section, _, sub = key.partition("__")
        if sub:
            data[section][sub] = val
        else:
            data[section] = val
    return scenario_from_dict(data)
