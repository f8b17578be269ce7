"""Physical layer: user queues, arrival rates and per-player vehicle stocks."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import AssumptionViolated, DimensionMismatch, NegativeDt

ARRIVAL_KINDS = ("constant", "sinusoid", "piecewise")


@dataclass(frozen=True, eq=False)
class ArrivalModel:
    """Per-station arrival-rate dynamics, saturated to ``[c_min, c_max]``.

    * ``constant``: ``c`` never moves.
    * ``sinusoid``: ``c_k(t) = base_k + amplitude_k sin(omega_k t + phase_k)``,
      integrated through its derivative.
    * ``piecewise``: ``c`` relaxes toward ``levels[j]`` on
      ``[breakpoints[j-1], breakpoints[j])`` with slope clipped to ``rate``.
    """

    kind: str
    base: np.ndarray
    c_min: float
    c_max: float
    amplitude: np.ndarray | None = None
    omega: np.ndarray | None = None
    phase: np.ndarray | None = None
    breakpoints: np.ndarray | None = None
    levels: np.ndarray | None = None
    rate: float = 0.0
    gain: float = 10.0

    def __post_init__(self):
        if self.kind not in ARRIVAL_KINDS:
            raise ValueError(f"unknown arrival kind {self.kind!r}")
        base = np.asarray(self.base, dtype=float)
        object.__setattr__(self, "base", base)
        n = base.size
        if not self.c_min < self.c_max:
            raise AssumptionViolated("c_min must be below c_max")
        if self.kind == "sinusoid":
            for name in ("amplitude", "omega", "phase"):
                val = getattr(self, name)
                val = np.zeros(n) if val is None and name == "phase" else val
                val = np.broadcast_to(np.asarray(val, dtype=float), (n,)).copy()
                object.__setattr__(self, name, val)
            lo, hi = base - np.abs(self.amplitude), base + np.abs(self.amplitude)
        elif self.kind == "piecewise":
            bp = np.asarray(self.breakpoints if self.breakpoints is not None else [], dtype=float)
            lv = np.atleast_2d(np.asarray(self.levels, dtype=float))
            if lv.shape != (bp.size + 1, n):
                raise DimensionMismatch(f"levels must have shape {(bp.size + 1, n)}, got {lv.shape}")
            if np.any(np.diff(bp) <= 0):
                raise ValueError("breakpoints must be strictly increasing")
            if not self.rate > 0 or not self.gain > 0:
                raise ValueError("piecewise arrivals need positive rate and gain")
            object.__setattr__(self, "breakpoints", bp)
            object.__setattr__(self, "levels", lv)
            lo = np.minimum(base, lv.min(axis=0))
            hi = np.maximum(base, lv.max(axis=0))
        else:
            lo = hi = base
        if np.any(lo < self.c_min) or np.any(hi > self.c_max):
            raise AssumptionViolated("arrival rates leave [c_min, c_max]")

    @property
    def n_stations(self) -> int:
        return self.base.size

    @property
    def rate_bound(self) -> float:
        """Declared bound on ``|dc/dt|``."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "sinusoid":
            return float(np.max(np.abs(self.amplitude * self.omega)))
        return float(self.rate)

    def raw_derivative(self, c, t):
        if self.kind == "constant":
            return np.zeros_like(c)
        if self.kind == "sinusoid":
            return self.amplitude * self.omega * np.cos(self.omega * t + self.phase)
        j = np.searchsorted(self.breakpoints, t, side="right")
        return np.clip(self.gain * (self.levels[j] - c), -self.rate, self.rate)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "base": self.base.tolist(),
               "c_min": float(self.c_min), "c_max": float(self.c_max)}
        if self.kind == "sinusoid":
            out.update(amplitude=self.amplitude.tolist(), omega=self.omega.tolist(),
                       phase=self.phase.tolist())
        elif self.kind == "piecewise":
            out.update(breakpoints=self.breakpoints.tolist(), levels=self.levels.tolist(),
                       rate=float(self.rate), gain=float(self.gain))
        return out

    def __eq__(self, other):
        if not isinstance(other, ArrivalModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PlantState:
    Q: np.ndarray
    c: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("Q", "c", "v"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.v.ndim != 2 or self.v.shape[1] != self.Q.size or self.c.shape != self.Q.shape:
            raise DimensionMismatch(f"Q {self.Q.shape}, c {self.c.shape}, v {self.v.shape}")

    @property
    def xi(self) -> np.ndarray:
        return np.concatenate([self.Q, self.c])

    def __eq__(self, other):
        if not isinstance(other, PlantState):
            return NotImplemented
        return (self.t == other.t and np.array_equal(self.Q, other.Q)
                and np.array_equal(self.c, other.c) and np.array_equal(self.v, other.v))

    __hash__ = None


def arrival_derivative(model: ArrivalModel, c, Q, t) -> np.ndarray:
    """Rate of change of the arrival rates, zeroed where it would push ``c``
    out of ``[c_min, c_max]``."""
    c = np.asarray(c, dtype=float)
    h = model.raw_derivative(c, t)
    h = np.where((c >= model.c_max) & (h > 0), 0.0, h)
    h = np.where((c <= model.c_min) & (h < 0), 0.0, h)
    return h


def queue_derivative(Q, c, u) -> np.ndarray:
    """``(c - u) 1[Q >= 0]`` with the outward drift at an empty queue removed."""
    d = np.asarray(c, dtype=float) - np.asarray(u, dtype=float)
    return np.where((np.asarray(Q) <= 0.0) & (d < 0.0), 0.0, d)


def vehicle_balance_residual(graph, beta_i, alpha_i) -> np.ndarray:
    """``A alpha - b(beta)`` for one player; zero iff its vehicle stock is stationary."""
    beta_i = np.asarray(beta_i, dtype=float)
    alpha_i = np.asarray(alpha_i, dtype=float)
    if beta_i.shape != (graph.n_stations,) or alpha_i.shape != (graph.n_edges,):
        raise DimensionMismatch(
            f"beta {beta_i.shape} / alpha {alpha_i.shape} do not fit graph "
            f"({graph.n_stations} stations, {graph.n_edges} edges)")
    return graph.incidence @ alpha_i - graph.balance_matrix @ beta_i


def vehicle_derivative(graph, v, beta, alpha) -> np.ndarray:
    A = graph.incidence
    inflow_users = graph.routing_matrix.T @ beta.T          # (n, N)
    inflow_empty = np.where(A > 0, A, 0.0) @ alpha.T
    full = (A @ alpha.T - graph.balance_matrix @ beta.T).T
    empty = (inflow_users + inflow_empty).T
    return np.where(v > 0.0, full, empty)


def plant_step(graph, model: ArrivalModel, state: PlantState, beta, alpha, dt,
               xi_dot=None) -> PlantState:
    """Advance the physical layer by one projected explicit Euler step.

    Parameters
    ----------
    beta : ndarray, shape (N, n_stations)
        Delivery rates per player and station.
    alpha : ndarray, shape (N, n_edges)
        Empty-vehicle transfer rates per player and directed edge.
    xi_dot : ndarray, optional
        Precomputed ``(dQ/dt, dc/dt)``; recomputed from the model if omitted.
    """
    if not dt > 0:
        raise NegativeDt(f"dt must be positive, got {dt!r}")
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    n, N = graph.n_stations, state.v.shape[0]
    if beta.shape != (N, n) or alpha.shape != (N, graph.n_edges):
        raise DimensionMismatch(f"beta {beta.shape}, alpha {alpha.shape} for N={N}, n={n}")
    if xi_dot is None:
        u = beta.sum(axis=0)
        xi_dot = np.concatenate([queue_derivative(state.Q, state.c, u),
                                 arrival_derivative(model, state.c, state.Q, state.t)])
    Q = np.maximum(state.Q + dt * xi_dot[:n], 0.0)
    c = np.clip(state.c + dt * xi_dot[n:], model.c_min, model.c_max)
    v = np.maximum(state.v + dt * vehicle_derivative(graph, state.v, beta, alpha), 0.0)
    return replace(state, Q=Q, c=c, v=v, t=state.t + dt)
