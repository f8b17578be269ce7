"""Smooth queue-stabilizing controller and its derivative bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolated, DimensionMismatch


@dataclass(frozen=True, eq=False)
class RegulationParams:
    """Constants of the logistic queue controller.

    ``beta_max`` is the aggregate ceiling (sum over players) and ``margin``
    the box margin ``a`` shared with the game.
    """

    c_min: float
    c_max: float
    beta_max: float
    n_players: int
    margin: float
    q_bar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q_bar", np.asarray(self.q_bar, dtype=float))
        Na = self.n_players * self.margin
        if not (self.margin > 0 and 2 * Na <= self.c_min < self.c_max < self.beta_max - Na):
            raise AssumptionViolated(
                "need 2Na <= c_min < c_max < beta_max - Na, got "
                f"N={self.n_players}, a={self.margin}, c_min={self.c_min}, "
                f"c_max={self.c_max}, beta_max={self.beta_max}")

    @property
    def slack(self) -> float:
        """``beta_max - c_max - N a``, the excess service capacity."""
        return self.beta_max - self.c_max - self.n_players * self.margin

    @property
    def lift(self) -> float:
        return self.slack + self.c_min / 2.0

    @property
    def ratio(self) -> float:
        return 2.0 * self.slack / self.c_min

    @property
    def u_range(self):
        return self.c_min / 2.0, self.beta_max - self.n_players * self.margin

    def __eq__(self, other):
        if not isinstance(other, RegulationParams):
            return NotImplemented
        return (self.c_min, self.c_max, self.beta_max, self.n_players, self.margin) == (
            other.c_min, other.c_max, other.beta_max, other.n_players, other.margin
        ) and np.array_equal(self.q_bar, other.q_bar)

    __hash__ = None


def _check(Q, c, params):
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    if Q.shape != c.shape or Q.shape != params.q_bar.shape:
        raise DimensionMismatch(f"Q {Q.shape}, c {c.shape}, q_bar {params.q_bar.shape}")
    return Q, c


def control_target(Q, c, params: RegulationParams) -> np.ndarray:
    """Per-station service rate ``U(xi)`` requested by the controller.

    ``U_k = c_k - c_min/2 + lift / (1 + ratio * exp(-(Q_k - Qbar_k)))``; it
    equals ``c_k`` at the target queue and stays inside
    ``[c_min/2, beta_max - N a]``.
    """
    Q, c = _check(Q, c, params)
    w = params.ratio * np.exp(-(Q - params.q_bar))
    return c - params.c_min / 2.0 + params.lift / (1.0 + w)


def control_jacobian(Q, c, params: RegulationParams):
    """Jacobian of ``U`` with respect to ``xi = (Q, c)``.

    Returns
    -------
    dU_dxi : ndarray, shape (n, 2n)
        ``[diag(dU/dQ), I]``.
    d2U_dQ2 : ndarray, shape (n,)
        Diagonal of the second derivative in ``Q`` (the only nonzero
        second-order terms).
    """
    Q, c = _check(Q, c, params)
    w = params.ratio * np.exp(-(Q - params.q_bar))
    dU_dQ = params.lift * w / (1.0 + w) ** 2
    d2U_dQ2 = params.lift * w * (w - 1.0) / (1.0 + w) ** 3
    n = Q.size
    return np.hstack([np.diag(dU_dQ), np.eye(n)]), d2U_dQ2


def derivative_bounds(params: RegulationParams):
    """Closed-form constants ``(D_U1, D_U2)`` bounding the controller derivatives."""
    n = params.q_bar.size
    r = params.ratio
    e = np.exp(np.max(params.q_bar))
    d1 = n * (1.0 + params.lift / (1.0 + r) ** 2 * r * e)
    d2 = params.lift * r / (1.0 + r) ** 4 * (1.0 + (r * e) ** 2) * e
    return float(d1), float(d2)


def queue_error_rate(Q, params: RegulationParams) -> np.ndarray:
    """``c - U``: the queue drift under exact regulation (negative above target)."""
    Q = np.asarray(Q, dtype=float)
    w = params.ratio * np.exp(-(Q - params.q_bar))
    return params.c_min / 2.0 - params.lift / (1.0 + w)
