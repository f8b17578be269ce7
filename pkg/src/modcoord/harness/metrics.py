"""Tracking errors, regulation error and running cost averages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from ..errors import Misaligned


def running_average(t, f) -> np.ndarray:
    """``(1/t) * integral_0^t f`` on the sample grid (composite Simpson).

    The grid must start at ``t = 0``; the average at ``t = 0`` is ``f(0)``.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if t.shape != f.shape or t.ndim != 1:
        raise Misaligned("time and value arrays must be one-dimensional and equal length")
    if t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise Misaligned("grid must start at 0 and increase strictly")
    integral = cumulative_simpson(f, x=t, initial=0.0)
    out = np.empty_like(f)
    out[0] = f[0]
    out[1:] = integral[1:] / t[1:]
    return out


def average_gap(t, f, g) -> np.ndarray:
    """``|f_bar(T) - g_bar(T)|`` for every grid point ``T``."""
    return np.abs(running_average(t, f) - running_average(t, g))


@dataclass(eq=False)
class TrackingMetrics:
    t: np.ndarray
    err_eta: np.ndarray
    err_beta: np.ndarray
    err_alpha: np.ndarray
    alpha_bound: float
    regulation_error: np.ndarray
    realized_cost_avg: np.ndarray
    equilibrium_cost_avg: np.ndarray
    cost_gap: np.ndarray

    def tail(self, t_from):
        """Mask of samples at or after ``t_from``."""
        return self.t >= t_from


def tracking_metrics(scenario, trace, oracle=None, oracle_index=None, varsigma_g=None) -> TrackingMetrics:
    """Compare a trace against equilibrium samples.

    Parameters
    ----------
    oracle, oracle_index : optional
        Equilibrium states and the trace rows they belong to; default to the
        samples stored in the trace.
    varsigma_g : float, optional
        Coupling bound used for the transfer-rate tracking radius
        ``|A| * varsigma_G``.

    Raises
    ------
    Misaligned
        The samples do not line up with trace rows.
    """
    game = scenario.game
    L = game.layout
    oracle = trace.oracle if oracle is None else np.asarray(oracle)
    idx = trace.oracle_index if oracle_index is None else np.asarray(oracle_index)
    if oracle.ndim != 2 or oracle.shape[0] != idx.size or idx.size == 0:
        raise Misaligned("need one equilibrium sample per listed trace row")
    if np.any(idx < 0) or np.any(idx >= len(trace)) or np.any(np.diff(idx) <= 0):
        raise Misaligned("sample rows must be increasing and inside the trace")
    if oracle.shape[1] != L.dim:
        raise Misaligned(f"samples have {oracle.shape[1]} entries, expected {L.dim}")

    t = trace.t[idx]
    snap_pos = np.searchsorted(trace.snapshot_index, idx)
    if np.any(snap_pos >= trace.snapshot_index.size) or np.any(trace.snapshot_index[snap_pos] != idx):
        raise Misaligned("no coordinator snapshot at some sample rows")
    eta = trace.snapshots[snap_pos]
    N = L.n_players
    beta = trace.block("beta_")[idx].reshape(-1, N, L.n_stations)
    alpha = trace.block("alpha_")[idx].reshape(-1, N, L.n_edges)
    beta_t = np.stack([oracle[:, L.beta(i)] for i in range(N)], axis=1)
    alpha_t = np.stack([oracle[:, L.alpha(i)] for i in range(N)], axis=1)
    err_beta = np.linalg.norm(beta - beta_t, axis=2)
    err_alpha = np.linalg.norm(alpha - alpha_t, axis=2)
    bound = np.nan if varsigma_g is None else float(np.linalg.norm(game.A, 2) * varsigma_g)
    q_err = np.abs(trace.block("Q_") - scenario.regulation.q_bar)

    realized = trace.block("cost_")[idx]
    eq_cost = np.array([game.costs(x) for x in oracle])
    if t[0] == 0.0 and t.size > 1:
        f_bar = np.column_stack([running_average(t, realized[:, i]) for i in range(N)])
        g_bar = np.column_stack([running_average(t, eq_cost[:, i]) for i in range(N)])
    else:
        f_bar = g_bar = np.full_like(realized, np.nan)
    return TrackingMetrics(t, np.linalg.norm(eta - oracle, axis=1), err_beta, err_alpha, bound,
                           q_err, f_bar, g_bar, np.abs(f_bar - g_bar))
