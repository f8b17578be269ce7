"""Closed-loop runner: plant, regulator and coordinator stepped together."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _backend
from ..equilibrium import solve_ne
from ..game import game_map
from ..regulation import control_target
from .ledger import appendix_constants
from .problem import build_problem


@dataclass(eq=False)
class Trace:
    """Recorded run.

    ``data`` holds one row per time ``k dt`` in the order of ``columns``;
    ``err_ne`` is NaN except at oracle sample rows. ``snapshots`` are the
    full coordinator states at rows ``snapshot_index`` and ``oracle`` the
    matching equilibria (empty when oracle sampling was off).
    """

    columns: tuple
    data: np.ndarray
    snapshot_index: np.ndarray
    snapshots: np.ndarray
    oracle: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    oracle_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def __len__(self):
        return self.data.shape[0]

    def column(self, name) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def block(self, prefix) -> np.ndarray:
        """All columns whose name starts with ``prefix`` (e.g. ``"Q_"``)."""
        idx = [k for k, c in enumerate(self.columns) if c.startswith(prefix)]
        return self.data[:, idx]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    def to_csv(self, path) -> None:
        """Write the trace with a header row; floats use a fixed round-trip format."""
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.columns) + "\n")
            np.savetxt(fh, self.data, fmt="%.17g", delimiter=",")


def _insert_err_ne(columns, data, err_ne):
    j = columns.index("err_G")
    cols = columns[:j] + ("err_ne",) + columns[j:]
    return cols, np.insert(data, j, err_ne, axis=1)


def oracle_samples(scenario, data, columns, snap_index, snapshots):
    """Equilibria at the snapshot rows, warm-started from the previous sample."""
    n = scenario.graph.n_stations
    iq = columns.index(f"Q_{scenario.graph.stations[0]}")
    ic = iq + n
    out = np.empty_like(snapshots)
    prev = None
    for j, k in enumerate(snap_index):
        zeta = control_target(data[k, iq:iq + n], data[k, ic:ic + n], scenario.regulation)
        init = prev if prev is not None else None
        out[j] = prev = solve_ne(scenario.game, zeta, init=init)
    return out


def run_closed_loop(scenario, oracle=True, backend=None) -> Trace:
    """Simulate ``floor(T/dt)`` steps and record ``floor(T/dt) + 1`` rows.

    Per step: the regulator sets the service target from ``(Q, c)``; each
    player applies its delivery rates and the balance projection of its
    transfer rates; the trace row is recorded; the coordinator takes one
    projected prediction-correction step; the plant takes one Euler step.
    Multiplier boxes default to the ledger caps.
    """
    cfg = scenario.config
    caps = {}
    if cfg.mu_cap is None or cfg.lambda_cap is None:
        c = appendix_constants(scenario)
        caps = dict(mu_cap=c["Delta_mu"], lambda_cap=c["Delta_lambda"])
    problem = build_problem(scenario, **caps)
    rows, snaps = _backend.run_steps(problem, scenario, backend)
    snap_index = np.arange(snaps.shape[0]) * problem.snap_every
    err_ne = np.full(rows.shape[0], np.nan)
    orc = np.empty((0, problem.dim))
    if oracle:
        orc = oracle_samples(scenario, rows, problem.columns, snap_index, snaps)
        err_ne[snap_index] = np.linalg.norm(snaps - orc, axis=1)
    cols, data = _insert_err_ne(problem.columns, rows, err_ne)
    return Trace(cols, data, snap_index, snaps, orc, snap_index.copy() if oracle else np.empty(0, dtype=int))


def oracle_residual(scenario, trace) -> float:
    """Largest ``|F(eta~, U(xi))|_inf`` over the stored oracle samples."""
    worst = 0.0
    Q, c = trace.block("Q_"), trace.block("c_")
    for j, k in enumerate(trace.oracle_index):
        zeta = control_target(Q[k], c[k], scenario.regulation)
        worst = max(worst, float(np.max(np.abs(game_map(scenario.game, trace.oracle[j], zeta)))))
    return worst
