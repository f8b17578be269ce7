"""Station graph, routing fractions and the vehicle-flow incidence matrix."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import AsymmetricEdges, DimensionMismatch, NonStochasticRouting, NotConnected

ROUTING_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StationGraph:
    """Undirected, connected service graph with exit-stochastic routing.

    Stations are kept sorted by identifier and directed edges sorted
    lexicographically by ``(origin, destination)``; every matrix built from
    the graph uses that ordering.

    Attributes
    ----------
    stations : tuple
        Sorted station identifiers.
    edges : tuple of (origin, destination)
        Directed edges, symmetric closure of the undirected graph.
    routing : ndarray, shape (n_edges,)
        ``routing[e]`` is the fraction of users arriving at ``edges[e][0]``
        who travel to ``edges[e][1]``.
    """

    stations: tuple
    edges: tuple
    routing: np.ndarray
    neighbors: dict = field(repr=False)
    incidence: np.ndarray = field(repr=False)

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index(self, station) -> int:
        return self.stations.index(station)

    @cached_property
    def routing_matrix(self) -> np.ndarray:
        """Dense ``R[k, k'] = a_{k k'}`` (zero off the edge set)."""
        R = np.zeros((self.n_stations, self.n_stations))
        for (k, kk), frac in zip(self.edges, self.routing):
            R[self.index(k), self.index(kk)] = frac
        R.setflags(write=False)
        return R

    @cached_property
    def balance_matrix(self) -> np.ndarray:
        """Matrix ``B`` with ``b = B @ beta``: ``b_k = beta_k - sum_k' a_{k'k} beta_k'``."""
        B = np.eye(self.n_stations) - self.routing_matrix.T
        B.setflags(write=False)
        return B

    def __eq__(self, other):
        if not isinstance(other, StationGraph):
            return NotImplemented
        return (self.stations == other.stations and self.edges == other.edges
                and np.array_equal(self.routing, other.routing))

    __hash__ = None


def build_graph(stations, edges, routing) -> StationGraph:
    """Validate and assemble a :class:`StationGraph`.

    Parameters
    ----------
    stations : iterable
        Station identifiers (at least two, mutually comparable).
    edges : iterable of pairs
        Directed edges; the set must be closed under reversal.
    routing : mapping
        ``{(k, k'): a_{k k'}}`` defined exactly on ``edges``.

    Raises
    ------
    AsymmetricEdges
        An edge appears without its reverse.
    NonStochasticRouting
        Some station's outgoing fractions do not sum to one.
    NotConnected
        The graph has more than one component.
    """
    stations = tuple(sorted(set(stations)))
    if len(stations) < 2:
        raise NotConnected("a station graph needs at least two stations")
    station_set = set(stations)

    edge_set = set()
    for k, kk in edges:
        if k not in station_set or kk not in station_set:
            raise DimensionMismatch(f"edge ({k!r}, {kk!r}) references an unknown station")
        if k == kk:
            raise AsymmetricEdges(f"self loop at station {k!r}")
        edge_set.add((k, kk))
    for k, kk in edge_set:
        if (kk, k) not in edge_set:
            raise AsymmetricEdges(f"edge ({k!r}, {kk!r}) has no reverse")
    ordered = tuple(sorted(edge_set))

    routing = {tuple(key): float(val) for key, val in dict(routing).items()}
    extra = set(routing) - edge_set
    missing = edge_set - set(routing)
    if extra or missing:
        raise NonStochasticRouting(
            f"routing must be defined exactly on the edges (missing {sorted(missing)}, "
            f"extra {sorted(extra)})")
    fractions = np.array([routing[e] for e in ordered])
    if np.any(fractions < 0.0) or np.any(fractions > 1.0):
        raise NonStochasticRouting("routing fractions must lie in [0, 1]")

    neighbors = {k: tuple(kk for (o, kk) in ordered if o == k) for k in stations}
    for k in stations:
        total = sum(routing[(k, kk)] for kk in neighbors[k])
        if abs(total - 1.0) > ROUTING_TOL:
            raise NonStochasticRouting(f"routing out of station {k!r} sums to {total!r}")

    seen = {stations[0]}
    stack = [stations[0]]
    while stack:
        k = stack.pop()
        for kk in neighbors[k]:
            if kk not in seen:
                seen.add(kk)
                stack.append(kk)
    if len(seen) != len(stations):
        raise NotConnected(f"unreachable stations: {sorted(station_set - seen)}")

    graph = StationGraph(stations, ordered, fractions, neighbors, np.empty((0, 0)))
    A = incidence_matrix(graph)
    A.setflags(write=False)
    fractions.setflags(write=False)
    object.__setattr__(graph, "incidence", A)
    return graph


def incidence_matrix(graph: StationGraph) -> np.ndarray:
    """Station-by-edge incidence matrix.

    Row ``k`` has ``-1`` in every column of an edge leaving ``k`` and ``+1``
    in every column of an edge entering ``k``, so ``(A @ alpha)_k`` is the
    net inflow of empty vehicles at station ``k``.
    """
    A = np.zeros((graph.n_stations, graph.n_edges))
    for e, (k, kk) in enumerate(graph.edges):
        A[graph.index(k), e] = -1.0
        A[graph.index(kk), e] = 1.0
    return A


def ring_graph(n, stations=None) -> StationGraph:
    """Ring of ``n`` stations with users split evenly between both neighbours."""
    stations = list(range(1, n + 1)) if stations is None else list(stations)
    if n == 2:
        edges = [(stations[0], stations[1]), (stations[1], stations[0])]
        return build_graph(stations, edges, {e: 1.0 for e in edges})
    edges = []
    for j in range(n):
        k, kk = stations[j], stations[(j + 1) % n]
        edges += [(k, kk), (kk, k)]
    return build_graph(stations, edges, {e: 0.5 for e in edges})
