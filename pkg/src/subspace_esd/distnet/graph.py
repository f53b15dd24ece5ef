"""Gossip graphs: preferential-attachment topology and doubly stochastic weights."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from ..errors import ConnectivityError, ParameterError


@dataclass(frozen=True)
class GossipGraph:
    """Undirected graph with a self-loop on every node.

    ``adjacency`` is a symmetric boolean matrix whose diagonal is all True.
    ``weights`` is None until :func:`assign_weights` has been applied.
    """

    adjacency: np.ndarray
    weights: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Neighbour counts, self-loops excluded."""
        return self.adjacency.sum(axis=1) - 1

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max(initial=0))

    @property
    def n_edges(self) -> int:
        return int(self.degrees.sum() // 2)

    def neighbors(self, n: int) -> np.ndarray:
        row = self.adjacency[n].copy()
        row[n] = False
        return np.flatnonzero(row)

    def is_connected(self) -> bool:
        return bool(np.all(_bfs_hops(self.adjacency, 0) >= 0))

    @cached_property
    def diameter(self) -> int:
        """Longest shortest path (hops); used to size flooding phases."""
        return int(max(_bfs_hops(self.adjacency, s).max() for s in range(self.n_nodes)))

    def second_eigenvalue(self) -> float:
        """Second largest eigenvalue modulus of W (the consensus contraction rate)."""
        if self.weights is None:
            raise ParameterError("weights have not been assigned")
        lam = np.sort(np.abs(np.linalg.eigvalsh(0.5 * (self.weights + self.weights.T))))[::-1]
        return float(lam[1]) if lam.size > 1 else 0.0


def _bfs_hops(adj: np.ndarray, source: int) -> np.ndarray:
    hops = np.full(adj.shape[0], -1)
    hops[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if hops[v] < 0:
                hops[v] = hops[u] + 1
                queue.append(v)
    return hops


def generate_ba_graph(n_nodes: int, attach: int = 2, seed: int = 0) -> GossipGraph:
    """Barabasi-Albert graph grown from a clique of ``attach + 1`` nodes.

    Each later node links to ``attach`` distinct existing nodes chosen with
    probability proportional to their current degree.
    """
    if attach < 1 or n_nodes < attach + 1:
        raise ParameterError(f"need attach >= 1 and n_nodes >= attach + 1, got {n_nodes}, {attach}")
    rng = np.random.default_rng(seed)
    adj = np.zeros((n_nodes, n_nodes), dtype=bool)
    n0 = attach + 1
    adj[:n0, :n0] = True
    # one entry per edge endpoint, so uniform sampling from it is degree-proportional
    endpoints = [i for i in range(n0) for _ in range(n0 - 1)]
    for new in range(n0, n_nodes):
        targets: set[int] = set()
        while len(targets) < attach:
            targets.add(endpoints[rng.integers(len(endpoints))])
        for t in sorted(targets):
            adj[new, t] = adj[t, new] = True
            endpoints.extend((new, t))
    np.fill_diagonal(adj, True)
    return GossipGraph(adj)


def graph_from_edges(n_nodes: int, edges) -> GossipGraph:
    adj = np.eye(n_nodes, dtype=bool)
    for i, j in edges:
        adj[i, j] = adj[j, i] = True
    return GossipGraph(adj)


def metropolis_weights(adjacency: np.ndarray) -> np.ndarray:
    """``W_ij = 1 / (1 + max(d_i, d_j))`` on edges, remainder on the self-loop.

    Degrees here count the self-loop, so a two-node path gets ``w = 1/3``.
    """
    adj = np.asarray(adjacency, dtype=bool)
    deg = adj.sum(axis=1)
    W = np.zeros(adj.shape)
    i, j = np.nonzero(np.triu(adj, 1))
    w = 1.0 / (1.0 + np.maximum(deg[i], deg[j]))
    W[i, j] = w
    W[j, i] = w
    W[np.diag_indices_from(W)] = 1.0 - W.sum(axis=1)
    return W


def assign_weights(graph: GossipGraph, seed: int | None = None, perturb: float = 0.0) -> GossipGraph:
    """Attach a doubly stochastic weight matrix supported on the graph.

    Metropolis-Hastings weights are the starting point.  With ``perturb > 0``
    each edge then trades a random amount of weight with the two self-loops
    (``W_ij += t``, ``W_ii -= t`` and the mirror image), which keeps every row
    and column sum at one and all supported entries positive.
    """
    if not (0.0 <= perturb < 1.0):
        raise ParameterError(f"perturb must lie in [0, 1), got {perturb}")
    adj = graph.adjacency
    if not np.all(np.diag(adj)):
        raise ParameterError("every node needs a self-loop")
    if not graph.is_connected():
        raise ConnectivityError("consensus needs a connected graph")
    W = metropolis_weights(adj)
    if perturb > 0:
        rng = np.random.default_rng(seed)
        for i, j in zip(*np.nonzero(np.triu(adj, 1))):
            lo = -perturb * W[i, j]
            hi = perturb * min(W[i, i], W[j, j]) / 2
            t = rng.uniform(lo, hi)
            W[i, j] += t
            W[j, i] += t
            W[i, i] -= t
            W[j, j] -= t
    out = replace(graph, weights=W)
    if graph.n_nodes > 1 and not out.second_eigenvalue() < 1.0 - 1e-12:
        raise ConnectivityError("weight matrix does not contract: second eigenvalue is 1")
    return out
