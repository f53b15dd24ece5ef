"""Synchronous average consensus with message accounting.

Node ``n`` owns row ``n`` of every value array.  One round is ``W @ values``:
every node sends its current estimate to each neighbour (self-loops are
local and free) and replaces it with the weighted sum of what it received.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError
from .graph import GossipGraph

MODES = ("exact", "fixed", "adaptive")


@dataclass(frozen=True)
class ConsensusConfig:
    """How each call to average consensus terminates.

    ``exact`` replaces the protocol with the true mean (a test double that
    sends no messages); ``fixed`` runs ``rounds`` rounds; ``adaptive`` stops
    once the largest per-round change falls below ``tol`` times the initial
    magnitude, or after ``max_rounds`` (default ``10 * N``).
    """

    mode: str = "adaptive"
    rounds: int = 50
    tol: float = 1e-9
    max_rounds: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"consensus mode must be one of {MODES}, got {self.mode!r}")
        if self.rounds < 0:
            raise ParameterError("rounds must be >= 0")
        if not self.tol > 0:
            raise ParameterError("tol must be > 0")

    def cap(self, n_nodes: int) -> int:
        return self.max_rounds if self.max_rounds is not None else 10 * n_nodes

    def to_dict(self) -> dict:
        return {"mode": self.mode, "rounds": self.rounds, "tol": self.tol, "max_rounds": self.max_rounds}


EXACT = ConsensusConfig(mode="exact")


@dataclass
class SimMetrics:
    """Counters accumulated over a simulation.

    ``messages`` counts transmissions along a directed edge (one message may
    carry a vector); ``scalars`` counts the numbers inside them.  Both are
    kept per node.  ``consensus_rounds`` is the total number of rounds and
    ``max_rounds_per_call`` the largest single-call count (the S of the
    complexity bounds).
    """

    n_nodes: int
    messages: np.ndarray = None
    scalars: np.ndarray = None
    consensus_calls: int = 0
    consensus_rounds: int = 0
    max_rounds_per_call: int = 0
    flood_rounds: int = 0
    power_steps: int = 0
    max_power_steps: int = 0
    scalar_ops: int = 0
    round_log: list = field(default_factory=list)

    def __post_init__(self):
        if self.messages is None:
            self.messages = np.zeros(self.n_nodes, dtype=np.int64)
        if self.scalars is None:
            self.scalars = np.zeros(self.n_nodes, dtype=np.int64)

    @property
    def messages_total(self) -> int:
        return int(self.messages.sum())

    @property
    def messages_max_node(self) -> int:
        return int(self.messages.max(initial=0))

    def record_rounds(self, graph: GossipGraph, rounds: int, width: int, flood: bool = False):
        if rounds <= 0:
            return
        deg = graph.degrees
        self.messages += rounds * deg
        self.scalars += rounds * deg * width
        if flood:
            self.flood_rounds += rounds
        else:
            self.consensus_rounds += rounds
            self.max_rounds_per_call = max(self.max_rounds_per_call, rounds)
        # one multiply-add per received scalar plus the self term
        self.scalar_ops += int(rounds * (deg.sum() + graph.n_nodes) * width)
        self.round_log.append((rounds, int(deg.sum())))

    def to_dict(self) -> dict:
        return {
            "messages_total": self.messages_total,
            "messages_max_node": self.messages_max_node,
            "messages_per_node": self.messages.tolist(),
            "scalars_total": int(self.scalars.sum()),
            "consensus_calls": self.consensus_calls,
            "consensus_rounds": self.consensus_rounds,
            "max_rounds_per_call": self.max_rounds_per_call,
            "flood_rounds": self.flood_rounds,
            "power_steps": self.power_steps,
            "max_power_steps": self.max_power_steps,
            "scalar_ops": self.scalar_ops,
        }


def _require_weights(graph: GossipGraph) -> np.ndarray:
    if graph.weights is None:
        raise ParameterError("assign weights to the graph before running consensus")
    return graph.weights


def average_consensus(
    initial,
    graph: GossipGraph,
    rounds: int | None = None,
    config: ConsensusConfig | None = None,
    metrics: SimMetrics | None = None,
) -> tuple[np.ndarray, int]:
    """Each node's estimate of the network average of ``initial``.

    ``initial`` has one row per node (a scalar or a vector payload).  Passing
    ``rounds`` forces a fixed number of rounds regardless of ``config``.
    Returns ``(estimates, rounds_run)``.
    """
    W = _require_weights(graph)
    values = np.asarray(initial, dtype=float)
    if values.shape[0] != graph.n_nodes:
        raise ParameterError(f"expected {graph.n_nodes} node values, got {values.shape[0]}")
    config = config or ConsensusConfig()
    if rounds is not None:
        config = ConsensusConfig(mode="fixed", rounds=int(rounds))
    width = int(np.prod(values.shape[1:], dtype=int))
    if metrics is not None:
        metrics.consensus_calls += 1

    if config.mode == "exact":
        mean = values.mean(axis=0)
        return np.broadcast_to(mean, values.shape).copy(), 0

    m = values.reshape(graph.n_nodes, -1) if values.ndim != 2 else values
    if config.mode == "fixed":
        for _ in range(config.rounds):
            m = W @ m
        ran = config.rounds
    else:
        m, ran = _adaptive(W, np.ascontiguousarray(m), config.tol, config.cap(graph.n_nodes))
    if metrics is not None:
        metrics.record_rounds(graph, ran, width)
    return m.reshape(values.shape), ran


def _adaptive(W, m, tol, cap, block: int = 16):
    """Rounds until the largest change is <= tol * max|initial|.

    Iterates are produced in blocks and checked together; the result and the
    round count equal those of a round-by-round loop.
    """
    thresh = tol * max(float(np.abs(m).max(initial=0.0)), 1e-300)
    buf = np.empty((block + 1, *m.shape))
    ran = 0
    while ran < cap:
        steps = min(block, cap - ran)
        buf[0] = m
        for j in range(steps):
            np.matmul(W, buf[j], out=buf[j + 1])
        delta = np.abs(np.diff(buf[: steps + 1], axis=0)).reshape(steps, -1).max(axis=1)
        hit = np.flatnonzero(delta <= thresh)
        used = int(hit[0]) + 1 if hit.size else steps
        m = buf[used].copy()
        ran += used
        if hit.size:
            break
    return m, ran


def flood(values, graph: GossipGraph, op=np.maximum, metrics: SimMetrics | None = None) -> np.ndarray:
    """Min/max flooding for ``diameter`` rounds; afterwards every node agrees."""
    vals = np.asarray(values).copy()
    rounds = graph.diameter if graph.n_nodes > 1 else 0
    adj = graph.adjacency
    for _ in range(rounds):
        nxt = vals.copy()
        for n in range(graph.n_nodes):
            nxt[n] = op.reduce(vals[adj[n]], axis=0)
        vals = nxt
    if metrics is not None:
        metrics.record_rounds(graph, rounds, int(np.prod(vals.shape[1:], dtype=int)), flood=True)
    return vals
