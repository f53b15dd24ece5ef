"""Distributed power iteration: node ``n`` holds row ``n`` of the data only."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, ShapeError, UndefinedMetricError
from ..linalg import SIGN_TOL, IterationBudget, PrincipalComponent
from .consensus import ConsensusConfig, SimMetrics, average_consensus, flood
from .graph import GossipGraph


@dataclass
class NodeState:
    """What a single node keeps between steps."""

    node_id: int
    x_row: np.ndarray
    x_hat: np.ndarray
    v_entry: float = 0.0
    z_vec: np.ndarray | None = None


def init_states(X, center: bool = True) -> list[NodeState]:
    """One state per row of ``X``; each node removes its own mean when ``center``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ShapeError(f"need an N x M matrix with M >= 2, got shape {X.shape}")
    if center:
        X = X - X.mean(axis=1, keepdims=True)
    return [NodeState(n, X[n].copy(), X[n].copy()) for n in range(X.shape[0])]


def stack_rows(states: list[NodeState]) -> tuple[np.ndarray, np.ndarray]:
    return np.vstack([s.x_row for s in states]), np.vstack([s.x_hat for s in states])


@dataclass
class DistributedPC:
    """Per-node entries of one distributed eigenvector estimate."""

    entries: np.ndarray  # entries[n] is held by node n
    iterations: int
    converged: bool
    history: list  # unit-normalised iterate after each step (network view)
    warning: str | None = None
    messages: list = field(default_factory=list)  # cumulative network total after each step

    def as_component(self, rank: int = 1) -> PrincipalComponent:
        v = self.entries / np.linalg.norm(self.entries)
        return PrincipalComponent(v, float("nan"), rank, self.iterations, self.converged)


def agree_sign(v: np.ndarray, graph: GossipGraph, metrics: SimMetrics | None) -> np.ndarray:
    """Make the lowest-indexed significant entry nonnegative at every node.

    Nodes flood the minimum of (index if significant else N); the owner of
    that index then floods its sign (encoded as a max over +-1 codes).
    """
    n = v.shape[0]
    idx = np.where(np.abs(v) > SIGN_TOL, np.arange(n), n)
    first = flood(idx, graph, np.minimum, metrics)
    code = np.where(np.arange(n) == first, np.where(v < 0, 1, -1), -1)
    flip = flood(code, graph, np.maximum, metrics)
    return np.where(flip > 0, -v, v)


def power_iteration_d(
    x,
    x_hat,
    graph: GossipGraph,
    budget: IterationBudget | None = None,
    consensus: ConsensusConfig | None = None,
    seed=0,
    metrics: SimMetrics | None = None,
    v0: np.ndarray | None = None,
) -> tuple[DistributedPC, SimMetrics]:
    """Leading eigenvector of ``x_hat x' / (M - 1)`` computed by gossip.

    ``x`` and ``x_hat`` have one row per node.  Each step:

    * ``z = N * avg(x_n v_n)`` (an M-vector consensus),
    * ``w_n = x_hat_n . z / (M - 1)`` (local),
    * a consensus on ``w_n^2`` gives the norm, and each node rescales,
    * a consensus on ``(w_n - v_n)^2`` gives the squared step length.

    The unit-norm rescaling every step keeps the difference test meaningful
    (an unnormalised iterate grows by the eigenvalue each step).  Nodes agree
    on termination by flooding their "not yet converged" flags.
    """
    budget = budget or IterationBudget()
    consensus = consensus or ConsensusConfig()
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape or x.ndim != 2:
        raise ShapeError(f"x and x_hat must share an N x M shape, got {x.shape} and {x_hat.shape}")
    n, m = x.shape
    if n != graph.n_nodes:
        raise ParameterError(f"graph has {graph.n_nodes} nodes but data has {n} rows")
    metrics = metrics if metrics is not None else SimMetrics(n)

    if v0 is None:
        v0 = np.random.default_rng(seed).standard_normal(n)
    v = np.asarray(v0, dtype=float).copy()
    stats, _ = average_consensus(v[:, None] ** 2, graph, config=consensus, metrics=metrics)
    v = v / np.sqrt(n * stats[:, 0])

    history, msg_log = [], []
    converged = False
    it = 0
    for it in range(1, int(budget.max_iters) + 1):
        z, _ = average_consensus(x * v[:, None], graph, config=consensus, metrics=metrics)
        z *= n
        w = np.einsum("nm,nm->n", x_hat, z) / (m - 1)
        metrics.scalar_ops += 4 * n * m
        sq, _ = average_consensus(w[:, None] ** 2, graph, config=consensus, metrics=metrics)
        ww = n * sq[:, 0]
        if np.all(ww <= 1e-300):
            return (
                DistributedPC(v, it, True, history, "iterate annihilated (zero spectrum)", msg_log),
                metrics,
            )
        w = w / np.sqrt(ww)
        diff, _ = average_consensus((w - v)[:, None] ** 2, graph, config=consensus, metrics=metrics)
        e = n * diff[:, 0]
        v = w
        history.append(v.copy())
        msg_log.append(metrics.messages_total)
        metrics.power_steps += 1
        done = np.sqrt(np.maximum(e, 0.0)) < budget.epsilon
        if consensus.mode != "exact":
            done = flood(~done, graph, np.maximum, metrics) == 0
        if np.all(done):
            converged = True
            break
    metrics.max_power_steps = max(metrics.max_power_steps, it)
    v = agree_sign(v, graph, metrics)
    warning = None if converged else f"distributed power iteration hit max_iters={budget.max_iters}"
    return DistributedPC(v, it, converged, history, warning, msg_log), metrics


def eval_pc_estimate(estimate, truth) -> tuple[float, float]:
    """``(projection_bias, mse)`` of an eigenvector estimate, sign-invariant.

    Both vectors are unit-normalised first; the bias is ``|<e, t>|`` and the
    MSE is the smaller of ``||e - t||^2 / N`` and ``||e + t||^2 / N``.
    """
    e = np.asarray(estimate, dtype=float).ravel()
    t = truth.vector if isinstance(truth, PrincipalComponent) else np.asarray(truth, float).ravel()
    if e.shape != t.shape:
        raise ShapeError(f"estimate has shape {e.shape}, truth {t.shape}")
    ne, nt = np.linalg.norm(e), np.linalg.norm(t)
    if ne == 0 or nt == 0:
        raise UndefinedMetricError("projection bias is undefined for a zero vector")
    e, t = e / ne, t / nt
    bias = abs(float(e @ t))
    mse = min(np.sum((e - t) ** 2), np.sum((e + t) ** 2)) / e.size
    return bias, float(mse)
