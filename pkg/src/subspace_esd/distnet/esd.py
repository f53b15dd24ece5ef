"""getESD over a gossip network."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, ShapeError
from ..linalg import IterationBudget, PrincipalComponent
from ..subspace import (
    DEFAULT_STOP_EPSILON,
    ESDSearch,
    SubspaceDistanceResult,
    angle_from_projection,
)
from .consensus import ConsensusConfig, SimMetrics, average_consensus, flood
from .graph import GossipGraph
from .power import DistributedPC, power_iteration_d


@dataclass
class DistributedESDResult:
    """Outcome at every node plus the network-wide view.

    ``node_results[n]`` is what node ``n`` returns; ``result`` is node 0's
    answer with the assembled bases attached.
    """

    result: SubspaceDistanceResult
    node_results: list[tuple[int, float]]
    metrics: SimMetrics
    components_a: list[DistributedPC] = field(default_factory=list)
    components_b: list[DistributedPC] = field(default_factory=list)

    @property
    def all_agree(self) -> bool:
        """Bit-identical (ESD, angle) at every node."""
        return len(set(self.node_results)) == 1

    @property
    def theta_spread_deg(self) -> float:
        t = [r[1] for r in self.node_results]
        return max(t) - min(t) if t else 0.0

    def agree_within(self, tol_deg: float) -> bool:
        """Same ESD everywhere and node angles within ``tol_deg`` of each other."""
        return len({r[0] for r in self.node_results}) == 1 and self.theta_spread_deg <= tol_deg

    def to_dict(self) -> dict:
        out = self.result.to_dict()
        out["all_nodes_agree"] = self.all_agree
        out["node_esd_values"] = sorted({r[0] for r in self.node_results})
        out["node_theta_spread_deg"] = self.theta_spread_deg
        out["metrics"] = self.metrics.to_dict()
        return out


def _centered(X, center: bool) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ShapeError(f"need an N x M matrix with M >= 2, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ParameterError("data contains non-finite values")
    return X - X.mean(axis=1, keepdims=True) if center else X.copy()


def _deflate_rows(x, x_hat, a, graph, consensus, metrics):
    # f = sum_i a(i) x_i via consensus, then x_hat_n -= a(n) f
    f, _ = average_consensus(a[:, None] * x, graph, config=consensus, metrics=metrics)
    f *= x.shape[0]
    return x_hat - a[:, None] * f


def get_esd_d(
    X,
    Y,
    graph: GossipGraph,
    budget: IterationBudget | None = None,
    consensus: ConsensusConfig | None = None,
    epsilon: float = DEFAULT_STOP_EPSILON,
    seed: int = 0,
    center: bool = True,
) -> DistributedESDResult:
    """Effective subspace dimension of two row-distributed datasets.

    Node ``n`` holds rows ``X[n]`` and ``Y[n]``.  For each ``k`` the nodes
    extract ``a_k`` and ``b_k`` with :func:`power_iteration_d`, grow their
    copy of the inner-product matrix from one packed consensus on
    ``a_i(n) b_j(n)``, evaluate the angle locally and agree on stopping by
    flooding.  Start vectors use the same seeds as the centralised
    ``get_esd`` so that, under exact consensus, both follow the same path.
    """
    budget = budget or IterationBudget()
    consensus = consensus or ConsensusConfig()
    x = _centered(X, center)
    y = _centered(Y, center)
    if x.shape != y.shape:
        raise ShapeError(f"X and Y must have the same shape, got {x.shape} and {y.shape}")
    n = x.shape[0]
    if n != graph.n_nodes:
        raise ParameterError(f"graph has {graph.n_nodes} nodes but data has {n} rows")
    metrics = SimMetrics(n)
    searches = [ESDSearch(n, epsilon) for _ in range(n)]
    x_hat, y_hat = x.copy(), y.copy()
    A = np.zeros((n, 0))
    B = np.zeros((n, 0))
    comps_a: list[DistributedPC] = []
    comps_b: list[DistributedPC] = []
    Pn = np.zeros((n, 0, 0))

    if not np.any(x) or not np.any(y):
        res = SubspaceDistanceResult(esd=0, theta_max_deg=0.0, degenerate=True)
        return DistributedESDResult(res, [(0, 0.0)] * n, metrics)

    for k in range(1, n + 1):
        pa, _ = power_iteration_d(
            x, x_hat, graph, budget, consensus, metrics=metrics, v0=_start(seed, 0, k, n)
        )
        pb, _ = power_iteration_d(
            y, y_hat, graph, budget, consensus, metrics=metrics, v0=_start(seed, 1, k, n)
        )
        comps_a.append(pa)
        comps_b.append(pb)
        a, b = pa.entries, pb.entries
        A = np.column_stack([A, a])
        B = np.column_stack([B, b])
        # row a_k.b_j (j < k) and column a_i.b_k (i <= k) in one consensus call
        local = np.column_stack([a[:, None] * B[:, :-1], A * b[:, None]])
        est, _ = average_consensus(local, graph, config=consensus, metrics=metrics)
        est *= n
        metrics.scalar_ops += local.size
        warning = "; ".join(w for w in (pa.warning, pb.warning) if w) or None

        grown = np.zeros((n, k, k))
        grown[:, : k - 1, : k - 1] = Pn
        grown[:, k - 1, : k - 1] = est[:, : k - 1]
        grown[:, :, k - 1] = est[:, k - 1 :]
        Pn = grown
        # nodes holding bit-identical P share one decomposition (pure speed-up)
        cache: dict = {}
        evaluated = []
        for i in range(n):
            key = Pn[i].tobytes()
            if key not in cache:
                cache[key] = searches[i].evaluate(Pn[i])
            evaluated.append(cache[key])
        metrics.scalar_ops += len(cache) * 10 * k**3
        wants = np.array([ev[3] for ev in evaluated], dtype=int)
        if consensus.mode != "exact":
            wants = flood(wants, graph, np.maximum, metrics)
        stop = bool(wants.max() > 0)
        for i in range(n):
            searches[i].step(Pn[i], (pa.iterations, pb.iterations), warning, evaluated[i], stop)
        if stop:
            break
        x_hat = _deflate_rows(x, x_hat, a, graph, consensus, metrics)
        y_hat = _deflate_rows(y, y_hat, b, graph, consensus, metrics)

    node_results = [(s.esd, float(np.degrees(s.theta_max))) for s in searches]
    basis_a = [
        PrincipalComponent(c.entries / np.linalg.norm(c.entries), float("nan"), i + 1, c.iterations, c.converged)
        for i, c in enumerate(comps_a)
    ]
    basis_b = [
        PrincipalComponent(c.entries / np.linalg.norm(c.entries), float("nan"), i + 1, c.iterations, c.converged)
        for i, c in enumerate(comps_b)
    ]
    result = searches[0].result(basis_a=basis_a, basis_b=basis_b)
    return DistributedESDResult(result, node_results, metrics, comps_a, comps_b)


def _start(seed, which: int, k: int, n: int) -> np.ndarray:
    return np.random.default_rng([int(seed), which, k]).standard_normal(n)
