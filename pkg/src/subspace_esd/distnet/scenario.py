"""Simulation scenario files (JSON)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import SchemaError
from ..linalg import IterationBudget
from .consensus import ConsensusConfig
from .graph import GossipGraph, assign_weights, generate_ba_graph

WEIGHT_SCHEMES = ("metropolis", "metropolis-perturbed")


@dataclass
class Scenario:
    """``{n_nodes, attach, seed, weight_scheme, consensus, budget}`` plus data shape.

    ``n_samples`` and ``data`` describe the synthetic workload used by the
    ``simulate`` command (``data`` is ``"caida"`` or ``"gaussian"``).
    """

    n_nodes: int = 79
    attach: int = 2
    seed: int = 0
    weight_scheme: str = "metropolis"
    perturb: float = 0.3
    consensus: dict = field(default_factory=lambda: {"mode": "adaptive", "S_or_tol": 1e-9})
    budget: dict = field(default_factory=lambda: {"epsilon": 1e-6, "max_iters": 200})
    n_samples: int = 2400
    data: str = "caida"
    stop_epsilon: float = 0.01

    def __post_init__(self):
        if self.weight_scheme not in WEIGHT_SCHEMES:
            raise SchemaError(f"weight_scheme must be one of {WEIGHT_SCHEMES}")
        self.consensus_config()
        self.iteration_budget()

    def consensus_config(self) -> ConsensusConfig:
        c = dict(self.consensus)
        mode = c.get("mode", "adaptive")
        val = c.get("S_or_tol")
        if mode == "fixed":
            return ConsensusConfig(mode="fixed", rounds=int(val if val is not None else 50))
        if mode == "adaptive":
            return ConsensusConfig(
                mode="adaptive", tol=float(val if val is not None else 1e-9), max_rounds=c.get("max_rounds")
            )
        if mode == "exact":
            return ConsensusConfig(mode="exact")
        raise SchemaError(f"unknown consensus mode {mode!r}")

    def iteration_budget(self) -> IterationBudget:
        return IterationBudget(float(self.budget.get("epsilon", 1e-6)), int(self.budget.get("max_iters", 200)))

    def build_graph(self) -> GossipGraph:
        g = generate_ba_graph(self.n_nodes, self.attach, self.seed)
        perturb = self.perturb if self.weight_scheme == "metropolis-perturbed" else 0.0
        return assign_weights(g, seed=self.seed, perturb=perturb)

    def to_dict(self) -> dict:
        return asdict(self)


def load_scenario(path) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scenario file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("scenario file must hold a JSON object")
    unknown = set(raw) - set(Scenario.__dataclass_fields__)
    if unknown:
        raise SchemaError(f"unknown scenario keys: {sorted(unknown)}")
    return Scenario(**raw)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2))
