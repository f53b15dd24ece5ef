"""Gossip-network simulation of the distributed algorithms."""

from .consensus import EXACT, ConsensusConfig, SimMetrics, average_consensus, flood
from .esd import DistributedESDResult, get_esd_d
from .graph import GossipGraph, assign_weights, generate_ba_graph, graph_from_edges, metropolis_weights
from .power import DistributedPC, NodeState, eval_pc_estimate, init_states, power_iteration_d, stack_rows
from .scenario import Scenario, load_scenario, save_scenario

__all__ = [
    "EXACT",
    "ConsensusConfig",
    "DistributedESDResult",
    "DistributedPC",
    "GossipGraph",
    "NodeState",
    "Scenario",
    "SimMetrics",
    "assign_weights",
    "average_consensus",
    "eval_pc_estimate",
    "flood",
    "generate_ba_graph",
    "get_esd_d",
    "graph_from_edges",
    "init_states",
    "load_scenario",
    "metropolis_weights",
    "power_iteration_d",
    "save_scenario",
    "stack_rows",
]
