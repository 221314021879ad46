"""AMTHA task-to-core mapping over hierarchical multicore topologies."""

from .errors import AmthaError
from .generator import WorkloadSpec, generate, grain_ratio
from .graph import ApplicationGraph, compute_avg_time, load_graph, predecessors, successors
from .mapper import Schedule, map_graph
from .oracle import optimal_schedule
from .simulator import dif_rel, simulate
from .topology import Topology, comm_cost, load_topology, preset

__all__ = [
    "AmthaError",
    "ApplicationGraph",
    "Schedule",
    "Topology",
    "WorkloadSpec",
    "comm_cost",
    "compute_avg_time",
    "dif_rel",
    "generate",
    "grain_ratio",
    "load_graph",
    "load_topology",
    "map_graph",
    "optimal_schedule",
    "predecessors",
    "preset",
    "simulate",
    "successors",
]
