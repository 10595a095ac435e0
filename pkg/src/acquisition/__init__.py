"""Acquisition games on graphs.

Unit/total/fractional weight-consolidation games, exact solvers for
small graphs, seeded Erdos-Renyi process machinery, and a constructive
spanning-tree protocol that gathers all weight at one vertex on random
graphs at the connectivity threshold.
"""

from .graph import (Graph, DisjointSetUnion, GraphError, build_graph,
                    connected_components, is_connected, cycle_graph,
                    path_graph, star_graph, complete_graph)
from .engine import (Move, MoveTrace, WeightConfig, IllegalMoveError,
                     UNIT, TOTAL, FRACTIONAL, initial_config, is_legal,
                     apply_move, replay, residual_support, is_terminal,
                     legal_moves)
from .process import (EdgeStream, sample_edge_stream, gnp_prefix_length,
                      hitting_time_connectivity, degree_stats,
                      check_degree_lemmas, p_minus, p_plus, default_omega,
                      sample_gnp_edges)
from .solver import (SolveResult, SolverCapError, acquisition_number_exact,
                     random_protocol_upper_bound)
from .spanning import (ProtocolParams, LabeledTree, PhaseDiagnostics,
                       ConstructionResult, construct, PAPER, PRACTICAL)

__all__ = [
    "Graph", "DisjointSetUnion", "GraphError", "build_graph",
    "connected_components", "is_connected", "cycle_graph", "path_graph",
    "star_graph", "complete_graph",
    "Move", "MoveTrace", "WeightConfig", "IllegalMoveError",
    "UNIT", "TOTAL", "FRACTIONAL", "initial_config", "is_legal",
    "apply_move", "replay", "residual_support", "is_terminal", "legal_moves",
    "EdgeStream", "sample_edge_stream", "gnp_prefix_length",
    "hitting_time_connectivity", "degree_stats", "check_degree_lemmas",
    "p_minus", "p_plus", "default_omega", "sample_gnp_edges",
    "SolveResult", "SolverCapError", "acquisition_number_exact",
    "random_protocol_upper_bound",
    "ProtocolParams", "LabeledTree", "PhaseDiagnostics",
    "ConstructionResult", "construct", "PAPER", "PRACTICAL",
]

__version__ = "0.1.0"
