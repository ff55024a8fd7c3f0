"""Survivable, delay-bounded mesh design."""

from .design import (
    Attachment,
    DesignTrace,
    EvoResult,
    NoAcceptableNetwork,
    attach_new_nodes,
    evo_design,
    evo_iteration,
    opt_design,
    opt_iteration,
)
from .paths import (
    DenseGraph,
    DesignParams,
    InventoryPolicy,
    Path,
    PathPair,
    Verdict,
    Violation,
    best_detours,
    complete_graph,
    feasible_prefix_length,
    is_acceptable,
    is_feasible,
    path_pair,
    primary_path,
    secondary_path,
)

__all__ = [
    "Attachment", "DenseGraph", "DesignParams", "DesignTrace", "EvoResult", "InventoryPolicy",
    "NoAcceptableNetwork", "Path", "PathPair", "Verdict", "Violation", "attach_new_nodes",
    "best_detours", "complete_graph", "feasible_prefix_length", "evo_design", "evo_iteration", "is_acceptable", "is_feasible",
    "opt_design", "opt_iteration", "path_pair", "primary_path", "secondary_path",
]
