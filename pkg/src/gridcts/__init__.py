"""AC contingency analysis with corrective transmission switching."""

from .model import (
    Branch,
    BridgeContingencyError,
    Bus,
    CaseError,
    Generator,
    GridError,
    InsufficientCapacityError,
    Network,
    SolveError,
    UnknownElementError,
)
from .matpower import parse_case, serialize_case
from .topology import branch_distance, build_topology_index, find_bridges, find_islands
from .fdlf import PowerFlowOptions, PowerFlowSolution, compute_branch_flows, solve_power_flow
from .rtca import (
    Contingency,
    ScreeningOptions,
    ViolationRecord,
    ViolationReport,
    apply_branch_contingency,
    apply_generator_contingency,
    assess_violations,
    default_contingency_set,
    screen_contingencies,
)
from .cts import (
    CandidateEvaluation,
    DmModel,
    SwitchingCandidate,
    candidates_cbce,
    candidates_cbve,
    candidates_ce,
    dm_candidates,
    dm_train,
    evaluate_candidate,
    metric_depth,
    metric_violation_reduction,
    rank_and_select,
)
from .runner import RunTiming, execute_parallel, parallel_efficiency
from .scan import CtsReport, ScanConfig, run_scan

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "BridgeContingencyError",
    "Bus",
    "CandidateEvaluation",
    "CaseError",
    "Contingency",
    "CtsReport",
    "DmModel",
    "Generator",
    "GridError",
    "InsufficientCapacityError",
    "Network",
    "PowerFlowOptions",
    "PowerFlowSolution",
    "RunTiming",
    "ScanConfig",
    "ScreeningOptions",
    "SolveError",
    "SwitchingCandidate",
    "UnknownElementError",
    "ViolationRecord",
    "ViolationReport",
    "apply_branch_contingency",
    "apply_generator_contingency",
    "assess_violations",
    "branch_distance",
    "build_topology_index",
    "candidates_cbce",
    "candidates_cbve",
    "candidates_ce",
    "compute_branch_flows",
    "default_contingency_set",
    "dm_candidates",
    "dm_train",
    "evaluate_candidate",
    "execute_parallel",
    "find_bridges",
    "find_islands",
    "metric_depth",
    "metric_violation_reduction",
    "parallel_efficiency",
    "parse_case",
    "rank_and_select",
    "run_scan",
    "screen_contingencies",
    "serialize_case",
    "solve_power_flow",
]
