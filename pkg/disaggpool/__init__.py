"""Pool configuration experiments for disaggregated data centers."""

from .allocator import (
    BudgetLimit,
    Placement,
    Problem,
    SolveLimits,
    SolveResult,
    SolverKind,
    SolveStatus,
    Solution,
    Violation,
    build_problem,
    solve,
    solve_exact,
    solve_exhaustive,
    solve_greedy,
    validate,
)
from .exceptions import (
    BudgetExceededError,
    ConfigurationError,
    DomainError,
    Error,
    InfeasibleProblemError,
)
from .experiment import ExperimentConfig, emit_plot_data, load_config, run_experiment
from .lpexport import export_lp
from .metrics import (
    saturation_capacity,
    summarize,
    total_cost,
    utilization,
)
from .model import (
    Node,
    NodeKind,
    ObjectiveWeights,
    PoolClass,
    Request,
    ResourceVector,
    UnitCosts,
    WorkloadClass,
    classify,
    penalty,
    weighted_capacity,
)
from .poolcfg import (
    Deployment,
    Policy,
    Scale,
    ServerMode,
    build_deployment,
    per_core_memory,
)
from .workload import WorkloadSpec, generate_workload

__all__ = (
    "BudgetExceededError",
    "BudgetLimit",
    "ConfigurationError",
    "Deployment",
    "DomainError",
    "Error",
    "ExperimentConfig",
    "InfeasibleProblemError",
    "Node",
    "NodeKind",
    "ObjectiveWeights",
    "Placement",
    "Policy",
    "PoolClass",
    "Problem",
    "Request",
    "ResourceVector",
    "Scale",
    "ServerMode",
    "Solution",
    "SolveLimits",
    "SolveResult",
    "SolveStatus",
    "SolverKind",
    "UnitCosts",
    "Violation",
    "WorkloadClass",
    "WorkloadSpec",
    "build_deployment",
    "build_problem",
    "classify",
    "emit_plot_data",
    "export_lp",
    "generate_workload",
    "load_config",
    "penalty",
    "per_core_memory",
    "run_experiment",
    "saturation_capacity",
    "solve",
    "solve_exact",
    "solve_exhaustive",
    "solve_greedy",
    "summarize",
    "total_cost",
    "utilization",
    "validate",
    "weighted_capacity",
)
