"""Utilization, cost, saturation capacity and run statistics."""

from __future__ import annotations

from dataclasses import dataclass
import logging
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .allocator import (
    SolveLimits,
    SolveResult,
    SolverKind,
    SolveStatus,
    Solution,
    build_problem,
    solve,
)
from .exceptions import DomainError, InfeasibleProblemError
from .model import (
    DEFAULT_COSTS,
    DEFAULT_WEIGHTS,
    ObjectiveWeights,
    Request,
    UnitCosts,
)
from .poolcfg import Deployment
from .workload import WorkloadSpec, generate_workload

_LOGGER = logging.getLogger(__name__)

RESOURCES = ("cores", "memory", "gpu", "fpga")


@dataclass(frozen=True)
class ResourceUsage:
    """Allocated and installed amount of one resource type."""

    used: int
    installed: int

    @property
    def ratio(self) -> float:
        """Fraction of the installed amount in use, 0 when nothing is installed."""
        return self.used / self.installed if self.installed else 0.0


@dataclass(frozen=True)
class UtilizationReport:
    """Per-type utilization of a whole deployment."""

    cores: ResourceUsage
    memory: ResourceUsage
    gpu: ResourceUsage
    fpga: ResourceUsage

    def ratios(self) -> dict[str, float]:
        """Utilization ratio by resource name."""
        return {name: getattr(self, name).ratio for name in RESOURCES}


@dataclass(frozen=True)
class StatSummary:
    """Mean with a Student's t confidence interval half-width."""

    mean: float
    ci_half_width: float
    runs: int


@dataclass(frozen=True)
class RunOutcome:
    """A solved workload with its metrics.

    ``utilization`` and ``cost`` are None when no solution exists.
    ``time_limited`` is set when any solve behind it hit the wall-clock limit,
    so the outcome may differ between machines.
    """

    requests: tuple[Request, ...]
    result: SolveResult
    utilization: Optional[UtilizationReport] = None
    cost: Optional[int] = None
    time_limited: bool = False

    @property
    def n_star(self) -> int:
        """Number of requests in the solved workload."""
        return len(self.requests)


def utilization(
    solution: Solution, deployment: Deployment, requests: Sequence[Request]
) -> UtilizationReport:
    """Utilization of every resource type.

    The denominator is the capacity of every node in the deployment, pooled or
    standalone, active or not.

    :param solution: A validated solution.
    :type solution: Solution
    :param deployment: The deployment it was computed on.
    :type deployment: Deployment
    :param requests: The requests it places.
    :type requests: Sequence[Request]
    :rtype: UtilizationReport
    """
    demand = {r.id: r.demand for r in requests}
    used = dict.fromkeys(RESOURCES, 0)
    for pl in solution.placements:
        d = demand[pl.request]
        for name in RESOURCES:
            used[name] += getattr(d, name)
    installed = deployment.installed()
    return UtilizationReport(
        **{
            name: ResourceUsage(used=used[name], installed=getattr(installed, name))
            for name in RESOURCES
        }
    )


def total_cost(
    solution: Solution, deployment: Deployment, costs: UnitCosts = DEFAULT_COSTS
) -> int:
    """Cost of the physical resources of all active nodes, at full capacity.

    :param solution: A validated solution.
    :type solution: Solution
    :param deployment: The deployment it was computed on.
    :type deployment: Deployment
    :param costs: Unit costs.
    :type costs: UnitCosts
    :rtype: int
    """
    return sum(costs.price(deployment.node(n).capacity) for n in solution.active_nodes)


def _outcome(
    deployment: Deployment,
    requests: Sequence[Request],
    result: SolveResult,
    costs: UnitCosts,
    time_limited: bool = False,
) -> RunOutcome:
    if result.solution is None:
        return RunOutcome(requests=tuple(requests), result=result, time_limited=time_limited)
    return RunOutcome(
        requests=tuple(requests),
        result=result,
        time_limited=time_limited,
        utilization=utilization(result.solution, deployment, requests),
        cost=total_cost(result.solution, deployment, costs),
    )


def _solve_prefix(
    deployment: Deployment,
    requests: Sequence[Request],
    solver: SolverKind,
    limits: SolveLimits,
    weights: ObjectiveWeights,
) -> SolveResult:
    try:
        problem = build_problem(deployment, requests, weights)
    except InfeasibleProblemError as err:
        _LOGGER.debug("%s: %s", deployment.label, err)
        return SolveResult(SolveStatus.INFEASIBLE)
    result = solve(problem, solver, limits)
    _LOGGER.debug(
        "%s: %d requests -> %s", deployment.label, len(requests), result.status.value
    )
    return result


def saturation_capacity(
    deployment: Deployment,
    workload_spec: WorkloadSpec,
    solver: SolverKind = SolverKind.EXACT,
    limits: SolveLimits = SolveLimits(),
    weights: ObjectiveWeights = DEFAULT_WEIGHTS,
    costs: UnitCosts = DEFAULT_COSTS,
) -> RunOutcome:
    """Finds the largest feasible prefix of a seeded workload.

    ``workload_spec.count`` is the starting upper bound. Prefix feasibility is
    monotone, so the boundary is found by binary search; a budget-limited
    solve with no incumbent counts as infeasible.

    :param deployment: The deployment.
    :type deployment: Deployment
    :param workload_spec: Workload whose prefixes are tested.
    :type workload_spec: WorkloadSpec
    :param solver: Solver used for every prefix.
    :type solver: SolverKind
    :param limits: Budget of each solve.
    :type limits: SolveLimits
    :param weights: Objective weights.
    :type weights: ObjectiveWeights
    :param costs: Unit costs for the reported cost.
    :type costs: UnitCosts
    :return: The largest feasible prefix, its solution and metrics.
    :rtype: RunOutcome
    :raises BudgetExceededError: If a solve runs out of budget and
        ``limits.optimality_required`` is set.
    """
    requests = generate_workload(workload_spec)
    timed_out = False

    def attempt(n: int) -> SolveResult:
        nonlocal timed_out
        result = _solve_prefix(deployment, requests[:n], solver, limits, weights)
        timed_out = timed_out or result.time_limited
        return result

    lo, hi = 0, len(requests)
    best = top = attempt(hi)
    if not top.feasible:
        best = attempt(0)
        # Prefix lo is feasible, prefix hi is not.
        while hi - lo > 1:
            mid = (lo + hi) // 2
            result = attempt(mid)
            if result.feasible:
                lo, best = mid, result
            else:
                hi = mid
    else:
        lo = hi
    if lo == 0 and requests:
        _LOGGER.warning("%s cannot accommodate even one request", deployment.label)
    _LOGGER.info("%s: saturation capacity %d", deployment.label, lo)
    return _outcome(deployment, requests[:lo], best, costs, timed_out)


def fixed_cost_run(
    deployment: Deployment,
    workload_spec: WorkloadSpec,
    solver: SolverKind = SolverKind.EXACT,
    limits: SolveLimits = SolveLimits(),
    weights: ObjectiveWeights = DEFAULT_WEIGHTS,
    costs: UnitCosts = DEFAULT_COSTS,
) -> RunOutcome:
    """Solves a fixed-size workload; infeasibility is returned, never repaired.

    :param deployment: The deployment.
    :type deployment: Deployment
    :param workload_spec: The workload, ``count`` requests.
    :type workload_spec: WorkloadSpec
    :rtype: RunOutcome
    """
    requests = generate_workload(workload_spec)
    result = _solve_prefix(deployment, requests, solver, limits, weights)
    return _outcome(deployment, requests, result, costs, result.time_limited)


def summarize(values: Sequence[float], confidence: float = 0.95) -> StatSummary:
    """Mean and Student's t confidence half-width of repeated runs.

    :param values: One value per run.
    :type values: Sequence[float]
    :param confidence: Two-sided confidence level in [0, 1).
    :type confidence: float
    :rtype: StatSummary
    """
    if len(values) < 2:
        raise DomainError(f"need at least 2 values, got {len(values)}")
    if not 0 <= confidence < 1:
        raise DomainError(f"confidence must lie in [0, 1): {confidence}")
    data = np.asarray(values, dtype=float)
    n = len(data)
    s = float(np.std(data, ddof=1))
    t = float(stats.t.ppf((1 + confidence) / 2, n - 1))
    return StatSummary(
        mean=float(np.mean(data)), ci_half_width=float(t * s / np.sqrt(n)), runs=n
    )


def describe(values: Sequence[float], confidence: float = 0.95) -> Optional[StatSummary]:
    """Like :func:`summarize` but a single run gets a zero-width interval."""
    if not values:
        return None
    if len(values) == 1:
        return StatSummary(mean=float(values[0]), ci_half_width=0.0, runs=1)
    return summarize(values, confidence)
