"""Two-phase LP export of an allocation problem.

Variable names are stable: ``r{i}_h{j}`` (request i hosted on node j),
``r{i}_l{j}`` (local GB from host j), ``r{i}_m{k}`` (GB from memory node k),
``r{i}_a{k}`` (accelerator provider k) and ``act_{j}`` (node j active), with
request and node ids.
"""

from __future__ import annotations

from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Optional

import pulp

from .allocator import Problem, SolveStatus, solve_exact
from .model import NodeKind, penalty

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class LpModels:
    """The two single-objective models of the lexicographic problem."""

    penalty: pulp.LpProblem
    usage: pulp.LpProblem
    penalty_bound: int


@dataclass(frozen=True)
class LpExport:
    """Paths of the written LP files."""

    penalty: Path
    usage: Path


def _penalty_floor(problem: Problem) -> int:
    return sum(min((o.penalty for o in opts), default=0) for opts in problem.options)


def _penalty_optimum(problem: Problem) -> int:
    result = solve_exact(problem)
    if result.solution is None:
        # Both models are infeasible anyway.
        return _penalty_floor(problem)
    if result.status is not SolveStatus.OPTIMAL:
        _LOGGER.warning("Penalty bound comes from an unproven incumbent")
    return result.solution.objective.penalty


def build_lp_models(problem: Problem, penalty_bound: Optional[int] = None) -> LpModels:
    """Builds the phase-1 (penalty) and phase-2 (weighted usage) models.

    The phase-2 model bounds the total penalty by ``penalty_bound``, the
    phase-1 optimum. When omitted it is computed with :func:`solve_exact`.

    :param problem: The instance.
    :type problem: Problem
    :param penalty_bound: Penalty bound of the second phase.
    :type penalty_bound: int | None
    :rtype: LpModels
    """
    if penalty_bound is None:
        penalty_bound = _penalty_optimum(problem)
    deployment = problem.deployment
    nodes = sorted(deployment.nodes, key=lambda n: n.id)
    hosts = [n for n in nodes if n.is_host]
    memory_nodes = [n for n in nodes if n.kind is NodeKind.MEMORY]
    pool_hosts = {
        pool.id: [n for n in hosts if n.pool == pool.id] for pool in deployment.pools
    }

    act = {n.id: pulp.LpVariable(f"act_{n.id}", cat=pulp.LpBinary) for n in nodes}
    constraints: list[tuple[pulp.LpConstraint, str]] = []
    penalty_terms = []
    host_vars: dict[tuple[int, int], pulp.LpVariable] = {}
    local_vars: dict[tuple[int, int], pulp.LpVariable] = {}
    remote_vars: dict[tuple[int, int], pulp.LpVariable] = {}
    accel_vars: dict[tuple[int, int], pulp.LpVariable] = {}

    for r in problem.requests:
        i, d = r.id, r.demand
        for h in hosts:
            x = pulp.LpVariable(f"r{i}_h{h.id}", cat=pulp.LpBinary)
            loc = pulp.LpVariable(f"r{i}_l{h.id}", lowBound=0, cat=pulp.LpInteger)
            host_vars[i, h.id] = x
            local_vars[i, h.id] = loc
            penalty_terms.append(
                penalty(r.workload_class, deployment.placement_class(h)) * x
            )
            constraints.append((loc >= r.local_threshold * x, f"threshold_r{i}_{h.id}"))
            constraints.append((loc <= d.memory * x, f"local_r{i}_{h.id}"))
        constraints.append(
            (pulp.lpSum(host_vars[i, h.id] for h in hosts) == 1, f"assign_r{i}")
        )

        for k in memory_nodes:
            m = pulp.LpVariable(f"r{i}_m{k.id}", lowBound=0, cat=pulp.LpInteger)
            remote_vars[i, k.id] = m
            same_pool = pulp.lpSum(host_vars[i, h.id] for h in pool_hosts[k.pool])
            constraints.append((m <= d.memory * same_pool, f"pool_r{i}_m{k.id}"))
        constraints.append(
            (
                pulp.lpSum(local_vars[i, h.id] for h in hosts)
                + pulp.lpSum(remote_vars[i, k.id] for k in memory_nodes)
                == d.memory,
                f"memory_r{i}",
            )
        )

        accel = r.accelerator_type
        if accel is None:
            continue
        providers = []
        for k in nodes:
            if k.accelerator_capacity(accel) == 0:
                continue
            y = pulp.LpVariable(f"r{i}_a{k.id}", cat=pulp.LpBinary)
            accel_vars[i, k.id] = y
            providers.append(y)
            if k.is_host:
                constraints.append((y <= host_vars[i, k.id], f"integrated_r{i}_a{k.id}"))
            else:
                same_pool = pulp.lpSum(host_vars[i, h.id] for h in pool_hosts[k.pool])
                constraints.append((y <= same_pool, f"pool_r{i}_a{k.id}"))
        constraints.append((pulp.lpSum(providers) == 1, f"accelerator_r{i}"))

    for n in nodes:
        cap = n.capacity
        if n.is_host:
            constraints.append(
                (
                    pulp.lpSum(
                        r.demand.cores * host_vars[r.id, n.id] for r in problem.requests
                    )
                    <= cap.cores * act[n.id],
                    f"cores_{n.id}",
                )
            )
            constraints.append(
                (
                    pulp.lpSum(local_vars[r.id, n.id] for r in problem.requests)
                    <= cap.memory * act[n.id],
                    f"local_memory_{n.id}",
                )
            )
        if n.kind is NodeKind.MEMORY:
            constraints.append(
                (
                    pulp.lpSum(remote_vars[r.id, n.id] for r in problem.requests)
                    <= cap.memory * act[n.id],
                    f"remote_memory_{n.id}",
                )
            )
        units = [
            r.accelerator_units * accel_vars[r.id, n.id]
            for r in problem.requests
            if (r.id, n.id) in accel_vars
        ]
        if units:
            constraints.append(
                (pulp.lpSum(units) <= cap.accelerator * act[n.id], f"accelerator_{n.id}")
            )

    usage = pulp.lpSum(problem.node_weight[n.id] * act[n.id] for n in nodes)
    total_penalty = pulp.lpSum(penalty_terms)

    phase1 = pulp.LpProblem("allocation_penalty", pulp.LpMinimize)
    phase1 += total_penalty, "total_penalty"
    phase2 = pulp.LpProblem("allocation_usage", pulp.LpMinimize)
    phase2 += usage, "weighted_usage"
    for constraint, name in constraints:
        phase1 += constraint, name
        phase2 += constraint.copy(), name
    phase2 += total_penalty <= penalty_bound, "penalty_bound"
    return LpModels(penalty=phase1, usage=phase2, penalty_bound=penalty_bound)


def export_lp(
    problem: Problem,
    directory: Path,
    penalty_bound: Optional[int] = None,
    stem: str = "allocation",
) -> LpExport:
    """Writes the two-phase LP files.

    :param problem: The instance.
    :type problem: Problem
    :param directory: Output directory, created if missing.
    :type directory: Path
    :param penalty_bound: Penalty bound of the second phase (see :func:`build_lp_models`).
    :type penalty_bound: int | None
    :param stem: File name prefix.
    :type stem: str
    :rtype: LpExport
    """
    models = build_lp_models(problem, penalty_bound)
    directory.mkdir(parents=True, exist_ok=True)
    export = LpExport(
        penalty=directory / f"{stem}_phase1.lp",
        usage=directory / f"{stem}_phase2.lp",
    )
    models.penalty.writeLP(str(export.penalty))
    models.usage.writeLP(str(export.usage))
    _LOGGER.info(
        "Wrote %s and %s (penalty bound %d)",
        export.penalty,
        export.usage,
        models.penalty_bound,
    )
    return export
