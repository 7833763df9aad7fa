"""Allocation of requests to pooled and standalone nodes.

The lexicographic objective (total penalty, weighted active capacity) is solved
in two phases by a depth-first branch-and-bound over request-to-host and
request-to-accelerator decisions. Memory is not branched on: it is fungible
within a pool, so after local memory is used up to host capacity the cheapest
set of memory nodes covering the remaining demand is computed directly.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import auto
from functools import cached_property
from itertools import combinations, product
import logging
import math
from pathlib import Path
import time
from typing import Iterable, Optional, Sequence

from .exceptions import BudgetExceededError, DomainError, InfeasibleProblemError
from .model import (
    DEFAULT_WEIGHTS,
    AcceleratorType,
    NamedEnum,
    Node,
    NodeKind,
    Objective,
    ObjectiveWeights,
    Request,
    penalty,
    weighted_capacity,
)
from .poolcfg import Deployment
from .serialization import read_json, write_json

_LOGGER = logging.getLogger(__name__)

_ACCELERATOR_NODE_KINDS = {
    AcceleratorType.GPU: NodeKind.GPU,
    AcceleratorType.FPGA: NodeKind.FPGA,
}


class SolverKind(NamedEnum):
    """Available solvers."""

    EXACT = auto()
    GREEDY = auto()
    EXHAUSTIVE = auto()


class SolveStatus(NamedEnum):
    """Outcome of a solve."""

    OPTIMAL = auto()
    FEASIBLE = auto()
    INFEASIBLE = auto()
    BUDGET_EXCEEDED = auto()


class BudgetLimit(NamedEnum):
    """Which limit stopped a search."""

    NODES = auto()
    TIME = auto()


@dataclass(frozen=True)
class SolveLimits:
    """Search budget of the exact solver.

    The node budget is the reproducible limit: a search cut off by it always
    stops at the same node with the same incumbent. The time budget is a
    safety net whose outcome depends on the machine.
    """

    time_budget: float = 600.0
    node_budget: int = 1_000_000
    optimality_required: bool = False

    def __post_init__(self) -> None:
        if self.time_budget <= 0 or self.node_budget <= 0:
            raise DomainError(f"solve budgets must be positive: {self}")


@dataclass(frozen=True)
class MemorySlice:
    """Remote memory drawn from one memory node."""

    node: int
    amount: int


@dataclass(frozen=True)
class AcceleratorGrant:
    """Accelerator units drawn from one provider.

    The provider is either the host itself (integrated accelerator) or a
    dedicated GPU/FPGA node in the host's pool.
    """

    provider: int
    units: int


@dataclass(frozen=True)
class Placement:
    """Where one request's resources come from."""

    request: int
    host: int
    local_memory: int
    remote_memory: tuple[MemorySlice, ...] = ()
    accelerator: Optional[AcceleratorGrant] = None

    @property
    def remote_total(self) -> int:
        """Total remote memory in GB."""
        return sum(s.amount for s in self.remote_memory)


@dataclass(frozen=True)
class Solution:
    """Placements of every request with the derived active set and objective."""

    placements: tuple[Placement, ...]
    active_nodes: tuple[int, ...]
    objective: Objective


@dataclass(frozen=True)
class SolveResult:
    """Status of a solve and the best solution found, if any.

    ``exhausted`` names the limit that stopped a ``BUDGET_EXCEEDED`` search.
    """

    status: SolveStatus
    solution: Optional[Solution] = None
    explored: int = 0
    exhausted: Optional[BudgetLimit] = None

    @property
    def time_limited(self) -> bool:
        """Whether the wall-clock limit cut the search short."""
        return self.exhausted is BudgetLimit.TIME

    @property
    def feasible(self) -> bool:
        """Whether a solution is available."""
        return self.solution is not None


@dataclass(frozen=True)
class Violation:
    """A broken constraint found by :func:`validate`."""

    code: str
    message: str
    request: Optional[int] = None
    node: Optional[int] = None


@dataclass(frozen=True)
class Option:
    """One branching choice for a request: a host and an accelerator provider."""

    host: int
    provider: Optional[int]
    penalty: int

    def sort_key(self) -> tuple[int, int, int]:
        """Deterministic order: penalty, host id, provider id."""
        return (self.penalty, self.host, -1 if self.provider is None else self.provider)


class _MemoryCover:
    """Cheapest set of a pool's memory nodes holding a given remote demand."""

    def __init__(self, nodes: Sequence[Node], weights: ObjectiveWeights) -> None:
        self.nodes = sorted(nodes, key=lambda n: n.id)
        self.weight = weights.memory
        self.total = sum(n.capacity.memory for n in self.nodes)
        sizes = {n.capacity.memory for n in self.nodes}
        self._size = sizes.pop() if len(sizes) == 1 else None
        self._cache: dict[int, tuple[int, ...]] = {0: ()}

    def cover(self, need: int) -> tuple[int, ...]:
        """Node ids of the cover; lowest ids win ties."""
        if need in self._cache:
            return self._cache[need]
        if need > self.total:
            raise DomainError(f"remote demand {need} GB exceeds pool memory {self.total} GB")
        if self._size is not None:
            ids = tuple(n.id for n in self.nodes[: -(-need // self._size)])
        else:
            best: Optional[tuple[int, tuple[int, ...]]] = None
            for k in range(1, len(self.nodes) + 1):
                for subset in combinations(self.nodes, k):
                    cap = sum(n.capacity.memory for n in subset)
                    key = (cap, tuple(n.id for n in subset))
                    if cap >= need and (best is None or key < best):
                        best = key
            assert best is not None
            ids = best[1]
        self._cache[need] = ids
        return ids

    def cost(self, need: int) -> int:
        """Weighted capacity of the cover."""
        if need == 0:
            return 0
        if self._size is not None:
            return self.weight * self._size * -(-need // self._size)
        ids = set(self.cover(need))
        return self.weight * sum(n.capacity.memory for n in self.nodes if n.id in ids)


@dataclass(frozen=True)
class Problem:
    """An immutable allocation instance.

    ``options[i]`` lists every (host, accelerator provider) pair that can serve
    ``requests[i]`` on its own; cross-pool pairs never appear.
    """

    deployment: Deployment
    requests: tuple[Request, ...]
    weights: ObjectiveWeights
    options: tuple[tuple[Option, ...], ...]

    @cached_property
    def nodes(self) -> dict[int, Node]:
        """Nodes by id."""
        return {n.id: n for n in self.deployment.nodes}

    @cached_property
    def node_weight(self) -> dict[int, int]:
        """Weighted capacity of every node."""
        return {n.id: weighted_capacity(n, self.weights) for n in self.deployment.nodes}

    @cached_property
    def memory_covers(self) -> dict[int, _MemoryCover]:
        """Memory cover helper per pool id."""
        return {
            pool.id: _MemoryCover(
                [n for n in self.deployment.pool_nodes(pool) if n.kind is NodeKind.MEMORY],
                self.weights,
            )
            for pool in self.deployment.pools
        }

    @property
    def empty(self) -> bool:
        """Whether there is nothing to place."""
        return not self.requests


def build_problem(
    deployment: Deployment,
    requests: Iterable[Request],
    weights: ObjectiveWeights = DEFAULT_WEIGHTS,
) -> Problem:
    """Formulates the allocation problem.

    :param deployment: Nodes and pools to allocate from.
    :type deployment: Deployment
    :param requests: Requests to place.
    :type requests: Iterable[Request]
    :param weights: Objective weights.
    :type weights: ObjectiveWeights
    :rtype: Problem
    """
    requests = tuple(requests)
    if len({r.id for r in requests}) != len(requests):
        raise DomainError("request ids must be unique")

    hosts = [n for n in deployment.nodes if n.is_host]
    max_cores = max((h.capacity.cores for h in hosts), default=None)
    for r in requests:
        if max_cores is not None and r.demand.cores > max_cores:
            raise InfeasibleProblemError(
                f"request {r.id} needs {r.demand.cores} cores, no host has more than {max_cores}"
            )

    pool_memory: dict[int, int] = defaultdict(int)
    pool_accels: dict[int, list[Node]] = defaultdict(list)
    for n in deployment.nodes:
        if n.pool is None:
            continue
        if n.kind is NodeKind.MEMORY:
            pool_memory[n.pool] += n.capacity.memory
        elif n.kind in (NodeKind.GPU, NodeKind.FPGA):
            pool_accels[n.pool].append(n)

    options = []
    for r in requests:
        d = r.demand
        accel = r.accelerator_type
        opts = []
        for h in hosts:
            local = h.capacity.memory
            if h.capacity.cores < d.cores or local < r.local_threshold:
                continue
            if h.pool is None and local < d.memory:
                continue
            if h.pool is not None and d.memory - local > pool_memory[h.pool]:
                continue
            pen = penalty(r.workload_class, deployment.placement_class(h))
            if accel is None:
                opts.append(Option(h.id, None, pen))
                continue
            if h.accelerator_capacity(accel) >= d.accelerator:
                opts.append(Option(h.id, h.id, pen))
            if h.pool is not None:
                opts.extend(
                    Option(h.id, k.id, pen)
                    for k in pool_accels[h.pool]
                    if k.kind is _ACCELERATOR_NODE_KINDS[accel]
                    and k.accelerator_capacity(accel) >= d.accelerator
                )
        opts.sort(key=Option.sort_key)
        options.append(tuple(opts))

    return Problem(
        deployment=deployment,
        requests=requests,
        weights=weights,
        options=tuple(options),
    )


class _Packing:
    """Incremental state of a partial assignment.

    Every constraint is monotone in the set of placed requests, so a partial
    assignment that violates one can be discarded.
    """

    def __init__(self, problem: Problem) -> None:
        self.problem = problem
        self.cores_used: Counter[int] = Counter()
        self.memory_demand: Counter[int] = Counter()
        self.threshold: Counter[int] = Counter()
        self.host_load: Counter[int] = Counter()
        self.accel_used: Counter[int] = Counter()
        self.accel_load: Counter[int] = Counter()
        self.residual: Counter[int] = Counter()
        self.penalty = 0
        self.cost = 0
        # Spare capacity on active nodes, for the lower bound.
        self.free_cores = 0
        self.free_accel: Counter[AcceleratorType] = Counter()

    def _excess(self, host: Node, demand: int) -> int:
        return max(0, demand - host.capacity.memory)

    def fits(self, r: Request, opt: Option) -> bool:
        """Whether ``opt`` still has room for ``r``."""
        nodes = self.problem.nodes
        host = nodes[opt.host]
        d = r.demand
        if self.cores_used[host.id] + d.cores > host.capacity.cores:
            return False
        if self.threshold[host.id] + r.local_threshold > host.capacity.memory:
            return False
        demand = self.memory_demand[host.id] + d.memory
        if host.pool is None:
            if demand > host.capacity.memory:
                return False
        else:
            residual = (
                self.residual[host.pool]
                - self._excess(host, self.memory_demand[host.id])
                + self._excess(host, demand)
            )
            if residual > self.problem.memory_covers[host.pool].total:
                return False
        if opt.provider is not None:
            provider = nodes[opt.provider]
            cap = provider.accelerator_capacity(r.accelerator_type)
            if self.accel_used[provider.id] + d.accelerator > cap:
                return False
        return True

    def _memory_delta(self, host: Node, added: int) -> int:
        if host.pool is None:
            return 0
        before = self.memory_demand[host.id]
        old = self.residual[host.pool]
        new = old - self._excess(host, before) + self._excess(host, before + added)
        if new == old:
            return 0
        cover = self.problem.memory_covers[host.pool]
        return cover.cost(new) - cover.cost(old)

    def delta(self, r: Request, opt: Option) -> int:
        """Increase of weighted usage if ``r`` is placed by ``opt``."""
        weight = self.problem.node_weight
        inc = 0
        if self.host_load[opt.host] == 0:
            inc += weight[opt.host]
        if (
            opt.provider is not None
            and opt.provider != opt.host
            and self.accel_load[opt.provider] == 0
        ):
            inc += weight[opt.provider]
        return inc + self._memory_delta(self.problem.nodes[opt.host], r.demand.memory)

    def assign(self, r: Request, opt: Option) -> None:
        """Places ``r``; the caller checked :meth:`fits`."""
        nodes = self.problem.nodes
        host = nodes[opt.host]
        d = r.demand
        self.cost += self.delta(r, opt)
        self.penalty += opt.penalty
        if self.host_load[host.id] == 0:
            self.free_cores += host.capacity.cores
            for accel in AcceleratorType:
                self.free_accel[accel] += host.accelerator_capacity(accel)
        self.host_load[host.id] += 1
        self.cores_used[host.id] += d.cores
        self.free_cores -= d.cores
        self.threshold[host.id] += r.local_threshold
        if host.pool is not None:
            before = self.memory_demand[host.id]
            self.residual[host.pool] += self._excess(host, before + d.memory) - self._excess(
                host, before
            )
        self.memory_demand[host.id] += d.memory
        if opt.provider is not None:
            accel = r.accelerator_type
            if opt.provider != host.id and self.accel_load[opt.provider] == 0:
                self.free_accel[accel] += nodes[opt.provider].accelerator_capacity(accel)
            self.accel_load[opt.provider] += 1
            self.accel_used[opt.provider] += d.accelerator
            self.free_accel[accel] -= d.accelerator

    def unassign(self, r: Request, opt: Option) -> None:
        """Reverts :meth:`assign`."""
        nodes = self.problem.nodes
        host = nodes[opt.host]
        d = r.demand
        if opt.provider is not None:
            accel = r.accelerator_type
            self.free_accel[accel] += d.accelerator
            self.accel_used[opt.provider] -= d.accelerator
            self.accel_load[opt.provider] -= 1
            if opt.provider != host.id and self.accel_load[opt.provider] == 0:
                self.free_accel[accel] -= nodes[opt.provider].accelerator_capacity(accel)
        self.memory_demand[host.id] -= d.memory
        if host.pool is not None:
            after = self.memory_demand[host.id]
            self.residual[host.pool] -= self._excess(host, after + d.memory) - self._excess(
                host, after
            )
        self.threshold[host.id] -= r.local_threshold
        self.free_cores += d.cores
        self.cores_used[host.id] -= d.cores
        self.host_load[host.id] -= 1
        if self.host_load[host.id] == 0:
            self.free_cores -= host.capacity.cores
            for accel in AcceleratorType:
                self.free_accel[accel] -= host.accelerator_capacity(accel)
        self.penalty -= opt.penalty
        self.cost -= self.delta(r, opt)


def _search_order(problem: Problem) -> list[int]:
    """Request indices, largest weighted demand first."""
    w = problem.weights
    return sorted(
        range(len(problem.requests)),
        key=lambda i: (-w.weigh(problem.requests[i].demand), problem.requests[i].id),
    )


def _materialize(problem: Problem, assignment: Sequence[Option]) -> Solution:
    """Turns a feasible assignment into placements.

    Each host first covers its requests' thresholds, then tops up local memory
    in request order; the rest is drawn from the pool's memory cover.
    """
    nodes = problem.nodes
    by_host: dict[int, list[int]] = defaultdict(list)
    for i, opt in enumerate(assignment):
        by_host[opt.host].append(i)

    local = [0] * len(assignment)
    for h, indices in by_host.items():
        spare = nodes[h].capacity.memory
        for i in indices:
            local[i] = problem.requests[i].local_threshold
            spare -= local[i]
        for i in indices:
            extra = min(problem.requests[i].demand.memory - local[i], spare)
            local[i] += extra
            spare -= extra

    remote_need: dict[int, int] = defaultdict(int)
    for i, opt in enumerate(assignment):
        pool = nodes[opt.host].pool
        if pool is not None:
            remote_need[pool] += problem.requests[i].demand.memory - local[i]

    slices: list[list[MemorySlice]] = [[] for _ in assignment]
    for pool, need in sorted(remote_need.items()):
        cover = [nodes[k] for k in problem.memory_covers[pool].cover(need)]
        room = {n.id: n.capacity.memory for n in cover}
        cursor = 0
        for i, opt in enumerate(assignment):
            if nodes[opt.host].pool != pool:
                continue
            left = problem.requests[i].demand.memory - local[i]
            while left > 0:
                node = cover[cursor]
                take = min(left, room[node.id])
                slices[i].append(MemorySlice(node=node.id, amount=take))
                room[node.id] -= take
                left -= take
                if room[node.id] == 0:
                    cursor += 1

    placements = []
    active: set[int] = set()
    for i, opt in enumerate(assignment):
        r = problem.requests[i]
        grant = None
        if opt.provider is not None:
            grant = AcceleratorGrant(provider=opt.provider, units=r.accelerator_units)
            active.add(opt.provider)
        active.add(opt.host)
        active.update(s.node for s in slices[i])
        placements.append(
            Placement(
                request=r.id,
                host=opt.host,
                local_memory=local[i],
                remote_memory=tuple(slices[i]),
                accelerator=grant,
            )
        )
    return Solution(
        placements=tuple(placements),
        active_nodes=tuple(sorted(active)),
        objective=Objective(
            penalty=sum(opt.penalty for opt in assignment),
            weighted_usage=sum(problem.node_weight[n] for n in active),
        ),
    )


class _BudgetHit(Exception):
    def __init__(self, limit: BudgetLimit) -> None:
        super().__init__(limit.value)
        self.limit = limit


class _BranchAndBound:
    """Depth-first branch-and-bound over (host, accelerator provider) choices.

    Identical inactive nodes are interchangeable, so only the lowest-id
    inactive node of each equivalence class is branched on.
    """

    def __init__(self, problem: Problem, limits: SolveLimits) -> None:
        self.problem = problem
        self.limits = limits
        self.order = _search_order(problem)
        self.deadline = time.monotonic() + limits.time_budget
        self.explored = 0
        self.state = _Packing(problem)
        self.assignment: list[Optional[Option]] = [None] * len(problem.requests)
        self.best: Optional[list[Option]] = None
        self.best_key: tuple[int, int] = (math.inf, math.inf)  # type: ignore[assignment]
        self.penalty_cap: Optional[int] = None
        self._phase = 1
        self._init_classes()
        self._init_suffixes()

    def _init_classes(self) -> None:
        classes: dict[tuple, list[int]] = defaultdict(list)
        for n in sorted(self.problem.deployment.nodes, key=lambda n: n.id):
            classes[(n.pool, n.kind, n.capacity)].append(n.id)
        self.peers = {i: members for members in classes.values() for i in members}

    def _init_suffixes(self) -> None:
        p = self.problem
        n = len(self.order)
        self.min_penalty = [0] * (n + 1)
        self.cores_left = [0] * (n + 1)
        self.accel_left = [Counter() for _ in range(n + 1)]
        for depth in range(n - 1, -1, -1):
            i = self.order[depth]
            r = p.requests[i]
            self.min_penalty[depth] = self.min_penalty[depth + 1] + min(
                (o.penalty for o in p.options[i]), default=0
            )
            self.cores_left[depth] = self.cores_left[depth + 1] + r.demand.cores
            self.accel_left[depth] = self.accel_left[depth + 1].copy()
            if r.accelerator_type is not None:
                self.accel_left[depth][r.accelerator_type] += r.accelerator_units

        # Cheapest weighted capacity per core, and per accelerator unit.
        nodes = p.deployment.nodes
        self.core_rate = min(
            ((p.node_weight[h.id], h.capacity.cores) for h in nodes if h.capacity.cores),
            key=lambda q: q[0] / q[1],
            default=None,
        )
        self.accel_rate = {}
        for accel in AcceleratorType:
            self.accel_rate[accel] = min(
                (
                    (p.node_weight[k.id], k.accelerator_capacity(accel))
                    for k in nodes
                    if k.accelerator_capacity(accel)
                ),
                key=lambda q: q[0] / q[1],
                default=None,
            )

    def _extra_bound(self, depth: int) -> int:
        """Lower bound on the weighted capacity still to be activated."""
        s = self.state
        core_extra = 0
        deficit = self.cores_left[depth] - s.free_cores
        if deficit > 0 and self.core_rate is not None:
            num, den = self.core_rate
            core_extra = -(-deficit * num // den)
        accel_extra = 0
        for accel, units in self.accel_left[depth].items():
            deficit = units - s.free_accel[accel]
            rate = self.accel_rate[accel]
            if deficit > 0 and rate is not None:
                accel_extra += -(-deficit * rate[0] // rate[1])
        # Servers count toward both bounds, so only the larger one is safe.
        return max(core_extra, accel_extra)

    def _representative(self, node_id: int, load: Counter[int]) -> bool:
        if load[node_id]:
            return True
        for peer in self.peers[node_id]:
            if load[peer] == 0:
                return peer == node_id
        return True

    def _tick(self) -> None:
        self.explored += 1
        if self.explored > self.limits.node_budget:
            raise _BudgetHit(BudgetLimit.NODES)
        if self.explored % 512 == 0 and time.monotonic() > self.deadline:
            raise _BudgetHit(BudgetLimit.TIME)

    def _finished(self) -> bool:
        # Phase 1 stops as soon as the penalty floor is reached.
        return self._phase == 1 and self.best_key[0] == self.min_penalty[0]

    def _offer(self, assignment: Sequence[Option], key: tuple[int, int]) -> None:
        if self._phase == 1:
            better = key[0] < self.best_key[0]
        else:
            better = key[0] <= self.penalty_cap and key[1] < self.best_key[1]
        if better:
            self.best = list(assignment)
            self.best_key = key

    def _dfs(self, depth: int) -> None:
        self._tick()
        s = self.state
        if depth == len(self.order):
            self._offer(self.assignment, (s.penalty, s.cost))  # type: ignore[arg-type]
            return
        i = self.order[depth]
        r = self.problem.requests[i]
        children = []
        for opt in self.problem.options[i]:
            if not self._representative(opt.host, s.host_load):
                continue
            if (
                opt.provider is not None
                and opt.provider != opt.host
                and not self._representative(opt.provider, s.accel_load)
            ):
                continue
            if not s.fits(r, opt):
                continue
            children.append((opt.penalty, s.delta(r, opt), opt.sort_key(), opt))
        children.sort(key=lambda c: c[:3])

        for pen, _, _, opt in children:
            penalty_floor = s.penalty + pen + self.min_penalty[depth + 1]
            if self._phase == 1:
                if penalty_floor >= self.best_key[0]:
                    break
            elif penalty_floor > self.penalty_cap:
                break
            s.assign(r, opt)
            if self._phase == 2 and s.cost + self._extra_bound(depth + 1) >= self.best_key[1]:
                s.unassign(r, opt)
                continue
            self.assignment[i] = opt
            self._dfs(depth + 1)
            self.assignment[i] = None
            s.unassign(r, opt)
            if self._finished():
                return

    def run_phase(self, phase: int, seed: Optional[list[Option]] = None) -> None:
        """Runs one phase; a seed assignment becomes the starting incumbent."""
        self._phase = phase
        if phase == 2:
            self.penalty_cap = self.best_key[0]
            self.best_key = (self.penalty_cap, math.inf)  # type: ignore[assignment]
        if seed is not None:
            key = _assignment_key(self.problem, seed)
            if key is not None:
                self._offer(seed, key)
        if not self._finished():
            self._dfs(0)


def _assignment_key(
    problem: Problem, assignment: Sequence[Option]
) -> Optional[tuple[int, int]]:
    """Objective of a complete assignment via the incremental state, None if infeasible."""
    state = _Packing(problem)
    for i, opt in enumerate(assignment):
        r = problem.requests[i]
        if not state.fits(r, opt):
            return None
        state.assign(r, opt)
    return (state.penalty, state.cost)


def _greedy_assignment(problem: Problem) -> Optional[list[Option]]:
    state = _Packing(problem)
    assignment: list[Optional[Option]] = [None] * len(problem.requests)
    for i in _search_order(problem):
        r = problem.requests[i]
        best = None
        for opt in problem.options[i]:
            if not state.fits(r, opt):
                continue
            key = (opt.penalty, state.delta(r, opt), opt.sort_key())
            if best is None or key < best[0]:
                best = (key, opt)
        if best is None:
            _LOGGER.debug("Greedy found no host for request %d", r.id)
            return None
        state.assign(r, best[1])
        assignment[i] = best[1]
    return assignment  # type: ignore[return-value]


def _empty_solution() -> Solution:
    return Solution(placements=(), active_nodes=(), objective=Objective())


def solve_greedy(problem: Problem) -> SolveResult:
    """Best-fit-decreasing heuristic.

    Requests are taken by descending weighted demand; each goes to the option
    with the smallest (penalty, newly activated weighted capacity).

    :param problem: The instance.
    :type problem: Problem
    :rtype: SolveResult
    """
    if problem.empty:
        return SolveResult(SolveStatus.FEASIBLE, _empty_solution())
    assignment = _greedy_assignment(problem)
    if assignment is None:
        return SolveResult(SolveStatus.INFEASIBLE)
    return SolveResult(SolveStatus.FEASIBLE, _materialize(problem, assignment))


def solve_exact(problem: Problem, limits: SolveLimits = SolveLimits()) -> SolveResult:
    """Lexicographically optimal allocation.

    Phase 1 minimizes the total penalty; phase 2 minimizes weighted usage with
    the penalty held at its optimum. Both phases share one budget.

    :param problem: The instance.
    :type problem: Problem
    :param limits: Search budget.
    :type limits: SolveLimits
    :rtype: SolveResult
    :raises BudgetExceededError: If the budget runs out and optimality is required.
    """
    if problem.empty:
        return SolveResult(SolveStatus.OPTIMAL, _empty_solution())
    if any(not opts for opts in problem.options):
        return SolveResult(SolveStatus.INFEASIBLE)

    seed = _greedy_assignment(problem)
    search = _BranchAndBound(problem, limits)
    status = SolveStatus.OPTIMAL
    exhausted = None
    try:
        search.run_phase(1, seed)
        if search.best is None:
            _LOGGER.debug("Infeasible after %d nodes", search.explored)
            return SolveResult(SolveStatus.INFEASIBLE, explored=search.explored)
        _LOGGER.debug(
            "Penalty optimum %d after %d nodes", search.best_key[0], search.explored
        )
        search.run_phase(2, search.best)
    except _BudgetHit as hit:
        status = SolveStatus.BUDGET_EXCEEDED
        exhausted = hit.limit
        _LOGGER.warning(
            "Search %s budget exhausted after %d nodes (%d requests)",
            hit.limit.value.lower(),
            search.explored,
            len(problem.requests),
        )

    solution = None if search.best is None else _materialize(problem, search.best)
    if status is SolveStatus.BUDGET_EXCEEDED and limits.optimality_required:
        raise BudgetExceededError(
            f"no proven optimum within {limits.node_budget} nodes / {limits.time_budget}s",
            incumbent=solution,
        )
    return SolveResult(status, solution, explored=search.explored, exhausted=exhausted)


def _cheapest_cover_by_enumeration(nodes: Sequence[Node], need: int) -> Optional[set[int]]:
    best: Optional[tuple[int, tuple[int, ...]]] = None
    for k in range(len(nodes) + 1):
        for subset in combinations(sorted(nodes, key=lambda n: n.id), k):
            cap = sum(n.capacity.memory for n in subset)
            key = (cap, tuple(n.id for n in subset))
            if cap >= need and (best is None or key < best):
                best = key
    return None if best is None else set(best[1])


def _evaluate_from_scratch(
    problem: Problem, assignment: Sequence[Option]
) -> Optional[tuple[int, int]]:
    """Objective of a complete assignment from aggregate totals, None if infeasible."""
    nodes = problem.nodes
    cores: Counter[int] = Counter()
    memory: Counter[int] = Counter()
    threshold: Counter[int] = Counter()
    accel: Counter[int] = Counter()
    for r, opt in zip(problem.requests, assignment):
        cores[opt.host] += r.demand.cores
        memory[opt.host] += r.demand.memory
        threshold[opt.host] += r.local_threshold
        if opt.provider is not None:
            accel[opt.provider] += r.accelerator_units
    active = set(cores) | set(accel)
    remote: Counter[int] = Counter()
    for h in cores:
        host = nodes[h]
        if cores[h] > host.capacity.cores or threshold[h] > host.capacity.memory:
            return None
        excess = max(0, memory[h] - host.capacity.memory)
        if host.pool is None and excess:
            return None
        if host.pool is not None:
            remote[host.pool] += excess
    for k, units in accel.items():
        node = nodes[k]
        if units > node.capacity.gpu + node.capacity.fpga:
            return None
    for pool, need in remote.items():
        pool_memory = [
            n
            for n in problem.deployment.pool_nodes(problem.deployment.pool(pool))
            if n.kind is NodeKind.MEMORY
        ]
        chosen = _cheapest_cover_by_enumeration(pool_memory, need)
        if chosen is None:
            return None
        active |= chosen
    usage = sum(problem.node_weight[n] for n in active)
    return (sum(opt.penalty for opt in assignment), usage)


def solve_exhaustive(problem: Problem) -> SolveResult:
    """Exhaustive enumeration of every assignment; the correctness oracle.

    Only practical for a handful of requests and nodes.

    :param problem: The instance.
    :type problem: Problem
    :rtype: SolveResult
    """
    best: Optional[tuple[tuple[int, int], tuple[Option, ...]]] = None
    explored = 0
    for assignment in product(*problem.options):
        explored += 1
        key = _evaluate_from_scratch(problem, assignment)
        if key is not None and (best is None or key < best[0]):
            best = (key, assignment)
    if best is None:
        return SolveResult(SolveStatus.INFEASIBLE, explored=explored)
    return SolveResult(
        SolveStatus.OPTIMAL, _materialize(problem, best[1]), explored=explored
    )


def solve(
    problem: Problem,
    solver: SolverKind = SolverKind.EXACT,
    limits: SolveLimits = SolveLimits(),
) -> SolveResult:
    """Solves a problem with the chosen solver.

    :param problem: The instance.
    :type problem: Problem
    :param solver: Which solver to use.
    :type solver: SolverKind
    :param limits: Budget for the exact solver.
    :type limits: SolveLimits
    :rtype: SolveResult
    """
    if solver is SolverKind.GREEDY:
        return solve_greedy(problem)
    if solver is SolverKind.EXHAUSTIVE:
        return solve_exhaustive(problem)
    return solve_exact(problem, limits)


def validate(solution: Solution, problem: Problem) -> list[Violation]:
    """Checks a solution against every constraint of the problem.

    All violations are reported, not just the first one.

    :param solution: Solution to check.
    :type solution: Solution
    :param problem: The instance it claims to solve.
    :type problem: Problem
    :rtype: list[Violation]
    """
    deployment = problem.deployment
    nodes = problem.nodes
    requests = {r.id: r for r in problem.requests}
    violations: list[Violation] = []

    def flag(code: str, message: str, request=None, node=None) -> None:
        violations.append(Violation(code, message, request=request, node=node))

    used: dict[int, Counter[str]] = defaultdict(Counter)
    supplying: set[int] = set()
    total_penalty = 0
    placed: set[int] = set()

    for pl in solution.placements:
        r = requests.get(pl.request)
        if r is None:
            flag("unknown-request", f"placement for unknown request {pl.request}", pl.request)
            continue
        if r.id in placed:
            flag("duplicate-placement", f"request {r.id} is placed twice", r.id)
            continue
        placed.add(r.id)
        host = nodes.get(pl.host)
        if host is None or not host.is_host:
            flag("host-kind", f"node {pl.host} cannot host requests", r.id, pl.host)
            continue
        total_penalty += penalty(r.workload_class, deployment.placement_class(host))
        used[host.id]["cores"] += r.demand.cores
        used[host.id]["memory"] += pl.local_memory
        supplying.add(host.id)

        if pl.local_memory < r.local_threshold:
            flag(
                "local-threshold",
                f"request {r.id} gets {pl.local_memory} GB local, needs {r.local_threshold} GB",
                r.id,
                host.id,
            )
        if pl.local_memory < 0 or any(s.amount <= 0 for s in pl.remote_memory):
            flag("memory-balance", f"request {r.id} has a non-positive memory slice", r.id)
        if pl.local_memory + pl.remote_total != r.demand.memory:
            flag(
                "memory-balance",
                f"request {r.id} receives {pl.local_memory + pl.remote_total} GB "
                f"of {r.demand.memory} GB",
                r.id,
            )
        for s in pl.remote_memory:
            node = nodes.get(s.node)
            if node is None or node.kind is not NodeKind.MEMORY:
                flag("memory-kind", f"node {s.node} is not a memory node", r.id, s.node)
                continue
            if host.pool is None:
                flag(
                    "standalone",
                    f"request {r.id} on standalone server {host.id} draws remote memory",
                    r.id,
                    s.node,
                )
            elif node.pool != host.pool:
                flag(
                    "same-pool",
                    f"request {r.id} draws memory from node {s.node} outside pool {host.pool}",
                    r.id,
                    s.node,
                )
            used[s.node]["memory"] += s.amount
            if s.amount > 0:
                supplying.add(s.node)

        accel = r.accelerator_type
        grant = pl.accelerator
        if accel is None:
            if grant is not None:
                flag("accelerator", f"request {r.id} needs no accelerator", r.id)
            continue
        if grant is None or grant.units != r.accelerator_units:
            flag("accelerator", f"request {r.id} lacks {r.accelerator_units} units", r.id)
            if grant is None:
                continue
        provider = nodes.get(grant.provider)
        if provider is None or provider.accelerator_capacity(accel) == 0:
            flag(
                "accelerator",
                f"node {grant.provider} provides no {accel.value} units",
                r.id,
                grant.provider,
            )
            continue
        if provider.id != host.id:
            if provider.is_host:
                flag(
                    "accelerator",
                    f"request {r.id} uses the integrated accelerator of another host",
                    r.id,
                    provider.id,
                )
            elif host.pool is None:
                flag(
                    "standalone",
                    f"request {r.id} on standalone server {host.id} uses node {provider.id}",
                    r.id,
                    provider.id,
                )
            elif provider.pool != host.pool:
                flag(
                    "same-pool",
                    f"request {r.id} uses accelerator node {provider.id} outside pool {host.pool}",
                    r.id,
                    provider.id,
                )
        used[provider.id][accel.value.lower()] += grant.units
        if grant.units > 0:
            supplying.add(provider.id)

    for rid in sorted(set(requests) - placed):
        flag("missing-placement", f"request {rid} is not placed", rid)

    for node_id in sorted(used):
        node = nodes.get(node_id)
        if node is None:
            continue
        cap = node.capacity
        for resource, amount in sorted(used[node_id].items()):
            if amount > getattr(cap, resource):
                flag(
                    "capacity",
                    f"node {node_id} supplies {amount} {resource}, capacity "
                    f"{getattr(cap, resource)}",
                    node=node_id,
                )

    if tuple(sorted(supplying)) != tuple(sorted(solution.active_nodes)):
        flag(
            "active-set",
            f"active nodes {sorted(solution.active_nodes)} differ from supplying nodes "
            f"{sorted(supplying)}",
        )

    expected = Objective(
        penalty=total_penalty,
        weighted_usage=sum(problem.node_weight[n] for n in supplying if n in nodes),
    )
    if solution.objective != expected:
        flag("objective", f"objective {solution.objective} should be {expected}")
    return violations


def write_solution(path: Path, solution: Solution) -> None:
    """Writes a solution as a JSON document."""
    write_json(Solution, path, solution)


def read_solution(path: Path) -> Solution:
    """Reads a solution written by :func:`write_solution`."""
    return read_json(Solution, path)
