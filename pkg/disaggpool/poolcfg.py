"""Builds deployments for the pool configuration policies."""

from __future__ import annotations

from dataclasses import dataclass
from enum import auto
from functools import cached_property
import logging
from pathlib import Path
from typing import Iterator, Optional

from .exceptions import ConfigurationError, DomainError
from .model import (
    DEFAULT_CATALOG,
    HALF_CATALOG,
    SERVER_KINDS,
    SERVER_POOL_CLASS,
    NamedEnum,
    Node,
    NodeCatalog,
    NodeKind,
    PoolClass,
    ResourceVector,
)
from .serialization import read_json, write_json

_LOGGER = logging.getLogger(__name__)


class Policy(NamedEnum):
    """Pool configuration policy."""

    C1 = auto()
    C2 = auto()
    C3 = auto()


class ServerMode(NamedEnum):
    """How conventional servers relate to the pools."""

    SEPARATE = auto()
    MIXED = auto()

    @property
    def suffix(self) -> str:
        """Short label used in condition names."""
        return self.value[0]


@dataclass(frozen=True)
class Pool:
    """An isolated group of nodes."""

    id: int
    pool_class: PoolClass
    nodes: tuple[int, ...]


@dataclass(frozen=True)
class Deployment:
    """The full inventory partitioned into pools under a policy.

    Standalone servers (separate mode only) belong to no pool.
    """

    policy: Policy
    server_mode: ServerMode
    nodes: tuple[Node, ...]
    pools: tuple[Pool, ...]
    standalone_servers: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        by_id = {}
        for n in self.nodes:
            if n.id in by_id:
                raise ConfigurationError(f"duplicate node id {n.id}")
            by_id[n.id] = n
        seen: set[int] = set()
        for pool in self.pools:
            if not any(by_id[i].is_host for i in pool.nodes if i in by_id):
                raise ConfigurationError(f"pool {pool.id} has no host-capable node")
            for i in pool.nodes:
                if i not in by_id:
                    raise ConfigurationError(f"pool {pool.id} lists unknown node {i}")
                if i in seen:
                    raise ConfigurationError(f"node {i} belongs to more than one pool")
                if by_id[i].pool != pool.id:
                    raise ConfigurationError(f"node {i} disagrees on its pool")
                seen.add(i)
            if (pool.pool_class is PoolClass.UNIFORM) != (self.policy is Policy.C1):
                raise ConfigurationError(
                    f"pool class {pool.pool_class.value} is not valid under {self.policy.value}"
                )
        for i in self.standalone_servers:
            node = by_id.get(i)
            if node is None or not node.kind.is_server or node.pool is not None:
                raise ConfigurationError(f"node {i} cannot be a standalone server")
            seen.add(i)
        if self.standalone_servers and self.server_mode is ServerMode.MIXED:
            raise ConfigurationError("mixed mode has no standalone servers")
        if seen != set(by_id):
            stray = sorted(set(by_id) - seen)
            raise ConfigurationError(f"nodes outside every pool: {stray}")

    @cached_property
    def _nodes_by_id(self) -> dict[int, Node]:
        return {n.id: n for n in self.nodes}

    @property
    def label(self) -> str:
        """Condition label, e.g. ``C1_S``."""
        return f"{self.policy.value}_{self.server_mode.suffix}"

    def node(self, node_id: int) -> Node:
        """Looks up a node by id.

        :param node_id: Node identifier.
        :type node_id: int
        :rtype: Node
        """
        return self._nodes_by_id[node_id]

    def pool(self, pool_id: int) -> Pool:
        """Looks up a pool by id."""
        for p in self.pools:
            if p.id == pool_id:
                return p
        raise KeyError(pool_id)

    def pool_nodes(self, pool: Pool) -> Iterator[Node]:
        """Yields the nodes of a pool in id order."""
        for i in pool.nodes:
            yield self.node(i)

    def placement_class(self, host: Node) -> PoolClass:
        """Class used to judge penalties for requests hosted on ``host``.

        Under C1 every host is uniform, pooled or not. Otherwise a pooled host
        takes its pool's class and a standalone server the class of its type.

        :param host: A host-capable node of this deployment.
        :type host: Node
        :rtype: PoolClass
        """
        if self.policy is Policy.C1:
            return PoolClass.UNIFORM
        if host.pool is None:
            return SERVER_POOL_CLASS[host.kind]
        return self.pool(host.pool).pool_class

    def installed(self) -> ResourceVector:
        """Total capacity over every node, active or not."""
        total = ResourceVector()
        for n in self.nodes:
            total = total + n.capacity
        return total


@dataclass(frozen=True)
class PoolLayout:
    """Recipe for the disaggregated part of one pool."""

    pool_class: PoolClass
    cpu_nodes: int
    memory_nodes: tuple[int, ...] = ()
    gpu_nodes: int = 0
    fpga_nodes: int = 0


POLICY_LAYOUTS: dict[Policy, tuple[PoolLayout, ...]] = {
    Policy.C1: tuple(
        PoolLayout(PoolClass.UNIFORM, 4, (160, 160), gpu_nodes=2, fpga_nodes=1)
        for _ in range(4)
    ),
    Policy.C2: (
        PoolLayout(PoolClass.GENERAL, 4, (128, 128)),
        PoolLayout(PoolClass.COMPUTE_OPTIMIZED, 4),
        PoolLayout(PoolClass.MEMORY_OPTIMIZED, 4, (384, 384)),
        PoolLayout(PoolClass.ACCELERATOR_ASSISTED, 4, (128, 128), 8, 4),
    ),
    Policy.C3: (
        PoolLayout(PoolClass.GENERAL, 5, (197, 197)),
        PoolLayout(PoolClass.COMPUTE_OPTIMIZED, 4),
        PoolLayout(PoolClass.MEMORY_OPTIMIZED, 3, (283, 283)),
        PoolLayout(PoolClass.ACCELERATOR_ASSISTED, 4, (160, 160), 8, 4),
    ),
}

# Recipes for HALF_CATALOG. C1 keeps the full pool shape with half as many
# pools; C2 and C3 keep every pool class with one memory node each.
HALF_POLICY_LAYOUTS: dict[Policy, tuple[PoolLayout, ...]] = {
    Policy.C1: tuple(
        PoolLayout(PoolClass.UNIFORM, 4, (160, 160), gpu_nodes=2, fpga_nodes=1)
        for _ in range(2)
    ),
    Policy.C2: (
        PoolLayout(PoolClass.GENERAL, 2, (128,)),
        PoolLayout(PoolClass.COMPUTE_OPTIMIZED, 2),
        PoolLayout(PoolClass.MEMORY_OPTIMIZED, 2, (384,)),
        PoolLayout(PoolClass.ACCELERATOR_ASSISTED, 2, (128,), 4, 2),
    ),
    Policy.C3: (
        PoolLayout(PoolClass.GENERAL, 3, (197,)),
        PoolLayout(PoolClass.COMPUTE_OPTIMIZED, 2),
        PoolLayout(PoolClass.MEMORY_OPTIMIZED, 1, (283,)),
        PoolLayout(PoolClass.ACCELERATOR_ASSISTED, 2, (160,), 4, 2),
    ),
}


class Scale(NamedEnum):
    """Size of the built-in inventory."""

    FULL = auto()
    HALF = auto()

    @property
    def catalog(self) -> NodeCatalog:
        """Node inventory at this scale."""
        return DEFAULT_CATALOG if self is Scale.FULL else HALF_CATALOG

    def layouts(self, policy: Policy) -> tuple[PoolLayout, ...]:
        """Pool recipes of a policy at this scale."""
        table = POLICY_LAYOUTS if self is Scale.FULL else HALF_POLICY_LAYOUTS
        return table[policy]


def _check_inventory(layouts: tuple[PoolLayout, ...], catalog: NodeCatalog) -> None:
    counts = {
        NodeKind.CPU: sum(p.cpu_nodes for p in layouts),
        NodeKind.GPU: sum(p.gpu_nodes for p in layouts),
        NodeKind.FPGA: sum(p.fpga_nodes for p in layouts),
    }
    for kind, count in counts.items():
        if count != catalog.quantity(kind):
            raise ConfigurationError(
                f"pools hold {count} {kind.value} nodes, the catalog has "
                f"{catalog.quantity(kind)}"
            )
    memory = sum(sum(p.memory_nodes) for p in layouts)
    if memory != catalog.memory_total:
        raise ConfigurationError(
            f"memory nodes sum to {memory} GB, the catalog has {catalog.memory_total} GB"
        )


def _server_kinds(catalog: NodeCatalog) -> list[NodeKind]:
    return [k for k in SERVER_KINDS for _ in range(catalog.quantity(k))]


def _server_pools(
    policy: Policy, layouts: tuple[PoolLayout, ...], kinds: list[NodeKind]
) -> list[int]:
    """Pool index of every server in mixed mode."""
    if policy is Policy.C1:
        # Round-robin over the type-sorted server list spreads every type.
        return [i % len(layouts) for i in range(len(kinds))]
    index = {layout.pool_class: i for i, layout in enumerate(layouts)}
    try:
        return [index[SERVER_POOL_CLASS[k]] for k in kinds]
    except KeyError as err:
        raise ConfigurationError(f"no pool matches server class {err}") from err


def build_deployment(
    policy: Policy,
    server_mode: ServerMode,
    catalog: Optional[NodeCatalog] = None,
    layouts: Optional[tuple[PoolLayout, ...]] = None,
    scale: Scale = Scale.FULL,
) -> Deployment:
    """Builds the deployment for a policy and server treatment.

    Node ids are assigned pool by pool (CPU, memory, GPU, FPGA nodes), then
    servers in type order, so ids and pool ids are stable across runs.

    :param policy: Pool configuration policy.
    :type policy: Policy
    :param server_mode: Whether servers stay standalone or join the pools.
    :type server_mode: ServerMode
    :param catalog: Node inventory; defaults to the catalog of ``scale``.
    :type catalog: NodeCatalog | None
    :param layouts: Pool recipes; defaults to the policy's recipes at ``scale``.
    :param scale: Built-in inventory size.
    :type scale: Scale
    :rtype: Deployment
    """
    catalog = scale.catalog if catalog is None else catalog
    layouts = scale.layouts(policy) if layouts is None else layouts
    _check_inventory(layouts, catalog)

    nodes: list[Node] = []
    members: list[list[int]] = [[] for _ in layouts]

    def add(kind: NodeKind, capacity: ResourceVector, pool: Optional[int]) -> None:
        node = Node(id=len(nodes), kind=kind, capacity=capacity, pool=pool)
        nodes.append(node)
        if pool is not None:
            members[pool].append(node.id)

    for p, layout in enumerate(layouts):
        for _ in range(layout.cpu_nodes):
            add(NodeKind.CPU, catalog.entry(NodeKind.CPU).capacity, p)
        for size in layout.memory_nodes:
            add(NodeKind.MEMORY, ResourceVector(memory=size), p)
        for _ in range(layout.gpu_nodes):
            add(NodeKind.GPU, catalog.entry(NodeKind.GPU).capacity, p)
        for _ in range(layout.fpga_nodes):
            add(NodeKind.FPGA, catalog.entry(NodeKind.FPGA).capacity, p)

    kinds = _server_kinds(catalog)
    standalone: list[int] = []
    if server_mode is ServerMode.MIXED:
        for kind, p in zip(kinds, _server_pools(policy, layouts, kinds)):
            add(kind, catalog.entry(kind).capacity, p)
    else:
        for kind in kinds:
            add(kind, catalog.entry(kind).capacity, None)
            standalone.append(nodes[-1].id)

    deployment = Deployment(
        policy=policy,
        server_mode=server_mode,
        nodes=tuple(nodes),
        pools=tuple(
            Pool(id=p, pool_class=layout.pool_class, nodes=tuple(members[p]))
            for p, layout in enumerate(layouts)
        ),
        standalone_servers=tuple(standalone),
    )
    _LOGGER.debug(
        "Built %s: %d nodes in %d pools, %d standalone servers",
        deployment.label,
        len(nodes),
        len(layouts),
        len(standalone),
    )
    return deployment


def per_core_memory(pool: Pool, deployment: Deployment) -> float:
    """Memory per core of a pool, local and remote memory together.

    :param pool: The pool.
    :type pool: Pool
    :param deployment: Deployment the pool belongs to.
    :type deployment: Deployment
    :rtype: float
    """
    cores = memory = 0
    for node in deployment.pool_nodes(pool):
        if node.is_host or node.kind is NodeKind.MEMORY:
            memory += node.capacity.memory
        cores += node.capacity.cores
    if cores == 0:
        raise DomainError(f"pool {pool.id} has no cores")
    return memory / cores


def write_deployment(path: Path, deployment: Deployment) -> None:
    """Writes a deployment as a JSON document."""
    write_json(Deployment, path, deployment)


def read_deployment(path: Path) -> Deployment:
    """Reads a deployment written by :func:`write_deployment`.

    :raises ConfigurationError: If the document is malformed or inconsistent.
    """
    return read_json(Deployment, path)
