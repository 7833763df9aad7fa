"""Domain types shared by the workload, pool, allocation and metrics modules."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto
from typing import Optional

from .exceptions import DomainError

MAX_REQUEST_CORES = 32
MAX_MEMORY_PER_CORE = 12
MAX_ACCELERATOR_UNITS = 32


class NamedEnum(Enum):
    """An enum whose values are its member names, so files stay readable."""

    @staticmethod
    def _generate_next_value_(name, start, count, last_values):
        """Determines the value for an auto() call."""
        return name


@dataclass(frozen=True)
class ResourceVector:
    """Quantities of the four resource types.

    Used both for node capacities and for request demands.
    """

    cores: int = 0
    memory: int = 0
    gpu: int = 0
    fpga: int = 0

    def __post_init__(self) -> None:
        for name in ("cores", "memory", "gpu", "fpga"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative: {self}")

    def __add__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(
            cores=self.cores + other.cores,
            memory=self.memory + other.memory,
            gpu=self.gpu + other.gpu,
            fpga=self.fpga + other.fpga,
        )

    @property
    def accelerator(self) -> int:
        """Total accelerator units of either type."""
        return self.gpu + self.fpga


ZERO = ResourceVector()


class AcceleratorType(NamedEnum):
    """Type of accelerator a request asks for."""

    GPU = auto()
    FPGA = auto()


class WorkloadClass(NamedEnum):
    """Workload class of a request."""

    COMPUTE_INTENSIVE = auto()
    GENERAL_PURPOSE = auto()
    MEMORY_INTENSIVE = auto()
    ACCELERATOR_ASSISTED = auto()


class PoolClass(NamedEnum):
    """Function a pool (or a standalone server) is configured for."""

    UNIFORM = auto()
    GENERAL = auto()
    COMPUTE_OPTIMIZED = auto()
    MEMORY_OPTIMIZED = auto()
    ACCELERATOR_ASSISTED = auto()


class NodeKind(NamedEnum):
    """Kind of an allocatable node."""

    CPU = auto()
    MEMORY = auto()
    GPU = auto()
    FPGA = auto()
    S1 = auto()
    S2 = auto()
    S3 = auto()
    S4 = auto()
    S5 = auto()

    @property
    def is_server(self) -> bool:
        """Whether this is a conventional server."""
        return self in SERVER_KINDS

    @property
    def is_host(self) -> bool:
        """Whether a request can be hosted here."""
        return self is NodeKind.CPU or self.is_server


SERVER_KINDS = (NodeKind.S1, NodeKind.S2, NodeKind.S3, NodeKind.S4, NodeKind.S5)

# Function of each server type, judged by per-core local memory and accelerators.
SERVER_POOL_CLASS = {
    NodeKind.S1: PoolClass.GENERAL,
    NodeKind.S2: PoolClass.COMPUTE_OPTIMIZED,
    NodeKind.S3: PoolClass.MEMORY_OPTIMIZED,
    NodeKind.S4: PoolClass.ACCELERATOR_ASSISTED,
    NodeKind.S5: PoolClass.ACCELERATOR_ASSISTED,
}


@dataclass(frozen=True)
class Request:
    """A demand for one composable system."""

    id: int
    demand: ResourceVector
    local_threshold: int
    workload_class: WorkloadClass

    def __post_init__(self) -> None:
        d = self.demand
        if not 1 <= d.cores <= MAX_REQUEST_CORES:
            raise DomainError(f"request {self.id}: cores out of range: {d.cores}")
        if not d.cores <= d.memory <= MAX_MEMORY_PER_CORE * d.cores:
            raise DomainError(f"request {self.id}: memory out of range: {d.memory}")
        if not 0 <= self.local_threshold <= d.memory // 2:
            raise DomainError(
                f"request {self.id}: local threshold out of range: {self.local_threshold}"
            )
        if d.gpu and d.fpga:
            raise DomainError(f"request {self.id}: asks for both GPU and FPGA units")
        if d.accelerator > MAX_ACCELERATOR_UNITS:
            raise DomainError(
                f"request {self.id}: too many accelerator units: {d.accelerator}"
            )
        accelerated = self.workload_class is WorkloadClass.ACCELERATOR_ASSISTED
        if accelerated != (d.accelerator > 0):
            raise DomainError(
                f"request {self.id}: class {self.workload_class.value} does not match "
                "its accelerator demand"
            )

    @property
    def accelerator_type(self) -> Optional[AcceleratorType]:
        """The accelerator type requested, if any."""
        if self.demand.gpu:
            return AcceleratorType.GPU
        if self.demand.fpga:
            return AcceleratorType.FPGA
        return None

    @property
    def accelerator_units(self) -> int:
        """Requested accelerator units."""
        return self.demand.accelerator


@dataclass(frozen=True)
class Node:
    """One allocatable unit.

    Memory of a CPU node or a server is local memory; memory node memory is remote.
    ``pool`` is None only for standalone servers.
    """

    id: int
    kind: NodeKind
    capacity: ResourceVector
    pool: Optional[int] = None

    @property
    def is_host(self) -> bool:
        """Whether a request can be hosted here."""
        return self.kind.is_host

    def accelerator_capacity(self, accel: AcceleratorType) -> int:
        """Units of the given accelerator type this node provides."""
        return self.capacity.gpu if accel is AcceleratorType.GPU else self.capacity.fpga


@dataclass(frozen=True)
class CatalogEntry:
    """Capacity and quantity of one node kind."""

    kind: NodeKind
    capacity: ResourceVector
    quantity: int


@dataclass(frozen=True)
class NodeCatalog:
    """The node inventory.

    Memory nodes are not listed individually: only their total capacity is fixed,
    each configuration policy decides the node sizes.
    """

    entries: tuple[CatalogEntry, ...]
    memory_total: int

    def __post_init__(self) -> None:
        kinds = [e.kind for e in self.entries]
        if len(set(kinds)) != len(kinds):
            raise DomainError("node catalog lists a kind more than once")
        if NodeKind.MEMORY in kinds:
            raise DomainError("memory nodes are sized by policy, not by the catalog")

    def entry(self, kind: NodeKind) -> CatalogEntry:
        """Returns the catalog entry for a node kind.

        :param kind: Kind to look up.
        :type kind: NodeKind
        :rtype: CatalogEntry
        """
        for e in self.entries:
            if e.kind is kind:
                return e
        return CatalogEntry(kind=kind, capacity=ZERO, quantity=0)

    def quantity(self, kind: NodeKind) -> int:
        """Number of nodes of the given kind."""
        return self.entry(kind).quantity


DEFAULT_CATALOG = NodeCatalog(
    entries=(
        CatalogEntry(NodeKind.CPU, ResourceVector(cores=32, memory=64), 16),
        CatalogEntry(NodeKind.GPU, ResourceVector(gpu=32), 8),
        CatalogEntry(NodeKind.FPGA, ResourceVector(fpga=32), 4),
        CatalogEntry(NodeKind.S1, ResourceVector(cores=32, memory=128), 4),
        CatalogEntry(NodeKind.S2, ResourceVector(cores=32, memory=64), 3),
        CatalogEntry(NodeKind.S3, ResourceVector(cores=32, memory=256), 2),
        CatalogEntry(NodeKind.S4, ResourceVector(cores=32, memory=128, gpu=32), 2),
        CatalogEntry(NodeKind.S5, ResourceVector(cores=32, memory=128, fpga=32), 1),
    ),
    memory_total=1280,
)

# Every quantity halved, odd server counts rounded up.
HALF_CATALOG = NodeCatalog(
    entries=(
        CatalogEntry(NodeKind.CPU, ResourceVector(cores=32, memory=64), 8),
        CatalogEntry(NodeKind.GPU, ResourceVector(gpu=32), 4),
        CatalogEntry(NodeKind.FPGA, ResourceVector(fpga=32), 2),
        CatalogEntry(NodeKind.S1, ResourceVector(cores=32, memory=128), 2),
        CatalogEntry(NodeKind.S2, ResourceVector(cores=32, memory=64), 2),
        CatalogEntry(NodeKind.S3, ResourceVector(cores=32, memory=256), 1),
        CatalogEntry(NodeKind.S4, ResourceVector(cores=32, memory=128, gpu=32), 1),
        CatalogEntry(NodeKind.S5, ResourceVector(cores=32, memory=128, fpga=32), 1),
    ),
    memory_total=640,
)


@dataclass(frozen=True)
class ObjectiveWeights:
    """Weights of the resource types in the allocation objective."""

    cpu: int = 100
    accelerator: int = 10
    memory: int = 1

    def __post_init__(self) -> None:
        if min(self.cpu, self.accelerator, self.memory) <= 0:
            raise DomainError(f"objective weights must be positive: {self}")

    def weigh(self, v: ResourceVector) -> int:
        """Weighted sum of a resource vector.

        :param v: Quantities to weigh.
        :type v: ResourceVector
        :rtype: int
        """
        return self.cpu * v.cores + self.memory * v.memory + self.accelerator * v.accelerator


@dataclass(frozen=True)
class UnitCosts:
    """Normalized unit costs of physical resources, relative to memory."""

    cpu_core: int = 100
    memory_gb: int = 1
    gpu_unit: int = 300
    fpga_unit: int = 100

    def __post_init__(self) -> None:
        if min(self.cpu_core, self.memory_gb, self.gpu_unit, self.fpga_unit) <= 0:
            raise DomainError(f"unit costs must be positive: {self}")

    def price(self, v: ResourceVector) -> int:
        """Cost of the given physical resources.

        :param v: Installed quantities.
        :type v: ResourceVector
        :rtype: int
        """
        return (
            self.cpu_core * v.cores
            + self.memory_gb * v.memory
            + self.gpu_unit * v.gpu
            + self.fpga_unit * v.fpga
        )


DEFAULT_WEIGHTS = ObjectiveWeights()
DEFAULT_COSTS = UnitCosts()


def classify(memory_per_core: float, has_accelerator: bool) -> WorkloadClass:
    """Classifies a request by its per-core memory demand.

    Class intervals are half-open: [1, 3), [3, 6) and [6, 12].

    :param memory_per_core: Memory demand per core in GB.
    :type memory_per_core: float
    :param has_accelerator: Whether the request asks for accelerator units.
    :type has_accelerator: bool
    :rtype: WorkloadClass
    """
    if not 1 <= memory_per_core <= MAX_MEMORY_PER_CORE:
        raise DomainError(f"memory per core outside [1, 12]: {memory_per_core}")
    if has_accelerator:
        return WorkloadClass.ACCELERATOR_ASSISTED
    if memory_per_core < 3:
        return WorkloadClass.COMPUTE_INTENSIVE
    if memory_per_core < 6:
        return WorkloadClass.GENERAL_PURPOSE
    return WorkloadClass.MEMORY_INTENSIVE


_PERFECT_MATCH = {
    WorkloadClass.COMPUTE_INTENSIVE: PoolClass.COMPUTE_OPTIMIZED,
    WorkloadClass.GENERAL_PURPOSE: PoolClass.GENERAL,
    WorkloadClass.MEMORY_INTENSIVE: PoolClass.MEMORY_OPTIMIZED,
    WorkloadClass.ACCELERATOR_ASSISTED: PoolClass.ACCELERATOR_ASSISTED,
}

_NEAR_MATCHES = {
    (WorkloadClass.GENERAL_PURPOSE, PoolClass.COMPUTE_OPTIMIZED),
    (WorkloadClass.GENERAL_PURPOSE, PoolClass.MEMORY_OPTIMIZED),
    (WorkloadClass.COMPUTE_INTENSIVE, PoolClass.GENERAL),
    (WorkloadClass.MEMORY_INTENSIVE, PoolClass.GENERAL),
}


def penalty(request_class: WorkloadClass, placement_class: PoolClass) -> int:
    """Mismatch penalty of placing a request class on a pool class.

    :param request_class: Class of the request.
    :type request_class: WorkloadClass
    :param placement_class: Class of the pool (or standalone server) hosting it.
    :type placement_class: PoolClass
    :rtype: int
    """
    if placement_class is PoolClass.UNIFORM:
        return 0
    if _PERFECT_MATCH[request_class] is placement_class:
        return 0
    if (request_class, placement_class) in _NEAR_MATCHES:
        return 1
    return 2


def weighted_capacity(node: Node, weights: ObjectiveWeights = DEFAULT_WEIGHTS) -> int:
    """Weighted full capacity of a node, the amount it adds to the objective when active.

    :param node: The node.
    :type node: Node
    :param weights: Objective weights.
    :type weights: ObjectiveWeights
    :rtype: int
    """
    return weights.weigh(node.capacity)


@dataclass(frozen=True)
class Objective:
    """Lexicographic objective value: total penalty first, weighted usage second."""

    penalty: int = 0
    weighted_usage: int = 0

    def key(self) -> tuple[int, int]:
        """Sort key for lexicographic comparison."""
        return (self.penalty, self.weighted_usage)

