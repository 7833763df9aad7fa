from dataclasses import replace

import pytest
from pytest import fixture

from disaggpool.exceptions import DomainError
from disaggpool.model import (
    DEFAULT_CATALOG,
    DEFAULT_WEIGHTS,
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


@fixture
def cpu_node():
    yield Node(id=0, kind=NodeKind.CPU, capacity=ResourceVector(cores=32, memory=64))


@pytest.mark.parametrize(
    "ratio, accel, expected",
    [
        (1.0, False, WorkloadClass.COMPUTE_INTENSIVE),
        (2.0, False, WorkloadClass.COMPUTE_INTENSIVE),
        (2.999, False, WorkloadClass.COMPUTE_INTENSIVE),
        (3.0, False, WorkloadClass.GENERAL_PURPOSE),
        (5.5, False, WorkloadClass.GENERAL_PURPOSE),
        (6.0, False, WorkloadClass.MEMORY_INTENSIVE),
        (12.0, False, WorkloadClass.MEMORY_INTENSIVE),
        (4.5, True, WorkloadClass.ACCELERATOR_ASSISTED),
        (1.0, True, WorkloadClass.ACCELERATOR_ASSISTED),
    ],
)
def test_classify(ratio, accel, expected):
    assert classify(ratio, accel) is expected


@pytest.mark.parametrize("ratio", [0.0, 0.99, 12.01, 100.0])
def test_classify_out_of_domain(ratio):
    with pytest.raises(DomainError):
        classify(ratio, False)


@pytest.mark.parametrize(
    "request_class, placement_class, expected",
    [
        (WorkloadClass.GENERAL_PURPOSE, PoolClass.COMPUTE_OPTIMIZED, 1),
        (WorkloadClass.GENERAL_PURPOSE, PoolClass.MEMORY_OPTIMIZED, 1),
        (WorkloadClass.COMPUTE_INTENSIVE, PoolClass.GENERAL, 1),
        (WorkloadClass.MEMORY_INTENSIVE, PoolClass.GENERAL, 1),
        (WorkloadClass.MEMORY_INTENSIVE, PoolClass.MEMORY_OPTIMIZED, 0),
        (WorkloadClass.COMPUTE_INTENSIVE, PoolClass.COMPUTE_OPTIMIZED, 0),
        (WorkloadClass.GENERAL_PURPOSE, PoolClass.GENERAL, 0),
        (WorkloadClass.ACCELERATOR_ASSISTED, PoolClass.ACCELERATOR_ASSISTED, 0),
        (WorkloadClass.MEMORY_INTENSIVE, PoolClass.ACCELERATOR_ASSISTED, 2),
        (WorkloadClass.COMPUTE_INTENSIVE, PoolClass.MEMORY_OPTIMIZED, 2),
        (WorkloadClass.ACCELERATOR_ASSISTED, PoolClass.GENERAL, 2),
        (WorkloadClass.GENERAL_PURPOSE, PoolClass.ACCELERATOR_ASSISTED, 2),
    ],
)
def test_penalty(request_class, placement_class, expected):
    assert penalty(request_class, placement_class) == expected


@pytest.mark.parametrize("request_class", list(WorkloadClass))
def test_penalty_uniform_is_free(request_class):
    assert penalty(request_class, PoolClass.UNIFORM) == 0


def test_penalty_general_mismatch_is_symmetric():
    assert penalty(WorkloadClass.COMPUTE_INTENSIVE, PoolClass.GENERAL) == penalty(
        WorkloadClass.GENERAL_PURPOSE, PoolClass.COMPUTE_OPTIMIZED
    )
    assert penalty(WorkloadClass.MEMORY_INTENSIVE, PoolClass.GENERAL) == penalty(
        WorkloadClass.GENERAL_PURPOSE, PoolClass.MEMORY_OPTIMIZED
    )
    assert max(penalty(w, p) for w in WorkloadClass for p in PoolClass) == 2


def test_weighted_capacity(cpu_node):
    assert weighted_capacity(cpu_node) == 3264
    gpu = Node(id=1, kind=NodeKind.GPU, capacity=ResourceVector(gpu=32))
    assert weighted_capacity(gpu) == 320
    empty = Node(id=2, kind=NodeKind.MEMORY, capacity=ResourceVector())
    assert weighted_capacity(empty) == 0


def test_weighted_capacity_is_linear():
    for entry in DEFAULT_CATALOG.entries:
        c = entry.capacity
        node = Node(id=0, kind=entry.kind, capacity=c)
        doubled = replace(
            node,
            capacity=ResourceVector(
                cores=2 * c.cores, memory=2 * c.memory, gpu=2 * c.gpu, fpga=2 * c.fpga
            ),
        )
        assert weighted_capacity(doubled) == 2 * weighted_capacity(node)


def test_weighted_capacity_custom_weights(cpu_node):
    weights = ObjectiveWeights(cpu=1, accelerator=1, memory=1)
    assert weighted_capacity(cpu_node, weights) == 96
    assert weighted_capacity(cpu_node, DEFAULT_WEIGHTS) == 3264


def test_unit_costs():
    costs = UnitCosts()
    assert costs.price(DEFAULT_CATALOG.entry(NodeKind.S2).capacity) == 3264
    assert costs.price(DEFAULT_CATALOG.entry(NodeKind.GPU).capacity) == 9600
    assert costs.price(ResourceVector()) == 0


@pytest.mark.parametrize(
    "weights",
    [
        dict(cpu=0),
        dict(accelerator=-1),
        dict(memory=0),
    ],
)
def test_objective_weights_must_be_positive(weights):
    with pytest.raises(DomainError):
        ObjectiveWeights(**weights)


def test_resource_vector():
    v = ResourceVector(cores=2, memory=4) + ResourceVector(gpu=8)
    assert v == ResourceVector(cores=2, memory=4, gpu=8)
    assert v.accelerator == 8
    with pytest.raises(DomainError):
        ResourceVector(cores=-1)


def _request(**kwargs):
    fields = dict(
        id=0,
        demand=ResourceVector(cores=8, memory=16),
        local_threshold=8,
        workload_class=WorkloadClass.COMPUTE_INTENSIVE,
    )
    fields.update(kwargs)
    return Request(**fields)


def test_request():
    r = _request(
        demand=ResourceVector(cores=4, memory=16, fpga=6),
        workload_class=WorkloadClass.ACCELERATOR_ASSISTED,
    )
    assert r.accelerator_units == 6
    assert r.accelerator_type.value == "FPGA"
    assert _request().accelerator_type is None


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(demand=ResourceVector(cores=33, memory=64)),
        dict(demand=ResourceVector(cores=0, memory=0), local_threshold=0),
        dict(demand=ResourceVector(cores=8, memory=7), local_threshold=0),
        dict(demand=ResourceVector(cores=8, memory=97)),
        dict(local_threshold=9),
        dict(local_threshold=-1),
        dict(
            demand=ResourceVector(cores=8, memory=16, gpu=2, fpga=2),
            workload_class=WorkloadClass.ACCELERATOR_ASSISTED,
        ),
        dict(
            demand=ResourceVector(cores=8, memory=16, gpu=33),
            workload_class=WorkloadClass.ACCELERATOR_ASSISTED,
        ),
        dict(workload_class=WorkloadClass.ACCELERATOR_ASSISTED),
        dict(demand=ResourceVector(cores=8, memory=16, gpu=4)),
    ],
)
def test_request_invariants(kwargs):
    with pytest.raises(DomainError):
        _request(**kwargs)


def test_catalog():
    assert DEFAULT_CATALOG.quantity(NodeKind.CPU) == 16
    assert DEFAULT_CATALOG.quantity(NodeKind.S1) == 4
    assert DEFAULT_CATALOG.entry(NodeKind.S4).capacity == ResourceVector(
        cores=32, memory=128, gpu=32
    )
    assert DEFAULT_CATALOG.memory_total == 1280
    assert sum(e.quantity for e in DEFAULT_CATALOG.entries if e.kind.is_server) == 12
    assert not NodeKind.MEMORY.is_host
    assert NodeKind.S3.is_host and NodeKind.CPU.is_host
