"""Small random allocation instances for oracle and cross-check tests."""

import random

from disaggpool.allocator import Problem, build_problem
from disaggpool.model import (
    SERVER_KINDS,
    Node,
    NodeKind,
    PoolClass,
    Request,
    ResourceVector,
    classify,
)
from disaggpool.poolcfg import Deployment, Policy, Pool, ServerMode

MAX_NODES = 8
MAX_REQUESTS = 4

_FUNCTION_CLASSES = [
    PoolClass.GENERAL,
    PoolClass.COMPUTE_OPTIMIZED,
    PoolClass.MEMORY_OPTIMIZED,
    PoolClass.ACCELERATOR_ASSISTED,
]


def random_deployment(rng: random.Random) -> Deployment:
    policy = rng.choice([Policy.C1, Policy.C2])
    pool_count = rng.randint(1, 2)
    nodes: list[Node] = []

    def add(kind: NodeKind, capacity: ResourceVector, pool) -> None:
        nodes.append(Node(id=len(nodes), kind=kind, capacity=capacity, pool=pool))

    for p in range(pool_count):
        for _ in range(rng.randint(1, 2)):
            add(
                NodeKind.CPU,
                ResourceVector(cores=rng.choice([8, 16]), memory=rng.choice([8, 16, 32])),
                p,
            )
    extras = []
    for p in range(pool_count):
        extras += [(NodeKind.MEMORY, p)] * rng.randint(0, 2)
        extras += [(NodeKind.GPU, p)] * rng.randint(0, 1)
        extras += [(NodeKind.FPGA, p)] * rng.randint(0, 1)
    rng.shuffle(extras)
    for kind, p in extras:
        if len(nodes) == MAX_NODES:
            break
        if kind is NodeKind.MEMORY:
            add(kind, ResourceVector(memory=rng.choice([8, 16, 24])), p)
        elif kind is NodeKind.GPU:
            add(kind, ResourceVector(gpu=rng.choice([8, 16])), p)
        else:
            add(kind, ResourceVector(fpga=rng.choice([8, 16])), p)

    standalone = []
    pooled_server = False
    if len(nodes) < MAX_NODES and rng.random() < 0.5:
        kind = rng.choice(SERVER_KINDS)
        capacity = ResourceVector(
            cores=16,
            memory=rng.choice([16, 32, 64]),
            gpu=16 if kind is NodeKind.S4 else 0,
            fpga=16 if kind is NodeKind.S5 else 0,
        )
        if rng.random() < 0.5:
            add(kind, capacity, None)
            standalone.append(nodes[-1].id)
        else:
            add(kind, capacity, rng.randrange(pool_count))
            pooled_server = True

    if policy is Policy.C1:
        classes = [PoolClass.UNIFORM] * pool_count
    else:
        classes = [rng.choice(_FUNCTION_CLASSES) for _ in range(pool_count)]
    return Deployment(
        policy=policy,
        server_mode=ServerMode.MIXED if pooled_server else ServerMode.SEPARATE,
        nodes=tuple(nodes),
        pools=tuple(
            Pool(id=p, pool_class=classes[p], nodes=tuple(n.id for n in nodes if n.pool == p))
            for p in range(pool_count)
        ),
        standalone_servers=tuple(standalone),
    )


def random_request(rng: random.Random, request_id: int) -> Request:
    cores = rng.randint(1, 8)
    memory = rng.randint(cores, 4 * cores)
    gpu = fpga = 0
    if rng.random() < 0.4:
        units = rng.randint(1, 8)
        if rng.random() < 0.5:
            gpu = units
        else:
            fpga = units
    return Request(
        id=request_id,
        demand=ResourceVector(cores=cores, memory=memory, gpu=gpu, fpga=fpga),
        local_threshold=rng.randint(0, memory // 2),
        workload_class=classify(memory / cores, gpu + fpga > 0),
    )


def random_problem(seed: int) -> Problem:
    rng = random.Random(seed)
    deployment = random_deployment(rng)
    requests = [random_request(rng, i) for i in range(rng.randint(1, MAX_REQUESTS))]
    return build_problem(deployment, requests)
