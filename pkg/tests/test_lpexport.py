import pulp
import pytest

from disaggpool.allocator import build_problem, solve_exact
from disaggpool.lpexport import build_lp_models, export_lp
from disaggpool.model import (
    Node,
    NodeKind,
    PoolClass,
    Request,
    ResourceVector,
    WorkloadClass,
)
from disaggpool.poolcfg import Deployment, Policy, Pool, ServerMode, build_deployment

from tests.instances import random_problem

CBC = pulp.PULP_CBC_CMD(msg=False)

needs_cbc = pytest.mark.skipif(not CBC.available(), reason="CBC is not installed")


def _problem():
    deployment = build_deployment(Policy.C2, ServerMode.MIXED)
    requests = [
        Request(0, ResourceVector(cores=8, memory=64), 8, WorkloadClass.MEMORY_INTENSIVE),
        Request(1, ResourceVector(cores=4, memory=16, fpga=4), 2, WorkloadClass.ACCELERATOR_ASSISTED),
    ]
    return build_problem(deployment, requests)


def test_export_writes_both_phases(tmp_path):
    export = export_lp(_problem(), tmp_path / "lp")
    assert export.penalty.name == "allocation_phase1.lp"
    assert export.usage.name == "allocation_phase2.lp"
    phase1 = export.penalty.read_text()
    phase2 = export.usage.read_text()
    assert "Minimize" in phase1 and "total_penalty" in phase1
    assert "weighted_usage" in phase2 and "penalty_bound" in phase2
    for name in ("r0_h0", "r0_l0", "r1_a", "act_0", "assign_r0", "memory_r1"):
        assert name in phase2


def test_export_is_deterministic(tmp_path):
    problem = _problem()
    a = export_lp(problem, tmp_path / "a")
    b = export_lp(problem, tmp_path / "b")
    assert a.penalty.read_bytes() == b.penalty.read_bytes()
    assert a.usage.read_bytes() == b.usage.read_bytes()


def test_export_empty_problem(tmp_path):
    problem = build_problem(build_deployment(Policy.C1, ServerMode.SEPARATE), [])
    export = export_lp(problem, tmp_path, stem="empty")
    assert export.penalty.exists() and export.usage.exists()
    assert "Minimize" in export.penalty.read_text()


def test_default_penalty_bound():
    problem = _problem()
    assert build_lp_models(problem).penalty_bound == 0
    assert build_lp_models(problem, penalty_bound=3).penalty_bound == 3


def _optimum(model):
    status = model.solve(CBC)
    if status != pulp.LpStatusOptimal:
        return None
    return round(pulp.value(model.objective) or 0)


@needs_cbc
@pytest.mark.parametrize("seed", range(12))
def test_lp_optimum_matches_exact(seed):
    problem = random_problem(seed)
    exact = solve_exact(problem)
    penalty_model = build_lp_models(problem).penalty
    if not exact.feasible:
        assert _optimum(penalty_model) is None
        return
    objective = exact.solution.objective
    assert _optimum(penalty_model) == objective.penalty
    usage_model = build_lp_models(problem, penalty_bound=objective.penalty).usage
    assert _optimum(usage_model) == objective.weighted_usage


def _crowded_problem():
    # Only one request fits the compute pool; the other pays for the memory pool.
    cpu = ResourceVector(cores=12, memory=12)
    deployment = Deployment(
        Policy.C2,
        ServerMode.SEPARATE,
        nodes=(Node(0, NodeKind.CPU, cpu, pool=0), Node(1, NodeKind.CPU, cpu, pool=1)),
        pools=(
            Pool(0, PoolClass.COMPUTE_OPTIMIZED, (0,)),
            Pool(1, PoolClass.MEMORY_OPTIMIZED, (1,)),
        ),
    )
    requests = [
        Request(i, ResourceVector(cores=8, memory=8), 0, WorkloadClass.COMPUTE_INTENSIVE)
        for i in range(2)
    ]
    return build_problem(deployment, requests)


def test_default_bound_is_reachable():
    problem = _crowded_problem()
    assert solve_exact(problem).solution.objective.penalty == 2
    assert build_lp_models(problem).penalty_bound == 2


@needs_cbc
def test_default_usage_model_is_feasible():
    problem = _crowded_problem()
    exact = solve_exact(problem).solution.objective
    assert _optimum(build_lp_models(problem).usage) == exact.weighted_usage == 2424
