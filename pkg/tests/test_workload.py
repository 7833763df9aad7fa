import numpy as np
import pytest
from pytest import fixture
from scipy.stats import truncnorm

from disaggpool.exceptions import ConfigurationError, DomainError
from disaggpool.model import (
    MAX_ACCELERATOR_UNITS,
    MAX_MEMORY_PER_CORE,
    AcceleratorType,
    WorkloadClass,
    classify,
)
from disaggpool.workload import (
    TruncNormalParams,
    WorkloadSpec,
    dump_workload,
    generate_request,
    generate_workload,
    load_workload,
    make_rng,
    read_workload,
    sample_trunc_normal,
    write_workload,
)

DRAWS = 100_000


@fixture(scope="module")
def large_workload():
    yield generate_workload(WorkloadSpec(count=DRAWS, seed=2024))


def _closed_form_mean(p: TruncNormalParams) -> float:
    return float(truncnorm.mean(p.alpha, p.beta, loc=p.mu, scale=p.sigma))


@pytest.mark.parametrize(
    "params, expected",
    [
        (TruncNormalParams(2, 6, 1, 32), 6.17),
        (TruncNormalParams(2, 4, 1, 12), 4.49),
        (TruncNormalParams(0, 3, 1, 8), None),
    ],
)
def test_sampler_matches_truncated_mean(params, expected):
    draws = sample_trunc_normal(params, make_rng(7), size=DRAWS)
    assert draws.min() >= params.lo and draws.max() <= params.hi
    assert draws.mean() == pytest.approx(_closed_form_mean(params), rel=0.02)
    if expected is not None:
        assert _closed_form_mean(params) == pytest.approx(expected, abs=0.01)


def test_scalar_draws_stay_in_range():
    rng = make_rng(1)
    params = TruncNormalParams(2, 6, 1, 32)
    for _ in range(1000):
        assert 1 <= sample_trunc_normal(params, rng) <= 32


def test_degenerate_interval():
    params = TruncNormalParams(0, 0.001, 5, 5.0001)
    value = sample_trunc_normal(params, make_rng(3))
    assert value == pytest.approx(5, abs=1e-3)
    draws = sample_trunc_normal(params, make_rng(3), size=10)
    assert np.all(np.abs(draws - 5) < 1e-3)


@pytest.mark.parametrize("args", [(0, 0, 1, 2), (0, -1, 1, 2), (0, 1, 2, 2), (0, 1, 3, 2)])
def test_trunc_normal_params_validation(args):
    with pytest.raises(DomainError):
        TruncNormalParams(*args)


def test_accelerator_fractions(large_workload):
    accelerated = [r for r in large_workload if r.accelerator_type is not None]
    assert len(accelerated) / DRAWS == pytest.approx(0.25, abs=0.01)
    gpu = sum(r.accelerator_type is AcceleratorType.GPU for r in accelerated)
    assert gpu / len(accelerated) == pytest.approx(2 / 3, abs=0.02)


def test_generated_requests_are_valid(large_workload):
    for r in large_workload:
        d = r.demand
        assert 1 <= d.cores <= 32
        assert d.cores <= d.memory <= MAX_MEMORY_PER_CORE * d.cores
        assert 0 <= r.local_threshold <= d.memory // 2
        assert d.accelerator <= MAX_ACCELERATOR_UNITS
        assert not (d.gpu and d.fpga)
        assert r.workload_class is classify(d.memory / d.cores, d.accelerator > 0)


def test_million_generated_requests_are_valid():
    # Streamed through generate_request; the same draws generate_workload makes.
    spec = WorkloadSpec(count=10**6, seed=99)
    rng = make_rng(spec.seed)
    classes = set()
    for i in range(spec.count):
        r = generate_request(i, spec, rng)
        d = r.demand
        assert 1 <= d.cores <= 32
        assert d.cores <= d.memory <= MAX_MEMORY_PER_CORE * d.cores
        assert 0 <= r.local_threshold <= d.memory // 2
        assert d.accelerator <= MAX_ACCELERATOR_UNITS
        assert not (d.gpu and d.fpga)
        assert r.workload_class is classify(d.memory / d.cores, d.accelerator > 0)
        classes.add(r.workload_class)
    assert classes == set(WorkloadClass)


def test_all_classes_occur(large_workload):
    assert {r.workload_class for r in large_workload} == set(WorkloadClass)


def test_generate_workload_is_deterministic():
    spec = WorkloadSpec(count=50, seed=11)
    assert generate_workload(spec) == generate_workload(spec)
    assert [r.id for r in generate_workload(spec)] == list(range(50))


def test_adjacent_seeds_differ():
    a = generate_workload(WorkloadSpec(count=10, seed=5))
    b = generate_workload(WorkloadSpec(count=10, seed=6))
    assert a != b


def test_shorter_count_is_a_prefix():
    long = generate_workload(WorkloadSpec(count=40, seed=9))
    short = generate_workload(WorkloadSpec(count=15, seed=9))
    assert long[:15] == short


def test_empty_workload():
    assert generate_workload(WorkloadSpec(count=0, seed=1)) == []


def test_no_accelerators():
    spec = WorkloadSpec(count=200, seed=1, accel_fraction=0.0)
    assert all(r.accelerator_type is None for r in generate_workload(spec))


def test_generate_request_uses_given_id():
    r = generate_request(42, WorkloadSpec(), make_rng(0))
    assert r.id == 42


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(count=-1),
        dict(accel_fraction=1.5),
        dict(gpu_fraction_of_accel=-0.1),
        dict(local_threshold_range=(0.0, 0.6)),
        dict(local_threshold_range=(0.3, 0.1)),
    ],
)
def test_workload_spec_validation(kwargs):
    with pytest.raises(DomainError):
        WorkloadSpec(**kwargs)


def test_workload_file_round_trip(tmp_path):
    requests = generate_workload(WorkloadSpec(count=30, seed=3))
    path = tmp_path / "workload.jsonl"
    write_workload(path, requests)
    assert read_workload(path) == requests
    assert len(path.read_text().splitlines()) == 30
    assert '"class":' in path.read_text()


def test_load_workload_rejects_bad_records():
    with pytest.raises(ConfigurationError, match="line-test:1"):
        load_workload('{"id": 0}\n', "line-test")
    with pytest.raises(ConfigurationError, match="line-test:2"):
        load_workload("\n{not json\n", "line-test")
    good = dump_workload(generate_workload(WorkloadSpec(count=1, seed=1)))
    tampered = good.replace('"cores":', '"cores":100,"ignored":')
    with pytest.raises(ConfigurationError):
        load_workload(tampered)


def test_load_workload_checks_request_invariants():
    [r] = generate_workload(WorkloadSpec(count=1, seed=1, accel_fraction=0.0))
    text = dump_workload([r]).replace(
        f'"memory":{r.demand.memory}', f'"memory":{1000 * r.demand.cores}'
    )
    with pytest.raises(ConfigurationError):
        load_workload(text)


def test_read_missing_workload(tmp_path):
    with pytest.raises(ConfigurationError):
        read_workload(tmp_path / "missing.jsonl")
