"""Seeded synthesis of request sets."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import Iterable, Optional, Union

from apischema import alias
import numpy as np
from scipy.special import ndtr
from scipy.stats import truncnorm

from .exceptions import ConfigurationError, DomainError
from .model import (
    MAX_ACCELERATOR_UNITS,
    MAX_MEMORY_PER_CORE,
    MAX_REQUEST_CORES,
    AcceleratorType,
    Request,
    ResourceVector,
    WorkloadClass,
    classify,
)
from .serialization import dump_json_line, load_document, load_json_lines, serialize

_LOGGER = logging.getLogger(__name__)

# Below this acceptance probability rejection sampling is replaced by scipy's
# tail-stable inverse transform.
MIN_ACCEPTANCE = 1e-3


@dataclass(frozen=True)
class TruncNormalParams:
    """A normal distribution N(mu, sigma^2) truncated to [lo, hi]."""

    mu: float
    sigma: float
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive: {self.sigma}")
        if not self.hi > self.lo:
            raise DomainError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def alpha(self) -> float:
        """Lower bound in standard units."""
        return (self.lo - self.mu) / self.sigma

    @property
    def beta(self) -> float:
        """Upper bound in standard units."""
        return (self.hi - self.mu) / self.sigma

    def acceptance(self) -> float:
        """Probability mass of [lo, hi] under the parent normal."""
        return float(ndtr(self.beta) - ndtr(self.alpha))


@dataclass(frozen=True)
class WorkloadSpec:
    """Parameters of a synthetic request set."""

    count: int = 0
    seed: int = 0
    cores_dist: TruncNormalParams = TruncNormalParams(2, 6, 1, 32)
    mem_ratio_dist: TruncNormalParams = TruncNormalParams(2, 4, 1, 12)
    accel_ratio_dist: TruncNormalParams = TruncNormalParams(0, 3, 1, 8)
    accel_fraction: float = 0.25
    gpu_fraction_of_accel: float = 2 / 3
    local_threshold_range: tuple[float, float] = (0.0, 0.5)

    def __post_init__(self) -> None:
        if self.count < 0:
            raise DomainError(f"request count must be non-negative: {self.count}")
        for name in ("accel_fraction", "gpu_fraction_of_accel"):
            if not 0 <= getattr(self, name) <= 1:
                raise DomainError(f"{name} must lie in [0, 1]")
        lo, hi = self.local_threshold_range
        if not 0 <= lo <= hi <= 0.5:
            raise DomainError(
                f"local threshold range must lie within [0, 0.5]: {self.local_threshold_range}"
            )


def make_rng(seed: int) -> np.random.Generator:
    """Creates the PCG64 stream used for a workload seed.

    :param seed: 64-bit seed.
    :type seed: int
    :rtype: numpy.random.Generator
    """
    return np.random.Generator(np.random.PCG64(seed))


def sample_trunc_normal(
    params: TruncNormalParams,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[float, np.ndarray]:
    """Draws from a truncated normal distribution.

    Uses rejection sampling from the parent normal. When the interval carries
    almost no mass the draw falls back to ``scipy.stats.truncnorm``.

    :param params: Distribution parameters.
    :type params: TruncNormalParams
    :param rng: Random stream.
    :type rng: numpy.random.Generator
    :param size: Number of draws; a single float is returned when omitted.
    :rtype: float | numpy.ndarray
    """
    if params.acceptance() < MIN_ACCEPTANCE:
        draws = truncnorm.rvs(
            params.alpha,
            params.beta,
            loc=params.mu,
            scale=params.sigma,
            size=1 if size is None else size,
            random_state=rng,
        )
        # Far tails can underflow to nan.
        draws = np.where(np.isfinite(draws), draws, params.lo)
        draws = np.clip(draws, params.lo, params.hi)
        return float(draws[0]) if size is None else draws

    if size is None:
        while True:
            x = rng.normal(params.mu, params.sigma)
            if params.lo <= x <= params.hi:
                return float(x)

    out = np.empty(size)
    filled = 0
    while filled < size:
        batch = rng.normal(params.mu, params.sigma, size=2 * (size - filled) + 16)
        batch = batch[(batch >= params.lo) & (batch <= params.hi)]
        take = min(len(batch), size - filled)
        out[filled : filled + take] = batch[:take]
        filled += take
    return out


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _clamp(x: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, x))


def generate_request(
    request_id: int, spec: WorkloadSpec, rng: np.random.Generator
) -> Request:
    """Generates one request.

    Draws are taken from ``rng`` in a fixed order: cores, memory ratio,
    accelerator coin, then accelerator ratio and type when accelerated, and
    finally the local threshold share.

    :param request_id: Identifier of the new request.
    :type request_id: int
    :param spec: Workload parameters.
    :type spec: WorkloadSpec
    :param rng: Random stream.
    :type rng: numpy.random.Generator
    :rtype: Request
    """
    cores = _clamp(
        _round_half_up(sample_trunc_normal(spec.cores_dist, rng)), 1, MAX_REQUEST_CORES
    )
    ratio = sample_trunc_normal(spec.mem_ratio_dist, rng)
    memory = _clamp(
        _round_half_up(cores * ratio), cores, MAX_MEMORY_PER_CORE * cores
    )

    gpu = fpga = 0
    if rng.random() < spec.accel_fraction:
        accel_ratio = sample_trunc_normal(spec.accel_ratio_dist, rng)
        units = _clamp(_round_half_up(cores * accel_ratio), 1, MAX_ACCELERATOR_UNITS)
        if rng.random() < spec.gpu_fraction_of_accel:
            gpu = units
        else:
            fpga = units

    lo, hi = spec.local_threshold_range
    local_threshold = int(math.floor(rng.uniform(lo, hi) * memory))
    local_threshold = min(local_threshold, memory // 2)

    return Request(
        id=request_id,
        demand=ResourceVector(cores=cores, memory=memory, gpu=gpu, fpga=fpga),
        local_threshold=local_threshold,
        workload_class=classify(memory / cores, gpu + fpga > 0),
    )


def generate_workload(spec: WorkloadSpec) -> list[Request]:
    """Generates ``spec.count`` requests with ids ``0..count-1``.

    The output is a pure function of ``spec``; a shorter count yields a prefix
    of a longer one with the same seed.

    :param spec: Workload parameters, seed included.
    :type spec: WorkloadSpec
    :rtype: list[Request]
    """
    rng = make_rng(spec.seed)
    requests = [generate_request(i, spec, rng) for i in range(spec.count)]
    _LOGGER.debug("Generated %d requests from seed %d", len(requests), spec.seed)
    return requests


@dataclass(frozen=True)
class RequestRecord:
    """Flat, line-oriented form of a request."""

    id: int
    cores: int
    memory: int
    local_threshold: int
    workload_class: WorkloadClass = field(metadata=alias("class"))
    accel_type: Optional[AcceleratorType] = None
    accel_units: int = 0

    @staticmethod
    def from_request(r: Request) -> RequestRecord:
        """Flattens a request."""
        return RequestRecord(
            id=r.id,
            cores=r.demand.cores,
            memory=r.demand.memory,
            local_threshold=r.local_threshold,
            workload_class=r.workload_class,
            accel_type=r.accelerator_type,
            accel_units=r.accelerator_units,
        )

    def to_request(self) -> Request:
        """Rebuilds the request, checking every invariant."""
        return Request(
            id=self.id,
            demand=ResourceVector(
                cores=self.cores,
                memory=self.memory,
                gpu=self.accel_units if self.accel_type is AcceleratorType.GPU else 0,
                fpga=self.accel_units if self.accel_type is AcceleratorType.FPGA else 0,
            ),
            local_threshold=self.local_threshold,
            workload_class=self.workload_class,
        )


def dump_workload(requests: Iterable[Request]) -> str:
    """Serializes requests as JSON lines, one record per line.

    :param requests: Requests to serialize.
    :type requests: Iterable[Request]
    :rtype: str
    """
    return "".join(
        dump_json_line(serialize(RequestRecord, RequestRecord.from_request(r)))
        for r in requests
    )


def load_workload(text: str, source: str = "<workload>") -> list[Request]:
    """Parses requests from JSON lines.

    :param text: Serialized workload.
    :type text: str
    :param source: Origin named in error messages.
    :type source: str
    :raises ConfigurationError: If a record is malformed.
    :rtype: list[Request]
    """
    requests = []
    for lineno, record in load_json_lines(text, source):
        rec = load_document(RequestRecord, record, f"{source}:{lineno}")
        try:
            requests.append(rec.to_request())
        except DomainError as err:
            raise ConfigurationError(f"{source}:{lineno}: {err}") from err
    return requests


def write_workload(path: Path, requests: Iterable[Request]) -> None:
    """Writes a workload file."""
    path.write_text(dump_workload(requests), encoding="utf-8")


def read_workload(path: Path) -> list[Request]:
    """Reads a workload file."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigurationError(f"{path}: {err.strerror}") from err
    return load_workload(text, str(path))
