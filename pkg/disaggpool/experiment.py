"""Seeded, repeated experiments over pool configurations."""

from __future__ import annotations

import asyncio
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import auto
from functools import partial
import logging
from pathlib import Path
from typing import Optional, Union

from apischema.conversions import Conversion
from apischema.metadata import conversion
import pandas as pd

from .allocator import SolveLimits, SolverKind, SolveStatus, build_problem, validate
from .exceptions import BudgetExceededError, DomainError
from .metrics import (
    RESOURCES,
    RunOutcome,
    StatSummary,
    describe,
    fixed_cost_run,
    saturation_capacity,
)
from .model import (
    DEFAULT_COSTS,
    DEFAULT_WEIGHTS,
    NamedEnum,
    NodeCatalog,
    ObjectiveWeights,
    UnitCosts,
)
from .poolcfg import Deployment, Policy, Scale, ServerMode, build_deployment
from .serialization import dump_json, load_document, read_toml, serialize
from .workload import WorkloadSpec

_LOGGER = logging.getLogger(__name__)

RUNS_FILE = "runs.csv"
SUMMARY_FILE = "summary.json"
UTILIZATION_PLOT_FILE = "utilization.tsv"
COST_PLOT_FILE = "cost.tsv"

# Summarized quantities in column order.
METRICS = RESOURCES + ("cost", "penalty", "weighted_usage", "requests")

FLOAT_FORMAT = "%.6f"


@dataclass(frozen=True)
class Condition:
    """A (policy, server mode) pair, labelled e.g. ``C2_M``."""

    policy: Policy
    server_mode: ServerMode

    @property
    def label(self) -> str:
        """Condition label."""
        return f"{self.policy.value}_{self.server_mode.suffix}"

    @staticmethod
    def parse(label: str) -> Condition:
        """Parses a condition label.

        :param label: Label such as ``C1_S``.
        :type label: str
        :rtype: Condition
        :raises DomainError: If the label names no condition.
        """
        for cond in ALL_CONDITIONS:
            if cond.label == label.strip().upper():
                return cond
        raise DomainError(f"unknown condition {label!r}")


ALL_CONDITIONS = tuple(
    Condition(policy, mode)
    for policy in Policy
    for mode in (ServerMode.SEPARATE, ServerMode.MIXED)
)

conditions_conversion = conversion(
    Conversion(
        lambda labels: tuple(Condition.parse(s) for s in labels),
        source=list[str],
        target=tuple[Condition, ...],
    ),
    Conversion(
        lambda conds: [c.label for c in conds],
        source=tuple[Condition, ...],
        target=list[str],
    ),
)


class ExperimentKind(NamedEnum):
    """The two experiments of the case study."""

    SATURATION = auto()
    FIXED_COST = auto()


@dataclass(frozen=True)
class ExperimentSettings:
    """Which experiment to run and its workload size."""

    kind: ExperimentKind = ExperimentKind.FIXED_COST
    max_requests: int = 100
    request_count: int = 50

    def __post_init__(self) -> None:
        if self.max_requests < 0 or self.request_count < 0:
            raise DomainError("request counts must be non-negative")

    @property
    def workload_size(self) -> int:
        """Number of requests generated per run."""
        if self.kind is ExperimentKind.SATURATION:
            return self.max_requests
        return self.request_count


@dataclass(frozen=True)
class SolverSettings:
    """Solver choice and budget."""

    kind: SolverKind = SolverKind.EXACT
    time_budget: float = 600.0
    node_budget: int = 1_000_000
    optimality_required: bool = False

    def limits(self) -> SolveLimits:
        """Budget of each solve."""
        return SolveLimits(
            time_budget=self.time_budget,
            node_budget=self.node_budget,
            optimality_required=self.optimality_required,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    The defaults are the published setup: six conditions, 11 runs each, 50
    requests per run. ``scale`` picks the built-in inventory and pool recipes;
    ``catalog`` overrides the inventory only and must fit those recipes.
    """

    conditions: tuple[Condition, ...] = field(
        default=ALL_CONDITIONS, metadata=conditions_conversion
    )
    runs: int = 11
    base_seed: int = 0
    experiment: ExperimentSettings = ExperimentSettings()
    solver: SolverSettings = SolverSettings()
    output_dir: str = "results"
    workers: int = 1
    scale: Scale = Scale.FULL
    weights: ObjectiveWeights = DEFAULT_WEIGHTS
    costs: UnitCosts = DEFAULT_COSTS
    catalog: Optional[NodeCatalog] = None
    workload: WorkloadSpec = WorkloadSpec()

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise DomainError(f"runs must be at least 1: {self.runs}")
        if not self.conditions:
            raise DomainError("at least one condition is required")
        if self.workers < 1:
            raise DomainError(f"workers must be at least 1: {self.workers}")
        if not 0 <= self.base_seed < 2**64:
            raise DomainError(f"base seed must be a 64-bit integer: {self.base_seed}")

    def seed(self, run: int) -> int:
        """Workload seed of a run, shared by every condition."""
        return self.base_seed + run

    def deployment(self, condition: Condition) -> Deployment:
        """Builds the deployment of a condition at the configured scale."""
        return build_deployment(
            condition.policy, condition.server_mode, self.catalog, scale=self.scale
        )


def load_config(path: Path) -> ExperimentConfig:
    """Reads an experiment configuration file.

    :param path: TOML document; missing keys take their defaults.
    :type path: Path
    :rtype: ExperimentConfig
    :raises ConfigurationError: If the file is unreadable or malformed.
    """
    return load_document(ExperimentConfig, read_toml(path), str(path))


@dataclass(frozen=True)
class RunRecord:
    """Metrics of one successful run."""

    condition: str
    run: int
    seed: int
    status: SolveStatus
    requests: int
    cores: float
    memory: float
    gpu: float
    fpga: float
    penalty: int
    weighted_usage: int
    cost: int
    explored: int

    def metric(self, name: str) -> float:
        """Value of a summarized quantity."""
        return getattr(self, name)


@dataclass(frozen=True)
class RunFailure:
    """A run without a usable solution."""

    condition: str
    run: int
    seed: int
    status: SolveStatus
    reason: str


RunResult = Union[RunRecord, RunFailure]


@dataclass(frozen=True)
class ConditionSummary:
    """Statistics of one condition over its successful runs."""

    condition: str
    runs: int
    failures: int
    budget_exceeded: int
    metrics: dict[str, StatSummary]


@dataclass(frozen=True)
class ExperimentReport:
    """In-memory result of :func:`run_experiment`."""

    config: ExperimentConfig
    records: tuple[RunRecord, ...]
    failures: tuple[RunFailure, ...]
    summaries: tuple[ConditionSummary, ...]

    @property
    def budget_limited(self) -> tuple[RunRecord, ...]:
        """Fixed-cost runs whose reported allocation is an unproven incumbent."""
        if self.config.experiment.kind is not ExperimentKind.FIXED_COST:
            return ()
        return tuple(r for r in self.records if r.status is SolveStatus.BUDGET_EXCEEDED)

    @property
    def ok(self) -> bool:
        """Whether every run produced a solution, proven optimal in fixed-cost mode."""
        return not self.failures and not self.budget_limited


@dataclass(frozen=True)
class SummaryDocument:
    """Layout of summary.json."""

    experiment: ExperimentKind
    solver: SolverKind
    runs: int
    base_seed: int
    conditions: list[ConditionSummary]
    failures: list[RunFailure]


def _record(
    config: ExperimentConfig, condition: Condition, run: int, outcome: RunOutcome
) -> RunResult:
    seed = config.seed(run)
    result = outcome.result
    if outcome.time_limited:
        return RunFailure(
            condition.label,
            run,
            seed,
            SolveStatus.BUDGET_EXCEEDED,
            f"wall-clock limit of {config.solver.time_budget:g}s reached before the node "
            "budget; the result would depend on machine speed",
        )
    if result.solution is None:
        reason = "no feasible allocation"
        if result.status is SolveStatus.BUDGET_EXCEEDED:
            reason = "search budget exhausted without a feasible allocation"
        return RunFailure(condition.label, run, seed, result.status, reason)
    if (
        config.experiment.kind is ExperimentKind.SATURATION
        and outcome.n_star == 0
        and config.experiment.workload_size > 0
    ):
        return RunFailure(
            condition.label, run, seed, SolveStatus.INFEASIBLE, "not even one request fits"
        )

    deployment = config.deployment(condition)
    problem = build_problem(deployment, outcome.requests, config.weights)
    violations = validate(result.solution, problem)
    if violations:
        for v in violations:
            _LOGGER.error("%s run %d: %s", condition.label, run, v.message)
        return RunFailure(
            condition.label, run, seed, result.status, f"{len(violations)} constraint violations"
        )

    assert outcome.utilization is not None and outcome.cost is not None
    ratios = outcome.utilization.ratios()
    return RunRecord(
        condition=condition.label,
        run=run,
        seed=seed,
        status=result.status,
        requests=outcome.n_star,
        penalty=result.solution.objective.penalty,
        weighted_usage=result.solution.objective.weighted_usage,
        cost=outcome.cost,
        explored=result.explored,
        **ratios,
    )


def execute_run(config: ExperimentConfig, condition: Condition, run: int) -> RunResult:
    """Runs one condition with one seed.

    Module-level so that it can be shipped to worker processes.

    :param config: Experiment configuration.
    :type config: ExperimentConfig
    :param condition: Condition to run.
    :type condition: Condition
    :param run: Run index; the workload seed is ``base_seed + run``.
    :type run: int
    :rtype: RunRecord | RunFailure
    """
    deployment = config.deployment(condition)
    spec = replace(
        config.workload, count=config.experiment.workload_size, seed=config.seed(run)
    )
    run_fn = (
        saturation_capacity
        if config.experiment.kind is ExperimentKind.SATURATION
        else fixed_cost_run
    )
    try:
        outcome = run_fn(
            deployment,
            spec,
            solver=config.solver.kind,
            limits=config.solver.limits(),
            weights=config.weights,
            costs=config.costs,
        )
    except BudgetExceededError as err:
        return RunFailure(
            condition.label, run, spec.seed, SolveStatus.BUDGET_EXCEEDED, str(err)
        )
    result = _record(config, condition, run, outcome)
    _LOGGER.info(
        "%s run %d (seed %d): %s", condition.label, run, spec.seed, result.status.value
    )
    return result


def _summaries(
    config: ExperimentConfig, records: list[RunRecord], failures: list[RunFailure]
) -> tuple[ConditionSummary, ...]:
    out = []
    for cond in config.conditions:
        rows = [r for r in records if r.condition == cond.label]
        metrics = {}
        for name in METRICS:
            stat = describe([r.metric(name) for r in rows])
            if stat is not None:
                metrics[name] = stat
        out.append(
            ConditionSummary(
                condition=cond.label,
                runs=len(rows),
                failures=sum(f.condition == cond.label for f in failures),
                budget_exceeded=sum(r.status is SolveStatus.BUDGET_EXCEEDED for r in rows),
                metrics=metrics,
            )
        )
    return tuple(out)


class ExperimentRunner:
    """Runs every (condition, run) pair and writes the artifacts."""

    def __init__(self, config: ExperimentConfig, output_dir: Optional[Path] = None) -> None:
        """Initializes the runner.

        :param config: Experiment configuration.
        :type config: ExperimentConfig
        :param output_dir: Overrides ``config.output_dir``.
        :type output_dir: Path | None
        """
        self._config = config
        self._output_dir = Path(config.output_dir) if output_dir is None else output_dir

    @property
    def output_dir(self) -> Path:
        """Directory receiving the artifacts."""
        return self._output_dir

    def _tasks(self) -> list[tuple[Condition, int]]:
        return [(c, run) for c in self._config.conditions for run in range(self._config.runs)]

    async def _execute(self) -> list[RunResult]:
        tasks = self._tasks()
        if self._config.workers == 1:
            return [execute_run(self._config, c, run) for c, run in tasks]
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=self._config.workers) as pool:
            # gather keeps submission order.
            return await asyncio.gather(
                *(
                    loop.run_in_executor(pool, partial(execute_run, self._config, c, run))
                    for c, run in tasks
                )
            )

    async def run(self) -> ExperimentReport:
        """Executes the experiment and writes runs.csv, summary.json and plot data.

        :rtype: ExperimentReport
        """
        cfg = self._config
        _LOGGER.info(
            "Running %s: %d conditions x %d runs, solver %s",
            cfg.experiment.kind.value,
            len(cfg.conditions),
            cfg.runs,
            cfg.solver.kind.value,
        )
        results = await self._execute()
        records = [r for r in results if isinstance(r, RunRecord)]
        failures = [r for r in results if isinstance(r, RunFailure)]
        for f in failures:
            _LOGGER.warning("%s run %d failed: %s", f.condition, f.run, f.reason)
        report = ExperimentReport(
            config=cfg,
            records=tuple(records),
            failures=tuple(failures),
            summaries=_summaries(cfg, records, failures),
        )
        for r in report.budget_limited:
            _LOGGER.warning(
                "%s run %d: allocation not proven optimal within the node budget",
                r.condition,
                r.run,
            )
        self._output_dir.mkdir(parents=True, exist_ok=True)
        write_runs(report, self._output_dir / RUNS_FILE)
        write_summary(report, self._output_dir / SUMMARY_FILE)
        emit_plot_data(report, self._output_dir)
        return report


async def run_experiment(
    config: ExperimentConfig, output_dir: Optional[Path] = None
) -> ExperimentReport:
    """Runs an experiment and writes its artifacts.

    :param config: Experiment configuration.
    :type config: ExperimentConfig
    :param output_dir: Overrides ``config.output_dir``.
    :type output_dir: Path | None
    :rtype: ExperimentReport
    """
    return await ExperimentRunner(config, output_dir).run()


RUN_COLUMNS = (
    "condition",
    "run",
    "seed",
    "status",
    "requests",
    *RESOURCES,
    "penalty",
    "weighted_usage",
    "cost",
)


def runs_frame(report: ExperimentReport) -> pd.DataFrame:
    """One row per successful run, in condition then run order.

    Search statistics such as ``explored`` are not written.
    """
    rows = [serialize(RunRecord, r) for r in report.records]
    return pd.DataFrame(rows, columns=list(RUN_COLUMNS))


def write_runs(report: ExperimentReport, path: Path) -> None:
    """Writes runs.csv."""
    runs_frame(report).to_csv(
        path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )


def write_summary(report: ExperimentReport, path: Path) -> None:
    """Writes summary.json."""
    cfg = report.config
    doc = SummaryDocument(
        experiment=cfg.experiment.kind,
        solver=cfg.solver.kind,
        runs=cfg.runs,
        base_seed=cfg.base_seed,
        conditions=list(report.summaries),
        failures=list(report.failures),
    )
    path.write_text(dump_json(serialize(SummaryDocument, doc)), encoding="utf-8")


def _plot_frame(report: ExperimentReport, names: tuple[str, ...]) -> pd.DataFrame:
    rows = []
    for summary in report.summaries:
        row: dict[str, Union[str, float]] = {"condition": summary.condition}
        for name in names:
            stat = summary.metrics.get(name)
            row[f"{name}_mean"] = float("nan") if stat is None else stat.mean
            row[f"{name}_ci"] = float("nan") if stat is None else stat.ci_half_width
        rows.append(row)
    columns = ["condition"] + [f"{n}_{s}" for n in names for s in ("mean", "ci")]
    return pd.DataFrame(rows, columns=columns)


def emit_plot_data(report: ExperimentReport, directory: Path) -> tuple[Path, Path]:
    """Writes grouped-bar plot data: utilization per resource type, and cost.

    Each file is tab separated with one row per condition, in configuration
    order, and a mean and confidence half-width column per quantity.

    :param report: A complete report.
    :type report: ExperimentReport
    :param directory: Output directory.
    :type directory: Path
    :return: Paths of the utilization and cost files.
    :rtype: tuple[Path, Path]
    """
    directory.mkdir(parents=True, exist_ok=True)
    utilization_path = directory / UTILIZATION_PLOT_FILE
    cost_path = directory / COST_PLOT_FILE
    for path, names in ((utilization_path, RESOURCES), (cost_path, ("cost",))):
        _plot_frame(report, names).to_csv(
            path,
            sep="\t",
            index=False,
            float_format=FLOAT_FORMAT,
            na_rep="nan",
            lineterminator="\n",
        )
    return utilization_path, cost_path
