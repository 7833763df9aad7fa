"""Command line front end: ``disaggpool run | generate | solve | export-lp | validate``."""

from __future__ import annotations

import argparse
import asyncio
from dataclasses import replace
import logging
import os
from pathlib import Path
import sys
from typing import NoReturn, Optional, Sequence

from .allocator import (
    SolverKind,
    SolveStatus,
    build_problem,
    read_solution,
    solve,
    solve_exact,
    validate,
    write_solution,
)
from .exceptions import BudgetExceededError, Error, InfeasibleProblemError
from .experiment import (
    ExperimentConfig,
    ExperimentKind,
    load_config,
    run_experiment,
)
from .lpexport import export_lp
from .model import Request
from .poolcfg import Deployment, Policy, Scale, ServerMode, build_deployment, write_deployment
from .workload import dump_workload, generate_workload, read_workload

_LOGGER = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "DISAGGPOOL_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2

_MODES = {
    "S": ServerMode.SEPARATE,
    "SEPARATE": ServerMode.SEPARATE,
    "M": ServerMode.MIXED,
    "MIXED": ServerMode.MIXED,
}


class _Parser(argparse.ArgumentParser):
    """Reports usage errors with exit status 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _policy(value: str) -> Policy:
    try:
        return Policy[value.upper()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown policy {value!r}") from None


def _mode(value: str) -> ServerMode:
    try:
        return _MODES[value.upper()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown server mode {value!r}") from None


def _solver(value: str) -> SolverKind:
    try:
        return SolverKind[value.upper()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown solver {value!r}") from None


def _scale(value: str) -> Scale:
    try:
        return Scale[value.upper()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown scale {value!r}") from None


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="experiment configuration (TOML)")
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--scale", type=_scale, help="inventory size: full or half")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def _instance(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--policy", type=_policy, default=Policy.C1, help="C1, C2 or C3")
    parser.add_argument(
        "--mode", type=_mode, default=ServerMode.SEPARATE, help="S(eparate) or M(ixed)"
    )
    parser.add_argument(
        "--workload", type=Path, help="workload file; generated from the seed if omitted"
    )


def build_parser() -> argparse.ArgumentParser:
    """Builds the argument parser."""
    parser = _Parser(prog="disaggpool", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run the experiment")
    _common(run)
    run.add_argument("--runs", type=int, help="runs per condition")
    run.add_argument("--policy", type=_policy, help="only conditions of this policy")
    run.add_argument("--mode", type=_mode, help="only conditions of this server mode")
    run.add_argument("--solver", type=_solver, help="exact, greedy or exhaustive")
    run.add_argument("--out", type=Path, help=f"output directory (or ${OUTPUT_DIR_ENV})")

    generate = sub.add_parser("generate", help="write a workload as JSON lines")
    _common(generate)
    generate.add_argument("--requests", type=int, help="number of requests")
    generate.add_argument("--out", type=Path, help="output file (default: stdout)")

    solve_cmd = sub.add_parser("solve", help="solve one instance and write the solution")
    _common(solve_cmd)
    _instance(solve_cmd)
    solve_cmd.add_argument("--solver", type=_solver, help="exact, greedy or exhaustive")
    solve_cmd.add_argument("--out", type=Path, required=True, help="solution file")

    export = sub.add_parser("export-lp", help="write the two-phase LP files of an instance")
    _common(export)
    _instance(export)
    export.add_argument("--out", type=Path, required=True, help="output directory")

    check = sub.add_parser("validate", help="check a solution against an instance")
    _common(check)
    _instance(check)
    check.add_argument("--solution", type=Path, required=True, help="solution file")
    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    # PuLP is chatty about solver discovery.
    logging.getLogger("pulp").setLevel(logging.WARNING)


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig() if args.config is None else load_config(args.config)
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    if args.scale is not None:
        config = replace(config, scale=args.scale)
    return config


def _requests(
    args: argparse.Namespace, config: ExperimentConfig, count: Optional[int] = None
) -> list[Request]:
    if getattr(args, "workload", None) is not None:
        return read_workload(args.workload)
    if count is None:
        count = config.experiment.workload_size
    return generate_workload(replace(config.workload, count=count, seed=config.base_seed))


def _deployment(args: argparse.Namespace, config: ExperimentConfig) -> Deployment:
    return build_deployment(args.policy, args.mode, config.catalog, scale=config.scale)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    overrides: dict = {}
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.solver is not None:
        overrides["solver"] = replace(config.solver, kind=args.solver)
    if args.policy is not None or args.mode is not None:
        overrides["conditions"] = tuple(
            c
            for c in config.conditions
            if args.policy in (None, c.policy) and args.mode in (None, c.server_mode)
        )
    config = replace(config, **overrides)
    out = args.out
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        out = Path(os.environ[OUTPUT_DIR_ENV])
    report = asyncio.run(run_experiment(config, out))
    if config.experiment.kind is ExperimentKind.SATURATION:
        quantity = "requests"
    else:
        quantity = "cost"
    for summary in report.summaries:
        stat = summary.metrics.get(quantity)
        if stat is not None:
            print(
                f"{summary.condition}\t{quantity}\t"
                f"{stat.mean:.3f} +- {stat.ci_half_width:.3f}"
            )
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def _cmd_generate(args: argparse.Namespace) -> int:
    config = _load(args)
    text = dump_workload(_requests(args, config, args.requests))
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    return EXIT_OK


def _cmd_solve(args: argparse.Namespace) -> int:
    config = _load(args)
    deployment = _deployment(args, config)
    problem = build_problem(deployment, _requests(args, config), config.weights)
    result = solve(problem, args.solver or config.solver.kind, config.solver.limits())
    if result.solution is None:
        _LOGGER.error("No solution: %s", result.status.value)
        return EXIT_INFEASIBLE
    write_solution(args.out, result.solution)
    objective = result.solution.objective
    print(f"{result.status.value}\tpenalty {objective.penalty}\tusage {objective.weighted_usage}")
    return EXIT_OK


def _cmd_export_lp(args: argparse.Namespace) -> int:
    config = _load(args)
    deployment = _deployment(args, config)
    problem = build_problem(deployment, _requests(args, config), config.weights)
    result = solve_exact(problem, config.solver.limits())
    if result.solution is None:
        _LOGGER.error("Cannot bound the penalty: %s", result.status.value)
        return EXIT_INFEASIBLE
    if result.status is not SolveStatus.OPTIMAL:
        _LOGGER.warning("Penalty bound comes from an unproven incumbent")
    export_lp(problem, args.out, penalty_bound=result.solution.objective.penalty)
    write_deployment(args.out / "deployment.json", deployment)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    config = _load(args)
    deployment = _deployment(args, config)
    problem = build_problem(deployment, _requests(args, config), config.weights)
    violations = validate(read_solution(args.solution), problem)
    for v in violations:
        print(f"{v.code}\t{v.message}")
    if violations:
        return EXIT_INFEASIBLE
    print("ok")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "export-lp": _cmd_export_lp,
    "validate": _cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``disaggpool`` console script.

    :param argv: Arguments without the program name; defaults to ``sys.argv``.
    :return: 0 on success, 2 if a run or instance is infeasible, 1 on a usage
        or configuration error.
    :rtype: int
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return _COMMANDS[args.command](args)
    except (InfeasibleProblemError, BudgetExceededError) as err:
        _LOGGER.error("%s", err)
        return EXIT_INFEASIBLE
    except Error as err:
        _LOGGER.error("%s", err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
