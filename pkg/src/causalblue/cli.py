"""Command-line entry point: generate, optimize, oracle and plot subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiment
from .scenario import SCENARIO_SCHEMA, ScenarioConfig, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", type=Path, help="scenario file (defaults used if omitted)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, default=3, help="master seed")
    parser.add_argument(
        "--slices",
        type=lambda s: tuple(int(x) for x in s.split(",")),
        default=experiment.DEFAULT_SLICES,
        help="comma-separated target time slices",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalblue",
        description="Cyber-defence simulation and causal intervention optimisation.",
    )
    parser.add_argument(
        "--print-schema", action="store_true", help="print the scenario file schema and exit"
    )
    sub = parser.add_subparsers(dest="command")

    p_gen = sub.add_parser("generate", help="generate observational data and the DAG edge list")
    _add_common(p_gen)
    p_gen.add_argument("--envs", type=int, default=10, help="number of environments")

    p_opt = sub.add_parser("optimize", help="run the optimisers and write convergence traces")
    _add_common(p_opt)
    p_opt.add_argument(
        "--methods",
        type=lambda s: tuple(s.split(",")),
        default=experiment.DEFAULT_METHODS,
        help="comma-separated subset of BO,CBO,DCBO",
    )
    p_opt.add_argument("--budget", type=int, default=50, help="trials per optimiser run")
    p_opt.add_argument("--replicates", type=int, default=5, help="seeded repeats per method")
    p_opt.add_argument("--jobs", type=int, default=1, help="parallel workers for replicates")

    p_orc = sub.add_parser("oracle", help="grid-search the true optimum per slice")
    _add_common(p_orc)
    p_orc.add_argument("--resolution", type=int, default=21, help="grid points per dimension")

    p_plot = sub.add_parser("plot", help="plot convergence traces against the oracle")
    p_plot.add_argument("--out", type=Path, default=Path("out"), help="directory holding the CSVs")
    p_plot.add_argument("--traces", type=Path, help="trace CSV (default <out>/traces.csv)")
    p_plot.add_argument("--oracle", type=Path, help="oracle CSV (default <out>/oracle.csv)")
    return parser


def _load_config(args: argparse.Namespace) -> ScenarioConfig:
    if getattr(args, "scenario", None) is None:
        return ScenarioConfig().validate()
    return load_scenario(Path(args.scenario).read_text())


def _build_spec(args: argparse.Namespace) -> experiment.ExperimentSpec:
    spec = experiment.ExperimentSpec(
        config=_load_config(args),
        slices=tuple(args.slices),
        master_seed=args.seed,
        out_dir=args.out,
        methods=tuple(getattr(args, "methods", experiment.DEFAULT_METHODS)),
        budget=getattr(args, "budget", 50),
        replicates=getattr(args, "replicates", 5),
        n_envs=getattr(args, "envs", 10),
        oracle_resolution=getattr(args, "resolution", 21),
        n_jobs=getattr(args, "jobs", 1),
    )
    return spec.validate()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_schema:
        print(SCENARIO_SCHEMA, end="")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_VALIDATION
    try:
        if args.command == "plot":
            traces = args.traces or args.out / experiment.TRACES_FILE
            oracle_path = args.oracle or args.out / experiment.ORACLE_FILE
            if not traces.exists():
                raise ScenarioError(f"trace file not found: {traces}")
            if not oracle_path.exists():
                oracle_path = None
            out = experiment.cmd_plot(traces, oracle_path, args.out / experiment.PLOT_FILE)
            print(out)
            return EXIT_OK
        spec = _build_spec(args)
        if args.command == "generate":
            print(experiment.cmd_generate(spec))
        elif args.command == "optimize":
            print(experiment.cmd_optimize(spec))
        elif args.command == "oracle":
            print(experiment.cmd_oracle(spec))
        return EXIT_OK
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
