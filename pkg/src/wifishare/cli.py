"""Command line entry point: run / list / describe experiments, validate configs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from .experiments import (
    describe_experiment,
    list_experiments,
    run_experiment,
    validate_scenario_file,
)


def _parse_overrides(pairs: list[str]) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise SystemExit(f"--set expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        overrides[key.strip()] = yaml.safe_load(raw)
    return overrides


def _load_run_config(path: Path) -> tuple[str, int | None, dict]:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict) or "experiment" not in data:
        raise SystemExit(f"{path}: run config must map 'experiment' to a name")
    return data["experiment"], data.get("seed"), data.get("params", {}) or {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wifishare",
        description="Experiments for the shared-AP network pricing engine.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a built-in experiment or a run config file")
    run.add_argument("name", help="experiment name, or path to a YAML run config")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--outdir", type=Path, default=None, help="default: runs/<name>")
    run.add_argument("--workers", type=int, default=1, help="sweep-point worker pool size")
    run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override an experiment parameter (repeatable)",
    )

    sub.add_parser("list", help="list the built-in experiments")

    describe = sub.add_parser("describe", help="show an experiment's resolved parameters")
    describe.add_argument("name")

    validate = sub.add_parser("validate", help="check a scenario config file")
    validate.add_argument("--config", type=Path, required=True)
    validate.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "list":
        for name in list_experiments():
            print(name)
        return 0

    if args.command == "describe":
        try:
            print(describe_experiment(args.name))
        except KeyError as exc:
            print(exc.args[0], file=sys.stderr)
            return 2
        return 0

    if args.command == "validate":
        try:
            problems = validate_scenario_file(args.config, seed=args.seed)
        except (OSError, ValueError, TypeError, KeyError) as exc:
            print(f"invalid scenario config: {exc}", file=sys.stderr)
            return 2
        if problems:
            for problem in problems:
                print(problem)
            return 1
        print("scenario OK")
        return 0

    # run
    name = args.name
    seed = args.seed
    overrides = _parse_overrides(args.overrides)
    config_path = Path(name)
    if config_path.suffix in (".yaml", ".yml") or config_path.exists():
        name, config_seed, config_params = _load_run_config(config_path)
        overrides = {**config_params, **overrides}
        if config_seed is not None and args.seed == 0:
            seed = int(config_seed)
    outdir = args.outdir if args.outdir is not None else Path("runs") / name
    try:
        artifacts = run_experiment(
            name, outdir, seed=seed, workers=args.workers, overrides=overrides
        )
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    for path in artifacts:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
