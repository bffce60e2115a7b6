"""Command-line interface.

    tune {rs,dehb,pbt} --space F --objective NAME|cmd:... --budget-runs N
         --tuning-seeds 0,1,2,3,4 --test-seeds 5..14 --repetitions R
         --rng-seed S --workers W --out DIR [--deterministic]
    report {checklist,ranks,incumbents} DIR...
    sweep --space F --objective NAME --param NAME --values ... --seeds ...

AUTOTUNE_RUN_DIR overrides --out. Exit codes: 0 success, 2 usage error,
3 objective failure, 4 journal corruption.
"""
from __future__ import annotations

import argparse
import os
import sys

from ._version import __version__
from .journal import JournalCorrupt, JournalError
from .objectives import EvaluationError, ObjectiveSpec, make_objective
from .protocol import MethodSpec, SeedPlan, default_seed_plan
from .runner import NoIncumbentError
from .runs import (
    default_run_dir,
    export,
    incumbents_csv,
    rep_dir,
    report_from_directories,
    run_repetition,
)
from .space import Configuration, SpaceError, parse_space
from .sweeps import SweepSpec, run_sweep

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_OBJECTIVE = 3
EXIT_CORRUPT = 4


class UsageError(ValueError):
    pass


def parse_seed_list(text: str) -> list[int]:
    """Accept '0,1,2' and '5..14' (inclusive), or a mix."""
    seeds: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ".." in chunk:
            lo, hi = chunk.split("..", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(chunk))
    if not seeds:
        raise UsageError(f"no seeds in {text!r}")
    return seeds


def _parse_params(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"expected key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out


def _objective_spec(name: str, params: dict) -> ObjectiveSpec:
    if name.startswith("cmd:"):
        return ObjectiveSpec("external_command", {"command": name[len("cmd:") :], **params})
    return ObjectiveSpec(name, params)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--space", required=True, help="space definition file")
    p.add_argument("--objective", required=True, help="objective name or cmd:<command>")
    p.add_argument("--objective-param", action="append", default=[], metavar="K=V")
    p.add_argument("--budget-runs", type=int, default=16)
    p.add_argument("--tuning-seeds", default="0,1,2,3,4")
    p.add_argument("--test-seeds", default="5..14")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="run directory (AUTOTUNE_RUN_DIR overrides)")
    p.add_argument("--deterministic", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autotune")
    parser.add_argument("--version", action="version", version=f"autotune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    tune = sub.add_parser("tune", help="run an optimizer")
    tsub = tune.add_subparsers(dest="method", required=True)

    rs = tsub.add_parser("rs", help="random search at full budget")
    _add_common(rs)

    dehb = tsub.add_parser("dehb", help="differential evolution on a fidelity ladder")
    _add_common(dehb)
    dehb.add_argument("--eta", type=float, default=1.9)
    dehb.add_argument("--min-budget", type=float, default=0.01)
    dehb.add_argument("--iterations", type=int, default=None)
    dehb.add_argument("--de-f", type=float, default=0.5, dest="de_f")
    dehb.add_argument("--de-cr", type=float, default=0.5, dest="de_cr")

    pbt = tsub.add_parser("pbt", help="population-based training")
    _add_common(pbt)
    pbt.add_argument("--explore", choices=["perturb", "gp"], default="perturb")
    pbt.add_argument("--population", type=int, default=None)
    pbt.add_argument("--intervals", type=int, default=20)
    pbt.add_argument("--quantile", type=float, default=0.125)
    pbt.add_argument("--warmstart-runs", type=int, default=0)
    pbt.add_argument("--restart-patience", type=int, default=3)
    pbt.add_argument("--explore-prob", type=float, default=1.0)
    pbt.add_argument("--factor-up", type=float, default=1.2)
    pbt.add_argument("--factor-down", type=float, default=0.8)
    pbt.add_argument("--resample-prob", type=float, default=0.25)

    report = sub.add_parser("report", help="export reports from run directories")
    report.add_argument("kind", choices=["checklist", "ranks", "incumbents", "trials"])
    report.add_argument("dirs", nargs="+", metavar="DIR")

    sweep = sub.add_parser("sweep", help="vary one hyperparameter over a value list")
    sweep.add_argument("--space", required=True)
    sweep.add_argument("--objective", required=True)
    sweep.add_argument("--objective-param", action="append", default=[], metavar="K=V")
    sweep.add_argument("--param", required=True)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--seeds", default="0,1,2,3,4")
    sweep.add_argument("--budget", type=float, default=1.0)
    sweep.add_argument("--base", action="append", default=[], metavar="K=V",
                       help="base configuration value (defaults to space midpoints)")
    sweep.add_argument("--out", default=None)
    return parser


def _method_from_args(args) -> MethodSpec:
    if args.method == "rs":
        return MethodSpec("rs", options={"n_configs": args.budget_runs})
    if args.method == "dehb":
        options = {"eta": args.eta, "min_budget": args.min_budget, "F": args.de_f, "CR": args.de_cr}
        if args.iterations is not None:
            options["iterations"] = args.iterations
        return MethodSpec("dehb", options=options)
    options = {
        "explore_mode": args.explore,
        "num_intervals": args.intervals,
        "quantile": args.quantile,
        "warmstart_runs": args.warmstart_runs,
        "restart_patience": args.restart_patience,
        "explore_prob": args.explore_prob,
        "factor_up": args.factor_up,
        "factor_down": args.factor_down,
        "resample_prob": args.resample_prob,
    }
    if args.population is not None:
        options["population_size"] = args.population
    name = "pbt" if args.explore == "perturb" else "pbt-gp"
    return MethodSpec("pbt", name=name, options=options)


def _cmd_tune(args) -> int:
    with open(args.space, "r", encoding="utf-8") as fh:
        space_text = fh.read()
    parse_space(space_text)  # fail fast on syntax errors
    method = _method_from_args(args)
    objective_spec = _objective_spec(args.objective, _parse_params(args.objective_param))
    seed_plan = SeedPlan(parse_seed_list(args.tuning_seeds), parse_seed_list(args.test_seeds))
    out = os.environ.get("AUTOTUNE_RUN_DIR") or args.out
    if out is None:
        out = default_run_dir("run", method.name)
    reports = []
    for rep in range(args.repetitions):
        result = run_repetition(
            rep_dir(out, rep),
            method,
            space_text,
            objective_spec,
            seed_plan,
            args.budget_runs,
            args.rng_seed,
            rep,
            deterministic=args.deterministic or args.workers == 1,
            workers=args.workers,
        )
        reports.append(result)
        print(
            f"repetition {rep}: incumbent cost {result.tuning_cost:.6g}, "
            f"test mean {result.test_mean:.6g} +- {result.test_std:.6g}, "
            f"spend {result.spend:.3f} runs"
        )
    export(out, "trials")
    export(out, "incumbents")
    print(f"run directory: {out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    if args.kind in ("ranks", "incumbents", "trials", "checklist") and len(args.dirs) == 1:
        files = export(args.dirs[0], args.kind)
        for name in files:
            print(os.path.join(args.dirs[0], "exports", name))
        return EXIT_OK
    # multiple directories: aggregate into the current directory
    dirs = []
    for d in args.dirs:
        from .runs import repetition_dirs

        dirs.extend(repetition_dirs(d))
    if args.kind == "incumbents":
        print(incumbents_csv(report_from_directories(dirs)), end="")
    elif args.kind == "ranks":
        from .runs import ranks_csv

        print(ranks_csv(report_from_directories(dirs)), end="")
    elif args.kind == "checklist":
        from .journal import Journal
        from .protocol import emit_checklist
        from .runs import JOURNAL_NAME

        journals = [Journal.load(os.path.join(d, JOURNAL_NAME)) for d in dirs]
        print(emit_checklist(journals).render(), end="")
    else:
        raise UsageError("trials reports take a single directory")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    with open(args.space, "r", encoding="utf-8") as fh:
        space_text = fh.read()
    space = parse_space(space_text)
    objective = make_objective(
        _objective_spec(args.objective, _parse_params(args.objective_param)), space=space
    )
    if args.param not in space:
        raise UsageError(f"unknown parameter {args.param!r}")
    base_values = {}
    from .space import from_unit
    import numpy as np

    midpoint = from_unit(space, np.full(space.dimension, 0.5))
    base_values.update(midpoint.values)
    base_values.update(_parse_params(args.base))
    p = space[args.param]
    raw = [v.strip() for v in args.values.split(",") if v.strip()]
    if p.kind == "integer":
        values = [int(float(v)) for v in raw]
    elif p.kind == "categorical":
        values = raw
    else:
        values = [float(v) for v in raw]
    spec = SweepSpec(
        space,
        Configuration(base_values),
        args.param,
        values,
        parse_seed_list(args.seeds),
        budget=args.budget,
    )
    table = run_sweep(spec, objective)
    out_dir = os.environ.get("AUTOTUNE_RUN_DIR") or args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, table.csv_name())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(table.to_csv())
    print(path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "tune":
            return _cmd_tune(args)
        if args.command == "report":
            return _cmd_report(args)
        return _cmd_sweep(args)
    except (UsageError, SpaceError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (NoIncumbentError, EvaluationError) as err:
        print(f"objective failure: {err}", file=sys.stderr)
        return EXIT_OBJECTIVE
    except JournalCorrupt as err:
        print(f"journal corruption: {err}", file=sys.stderr)
        return EXIT_CORRUPT
    except JournalError as err:
        print(f"journal error: {err}", file=sys.stderr)
        return EXIT_CORRUPT


def main_tune(argv: list[str] | None = None) -> int:
    return main(["tune", *(argv if argv is not None else sys.argv[1:])])


def main_report(argv: list[str] | None = None) -> int:
    return main(["report", *(argv if argv is not None else sys.argv[1:])])


def main_sweep(argv: list[str] | None = None) -> int:
    return main(["sweep", *(argv if argv is not None else sys.argv[1:])])


if __name__ == "__main__":
    sys.exit(main())
