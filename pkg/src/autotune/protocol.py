"""Experiment discipline: seed splits, repetitions, held-out testing, ranking.

Tuning and testing use disjoint seed sets. Each repetition runs one optimizer
with an independent rng against the tuning seeds under a fixed full-run budget
(journal-audited), then evaluates the incumbent once per test seed at full
budget. Method comparison uses a band rank: per environment, the best mean
earns rank 1 together with every method whose mean lies within the best's
standard deviation; the next best unranked method anchors the next free rank
(1 + number already ranked), and so on. Mean ranks are averaged across
environments and reported to one decimal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .budgets import ladder, rung_capacity
from .checklist import ChecklistReport, emit_checklist  # noqa: F401  (public API)
from .dehb import run_dehb
from .journal import Journal
from .objectives import Objective
from .pbt import run_pbt
from .rs import run_rs
from .runner import NoIncumbentError, TrialRunner
from .space import ConfigSpace, Configuration


@dataclass(frozen=True)
class SeedPlan:
    """Disjoint tuning and test seeds."""

    tuning_seeds: tuple[int, ...]
    test_seeds: tuple[int, ...]

    def __init__(self, tuning_seeds, test_seeds):
        tuning = tuple(int(s) for s in tuning_seeds)
        test = tuple(int(s) for s in test_seeds)
        if not tuning or not test:
            raise ValueError("both seed sets must be non-empty")
        if len(set(tuning)) != len(tuning) or len(set(test)) != len(test):
            raise ValueError("seed sets must not contain duplicates")
        overlap = set(tuning) & set(test)
        if overlap:
            raise ValueError(f"tuning and test seeds overlap: {sorted(overlap)}")
        object.__setattr__(self, "tuning_seeds", tuning)
        object.__setattr__(self, "test_seeds", test)


def default_seed_plan() -> SeedPlan:
    """Tune on seeds 0-4, test on seeds 5-14."""
    return SeedPlan(tuple(range(5)), tuple(range(5, 15)))


@dataclass(frozen=True)
class MethodSpec:
    """An optimizer plus its settings; sized to the run budget at plan time."""

    kind: str  # rs | dehb | pbt
    name: str = ""
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("rs", "dehb", "pbt"):
            raise ValueError(f"unknown method kind {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def plan(self, budget_runs: int) -> dict:
        """Concrete settings that keep total spend within ``budget_runs``."""
        opts = dict(self.options)
        if self.kind == "rs":
            opts.setdefault("n_configs", int(budget_runs))
        elif self.kind == "dehb":
            eta = opts.setdefault("eta", 1.9)
            min_budget = opts.setdefault("min_budget", 0.01)
            if "iterations" not in opts:
                lad = ladder(min_budget, 1.0, eta)
                n = lad.n_rungs
                spend, iters = 0.0, 0
                while iters < n and spend + (n - iters) <= budget_runs + 1e-9:
                    spend += n - iters
                    iters += 1
                opts["iterations"] = max(1, iters)
        elif self.kind == "pbt":
            warm = opts.setdefault("warmstart_runs", 0)
            opts.setdefault("population_size", max(2, int(budget_runs) - int(warm)))
            opts.setdefault("num_intervals", 20)
            opts.setdefault("quantile", 0.125)
            opts.setdefault("explore_mode", "perturb")
        return opts


def run_method(
    method: MethodSpec,
    space: ConfigSpace,
    objective: Objective,
    tuning_seeds: list[int],
    budget_runs: int,
    rng: np.random.Generator | int,
    *,
    runner: TrialRunner | None = None,
    journal: Journal | None = None,
    workers: int = 1,
    max_groups: int | None = None,
):
    """Dispatch one optimizer run. Returns (incumbent, incumbent_cost, result)."""
    opts = method.plan(budget_runs)
    common = dict(runner=runner, journal=journal, workers=workers, max_groups=max_groups)
    if method.kind == "rs":
        run = run_rs(space, objective, opts["n_configs"], tuning_seeds, rng, **common)
    elif method.kind == "dehb":
        lad = ladder(opts["min_budget"], 1.0, opts["eta"])
        run = run_dehb(
            space,
            objective,
            lad,
            opts["iterations"],
            tuning_seeds,
            rng,
            F=opts.get("F", 0.5),
            CR=opts.get("CR", 0.5),
            **common,
        )
    else:
        kw = {
            k: v
            for k, v in opts.items()
            if k
            not in ("population_size", "num_intervals", "quantile", "explore_mode", "warmstart_runs")
        }
        run = run_pbt(
            space,
            objective,
            opts["population_size"],
            opts["num_intervals"],
            opts["quantile"],
            opts["explore_mode"],
            opts["warmstart_runs"],
            tuning_seeds,
            rng,
            **common,
            **kw,
        )
    return run.incumbent, run.incumbent_cost, run


@dataclass
class RepetitionResult:
    repetition: int
    incumbent: Configuration | None
    tuning_cost: float | None
    test_costs: list
    failed: bool = False
    spend: float = 0.0

    @property
    def test_mean(self) -> float | None:
        return None if self.failed else float(np.mean(self.test_costs))

    @property
    def test_std(self) -> float | None:
        return None if self.failed else float(np.std(self.test_costs))


@dataclass
class IncumbentReport:
    method: str
    objective: str
    repetitions: list
    warning: str = ""

    @property
    def surviving(self) -> list:
        return [r for r in self.repetitions if not r.failed]

    @property
    def aggregate_mean(self) -> float:
        return float(np.mean([r.test_mean for r in self.surviving]))

    @property
    def aggregate_std(self) -> float:
        return float(np.std([r.test_mean for r in self.surviving]))


def run_protocol(
    method: MethodSpec,
    space: ConfigSpace,
    objective: Objective,
    seed_plan: SeedPlan,
    repetitions: int,
    budget_runs: int,
    *,
    base_rng_seed: int = 0,
    journals: list[Journal] | None = None,
    workers: int = 1,
) -> IncumbentReport:
    """Tune ``repetitions`` times and test each incumbent on the held-out seeds."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if budget_runs < 1:
        raise ValueError("budget_runs must be >= 1")
    reps = []
    failures = []
    for rep in range(repetitions):
        journal = journals[rep] if journals is not None else Journal()
        rng = np.random.default_rng(np.random.SeedSequence([int(base_rng_seed), rep]))
        runner = TrialRunner(
            objective, list(seed_plan.tuning_seeds), journal=journal, workers=workers
        )
        try:
            incumbent, tuning_cost, _ = run_method(
                method, space, objective, list(seed_plan.tuning_seeds), budget_runs,
                rng, runner=runner,
            )
        except NoIncumbentError as err:
            failures.append(f"repetition {rep}: {err}")
            reps.append(RepetitionResult(rep, None, None, [], failed=True))
            continue
        spend = journal.spend()
        if spend > budget_runs + 1e-9:
            raise RuntimeError(
                f"budget audit failed: spent {spend} > {budget_runs} full-run equivalents"
            )
        test_costs = []
        for test_seed in seed_plan.test_seeds:
            res = runner.evaluate_group(incumbent, 1.0, seeds=[test_seed], purpose="test")
            test_costs.append(res.cost)
        reps.append(
            RepetitionResult(rep, incumbent, tuning_cost, test_costs, spend=spend)
        )
    if all(r.failed for r in reps):
        raise NoIncumbentError("every repetition failed")
    return IncumbentReport(
        method=method.name,
        objective=objective.name,
        repetitions=reps,
        warning="; ".join(failures),
    )


# ---------------------------------------------------------------------------
# Rank computation


@dataclass
class RankTable:
    environments: list
    methods: list
    cells: dict  # (environment, method) -> (mean, std)
    ranks: dict  # (environment, method) -> rank
    mean_ranks: dict  # method -> float (unrounded)

    def mean_rank_rounded(self, method: str) -> float:
        return round(self.mean_ranks[method], 1)


def rank_methods(cells: dict, higher_is_better: bool = True) -> RankTable:
    """Band ranks from per-environment (mean, std) cells.

    ``cells`` maps environment -> {method: (mean, std)}. Every environment
    must contain every method. The current anchor's std defines the band; a
    method falling inside the bands of two anchors keeps the earlier (better)
    rank.
    """
    environments = list(cells)
    if not environments:
        raise ValueError("need at least one environment")
    methods = list(cells[environments[0]])
    for env in environments:
        missing = set(methods) ^ set(cells[env])
        if missing:
            raise ValueError(f"missing cell for {(env, sorted(missing)[0])}")
    ranks = {}
    for env in environments:
        stats = cells[env]
        sign = -1.0 if higher_is_better else 1.0
        order = sorted(methods, key=lambda m: sign * stats[m][0])
        assigned: dict[str, int] = {}
        while len(assigned) < len(methods):
            anchor = next(m for m in order if m not in assigned)
            rank = 1 + len(assigned)
            a_mean, a_std = stats[anchor]
            for m in order:
                if m in assigned:
                    continue
                mean = stats[m][0]
                inside = mean >= a_mean - a_std if higher_is_better else mean <= a_mean + a_std
                if inside:
                    assigned[m] = rank
        for m, r in assigned.items():
            ranks[(env, m)] = r
    mean_ranks = {
        m: float(np.mean([ranks[(env, m)] for env in environments])) for m in methods
    }
    return RankTable(
        environments=environments,
        methods=methods,
        cells={(e, m): tuple(cells[e][m]) for e in environments for m in methods},
        ranks=ranks,
        mean_ranks=mean_ranks,
    )
