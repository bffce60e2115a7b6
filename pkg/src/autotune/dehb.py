"""Differential evolution on a fidelity ladder.

Iteration 0 runs the whole ladder: the lowest rung starts from uniform
samples sized by its capacity, and each higher rung is initialised with the
best vectors of the rung below (top capacity-of-next-rung by cost) evaluated
at the higher fidelity. Every following iteration drops its lowest rung and
re-initialises the new lowest rung with a differential-evolution generation
against that rung's previous population (rand/1 mutation, binomial crossover,
one-to-one elitist selection), then sweeps upward again. Each rung spends the
equivalent of one full run per iteration, so an iteration with r active rungs
costs r full-run equivalents (up to capacity flooring). The run stops after
the iteration where only the full budget remains, or after ``iterations``.

Costs at different fidelities are never compared directly; information moves
between rungs only through promotion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .budgets import BudgetLadder, rung_capacity
from .journal import COMPLETE, INCUMBENT
from .objectives import Objective
from .runner import NoIncumbentError, TrialRunner
from .space import ConfigSpace, Configuration, from_unit


@dataclass
class DeMember:
    vector: np.ndarray
    cost: float  # +inf when the evaluation failed


@dataclass
class DePopulation:
    budget: float
    capacity: int
    members: list[DeMember] = field(default_factory=list)


@dataclass
class DehbRun:
    ladder: BudgetLadder
    iterations_run: int
    incumbent: Configuration
    incumbent_cost: float
    spend: float
    iteration_budgets: list  # list of tuples of rung budgets used per iteration
    iteration_spend: list


def de_mutate_vectors(x1: np.ndarray, x2: np.ndarray, x3: np.ndarray, F: float) -> np.ndarray:
    """rand/1 donor: x1 + F * (x2 - x3), clipped to the unit cube."""
    return np.clip(x1 + F * (np.asarray(x2) - np.asarray(x3)), 0.0, 1.0)


def de_mutate(
    pop: list[np.ndarray],
    target_index: int,
    F: float,
    rng: np.random.Generator,
    dimension: int | None = None,
) -> np.ndarray:
    """Pick three distinct non-target members as donors; when the population
    is too small, missing donors are drawn uniformly from the cube."""
    others = [i for i in range(len(pop)) if i != target_index]
    dim = dimension if dimension is not None else len(pop[target_index])
    picks = []
    pool = list(others)
    for _ in range(3):
        if pool:
            j = int(rng.integers(len(pool)))
            picks.append(np.asarray(pop[pool.pop(j)], dtype=float))
        else:
            picks.append(rng.random(dim))
    return de_mutate_vectors(picks[0], picks[1], picks[2], F)


def de_crossover(
    target: np.ndarray, donor: np.ndarray, CR: float, rng: np.random.Generator
) -> np.ndarray:
    """Binomial crossover; one coordinate (j_rand) always comes from the donor."""
    target = np.asarray(target, dtype=float)
    donor = np.asarray(donor, dtype=float)
    if target.shape != donor.shape:
        raise ValueError("target and donor must have equal dimension")
    d = target.shape[0]
    mask = rng.random(d) < CR
    mask[int(rng.integers(d))] = True
    child = np.where(mask, donor, target)
    return child


def de_select(
    parent: DeMember,
    child_vector: np.ndarray,
    space: ConfigSpace,
    runner: TrialRunner,
    budget: float,
    tags: dict | None = None,
) -> tuple[DeMember, object]:
    """Evaluate the child at the parent's budget; keep the better (ties keep
    the child, a failed child keeps the parent)."""
    result = runner.evaluate_group(
        from_unit(space, child_vector), budget, purpose="tune", tags=tags
    )
    if not result.failed and result.cost <= parent.cost:
        return DeMember(vector=np.asarray(child_vector, dtype=float), cost=result.cost), result
    return parent, result


def run_dehb(
    space: ConfigSpace,
    objective: Objective,
    lad: BudgetLadder,
    iterations: int,
    tuning_seeds: list[int],
    rng: np.random.Generator | int,
    F: float = 0.5,
    CR: float = 0.5,
    *,
    runner: TrialRunner | None = None,
    journal=None,
    workers: int = 1,
    max_groups: int | None = None,
) -> DehbRun:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    if runner is None:
        runner = TrialRunner(
            objective, tuning_seeds, journal=journal, workers=workers, max_groups=max_groups
        )

    d = space.dimension
    rungs = list(lad.rungs)
    caps = [rung_capacity(lad, i) for i in range(len(rungs))]
    pops: dict[int, DePopulation] = {}
    incumbent_vec = None
    incumbent_cost = math.inf
    total_spend = 0.0
    iteration_budgets = []
    iteration_spend = []

    def note_incumbent(vector: np.ndarray, cost: float) -> None:
        nonlocal incumbent_vec, incumbent_cost
        if cost < incumbent_cost:
            incumbent_vec, incumbent_cost = np.array(vector), cost
            runner.journal.append(
                {
                    "t": INCUMBENT,
                    "config": dict(from_unit(space, vector).values),
                    "cost": cost,
                    "budget": lad.max_budget,
                }
            )

    def evaluate_population(vectors, rung_index, iteration) -> DePopulation:
        nonlocal total_spend
        budget = rungs[rung_index]
        results = runner.evaluate_many(
            [
                {
                    "config": from_unit(space, v),
                    "budget": budget,
                    "purpose": "tune",
                    "tags": {"iteration": iteration, "rung": rung_index},
                }
                for v in vectors
            ]
        )
        members = []
        for v, res in zip(vectors, results):
            members.append(DeMember(vector=np.asarray(v, dtype=float), cost=res.cost))
            total_spend += budget
            if budget == lad.max_budget and not res.failed:
                note_incumbent(v, res.cost)
        return DePopulation(budget=budget, capacity=caps[rung_index], members=members)

    n_rungs = len(rungs)
    iterations_run = 0
    for it in range(min(iterations, n_rungs)):
        lowest = it  # this iteration's lowest active rung index
        active = list(range(lowest, n_rungs))
        iteration_budgets.append(tuple(rungs[i] for i in active))
        spend_before = total_spend

        if it == 0:
            vectors = [rng.random(d) for _ in range(caps[lowest])]
            pops[lowest] = evaluate_population(vectors, lowest, it)
        else:
            prev = pops[lowest]
            vectors = [m.vector for m in prev.members]
            new_members = []
            budget = rungs[lowest]
            for idx, parent in enumerate(prev.members):
                donor = de_mutate(vectors, idx, F, rng, dimension=d)
                child = de_crossover(parent.vector, donor, CR, rng)
                survivor, res = de_select(
                    parent,
                    child,
                    space,
                    runner,
                    budget,
                    tags={"iteration": it, "rung": lowest, "slot": idx},
                )
                total_spend += budget
                if budget == lad.max_budget and not res.failed:
                    note_incumbent(child, res.cost)
                new_members.append(survivor)
            pops[lowest] = DePopulation(
                budget=budget, capacity=caps[lowest], members=new_members
            )

        for rung_index in active[1:]:
            below = pops[rung_index - 1]
            ranked = sorted(below.members, key=lambda m: m.cost)
            promoted = [m.vector for m in ranked[: caps[rung_index]]]
            pops[rung_index] = evaluate_population(promoted, rung_index, it)

        iteration_spend.append(total_spend - spend_before)
        iterations_run += 1

    if incumbent_vec is None:
        raise NoIncumbentError("no incumbent: every full-budget trial failed")
    incumbent = from_unit(space, incumbent_vec)
    runner.journal.append(
        {
            "t": COMPLETE,
            "spend": total_spend,
            "groups": runner.groups_run,
            "incumbent": dict(incumbent.values),
            "cost": incumbent_cost,
        }
    )
    return DehbRun(
        ladder=lad,
        iterations_run=iterations_run,
        incumbent=incumbent,
        incumbent_cost=incumbent_cost,
        spend=total_spend,
        iteration_budgets=iteration_budgets,
        iteration_spend=iteration_spend,
    )
