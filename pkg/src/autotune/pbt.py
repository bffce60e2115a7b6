"""Population-based training with synchronized intervals.

A population of members trains in lockstep: each round every member trains
from its checkpoint for another 1/num_intervals of the full budget and is
evaluated. The worst floor(quantile * n) members are then replaced by copies
(configuration and checkpoint, byte-identical) of the best floor(quantile * n)
members and explored: either by random perturbation of each hyperparameter or
by a Gaussian-process suggestion fitted to the cost history. Survivors keep
their configurations and checkpoints untouched. The incumbent is the best
member after the final interval, and the winning lineage yields the
hyperparameter schedule actually trained.

Optional extensions: full-budget warmstart runs that preload the model and
seed the initial population with their best configurations, and model
restarts when the best interval cost stagnates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gp import GpFitError, GpModel, fit_gp, suggest_candidate
from .journal import COMPLETE, EXPLOIT, EXPLORE, INCUMBENT
from .objectives import CheckpointHandle, Objective
from .runner import NoIncumbentError, TrialRunner
from .space import ConfigSpace, Configuration, from_unit, perturb, sample, to_unit

PERTURB = "perturb"
GP = "gp"


@dataclass
class Member:
    id: int
    config: Configuration
    checkpoints: dict = field(default_factory=dict)  # seed -> CheckpointHandle
    cost_history: list = field(default_factory=list)  # one entry per interval
    # (interval, source member id, configuration adopted) for every change,
    # including the full copied history of exploit sources
    lineage: list = field(default_factory=list)

    def current_cost(self) -> float:
        return self.cost_history[-1] if self.cost_history else math.inf


@dataclass
class Schedule:
    """Time-indexed configuration schedule of the winning lineage."""

    breakpoints: list  # [(training fraction, Configuration)], fraction 0 first

    def __post_init__(self):
        fracs = [f for f, _ in self.breakpoints]
        if not fracs or fracs[0] != 0.0:
            raise ValueError("schedule must start at fraction 0")
        if any(b >= c for b, c in zip(fracs, fracs[1:])):
            raise ValueError("schedule fractions must be strictly increasing")
        if fracs[-1] >= 1.0:
            raise ValueError("schedule fractions must stay below 1")

    def config_at(self, fraction: float) -> Configuration:
        chosen = self.breakpoints[0][1]
        for f, cfg in self.breakpoints:
            if f <= fraction:
                chosen = cfg
        return chosen


@dataclass
class PbtRun:
    population: list
    incumbent: Configuration
    incumbent_cost: float
    incumbent_id: int
    schedule: Schedule
    spend: float
    warmstart_results: list
    gp_restarts: int


def exploit(costs: list[float], quantile: float) -> list[tuple[int, int]]:
    """Truncation plan: pair the worst floor(q*n) members with the best.

    Returns (loser index, winner index) pairs; rank-1 loser (the very worst)
    copies the rank-1 winner (the very best). Ties rank by member index:
    among equal costs the lowest index is the better member.
    """
    if not (0.0 < quantile <= 0.5):
        raise ValueError(f"quantile must lie in (0, 0.5], got {quantile}")
    n = len(costs)
    k = int(quantile * n)
    if k < 1:
        return []
    order = sorted(range(n), key=lambda i: (costs[i], i))
    winners = order[:k]
    losers = order[-k:][::-1]  # worst first
    return [(l, w) for l, w in zip(losers, winners)]


def kernel_restart_check(
    best_costs: list[float], patience: int, tolerance: float = 1e-6
) -> str:
    """'restart' iff the best interval cost has not improved by more than
    ``tolerance`` for ``patience`` consecutive intervals."""
    if patience < 1:
        raise ValueError("patience must be >= 1")
    if len(best_costs) < 2:
        return "keep"
    best = best_costs[0]
    stagnant = 0
    for cost in best_costs[1:]:
        if cost < best - tolerance:
            best = cost
            stagnant = 0
        else:
            stagnant += 1
        if stagnant >= patience:
            return "restart"
    return "keep"


def warmstart(
    space: ConfigSpace,
    objective: Objective,
    warmstart_runs: int,
    tuning_seeds: list[int],
    rng: np.random.Generator,
    runner: TrialRunner,
) -> tuple[list, list[Configuration]]:
    """Evaluate ``warmstart_runs`` random configurations at full budget.

    Returns the completed results (for preloading a model) and the sampled
    configurations ranked best-first by cost; failures are dropped.
    """
    if warmstart_runs < 0:
        raise ValueError("warmstart_runs must be >= 0")
    configs = [sample(space, rng) for _ in range(warmstart_runs)]
    results = runner.evaluate_many(
        [{"config": c, "budget": 1.0, "purpose": "warmstart"} for c in configs]
    )
    done = [(r.cost, i) for i, r in enumerate(results) if not r.failed]
    done.sort()
    ranked = [configs[i] for _, i in done]
    return [results[i] for _, i in done], ranked


def run_pbt(
    space: ConfigSpace,
    objective: Objective,
    population_size: int,
    num_intervals: int,
    quantile: float,
    explore_mode: str,
    warmstart_runs: int,
    tuning_seeds: list[int],
    rng: np.random.Generator | int,
    *,
    factor_up: float = 1.2,
    factor_down: float = 0.8,
    resample_prob: float = 0.25,
    explore_prob: float = 1.0,
    kappa: float = 1.0,
    gp_target: str | None = None,  # "improvement" | "cost"; default per mode
    noise_variance: float = 1e-4,
    restart_patience: int | None = 3,
    runner: TrialRunner | None = None,
    journal=None,
    workers: int = 1,
    max_groups: int | None = None,
) -> PbtRun:
    if population_size < 2:
        raise ValueError("population_size must be >= 2")
    if num_intervals < 1:
        raise ValueError("num_intervals must be >= 1")
    if explore_mode not in (PERTURB, GP):
        raise ValueError(f"explore_mode must be 'perturb' or 'gp', got {explore_mode!r}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    if runner is None:
        runner = TrialRunner(
            objective, tuning_seeds, journal=journal, workers=workers, max_groups=max_groups
        )
    if gp_target is None:
        # warmstart points are full-run costs, so model raw cost when present
        gp_target = "cost" if warmstart_runs > 0 else "improvement"
    if gp_target not in ("cost", "improvement"):
        raise ValueError(f"gp_target must be 'cost' or 'improvement', got {gp_target!r}")

    warm_results, warm_ranked = ([], [])
    if warmstart_runs > 0:
        warm_results, warm_ranked = warmstart(
            space, objective, warmstart_runs, tuning_seeds, rng, runner
        )

    members = []
    for i in range(population_size):
        cfg = warm_ranked[i] if i < len(warm_ranked) else sample(space, rng)
        members.append(Member(id=i, config=cfg, lineage=[(0, i, cfg)]))

    # model history: (unit config vector, normalized time, target)
    gp_points: list[tuple[np.ndarray, float, float]] = []
    warm_points: list[tuple[np.ndarray, float, float]] = []
    if gp_target == "cost":
        for res in warm_results:
            warm_points.append((to_unit(space, res.config), 1.0, res.cost))
        gp_points = list(warm_points)
    gp_restarts = 0
    grid_scale = 1.0  # re-randomized on every model restart
    best_per_interval: list[float] = []

    def explore_config(base: Configuration, interval: int) -> tuple[Configuration, str]:
        if explore_mode == GP:
            pts = gp_points
            if len(pts) >= 2:
                try:
                    model = fit_gp(
                        np.array([p[0] for p in pts]),
                        np.array([p[1] for p in pts]),
                        np.array([p[2] for p in pts]),
                        noise_variance=noise_variance,
                        length_scale_grid=np.geomspace(0.05, 2.0, 5) * grid_scale,
                        time_scale_grid=np.geomspace(0.05, 2.0, 5) * grid_scale,
                    )
                    vec = suggest_candidate(
                        model,
                        time_value=(interval + 1) / num_intervals,
                        dimension=space.dimension,
                        rng=rng,
                        kappa=kappa,
                    )
                    return from_unit(space, vec), GP
                except GpFitError:
                    pass
            return (
                perturb(space, base, rng, factor_up, factor_down, resample_prob),
                "gp_fallback",
            )
        return perturb(space, base, rng, factor_up, factor_down, resample_prob), PERTURB

    for interval in range(1, num_intervals + 1):
        budget = interval / num_intervals
        results = runner.evaluate_many(
            [
                {
                    "config": m.config,
                    "budget": budget,
                    "purpose": "tune",
                    "resume": m.checkpoints or None,
                    "tags": {"interval": interval, "member": m.id},
                }
                for m in members
            ]
        )
        for m, res in zip(members, results):
            m.cost_history.append(res.cost)
            for seed, ckpt in res.checkpoints.items():
                old = m.checkpoints.get(seed)
                if old is not None and ckpt.trained_fraction < old.trained_fraction:
                    raise RuntimeError("checkpoint fraction regressed within a lineage")
                m.checkpoints[seed] = ckpt
            prev = m.cost_history[-2] if len(m.cost_history) >= 2 else None
            if not res.failed:
                if gp_target == "cost":
                    gp_points.append((to_unit(space, m.config), budget, res.cost))
                elif prev is not None and math.isfinite(prev):
                    # cost change, lower (more negative) is better
                    gp_points.append((to_unit(space, m.config), budget, res.cost - prev))

        costs = [m.current_cost() for m in members]
        finite = [c for c in costs if math.isfinite(c)]
        if finite:
            best_per_interval.append(min(finite))

        if interval == num_intervals:
            break  # nothing left to train; exploit/explore would be dead weight

        plan = exploit(costs, quantile)
        runner.journal.append(
            {
                "t": EXPLOIT,
                "interval": interval,
                "plan": [[l, w] for l, w in plan],
                "costs": [None if math.isinf(c) else c for c in costs],
            }
        )
        for loser_i, winner_i in plan:
            loser, winner = members[loser_i], members[winner_i]
            copied = {
                seed: CheckpointHandle(
                    key=f"m{loser.id}:i{interval}:{seed}",
                    trained_fraction=ckpt.trained_fraction,
                    payload=ckpt.load(),
                    path=ckpt.path,
                )
                for seed, ckpt in winner.checkpoints.items()
            }
            loser.checkpoints = copied
            loser.cost_history[-1] = winner.cost_history[-1]
            loser.lineage = list(winner.lineage)
            if float(rng.random()) < explore_prob:
                new_cfg, mode = explore_config(winner.config, interval)
            else:
                new_cfg, mode = winner.config, "keep"
            loser.config = new_cfg
            loser.lineage.append((interval, winner.id, new_cfg))
            runner.journal.append(
                {
                    "t": EXPLORE,
                    "interval": interval,
                    "member": loser.id,
                    "source": winner.id,
                    "mode": mode,
                    "config": dict(new_cfg.values),
                }
            )

        if explore_mode == GP and restart_patience is not None and len(best_per_interval) >= 2:
            if kernel_restart_check(best_per_interval, restart_patience) == "restart":
                gp_points = list(warm_points)
                best_per_interval = [best_per_interval[-1]]
                gp_restarts += 1
                grid_scale = float(np.exp(rng.uniform(-0.5, 0.5)))

    ranked = sorted(members, key=lambda m: (m.current_cost(), m.id))
    best = ranked[0]
    if not math.isfinite(best.current_cost()):
        raise NoIncumbentError("no incumbent: every member failed its final interval")

    breakpoints = []
    for interval, _, cfg in best.lineage:
        frac = interval / num_intervals
        if breakpoints and breakpoints[-1][0] == frac:
            breakpoints[-1] = (frac, cfg)
        else:
            breakpoints.append((frac, cfg))
    schedule = Schedule(breakpoints=breakpoints)

    spend = population_size * 1.0 + warmstart_runs * 1.0
    runner.journal.append(
        {
            "t": INCUMBENT,
            "config": dict(best.config.values),
            "cost": best.current_cost(),
            "budget": 1.0,
        }
    )
    runner.journal.append(
        {
            "t": COMPLETE,
            "spend": spend,
            "groups": runner.groups_run,
            "incumbent": dict(best.config.values),
            "cost": best.current_cost(),
        }
    )
    return PbtRun(
        population=members,
        incumbent=best.config,
        incumbent_cost=best.current_cost(),
        incumbent_id=best.id,
        schedule=schedule,
        spend=spend,
        warmstart_results=warm_results,
        gp_restarts=gp_restarts,
    )
