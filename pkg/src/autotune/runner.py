"""Trial execution: journaling, multi-seed groups, replay, worker pool.

Optimizers evaluate configurations through a :class:`TrialRunner`. One *group*
is a (configuration, budget) evaluated on every tuning seed; its spend is the
budget fraction (seeds are the protocol's price of reliability, not extra
tuning budget). Every trial and group lands in the journal; when the journal
is in replay mode the runner returns recorded results instead of calling the
objective, which is what makes interrupted runs resumable bit-for-bit.
"""
from __future__ import annotations

import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .journal import GROUP, TRIAL, Journal
from .objectives import (
    DONE,
    FAILED,
    CheckpointHandle,
    EvaluationError,
    Objective,
)
from .space import Configuration


class RunInterrupted(RuntimeError):
    """Raised by the runner when the configured group limit is reached."""


class NoIncumbentError(RuntimeError):
    """Every candidate evaluation failed; no incumbent exists."""


@dataclass
class GroupResult:
    """Outcome of one multi-seed evaluation group."""

    group: int
    config: Configuration
    budget: float
    seeds: tuple[int, ...]
    per_seed_cost: list  # float per seed, None where failed
    failed: bool
    checkpoints: dict  # seed -> CheckpointHandle
    purpose: str = "tune"

    @property
    def mean_cost(self) -> float | None:
        if self.failed:
            return None
        return sum(self.per_seed_cost) / len(self.per_seed_cost)

    @property
    def cost(self) -> float:
        """Mean cost with failures mapped to +inf for ranking."""
        m = self.mean_cost
        return math.inf if m is None else m


class TrialRunner:
    """Evaluates groups against an objective, journaling as it goes."""

    def __init__(
        self,
        objective: Objective,
        seeds: list[int],
        journal: Journal | None = None,
        checkpoint_dir: str | None = None,
        workers: int = 1,
        max_groups: int | None = None,
    ):
        if not seeds:
            raise ValueError("seeds must be non-empty")
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be distinct")
        self.objective = objective
        self.seeds = list(int(s) for s in seeds)
        self.journal = journal if journal is not None else Journal()
        if self.journal.header is None:
            self.journal.write_header({"method": "adhoc"})
        self.checkpoint_dir = checkpoint_dir
        self.workers = max(1, int(workers))
        self.max_groups = max_groups
        # next live group id continues after any groups already in the journal
        self._groups = len(self.journal.of_type(GROUP))
        self._started = 0
        self._lock = threading.Lock()

    @property
    def groups_run(self) -> int:
        return self._started

    def evaluate_group(
        self,
        config: Configuration,
        budget: float,
        seeds: list[int] | None = None,
        purpose: str = "tune",
        resume: dict | None = None,
        tags: dict | None = None,
    ) -> GroupResult:
        """Evaluate ``config`` at ``budget`` on each seed; journal everything."""
        seeds = tuple(self.seeds if seeds is None else (int(s) for s in seeds))
        key = {
            "config": _jsonable_config(config),
            "budget": budget,
            "seeds": list(seeds),
            "purpose": purpose,
        }
        replayed = self.journal.take_group_if_pending(key)
        if replayed is not None:
            self._started += 1
            return self._rehydrate(config, budget, seeds, purpose, replayed)

        if self.max_groups is not None and self._started >= self.max_groups:
            raise RunInterrupted(f"group limit {self.max_groups} reached")
        self._started += 1
        group_id = self._next_group_id()

        # spend is the incremental training fraction: resuming from a
        # checkpoint at f and training to b costs b - f, not b
        resumed_from = 0.0
        if resume:
            resumed_from = max(h.trained_fraction for h in resume.values() if h is not None)
        per_seed: list[float | None] = []
        checkpoints: dict[int, CheckpointHandle] = {}
        failed = False
        records = []
        for seed in seeds:
            handle = None if resume is None else resume.get(seed)
            t0 = time.perf_counter()
            cost: float | None
            error = ""
            ckpt = None
            try:
                cost, ckpt = self.objective.evaluate(config, budget, seed, resume=handle)
            except EvaluationError as err:
                cost = None
                failed = True
                error = str(err)
            wall = time.perf_counter() - t0
            if ckpt is not None:
                ckpt = self._persist(ckpt, group_id, seed)
                checkpoints[seed] = ckpt
            per_seed.append(cost)
            records.append(
                {
                    "t": TRIAL,
                    "group": group_id,
                    "config": _jsonable_config(config),
                    "budget": budget,
                    "seed": seed,
                    "cost": cost,
                    "status": DONE if cost is not None else FAILED,
                    "error": error,
                    "wall_time": wall,
                    "ckpt": None if ckpt is None else ckpt.path,
                    "frac": None if ckpt is None else ckpt.trained_fraction,
                    "purpose": purpose,
                }
            )
        group_rec = {
            "t": GROUP,
            "group": group_id,
            "config": _jsonable_config(config),
            "budget": budget,
            "seeds": list(seeds),
            "mean_cost": None if failed else sum(per_seed) / len(per_seed),
            "failed": failed,
            "spend": budget - resumed_from,
            "purpose": purpose,
        }
        if tags:
            group_rec["tags"] = tags
        with self._lock:
            for rec in records:
                self.journal.append(rec)
            self.journal.append(group_rec)
        return GroupResult(
            group=group_id,
            config=config,
            budget=budget,
            seeds=seeds,
            per_seed_cost=per_seed,
            failed=failed,
            checkpoints=checkpoints,
            purpose=purpose,
        )

    def evaluate_many(self, requests: list[dict]) -> list[GroupResult]:
        """Evaluate several groups, preserving request order in the result.

        With one worker (deterministic mode) this is a plain sequential loop;
        with more, groups run concurrently and journal order follows
        completion order.
        """
        if self.workers == 1 or len(requests) <= 1 or self.journal.replaying:
            return [self.evaluate_group(**req) for req in requests]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(self.evaluate_group, **req) for req in requests]
            return [f.result() for f in futures]

    # -- helpers -------------------------------------------------------------

    def _next_group_id(self) -> int:
        with self._lock:
            gid = self._groups
            self._groups += 1
        return gid

    def _persist(self, ckpt: CheckpointHandle, group_id: int, seed: int) -> CheckpointHandle:
        if self.checkpoint_dir is None or ckpt.payload is None:
            return ckpt
        os.makedirs(self.checkpoint_dir, exist_ok=True)
        fname = f"g{group_id:06d}_s{seed}_f{ckpt.trained_fraction:.6f}.ckpt"
        path = os.path.join(self.checkpoint_dir, fname)
        with open(path, "wb") as fh:
            fh.write(ckpt.payload)
        return CheckpointHandle(
            key=ckpt.key,
            trained_fraction=ckpt.trained_fraction,
            payload=ckpt.payload,
            path=path,
        )

    def _rehydrate(self, config, budget, seeds, purpose, records) -> GroupResult:
        trials = [r for r in records if r["t"] == TRIAL]
        group_rec = records[-1]
        per_seed = []
        checkpoints = {}
        for rec in trials:
            per_seed.append(rec["cost"])
            if rec.get("ckpt"):
                checkpoints[rec["seed"]] = CheckpointHandle(
                    key=f"replay:g{rec['group']}:s{rec['seed']}",
                    trained_fraction=rec["frac"],
                    path=rec["ckpt"],
                )
            elif rec.get("frac") is not None:
                checkpoints[rec["seed"]] = CheckpointHandle(
                    key=f"replay:g{rec['group']}:s{rec['seed']}",
                    trained_fraction=rec["frac"],
                    payload=b"",
                )
        return GroupResult(
            group=group_rec["group"],
            config=config,
            budget=budget,
            seeds=tuple(seeds),
            per_seed_cost=per_seed,
            failed=group_rec["failed"],
            checkpoints=checkpoints,
            purpose=purpose,
        )


def _jsonable_config(config: Configuration) -> dict:
    return dict(config.values)
