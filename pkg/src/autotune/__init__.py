"""Black-box hyperparameter tuning with a seed-disciplined protocol.

Optimizers: random search (``run_rs``), differential evolution on a fidelity
ladder (``run_dehb``), and population-based training with random or
model-based exploration (``run_pbt``). The protocol layer handles tuning/test
seed splits, repetitions, budget audits, method ranking and reproducibility
checklist reports; runs journal to disk and resume after interruption.
"""
from ._version import __version__
from .budgets import BudgetLadder, ladder, rung_capacity
from .checklist import ChecklistReport, emit_checklist
from .dehb import DehbRun, de_crossover, de_mutate, de_mutate_vectors, de_select, run_dehb
from .gp import GpFitError, GpModel, fit_gp, suggest_candidate
from .journal import Journal, JournalCorrupt, JournalError, space_digest
from .objectives import (
    CheckpointHandle,
    EvaluationError,
    Objective,
    ObjectiveSpec,
    Trial,
    evaluate,
    evaluate_multi_seed,
    make_objective,
)
from .pbt import Member, PbtRun, Schedule, exploit, kernel_restart_check, run_pbt, warmstart
from .protocol import (
    IncumbentReport,
    MethodSpec,
    RankTable,
    SeedPlan,
    default_seed_plan,
    rank_methods,
    run_protocol,
)
from .rs import RsRun, run_rs
from .runner import GroupResult, NoIncumbentError, RunInterrupted, TrialRunner
from .space import (
    ConfigSpace,
    Configuration,
    Hyperparameter,
    SpaceError,
    SpaceParseError,
    categorical,
    continuous,
    from_unit,
    integer,
    log_continuous,
    parse_space,
    perturb,
    render_space,
    sample,
    to_unit,
)
from .sweeps import SweepSpec, SweepSummary, SweepTable, run_sweep, worst_vs_best_summary

__all__ = [
    "__version__",
    "BudgetLadder", "ladder", "rung_capacity",
    "ChecklistReport", "emit_checklist",
    "DehbRun", "de_crossover", "de_mutate", "de_mutate_vectors", "de_select", "run_dehb",
    "GpFitError", "GpModel", "fit_gp", "suggest_candidate",
    "Journal", "JournalCorrupt", "JournalError", "space_digest",
    "CheckpointHandle", "EvaluationError", "Objective", "ObjectiveSpec", "Trial",
    "evaluate", "evaluate_multi_seed", "make_objective",
    "Member", "PbtRun", "Schedule", "exploit", "kernel_restart_check", "run_pbt", "warmstart",
    "IncumbentReport", "MethodSpec", "RankTable", "SeedPlan", "default_seed_plan",
    "rank_methods", "run_protocol",
    "RsRun", "run_rs",
    "GroupResult", "NoIncumbentError", "RunInterrupted", "TrialRunner",
    "ConfigSpace", "Configuration", "Hyperparameter", "SpaceError", "SpaceParseError",
    "categorical", "continuous", "from_unit", "integer", "log_continuous",
    "parse_space", "perturb", "render_space", "sample", "to_unit",
    "SweepSpec", "SweepSummary", "SweepTable", "run_sweep", "worst_vs_best_summary",
]
