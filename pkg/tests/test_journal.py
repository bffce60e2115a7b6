import json
import os
import subprocess
import sys

import pytest

from autotune.journal import (
    Journal,
    JournalCorrupt,
    JournalError,
    ReplayMismatch,
    space_digest,
)
from autotune.objectives import NoisySphere
from autotune.runner import TrialRunner
from autotune.space import ConfigSpace, Configuration, continuous

HEADER = {"method": "rs", "space_digest": "abc", "budget_runs": 4}


def make_journal(path=None):
    j = Journal.create(path)
    j.write_header(HEADER)
    return j


def test_append_assigns_sequence_numbers():
    j = make_journal()
    assert j.append({"t": "group", "group": 0, "spend": 1.0}) == 1
    assert j.append({"t": "group", "group": 1, "spend": 1.0}) == 2
    seqs = [r["seq"] for r in j.records]
    assert seqs == [1, 2]


def test_header_required_before_records():
    j = Journal.create(None)
    with pytest.raises(JournalError):
        j.append({"t": "group"})


def test_round_trip_to_disk(tmp_path):
    path = str(tmp_path / "journal.log")
    j = make_journal(path)
    j.append({"t": "trial", "cost": 0.1234567890123456789, "config": {"x": 1e-7}})
    j.close()
    loaded = Journal.load(path)
    assert loaded.header["method"] == "rs"
    rec = loaded.records[0]
    assert rec["cost"] == 0.1234567890123456789  # exact float round trip
    assert rec["config"]["x"] == 1e-7


def test_create_refuses_existing_file(tmp_path):
    path = str(tmp_path / "journal.log")
    make_journal(path).close()
    with pytest.raises(JournalError):
        Journal.create(path)


def test_crash_after_append_record_survives(tmp_path):
    """Kill the writing process immediately after append returns."""
    path = str(tmp_path / "journal.log")
    script = f"""
import os, sys
sys.path.insert(0, {json.dumps(os.getcwd())})
from autotune.journal import Journal
j = Journal.create({json.dumps(path)})
j.write_header({json.dumps(HEADER)})
for i in range(3):
    j.append({{"t": "group", "group": i, "spend": 1.0}})
os._exit(1)  # no graceful close, no flush beyond append's own
"""
    proc = subprocess.run([sys.executable, "-c", script], cwd="/root/pkg")
    assert proc.returncode == 1
    loaded = Journal.load(path)
    assert [r["group"] for r in loaded.records] == [0, 1, 2]


def test_torn_trailing_record_dropped_with_warning(tmp_path):
    path = str(tmp_path / "journal.log")
    j = make_journal(path)
    j.append({"t": "group", "group": 0, "spend": 1.0})
    j.close()
    with open(path, "a", encoding="utf-8") as fh:
        fh.write('{"t": "group", "seq": 2, "gro')  # torn write
    loaded = Journal.load(path)
    assert len(loaded.records) == 1
    assert any("torn" in w for w in loaded.warnings)


def test_mid_journal_corruption_is_hard_error(tmp_path):
    path = str(tmp_path / "journal.log")
    j = make_journal(path)
    j.append({"t": "group", "group": 0, "spend": 1.0})
    j.append({"t": "group", "group": 1, "spend": 1.0})
    j.close()
    lines = open(path).read().splitlines()
    lines[1] = lines[1][:10]  # corrupt a non-trailing record
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with pytest.raises(JournalCorrupt):
        Journal.load(path)


def test_sequence_break_is_corruption(tmp_path):
    path = str(tmp_path / "journal.log")
    j = make_journal(path)
    j.append({"t": "group", "group": 0, "spend": 1.0})
    j.close()
    with open(path, "a") as fh:
        fh.write(json.dumps({"t": "group", "seq": 7, "group": 1}) + "\n")
    with pytest.raises(JournalCorrupt, match="sequence"):
        Journal.load(path)


def test_replay_verifies_appends(tmp_path):
    path = str(tmp_path / "journal.log")
    j = make_journal(path)
    j.append({"t": "incumbent", "cost": 1.0, "config": {"x": 0.5}, "budget": 1.0})
    j.close()
    resumed = Journal.open_for_resume(path)
    resumed.write_header(HEADER)
    assert resumed.replaying
    seq = resumed.append({"t": "incumbent", "cost": 1.0, "config": {"x": 0.5}, "budget": 1.0})
    assert seq == 1
    assert not resumed.replaying
    # once replay is exhausted, appends go live with increasing seq
    assert resumed.append({"t": "complete", "spend": 1.0}) == 2
    resumed.close()


def test_replay_divergence_is_rejected(tmp_path):
    path = str(tmp_path / "journal.log")
    j = make_journal(path)
    j.append({"t": "incumbent", "cost": 1.0, "config": {"x": 0.5}, "budget": 1.0})
    j.close()
    resumed = Journal.open_for_resume(path)
    resumed.write_header(HEADER)
    with pytest.raises(ReplayMismatch):
        resumed.append({"t": "incumbent", "cost": 2.0, "config": {"x": 0.5}, "budget": 1.0})


def test_resume_header_mismatch_rejected(tmp_path):
    path = str(tmp_path / "journal.log")
    make_journal(path).close()
    resumed = Journal.open_for_resume(path)
    with pytest.raises(ReplayMismatch):
        resumed.write_header({**HEADER, "budget_runs": 99})


def test_space_digest_stability():
    text = "x: (0, 1)\n"
    assert space_digest(text) == space_digest(text)
    assert space_digest(text) != space_digest("x: (0, 2)\n")


# ---------------------------------------------------------------------------
# runner integration


def sphere_runner(journal=None, **kw):
    objective = NoisySphere(dimension=1, noise=0.0)
    return TrialRunner(objective, seeds=[0, 1], journal=journal, **kw), objective


def test_runner_groups_and_spend():
    runner, _ = sphere_runner()
    cfg = Configuration({"x0": 0.25})
    res = runner.evaluate_group(cfg, 1.0)
    assert not res.failed
    assert res.mean_cost == pytest.approx(0.0625)
    assert res.seeds == (0, 1)
    assert runner.journal.spend() == 1.0
    trials = runner.journal.of_type("trial")
    assert [t["seed"] for t in trials] == [0, 1]
    assert all(t["status"] == "done" for t in trials)


def test_runner_spend_counts_training_increment():
    runner, _ = sphere_runner()
    cfg = Configuration({"x0": 0.5})
    r1 = runner.evaluate_group(cfg, 0.25)
    r2 = runner.evaluate_group(cfg, 0.75, resume=r1.checkpoints)
    groups = runner.journal.of_type("group")
    assert groups[0]["spend"] == 0.25
    assert groups[1]["spend"] == pytest.approx(0.5)
    assert runner.journal.spend() == pytest.approx(0.75)


def test_runner_failure_becomes_inf_cost():
    from autotune.objectives import EvaluationError

    class Failing(NoisySphere):
        def evaluate(self, config, budget, seed, resume=None):
            if seed == 1:
                raise EvaluationError("scripted failure")
            return super().evaluate(config, budget, seed, resume=resume)

    runner = TrialRunner(Failing(dimension=1, noise=0.0), seeds=[0, 1])
    res = runner.evaluate_group(Configuration({"x0": 0.5}), 1.0)
    assert res.failed
    assert res.mean_cost is None
    assert res.cost == float("inf")
    statuses = [t["status"] for t in runner.journal.of_type("trial")]
    assert statuses == ["done", "failed"]


def test_runner_parallel_matches_sequential_results():
    runner_seq, _ = sphere_runner()
    runner_par, _ = sphere_runner(workers=4)
    cfgs = [Configuration({"x0": 0.1 * i}) for i in range(8)]
    reqs = [{"config": c, "budget": 1.0} for c in cfgs]
    seq = [r.mean_cost for r in runner_seq.evaluate_many(reqs)]
    par = [r.mean_cost for r in runner_par.evaluate_many(reqs)]
    assert seq == par


def test_runner_replay_skips_objective_calls(tmp_path):
    path = str(tmp_path / "journal.log")
    journal = Journal.create(path)
    journal.write_header(HEADER)
    runner, _ = sphere_runner(journal=journal)
    cfg = Configuration({"x0": 0.25})
    live = runner.evaluate_group(cfg, 1.0)
    journal.close()

    calls = {"n": 0}

    class Counting(NoisySphere):
        def evaluate(self, config, budget, seed, resume=None):
            calls["n"] += 1
            return super().evaluate(config, budget, seed, resume=resume)

    resumed = Journal.open_for_resume(path)
    resumed.write_header(HEADER)
    runner2 = TrialRunner(Counting(dimension=1, noise=0.0), seeds=[0, 1], journal=resumed)
    replayed = runner2.evaluate_group(cfg, 1.0)
    assert calls["n"] == 0
    assert replayed.per_seed_cost == live.per_seed_cost
    assert replayed.group == live.group
    # next group is live again
    fresh = runner2.evaluate_group(Configuration({"x0": 0.75}), 1.0)
    assert calls["n"] == 2
    assert fresh.group == live.group + 1
    resumed.close()


def test_runner_replay_rejects_key_mismatch(tmp_path):
    path = str(tmp_path / "journal.log")
    journal = Journal.create(path)
    journal.write_header(HEADER)
    runner, _ = sphere_runner(journal=journal)
    runner.evaluate_group(Configuration({"x0": 0.25}), 1.0)
    journal.close()

    resumed = Journal.open_for_resume(path)
    resumed.write_header(HEADER)
    runner2, _ = sphere_runner(journal=resumed)
    with pytest.raises(ReplayMismatch):
        runner2.evaluate_group(Configuration({"x0": 0.5}), 1.0)


def test_trailing_trials_without_group_are_trimmed(tmp_path):
    path = str(tmp_path / "journal.log")
    journal = Journal.create(path)
    journal.write_header(HEADER)
    runner, _ = sphere_runner(journal=journal)
    runner.evaluate_group(Configuration({"x0": 0.25}), 1.0)
    journal.append(
        {"t": "trial", "group": 1, "config": {"x0": 0.5}, "budget": 1.0, "seed": 0,
         "cost": 0.0, "status": "done", "error": "", "wall_time": 0.0, "ckpt": None,
         "frac": 1.0, "purpose": "tune"}
    )
    journal.close()
    resumed = Journal.open_for_resume(path)
    assert any("without a group" in w for w in resumed.warnings)
    assert resumed.records[-1]["t"] == "group"
    # on-disk file was truncated to match
    lines = open(path).read().splitlines()
    assert json.loads(lines[-1])["t"] == "group"
    resumed.close()
