"""Append-only run journal: line-delimited JSON, one record per line.

The first record is the header (method, space text + digest, objective spec,
seed plan, budget, rng seed). Every subsequent record carries a strictly
increasing ``seq``. Appends flush before returning, so a record whose append
returned survives a process kill.

A journal opened for resume replays its existing records: every append made
by the re-run is verified against the recorded one (ignoring wall time) and
consumed instead of written, so a resumed run continues exactly where the
interrupted one stopped. A truncated trailing line (torn write) is dropped
with a warning; corruption before the last record is a hard error.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

HEADER = "header"
TRIAL = "trial"
GROUP = "group"
EXPLOIT = "exploit"
EXPLORE = "explore"
INCUMBENT = "incumbent"
COMPLETE = "complete"

# fields excluded when comparing a replayed record to the recorded one
_VOLATILE = ("seq", "wall_time")


class JournalError(RuntimeError):
    pass


class JournalCorrupt(JournalError):
    """Unrecoverable journal damage (mid-file corruption, bad header)."""


class ReplayMismatch(JournalError):
    """A resumed run diverged from the recorded one."""


def space_digest(space_text: str) -> str:
    return hashlib.sha256(space_text.encode("utf-8")).hexdigest()


def _strip_volatile(record: dict) -> dict:
    return {k: v for k, v in record.items() if k not in _VOLATILE}


@dataclass
class Journal:
    """Single-writer journal; in-memory when ``path`` is None."""

    path: str | None = None
    header: dict | None = None
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    _pending: list = field(default_factory=list)  # replay queue (oldest first)
    _fh: object = None

    # -- construction -------------------------------------------------------

    @classmethod
    def create(cls, path: str | None = None) -> "Journal":
        j = cls(path=path)
        if path is not None:
            if os.path.exists(path):
                raise JournalError(f"journal already exists: {path}")
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            j._fh = open(path, "a", encoding="utf-8")
        return j

    @classmethod
    def load(cls, path: str) -> "Journal":
        """Read-only parse (for reports and exports)."""
        header, records, warnings = _parse_file(path)
        return cls(path=path, header=header, records=records, warnings=warnings)

    @classmethod
    def open_for_resume(cls, path: str) -> "Journal":
        header, records, warnings = _parse_file(path)
        records = _trim_torn_group(records, warnings)
        j = cls(path=path, header=header, records=list(records), warnings=warnings)
        j._pending = list(records)
        j._rewrite_if_trimmed(len(records))
        j._fh = open(path, "a", encoding="utf-8")
        return j

    def _rewrite_if_trimmed(self, kept: int) -> None:
        # If torn/incomplete trailing records were dropped, rewrite the file so
        # the on-disk journal matches the replayed state.
        if self.path is None:
            return
        with open(self.path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        want = 1 + kept  # header + records
        if len(lines) > want:
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines[:want]) + "\n")

    # -- writing ------------------------------------------------------------

    def write_header(self, header: dict) -> None:
        header = json.loads(json.dumps({**header, "t": HEADER}))
        if self.header is not None:
            if _strip_volatile(header) != _strip_volatile(self.header):
                raise ReplayMismatch("resumed run has a different header")
            return
        self.header = header
        self._write_line(header)

    @property
    def replaying(self) -> bool:
        return bool(self._pending)

    def append(self, record: dict) -> int:
        """Append (or verify against the replay queue); returns the seq number."""
        if self.header is None:
            raise JournalError("header must be written before records")
        record = json.loads(json.dumps(record))  # canonical types, exact floats
        if self._pending:
            expected = self._pending.pop(0)
            if _strip_volatile(expected) != _strip_volatile({**record, "seq": 0}):
                raise ReplayMismatch(
                    f"resumed run diverged: expected {expected.get('t')} "
                    f"record {expected}, got {record}"
                )
            return expected["seq"]
        seq = (self.records[-1]["seq"] + 1) if self.records else 1
        record["seq"] = seq
        self.records.append(record)
        self._write_line(record)
        return seq

    def take_group_if_pending(self, key: dict) -> list[dict] | None:
        """During replay, consume and return one recorded evaluation group.

        ``key`` holds config/budget/seeds/purpose; the queued trial records
        plus their group record must match or the resume is rejected.
        """
        if not self._pending:
            return None
        key = json.loads(json.dumps(key))
        taken = []
        for i, rec in enumerate(self._pending):
            taken.append(rec)
            if rec["t"] == GROUP:
                break
            if rec["t"] != TRIAL:
                raise ReplayMismatch(
                    f"resumed run diverged: expected trial records, found {rec['t']!r}"
                )
        else:
            raise ReplayMismatch("replay queue ends inside an evaluation group")
        group = taken[-1]
        for k, v in key.items():
            if group.get(k) != v:
                raise ReplayMismatch(
                    f"resumed run diverged on group {group.get('group')}: "
                    f"{k}={group.get(k)!r} recorded vs {v!r} requested"
                )
        del self._pending[: len(taken)]
        return taken

    def _write_line(self, record: dict) -> None:
        if self._fh is not None:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # -- queries -------------------------------------------------------------

    def of_type(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["t"] == kind]

    def spend(self, purposes: tuple[str, ...] = ("tune", "warmstart")) -> float:
        return float(
            sum(r["spend"] for r in self.of_type(GROUP) if r.get("purpose") in purposes)
        )

    def final_incumbent(self) -> dict | None:
        incs = self.of_type(INCUMBENT)
        return incs[-1] if incs else None

    def is_complete(self) -> bool:
        return bool(self.of_type(COMPLETE))


def _parse_file(path: str):
    if not os.path.exists(path):
        raise JournalError(f"no journal at {path}")
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = fh.read().split("\n")
    # Ignore a trailing empty chunk from the final newline.
    while raw_lines and raw_lines[-1] == "":
        raw_lines.pop()
    warnings: list[str] = []
    parsed: list[dict] = []
    for i, line in enumerate(raw_lines):
        if not line.strip():
            raise JournalCorrupt(f"{path}: blank line {i + 1} inside journal")
        try:
            parsed.append(json.loads(line))
        except json.JSONDecodeError as err:
            if i == len(raw_lines) - 1:
                warnings.append(f"dropped torn trailing record at line {i + 1}")
                break
            raise JournalCorrupt(f"{path}: corrupt record at line {i + 1}") from err
    if not parsed:
        raise JournalCorrupt(f"{path}: empty journal")
    header = parsed[0]
    if header.get("t") != HEADER:
        raise JournalCorrupt(f"{path}: first record is not a header")
    records = parsed[1:]
    last = 0
    for r in records:
        if r.get("t") == HEADER:
            raise JournalCorrupt(f"{path}: duplicate header")
        seq = r.get("seq")
        if not isinstance(seq, int) or seq != last + 1:
            raise JournalCorrupt(f"{path}: sequence break at record {seq!r}")
        last = seq
    return header, records, warnings


def _trim_torn_group(records: list[dict], warnings: list[str]) -> list[dict]:
    """Drop trailing trial records whose group record never landed."""
    kept = list(records)
    trimmed = 0
    while kept and kept[-1]["t"] == TRIAL:
        kept.pop()
        trimmed += 1
    if trimmed:
        warnings.append(f"dropped {trimmed} trailing trial record(s) without a group")
    return kept
