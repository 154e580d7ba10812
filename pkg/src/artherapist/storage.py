"""Durable append-only event segments plus versioned document storage.

Everything lives under one store root directory (no external database):

    <root>/docs/<doc_type>/<quoted doc_id>.json    versioned documents
    <root>/events/<quoted session_id>.log          one event per line
    <root>/events/<quoted session_id>.meta         segment header, key=value
    <root>/progress/<quoted patient_id>.log        per-patient history lines

The event log uses one structured-text record per line with a fixed
field order (session_id, seq, at, kind, then kind-specific fields);
values are percent-encoded so the format stays greppable, append-only
friendly, and diff-able. The exact grammar is documented in
docs/STORAGE_FORMAT.md and is stable across versions. Appends are
flushed and fsynced before they are acknowledged.

Timestamps inside event records are seconds since session start; the
wall-clock start is stored once in the segment header, and the total
session time is added to the header when the segment seals. Event
records carry no free-text personal data, patient ids are opaque, and a
store flag can redact the player position from persisted responses.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable
from urllib.parse import quote, unquote

from . import domain
from .engine import (
    ReplayError,
    SessionEvent,
    event_from_dict,
    event_to_dict,
)

DOC_TYPES = ("patient", "doctor", "game", "program", "treatment")


class StorageError(Exception):
    """Base class for storage failures."""


class NotFound(StorageError):
    pass


class DuplicateId(StorageError):
    pass


class VersionConflict(StorageError):
    def __init__(self, message: str, current_version: int):
        super().__init__(message)
        self.current_version = current_version


class SealedSegment(StorageError):
    pass


class SequenceGap(StorageError):
    pass


class CorruptLog(StorageError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class DocumentInvalid(StorageError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


# ---------------------------------------------------------------------------
# line codec
# ---------------------------------------------------------------------------


def _enc(value: str) -> str:
    return quote(value, safe="")


def _num(value: float | int) -> str:
    return repr(value)


def _placements_field(placements: list[dict]) -> str:
    groups = []
    for p in placements:
        pos = p["position"]
        groups.append(
            _enc(p["object_id"])
            + ":" + _num(pos[0]) + "," + _num(pos[1]) + "," + _num(pos[2])
            + ":" + _num(p["appearance_offset"])
        )
    return ";".join(groups)


def _parse_placements(raw: str) -> list[dict]:
    placements = []
    for group in raw.split(";"):
        oid, pos, offset = group.split(":")
        x, y, z = pos.split(",")
        placements.append(
            {
                "object_id": unquote(oid),
                "position": [float(x), float(y), float(z)],
                "appearance_offset": float(offset),
            }
        )
    return placements


def _position_field(position: list[float] | None) -> str:
    if position is None:
        return "-"
    return ",".join(_num(v) for v in position)


def _parse_position(raw: str) -> list[float] | None:
    if raw == "-":
        return None
    x, y, z = raw.split(",")
    return [float(x), float(y), float(z)]


#: kind-specific fields, in their fixed line order
_KIND_FIELDS: dict[str, list[str]] = {
    "session_started": ["config_digest"],
    "try_presented": ["try_index", "target_object_id", "placements"],
    "response_recorded": ["try_index", "object_id", "response_time", "player_position"],
    "try_timed_out": ["try_index"],
    "session_aborted": ["after_try_index"],
    "session_completed": [],
}

_INT_FIELDS = {"try_index", "after_try_index", "seq"}
_FLOAT_FIELDS = {"at", "response_time"}


def event_to_line(event: SessionEvent, *, redact_player_position: bool = False) -> str:
    """Serialize one event into its line form (no trailing newline)."""
    d = event_to_dict(event)
    parts = [
        f"session_id={_enc(d['session_id'])}",
        f"seq={d['seq']}",
        f"at={_num(d['at'])}",
        f"kind={d['kind']}",
    ]
    for name in _KIND_FIELDS[d["kind"]]:
        value = d[name]
        if name == "placements":
            parts.append(f"placements={_placements_field(value)}")
        elif name == "player_position":
            if redact_player_position:
                value = None
            parts.append(f"player_position={_position_field(value)}")
        elif name in _INT_FIELDS:
            parts.append(f"{name}={value}")
        elif name in _FLOAT_FIELDS:
            parts.append(f"{name}={_num(value)}")
        else:
            parts.append(f"{name}={_enc(value)}")
    return " ".join(parts)


def event_from_line(line: str) -> SessionEvent:
    """Parse one line back into an event; raises ValueError on bad syntax."""
    raw: dict[str, Any] = {}
    for part in line.split(" "):
        key, sep, value = part.partition("=")
        if not sep or not key:
            raise ValueError(f"malformed field '{part}'")
        raw[key] = value
    try:
        kind = raw["kind"]
        if kind not in _KIND_FIELDS:
            raise ValueError(f"unknown kind '{kind}'")
        d: dict[str, Any] = {
            "session_id": unquote(raw["session_id"]),
            "seq": int(raw["seq"]),
            "at": float(raw["at"]),
            "kind": kind,
        }
        for name in _KIND_FIELDS[kind]:
            value = raw[name]
            if name == "placements":
                d[name] = _parse_placements(value)
            elif name == "player_position":
                d[name] = _parse_position(value)
            elif name in _INT_FIELDS:
                d[name] = int(value)
            elif name in _FLOAT_FIELDS:
                d[name] = float(value)
            else:
                d[name] = unquote(value)
    except (KeyError, ValueError, IndexError) as exc:
        raise ValueError(str(exc)) from None
    try:
        return event_from_dict(d)
    except ReplayError as exc:
        raise ValueError(str(exc)) from None


# ---------------------------------------------------------------------------
# segment metadata
# ---------------------------------------------------------------------------


@dataclass
class SessionMeta:
    """Header data for one event segment."""

    session_id: str
    patient_id: str
    program_id: str
    level_number: int
    try_time: float
    planned_tries: int
    max_time: float
    wall_start: float
    seed: int
    sealed: bool = False
    gt: float | None = None

    def to_pairs(self) -> list[tuple[str, str]]:
        return [
            ("session_id", _enc(self.session_id)),
            ("patient_id", _enc(self.patient_id)),
            ("program_id", _enc(self.program_id)),
            ("level_number", str(self.level_number)),
            ("try_time", _num(self.try_time)),
            ("planned_tries", str(self.planned_tries)),
            ("max_time", _num(self.max_time)),
            ("wall_start", _num(self.wall_start)),
            ("seed", str(self.seed)),
        ]


@dataclass
class ProgressRecord:
    """One finalized session (or doctor override) in a patient's history."""

    ordinal: int
    session_id: str
    wall_time: float
    level_before: int
    level_after: int
    decision: str
    pi: float | None
    threshold: float | None
    reason: str

    def to_line(self) -> str:
        pi = "-" if self.pi is None else _num(self.pi)
        threshold = "-" if self.threshold is None else _num(self.threshold)
        return (
            f"ordinal={self.ordinal} session_id={_enc(self.session_id)} "
            f"wall_time={_num(self.wall_time)} level_before={self.level_before} "
            f"level_after={self.level_after} decision={self.decision} "
            f"pi={pi} threshold={threshold} reason={_enc(self.reason)}"
        )

    @classmethod
    def from_line(cls, line: str) -> "ProgressRecord":
        raw = dict(part.partition("=")[::2] for part in line.split(" "))
        return cls(
            ordinal=int(raw["ordinal"]),
            session_id=unquote(raw["session_id"]),
            wall_time=float(raw["wall_time"]),
            level_before=int(raw["level_before"]),
            level_after=int(raw["level_after"]),
            decision=raw["decision"],
            pi=None if raw["pi"] == "-" else float(raw["pi"]),
            threshold=None if raw["threshold"] == "-" else float(raw["threshold"]),
            reason=unquote(raw["reason"]),
        )


@dataclass(frozen=True)
class Envelope:
    doc_type: str
    doc_id: str
    version: int
    body: dict

    def to_dict(self) -> dict:
        return {
            "doc_type": self.doc_type,
            "doc_id": self.doc_id,
            "version": self.version,
            "body": self.body,
        }


# ---------------------------------------------------------------------------
# store
# ---------------------------------------------------------------------------


def _fsync_write(path: Path, data: str) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(data)
        handle.flush()
        os.fsync(handle.fileno())


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(data)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(tmp, path)


class Store:
    """Filesystem-backed store; single writer per session segment, many
    readers, optimistic versioning for documents."""

    def __init__(self, root: str | Path, *, redact_player_position: bool = False):
        self.root = Path(root)
        self.redact_player_position = redact_player_position
        self._lock = threading.RLock()
        self._next_seq: dict[str, int] = {}
        for sub in ("docs", "events", "progress"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

        # body validators per doc type; cross-reference checks resolve
        # against documents already in this store
        self._validators: dict[str, Callable[[Any], Any]] = {
            "patient": domain.validate_patient_profile,
            "doctor": domain.validate_doctor_profile,
            "game": domain.validate_game_definition,
            "program": self._validate_program_body,
            "treatment": self._validate_treatment_body,
        }

    # -- paths ----------------------------------------------------------

    def _doc_path(self, doc_type: str, doc_id: str) -> Path:
        return self.root / "docs" / doc_type / f"{quote(doc_id, safe='')}.json"

    def _log_path(self, session_id: str) -> Path:
        return self.root / "events" / f"{quote(session_id, safe='')}.log"

    def _meta_path(self, session_id: str) -> Path:
        return self.root / "events" / f"{quote(session_id, safe='')}.meta"

    def _progress_path(self, patient_id: str) -> Path:
        return self.root / "progress" / f"{quote(patient_id, safe='')}.log"

    # -- documents --------------------------------------------------------

    def _validate_program_body(self, body: Any) -> domain.TreatmentProgram:
        program = domain.validate_treatment_program(body)
        games = {gid: self.load_game(gid) for gid in self.list_documents("game")}
        errors = domain.cross_validate_program(program, games)
        if errors:
            raise domain.ValidationError(errors)
        return program

    def _validate_treatment_body(self, body: Any) -> domain.Treatment:
        return domain.validate_treatment(
            body,
            patients={pid: self.load_patient(pid) for pid in self.list_documents("patient")},
            doctors={did: self.load_doctor(did) for did in self.list_documents("doctor")},
            games={gid: self.load_game(gid) for gid in self.list_documents("game")},
            programs={rid: self.load_program(rid) for rid in self.list_documents("program")},
        )

    def put_document(self, doc_type: str, doc_id: str, body: dict, expected_version: int) -> int:
        """Create (expected_version 0) or update a document.

        The body must pass domain validation for its type; a stale
        expected version is rejected so concurrent writers can never
        silently overwrite each other.
        """
        if doc_type not in DOC_TYPES:
            raise DocumentInvalid([f"unknown doc_type '{doc_type}'"])
        with self._lock:
            try:
                self._validators[doc_type](body)
            except domain.ValidationError as exc:
                raise DocumentInvalid(exc.errors) from None
            path = self._doc_path(doc_type, doc_id)
            current = 0
            if path.exists():
                current = json.loads(path.read_text(encoding="utf-8"))["version"]
            if current == 0 and expected_version != 0:
                raise NotFound(f"{doc_type} '{doc_id}' does not exist")
            if expected_version != current:
                raise VersionConflict(
                    f"{doc_type} '{doc_id}' is at version {current}, expected {expected_version}",
                    current_version=current,
                )
            version = current + 1
            path.parent.mkdir(parents=True, exist_ok=True)
            envelope = Envelope(doc_type, doc_id, version, body)
            _atomic_write(path, json.dumps(envelope.to_dict(), indent=2, sort_keys=True) + "\n")
            return version

    def create_document(self, doc_type: str, doc_id: str, body: dict) -> int:
        """put_document with a duplicate-id error instead of a version one."""
        with self._lock:
            if self._doc_path(doc_type, doc_id).exists():
                raise DuplicateId(f"{doc_type} '{doc_id}' already exists")
            return self.put_document(doc_type, doc_id, body, expected_version=0)

    def get_document(self, doc_type: str, doc_id: str) -> Envelope:
        path = self._doc_path(doc_type, doc_id)
        if not path.exists():
            raise NotFound(f"{doc_type} '{doc_id}' not found")
        raw = json.loads(path.read_text(encoding="utf-8"))
        return Envelope(raw["doc_type"], raw["doc_id"], raw["version"], raw["body"])

    def list_documents(self, doc_type: str) -> list[str]:
        folder = self.root / "docs" / doc_type
        if not folder.is_dir():
            return []
        return sorted(unquote(p.name[: -len(".json")]) for p in folder.glob("*.json"))

    # typed loaders for internal consumers
    def load_patient(self, doc_id: str) -> domain.PatientProfile:
        return domain.validate_patient_profile(self.get_document("patient", doc_id).body)

    def load_doctor(self, doc_id: str) -> domain.DoctorProfile:
        return domain.validate_doctor_profile(self.get_document("doctor", doc_id).body)

    def load_game(self, doc_id: str) -> domain.GameDefinition:
        return domain.validate_game_definition(self.get_document("game", doc_id).body)

    def load_program(self, doc_id: str) -> domain.TreatmentProgram:
        return domain.validate_treatment_program(self.get_document("program", doc_id).body)

    # -- event segments ---------------------------------------------------

    def create_segment(self, meta: SessionMeta) -> None:
        with self._lock:
            meta_path = self._meta_path(meta.session_id)
            if meta_path.exists():
                raise DuplicateId(f"session '{meta.session_id}' already exists")
            lines = "".join(f"{k}={v}\n" for k, v in meta.to_pairs())
            _fsync_write(meta_path, lines)
            self._next_seq[meta.session_id] = 0

    def session_exists(self, session_id: str) -> bool:
        return self._meta_path(session_id).exists()

    def list_sessions(self) -> list[str]:
        return sorted(
            unquote(p.name[: -len(".meta")])
            for p in (self.root / "events").glob("*.meta")
        )

    def session_meta(self, session_id: str) -> SessionMeta:
        path = self._meta_path(session_id)
        if not path.exists():
            raise NotFound(f"session '{session_id}' not found")
        raw: dict[str, str] = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition("=")
            raw[key] = value  # last value wins; seal appends
        meta = SessionMeta(
            session_id=unquote(raw["session_id"]),
            patient_id=unquote(raw["patient_id"]),
            program_id=unquote(raw["program_id"]),
            level_number=int(raw["level_number"]),
            try_time=float(raw["try_time"]),
            planned_tries=int(raw["planned_tries"]),
            max_time=float(raw["max_time"]),
            wall_start=float(raw["wall_start"]),
            seed=int(raw["seed"]),
        )
        if raw.get("sealed") == "true":
            meta.sealed = True
            meta.gt = float(raw["gt"])
        return meta

    def is_sealed(self, session_id: str) -> bool:
        return self.session_meta(session_id).sealed

    def _stored_next_seq(self, session_id: str) -> int:
        log_path = self._log_path(session_id)
        if not log_path.exists():
            return 0
        count = 0
        with open(log_path, "r", encoding="utf-8") as handle:
            for count, _ in enumerate(handle, start=1):
                pass
        return count

    def append_event(self, session_id: str, event: SessionEvent) -> int:
        """Append one event; durable before return.

        The event's seq must be exactly the next in the segment and the
        segment must not be sealed. Appending the terminal event seals
        the segment and records the total session time in the header.
        """
        with self._lock:
            meta = self.session_meta(session_id)  # NotFound if unregistered
            if meta.sealed:
                raise SealedSegment(f"session '{session_id}' is sealed")
            expected = self._next_seq.get(session_id)
            if expected is None:
                expected = self._stored_next_seq(session_id)
            if event.seq != expected:
                raise SequenceGap(
                    f"session '{session_id}': expected seq {expected}, got {event.seq}"
                )
            line = event_to_line(event, redact_player_position=self.redact_player_position)
            _fsync_write(self._log_path(session_id), line + "\n")
            self._next_seq[session_id] = expected + 1
            if event.is_terminal:
                _fsync_write(self._meta_path(session_id), f"sealed=true\ngt={_num(event.at)}\n")
            return event.seq

    def load_session_events(self, session_id: str) -> list[SessionEvent]:
        """Exactly the appended records, in order; any unparsable or
        truncated line is reported with its line number."""
        log_path = self._log_path(session_id)
        if not self.session_exists(session_id):
            raise NotFound(f"session '{session_id}' not found")
        if not log_path.exists():
            return []
        data = log_path.read_text(encoding="utf-8")
        events = []
        if data and not data.endswith("\n"):
            # a complete append always ends with a newline
            raise CorruptLog("truncated record", line_number=data.count("\n") + 1)
        for number, line in enumerate(data.splitlines(), start=1):
            try:
                events.append(event_from_line(line))
            except ValueError as exc:
                raise CorruptLog(str(exc), line_number=number) from None
        return events

    # -- progress history ---------------------------------------------------

    def append_progress(self, patient_id: str, record: ProgressRecord) -> None:
        with self._lock:
            _fsync_write(self._progress_path(patient_id), record.to_line() + "\n")

    def load_progress(self, patient_id: str) -> list[ProgressRecord]:
        path = self._progress_path(patient_id)
        if not path.exists():
            return []
        return [
            ProgressRecord.from_line(line)
            for line in path.read_text(encoding="utf-8").splitlines()
        ]

    def next_progress_ordinal(self, patient_id: str) -> int:
        records = self.load_progress(patient_id)
        return records[-1].ordinal + 1 if records else 1

    def sessions_at_level(self, patient_id: str, level: int) -> int:
        """Trailing run of history records whose starting level equals
        the given level; the session being finalized is not counted."""
        count = 0
        for record in reversed(self.load_progress(patient_id)):
            if record.level_before != level:
                break
            count += 1
        return count
