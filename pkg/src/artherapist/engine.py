"""Deterministic game-session state machine and event-log replay.

One session is a single-writer state machine driven by timed commands
(respond, timeout, abort). Time is always supplied by the caller in
seconds since session start; the engine never reads a wall clock, which
keeps runs reproducible and lets the simulator and tests drive time.
Every state change emits an append-only SessionEvent; replay()
reconstructs the tally purely from the log and is the integrity oracle
for everything persisted.

Randomized choices (target pick, distractor set, placement positions,
presentation order) are drawn from one seeded stream per session, split
per try, so identical configs produce byte-identical logs.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Union

from .domain import PatientProfile, ProgressionPolicy, SessionConfig, Vec3
from .metrics import SessionMetrics, SessionTally, TryOutcome, compute_session_metrics
from .rng import RandomStream

#: tolerance when cross-checking a recorded response_time against event times
TIME_CONSISTENCY_TOL = 1e-9


class SessionStateError(Exception):
    """A command that the session's current phase does not allow."""


class ReplayError(Exception):
    """An event log that violates the session log invariants."""


class EngineInvariantError(Exception):
    """Live counters diverged from replay; nothing may be persisted."""


class Phase(str, enum.Enum):
    IDLE = "idle"
    PRESENTING = "presenting"
    AWAITING_RESPONSE = "awaiting_response"
    FINISHED = "finished"


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Placement:
    """One object shown during a try: where it sits and when it appears."""

    object_id: str
    position: Vec3
    appearance_offset: float


@dataclass(frozen=True)
class SessionStarted:
    KIND = "session_started"
    config_digest: str


@dataclass(frozen=True)
class TryPresented:
    KIND = "try_presented"
    try_index: int
    target_object_id: str
    placements: tuple[Placement, ...]


@dataclass(frozen=True)
class ResponseRecorded:
    KIND = "response_recorded"
    try_index: int
    object_id: str
    response_time: float
    player_position: Vec3 | None


@dataclass(frozen=True)
class TryTimedOut:
    KIND = "try_timed_out"
    try_index: int


@dataclass(frozen=True)
class SessionAborted:
    KIND = "session_aborted"
    after_try_index: int  # last resolved try, -1 if none


@dataclass(frozen=True)
class SessionCompleted:
    KIND = "session_completed"


EventBody = Union[
    SessionStarted, TryPresented, ResponseRecorded, TryTimedOut, SessionAborted, SessionCompleted
]

TERMINAL_KINDS = (SessionAborted.KIND, SessionCompleted.KIND)

_BODY_TYPES = {
    cls.KIND: cls
    for cls in (SessionStarted, TryPresented, ResponseRecorded, TryTimedOut, SessionAborted, SessionCompleted)
}


@dataclass(frozen=True)
class SessionEvent:
    session_id: str
    seq: int
    at: float  # seconds since session start, non-decreasing
    body: EventBody

    @property
    def kind(self) -> str:
        return self.body.KIND

    @property
    def is_terminal(self) -> bool:
        return self.kind in TERMINAL_KINDS


def event_to_dict(event: SessionEvent) -> dict:
    """Canonical primitive form, shared by the wire API and the line codec."""
    d: dict = {"session_id": event.session_id, "seq": event.seq, "at": event.at, "kind": event.kind}
    body = event.body
    if isinstance(body, SessionStarted):
        d["config_digest"] = body.config_digest
    elif isinstance(body, TryPresented):
        d["try_index"] = body.try_index
        d["target_object_id"] = body.target_object_id
        d["placements"] = [
            {
                "object_id": p.object_id,
                "position": list(p.position),
                "appearance_offset": p.appearance_offset,
            }
            for p in body.placements
        ]
    elif isinstance(body, ResponseRecorded):
        d["try_index"] = body.try_index
        d["object_id"] = body.object_id
        d["response_time"] = body.response_time
        d["player_position"] = list(body.player_position) if body.player_position else None
    elif isinstance(body, TryTimedOut):
        d["try_index"] = body.try_index
    elif isinstance(body, SessionAborted):
        d["after_try_index"] = body.after_try_index
    return d


def _vec3(value, label: str) -> Vec3:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ReplayError(f"{label}: expected a 3-vector")
    try:
        return (float(value[0]), float(value[1]), float(value[2]))
    except (TypeError, ValueError):
        raise ReplayError(f"{label}: expected numeric components") from None


def event_from_dict(raw: dict) -> SessionEvent:
    """Parse the canonical primitive form; raises ReplayError on any
    structural problem."""
    if not isinstance(raw, dict):
        raise ReplayError("event: expected a mapping")
    try:
        session_id = raw["session_id"]
        seq = raw["seq"]
        at = raw["at"]
        kind = raw["kind"]
    except KeyError as exc:
        raise ReplayError(f"event: missing field {exc.args[0]}") from None
    if not isinstance(session_id, str) or not session_id:
        raise ReplayError("event: session_id must be a non-empty string")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise ReplayError("event: seq must be an integer >= 0")
    if isinstance(at, bool) or not isinstance(at, (int, float)) or not math.isfinite(at):
        raise ReplayError("event: at must be a finite number")
    if kind not in _BODY_TYPES:
        raise ReplayError(f"event: unknown kind '{kind}'")

    def need(key, types):
        value = raw.get(key)
        if isinstance(value, bool) or not isinstance(value, types):
            raise ReplayError(f"event[{kind}]: bad field '{key}'")
        return value

    body: EventBody
    if kind == SessionStarted.KIND:
        body = SessionStarted(need("config_digest", str))
    elif kind == TryPresented.KIND:
        placements_raw = raw.get("placements")
        if not isinstance(placements_raw, list) or not placements_raw:
            raise ReplayError("event[try_presented]: placements must be a non-empty list")
        placements = []
        for p in placements_raw:
            if not isinstance(p, dict):
                raise ReplayError("event[try_presented]: placement must be a mapping")
            oid = p.get("object_id")
            if not isinstance(oid, str) or not oid:
                raise ReplayError("event[try_presented]: placement object_id missing")
            offset = p.get("appearance_offset")
            if isinstance(offset, bool) or not isinstance(offset, (int, float)):
                raise ReplayError("event[try_presented]: bad appearance_offset")
            placements.append(Placement(oid, _vec3(p.get("position"), "placement.position"), float(offset)))
        body = TryPresented(need("try_index", int), need("target_object_id", str), tuple(placements))
    elif kind == ResponseRecorded.KIND:
        pos = raw.get("player_position")
        body = ResponseRecorded(
            need("try_index", int),
            need("object_id", str),
            float(need("response_time", (int, float))),
            None if pos is None else _vec3(pos, "player_position"),
        )
    elif kind == TryTimedOut.KIND:
        body = TryTimedOut(need("try_index", int))
    elif kind == SessionAborted.KIND:
        body = SessionAborted(need("after_try_index", int))
    else:
        body = SessionCompleted()
    return SessionEvent(session_id=session_id, seq=seq, at=float(at), body=body)


def config_digest(config: SessionConfig) -> str:
    """Stable fingerprint of a session configuration."""
    payload = {
        "session_id": config.session_id,
        "patient_id": config.patient_id,
        "level_number": config.level_number,
        "planned_tries": config.planned_tries,
        "try_time": config.try_time,
        "max_time": config.max_time,
        "objects": [o.object_id for o in config.object_pool],
        "distractors_per_try": config.distractors_per_try,
        "seed": config.seed,
        "appearance_interval": config.appearance_interval,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# live session
# ---------------------------------------------------------------------------


class GameSession:
    """Single-writer state machine for one session.

    Commands mutate the session and return the newly emitted events; the
    full log accumulates in .events. Distinct sessions are independent
    and may run fully in parallel.
    """

    def __init__(self, config: SessionConfig):
        errors = config.validate()
        if errors:
            raise SessionStateError("invalid config: " + "; ".join(errors))
        self.config = config
        self.phase = Phase.IDLE
        self.current_try = -1
        self.clock = 0.0
        self.correct = 0
        self.omission_errors = 0
        self.commission_errors = 0
        self.uncompleted = 0
        self.crt_list: list[float] = []
        self.current_location: Vec3 | None = None
        self.events: list[SessionEvent] = []
        self._stream = RandomStream(config.seed)
        self._seq = 0
        self._try_start = 0.0
        self._current: TryPresented | None = None

    # -- introspection -------------------------------------------------

    @property
    def is_finished(self) -> bool:
        return self.phase == Phase.FINISHED

    @property
    def resolved_tries(self) -> int:
        return self.correct + self.omission_errors + self.commission_errors

    @property
    def current_presented(self) -> TryPresented | None:
        return self._current

    @property
    def try_start(self) -> float:
        return self._try_start

    @property
    def try_deadline(self) -> float:
        return self._try_start + self.config.try_time

    # -- emission ------------------------------------------------------

    def _emit(self, at: float, body: EventBody) -> SessionEvent:
        event = SessionEvent(self.config.session_id, self._seq, at, body)
        self._seq += 1
        self.events.append(event)
        return event

    def _present_try(self, index: int, at: float) -> SessionEvent:
        self.phase = Phase.PRESENTING
        stream = self._stream.split(f"try/{index}")
        pool = list(self.config.object_pool)
        target = stream.choice(pool)
        distractors = stream.sample(
            [o for o in pool if o.object_id != target.object_id],
            self.config.distractors_per_try,
        )
        order = [target] + distractors
        stream.shuffle(order)
        placements = []
        for slot, obj in enumerate(order):
            lo, hi = obj.placement_region.min_corner, obj.placement_region.max_corner
            position = (
                stream.uniform(lo[0], hi[0]),
                stream.uniform(lo[1], hi[1]),
                stream.uniform(lo[2], hi[2]),
            )
            placements.append(
                Placement(obj.object_id, position, slot * self.config.appearance_interval)
            )
        body = TryPresented(index, target.object_id, tuple(placements))
        self.current_try = index
        self._try_start = at
        self._current = body
        event = self._emit(at, body)
        self.phase = Phase.AWAITING_RESPONSE
        return event

    def _advance_or_complete(self, at: float) -> list[SessionEvent]:
        self._current = None
        if self.current_try + 1 >= self.config.planned_tries:
            self.phase = Phase.FINISHED
            return [self._emit(at, SessionCompleted())]
        return [self._present_try(self.current_try + 1, at)]

    # -- commands --------------------------------------------------------

    def start(self) -> list[SessionEvent]:
        """Emit the start record and present try 0 at time zero."""
        if self.phase != Phase.IDLE:
            raise SessionStateError("session already started")
        started = self._emit(0.0, SessionStarted(config_digest(self.config)))
        presented = self._present_try(0, 0.0)
        return [started, presented]

    def record_response(
        self, object_id: str, at: float, player_position: Vec3 | None = None
    ) -> tuple[list[SessionEvent], TryOutcome]:
        """Classify a response to the current try.

        The response window is (try start, try start + try budget]; a
        response exactly at the deadline still counts. Later than that
        the caller must deliver a timeout instead.
        """
        if self.phase != Phase.AWAITING_RESPONSE:
            raise SessionStateError("response while not awaiting one")
        if at < self.clock:
            raise SessionStateError("time must not run backwards")
        if at > self.try_deadline:
            raise SessionStateError(
                "response after the try deadline; deliver a timeout instead"
            )
        response_time = at - self._try_start
        if response_time <= 0.0:
            raise SessionStateError("response must come after the presentation")
        # at == deadline can round the difference a hair past the budget
        response_time = min(response_time, self.config.try_time)
        presented_ids = {p.object_id for p in self._current.placements}
        if object_id not in presented_ids:
            raise SessionStateError(f"object '{object_id}' was not presented this try")

        if object_id == self._current.target_object_id:
            outcome = TryOutcome.CORRECT
            self.correct += 1
            self.crt_list.append(response_time)
        else:
            outcome = TryOutcome.COMMISSION_ERROR
            self.commission_errors += 1
        self.clock = at
        self.current_location = player_position
        events = [
            self._emit(
                at,
                ResponseRecorded(self.current_try, object_id, response_time, player_position),
            )
        ]
        events.extend(self._advance_or_complete(at))
        return events, outcome

    def deliver_timeout(self, at: float) -> list[SessionEvent]:
        """Resolve the current try as an omission; only legal at or after
        the try deadline."""
        if self.phase != Phase.AWAITING_RESPONSE:
            raise SessionStateError("timeout while not awaiting a response")
        if at < self.try_deadline:
            raise SessionStateError("timeout before the try deadline")
        self.omission_errors += 1
        self.clock = at
        events = [self._emit(at, TryTimedOut(self.current_try))]
        events.extend(self._advance_or_complete(at))
        return events

    def abort(self, at: float) -> list[SessionEvent]:
        """Stop the session; every unresolved try counts as uncompleted."""
        if self.phase == Phase.FINISHED:
            raise SessionStateError("session already finished")
        if self.phase == Phase.IDLE:
            raise SessionStateError("session not started")
        if at < self.clock:
            raise SessionStateError("time must not run backwards")
        self.uncompleted = self.config.planned_tries - self.resolved_tries
        self.clock = at
        self._current = None
        self.phase = Phase.FINISHED
        return [self._emit(at, SessionAborted(self.resolved_tries - 1))]

    def live_tally(self) -> SessionTally:
        """Tally from the live counters; only meaningful once finished."""
        if not self.is_finished:
            raise SessionStateError("session still in progress")
        return SessionTally(
            planned_tries=self.config.planned_tries,
            correct=self.correct,
            omission_errors=self.omission_errors,
            commission_errors=self.commission_errors,
            uncompleted=self.uncompleted,
            crt_list=tuple(self.crt_list),
            try_time=self.config.try_time,
            elapsed=self.events[-1].at,
        )


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------


def validate_event_stream(
    events: list[SessionEvent],
    try_time: float,
    planned_tries: int,
    *,
    allow_open: bool = False,
) -> None:
    """Check the log invariants without tallying.

    With allow_open=True a stream may stop before its terminal event
    (used to vet ingested prefixes); all other rules still apply.
    """
    if not events:
        if allow_open:
            return
        raise ReplayError("empty event log")

    session_id = events[0].session_id
    last_at = 0.0
    terminal_seen = False
    presented = -1  # highest try index presented
    open_try: TryPresented | None = None
    open_try_at = 0.0
    resolved = 0

    for i, event in enumerate(events):
        if event.session_id != session_id:
            raise ReplayError(f"event {i}: session_id mismatch")
        if event.seq != i:
            raise ReplayError(f"event {i}: sequence gap or duplicate (seq {event.seq})")
        if event.at < last_at:
            raise ReplayError(f"event {i}: time runs backwards")
        last_at = event.at
        if terminal_seen:
            raise ReplayError(f"event {i}: event after the terminal event")

        body = event.body
        if isinstance(body, SessionStarted):
            if i != 0:
                raise ReplayError(f"event {i}: start record not first")
        elif isinstance(body, TryPresented):
            if i == 0:
                raise ReplayError("event 0: log must begin with the start record")
            if open_try is not None:
                raise ReplayError(f"event {i}: try presented while one is open")
            if body.try_index != presented + 1:
                raise ReplayError(f"event {i}: try index {body.try_index} out of order")
            if body.try_index >= planned_tries:
                raise ReplayError(f"event {i}: try index beyond the planned count")
            if not any(p.object_id == body.target_object_id for p in body.placements):
                raise ReplayError(f"event {i}: target not among the placements")
            presented = body.try_index
            open_try = body
            open_try_at = event.at
        elif isinstance(body, ResponseRecorded):
            if open_try is None or body.try_index != open_try.try_index:
                raise ReplayError(
                    f"event {i}: response for try {body.try_index} which is not open"
                )
            if not any(p.object_id == body.object_id for p in open_try.placements):
                raise ReplayError(f"event {i}: response to an object not presented")
            if not (0.0 < body.response_time <= try_time):
                raise ReplayError(f"event {i}: response_time outside (0, {try_time}]")
            if abs((event.at - open_try_at) - body.response_time) > TIME_CONSISTENCY_TOL:
                raise ReplayError(f"event {i}: response_time inconsistent with event times")
            open_try = None
            resolved += 1
        elif isinstance(body, TryTimedOut):
            if open_try is None or body.try_index != open_try.try_index:
                raise ReplayError(
                    f"event {i}: timeout for try {body.try_index} which is not open"
                )
            if event.at < open_try_at + try_time:
                raise ReplayError(f"event {i}: timeout before the try deadline")
            open_try = None
            resolved += 1
        elif isinstance(body, SessionCompleted):
            if i == 0:
                raise ReplayError("event 0: log must begin with the start record")
            if open_try is not None:
                raise ReplayError(f"event {i}: completed with an unresolved try")
            if resolved != planned_tries:
                raise ReplayError(
                    f"event {i}: completed after {resolved} of {planned_tries} tries"
                )
            terminal_seen = True
        elif isinstance(body, SessionAborted):
            if i == 0:
                raise ReplayError("event 0: log must begin with the start record")
            terminal_seen = True

    if not terminal_seen and not allow_open:
        raise ReplayError("missing terminal event")


def replay(events: list[SessionEvent], try_time: float, planned_tries: int) -> SessionTally:
    """Reconstruct the tally purely from an event log.

    Outcomes are re-derived from the log content (response object versus
    the presented target), never trusted from any live counter.
    """
    validate_event_stream(events, try_time, planned_tries)

    correct = omissions = commissions = 0
    crt_list: list[float] = []
    target: str | None = None
    for event in events:
        body = event.body
        if isinstance(body, TryPresented):
            target = body.target_object_id
        elif isinstance(body, ResponseRecorded):
            if body.object_id == target:
                correct += 1
                crt_list.append(body.response_time)
            else:
                commissions += 1
        elif isinstance(body, TryTimedOut):
            omissions += 1

    resolved = correct + omissions + commissions
    tally = SessionTally(
        planned_tries=planned_tries,
        correct=correct,
        omission_errors=omissions,
        commission_errors=commissions,
        uncompleted=planned_tries - resolved,
        crt_list=tuple(crt_list),
        try_time=try_time,
        elapsed=events[-1].at,
    )
    problems = tally.check()
    if problems:
        raise ReplayError("; ".join(problems))
    return tally


# ---------------------------------------------------------------------------
# progression and finalization
# ---------------------------------------------------------------------------


class TransitionDecision(str, enum.Enum):
    ADVANCE = "advance"
    STAY = "stay"
    REGRESS = "regress"
    OVERRIDE = "override"  # doctor-forced, recorded only


@dataclass(frozen=True)
class LevelTransition:
    decision: TransitionDecision
    from_level: int
    to_level: int
    pi: float | None
    threshold: float | None
    reason: str

    def to_dict(self) -> dict:
        return {
            "decision": self.decision.value,
            "from_level": self.from_level,
            "to_level": self.to_level,
            "pi": self.pi,
            "threshold": self.threshold,
            "reason": self.reason,
        }


def decide_level_transition(
    metrics: SessionMetrics,
    policy: ProgressionPolicy,
    sessions_at_level: int,
    current_level: int,
    max_level: int,
) -> LevelTransition:
    """Advance, stay, or regress based on the session's performance index.

    Advance needs pi >= advance threshold, enough sessions at the level,
    and headroom below the top level. An absent pi (nothing scored) is
    regress-eligible. Moves are clamped to one level and the game range.
    """
    pi = metrics.pi
    if (
        pi is not None
        and pi >= policy.advance_threshold
        and sessions_at_level >= policy.min_sessions_at_level
        and current_level < max_level
    ):
        return LevelTransition(
            TransitionDecision.ADVANCE,
            current_level,
            current_level + 1,
            pi,
            policy.advance_threshold,
            f"pi {pi:.4f} reached advance threshold {policy.advance_threshold}",
        )
    if (pi is None or pi < policy.regress_threshold) and current_level > 1:
        shown = "absent" if pi is None else f"{pi:.4f}"
        return LevelTransition(
            TransitionDecision.REGRESS,
            current_level,
            current_level - 1,
            pi,
            policy.regress_threshold,
            f"pi {shown} below regress threshold {policy.regress_threshold}",
        )
    shown = "absent" if pi is None else f"{pi:.4f}"
    return LevelTransition(
        TransitionDecision.STAY,
        current_level,
        current_level,
        pi,
        policy.advance_threshold,
        f"pi {shown} within thresholds or no headroom",
    )


@dataclass(frozen=True)
class FinalizedSession:
    tally: SessionTally
    metrics: SessionMetrics
    transition: LevelTransition
    profile: PatientProfile


def finalize_session(
    session: GameSession,
    *,
    patient: PatientProfile,
    policy: ProgressionPolicy,
    sessions_at_level: int,
    max_level: int,
) -> FinalizedSession:
    """Score a finished session and derive the profile update.

    The live counters must agree exactly with a replay of the emitted
    log; a divergence is an engine bug and aborts before anything could
    be persisted. The profile's performance index takes the session's pi
    when defined and is otherwise left unchanged; the level follows the
    transition decision.
    """
    if not session.is_finished:
        raise SessionStateError("cannot finalize an unfinished session")
    live = session.live_tally()
    replayed = replay(session.events, session.config.try_time, session.config.planned_tries)
    if live != replayed:
        raise EngineInvariantError(
            f"live counters diverge from replay: live={live} replay={replayed}"
        )
    metrics = compute_session_metrics(replayed)
    transition = decide_level_transition(
        metrics, policy, sessions_at_level, patient.level, max_level
    )
    profile = replace(
        patient,
        level=transition.to_level,
        performance_index=metrics.pi if metrics.pi is not None else patient.performance_index,
    )
    return FinalizedSession(replayed, metrics, transition, profile)
