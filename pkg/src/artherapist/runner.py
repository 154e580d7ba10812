"""Session orchestration shared by the CLI and the service.

Glues the pieces together for one session lifecycle: derive the config
from the patient's current level, drive the simulator, verify the live
counters against replay, persist the event segment, score it, update
the patient profile, and append the progress history record. The ingest
path does the same for externally produced event streams.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from . import storage
from .domain import (
    GameDefinition,
    LevelDefinition,
    PatientProfile,
    TreatmentProgram,
    derive_session_config,
    validate_patient_profile,
)
from .engine import (
    FinalizedSession,
    LevelTransition,
    ReplayError,
    decide_level_transition,
    event_from_dict,
    event_to_dict,
    finalize_session,
    replay,
    validate_event_stream,
)
from .metrics import SessionMetrics, compute_session_metrics
from .rng import derive_seed
from .simulator import BehaviorParams, simulate_session
from .storage import ProgressRecord, SessionMeta, Store


class LevelUnresolved(Exception):
    """The patient's current level does not exist in the program's game."""


class MissingRegistration(Exception):
    """First ingest batch for an unknown session lacks patient/program ids."""


class MalformedEvents(Exception):
    """An ingested batch fails event validation before anything persists."""


@dataclass(frozen=True)
class SessionOutcome:
    session_id: str
    metrics: SessionMetrics
    transition: LevelTransition
    patient: PatientProfile
    patient_version: int


def _resolve_level(
    patient: PatientProfile, program: TreatmentProgram, game: GameDefinition
) -> LevelDefinition:
    level = game.level(patient.level)
    if level is None:
        raise LevelUnresolved(
            f"patient '{patient.id}' is at level {patient.level}, which game "
            f"'{game.game_id}' does not define"
        )
    return level


def _program_game(store: Store, program: TreatmentProgram) -> GameDefinition:
    # sessions run in the game named by the program's first session spec
    return store.load_game(program.session_specs[0].game)


def _persist_finalized(
    store: Store,
    *,
    session_id: str,
    finalized: FinalizedSession,
    patient_id: str,
    patient_version: int,
    wall_time: float,
) -> SessionOutcome:
    new_version = store.put_document(
        "patient", patient_id, finalized.profile.to_dict(), expected_version=patient_version
    )
    transition = finalized.transition
    store.append_progress(
        patient_id,
        ProgressRecord(
            ordinal=store.next_progress_ordinal(patient_id),
            session_id=session_id,
            wall_time=wall_time,
            level_before=transition.from_level,
            level_after=transition.to_level,
            decision=transition.decision.value,
            pi=finalized.metrics.pi,
            threshold=transition.threshold,
            reason=transition.reason,
        ),
    )
    return SessionOutcome(
        session_id=session_id,
        metrics=finalized.metrics,
        transition=transition,
        patient=finalized.profile,
        patient_version=new_version,
    )


def run_simulated_session(
    store: Store,
    *,
    patient_id: str,
    program_id: str,
    session_id: str,
    config_seed: int,
    behavior: BehaviorParams | None = None,
    wall_start: float | None = None,
) -> SessionOutcome:
    """Launch one simulated session end to end and persist everything.

    Deterministic given the config seed and the behavior seed; when no
    behavior is given its seed is derived from the config seed.
    """
    patient_env = store.get_document("patient", patient_id)
    patient = store.load_patient(patient_id)
    program = store.load_program(program_id)
    game = _program_game(store, program)
    level = _resolve_level(patient, program, game)
    if behavior is None:
        behavior = BehaviorParams(seed=derive_seed(config_seed, "behavior"))

    config = derive_session_config(
        level, program, session_id=session_id, patient_id=patient_id, seed=config_seed
    )
    session = simulate_session(behavior, config)

    # divergence check happens before anything is persisted
    finalized = finalize_session(
        session,
        patient=patient,
        policy=program.progression_policy,
        sessions_at_level=store.sessions_at_level(patient_id, patient.level) + 1,
        max_level=game.max_level,
    )

    wall_time = time.time() if wall_start is None else wall_start
    store.create_segment(
        SessionMeta(
            session_id=session_id,
            patient_id=patient_id,
            program_id=program_id,
            level_number=level.level_number,
            try_time=config.try_time,
            planned_tries=config.planned_tries,
            max_time=config.max_time,
            wall_start=wall_time,
            seed=config_seed,
        )
    )
    for event in session.events:
        store.append_event(session_id, event)

    return _persist_finalized(
        store,
        session_id=session_id,
        finalized=finalized,
        patient_id=patient_id,
        patient_version=patient_env.version,
        wall_time=wall_time,
    )


@dataclass(frozen=True)
class IngestResult:
    session_id: str
    last_seq: int
    sealed: bool
    outcome: SessionOutcome | None


def ingest_events(
    store: Store,
    session_id: str,
    raw_events: list[dict],
    *,
    patient_id: str | None = None,
    program_id: str | None = None,
    wall_start: float | None = None,
) -> IngestResult:
    """Append an externally produced event batch, in sequence order.

    The first batch for a session must name the patient and program so
    the segment can be registered. The whole batch is validated against
    the accumulated stream before any line is appended; a batch that
    carries the terminal event triggers finalization (metrics, profile
    update, history record).
    """
    if not raw_events:
        raise MalformedEvents("empty event batch")
    try:
        batch = [event_from_dict(raw) for raw in raw_events]
    except ReplayError as exc:
        raise MalformedEvents(str(exc)) from None
    for event in batch:
        if event.session_id != session_id:
            raise MalformedEvents(
                f"event seq {event.seq} names session '{event.session_id}'"
            )

    if not store.session_exists(session_id):
        if not patient_id or not program_id:
            raise MissingRegistration(
                "first batch for a new session must include patient_id and program_id"
            )
        patient = store.load_patient(patient_id)
        program = store.load_program(program_id)
        game = _program_game(store, program)
        level = _resolve_level(patient, program, game)
        store.create_segment(
            SessionMeta(
                session_id=session_id,
                patient_id=patient_id,
                program_id=program_id,
                level_number=level.level_number,
                try_time=level.try_time,
                planned_tries=level.tries_per_session,
                max_time=level.max_time,
                wall_start=time.time() if wall_start is None else wall_start,
                seed=0,
            )
        )

    meta = store.session_meta(session_id)
    if meta.sealed:
        raise storage.SealedSegment(f"session '{session_id}' is sealed")

    existing = store.load_session_events(session_id)
    next_seq = len(existing)
    for offset, event in enumerate(batch):
        if event.seq != next_seq + offset:
            raise storage.SequenceGap(
                f"expected seq {next_seq + offset}, got {event.seq}"
            )
    try:
        validate_event_stream(
            existing + batch, meta.try_time, meta.planned_tries, allow_open=True
        )
    except ReplayError as exc:
        raise MalformedEvents(str(exc)) from None

    for event in batch:
        store.append_event(session_id, event)

    if not batch[-1].is_terminal:
        return IngestResult(session_id, batch[-1].seq, sealed=False, outcome=None)
    outcome = finalize_stored_session(store, session_id)
    return IngestResult(session_id, batch[-1].seq, sealed=True, outcome=outcome)


def score_stored_session(store: Store, session_id: str) -> SessionMetrics:
    """Metrics for a sealed session, always recomputed via replay."""
    meta = store.session_meta(session_id)
    if not meta.sealed:
        raise storage.StorageError(f"session '{session_id}' is not sealed yet")
    events = store.load_session_events(session_id)
    tally = replay(events, meta.try_time, meta.planned_tries)
    return compute_session_metrics(tally)


def finalize_stored_session(store: Store, session_id: str) -> SessionOutcome:
    """Score a sealed stored session and apply the profile update."""
    meta = store.session_meta(session_id)
    metrics = score_stored_session(store, session_id)
    patient_env = store.get_document("patient", meta.patient_id)
    patient = store.load_patient(meta.patient_id)
    program = store.load_program(meta.program_id)
    game = _program_game(store, program)

    transition = decide_level_transition(
        metrics,
        program.progression_policy,
        store.sessions_at_level(meta.patient_id, patient.level) + 1,
        patient.level,
        game.max_level,
    )
    body = patient.to_dict()
    body["level"] = transition.to_level
    if metrics.pi is not None:
        body["performance_index"] = metrics.pi
    new_version = store.put_document(
        "patient", meta.patient_id, body, expected_version=patient_env.version
    )
    store.append_progress(
        meta.patient_id,
        ProgressRecord(
            ordinal=store.next_progress_ordinal(meta.patient_id),
            session_id=session_id,
            wall_time=meta.wall_start,
            level_before=transition.from_level,
            level_after=transition.to_level,
            decision=transition.decision.value,
            pi=metrics.pi,
            threshold=transition.threshold,
            reason=transition.reason,
        ),
    )
    return SessionOutcome(
        session_id=session_id,
        metrics=metrics,
        transition=transition,
        patient=validate_patient_profile(body),
        patient_version=new_version,
    )


def load_session_events_wire(store: Store, session_id: str) -> list[dict]:
    """Stored events in their canonical primitive form."""
    return [event_to_dict(e) for e in store.load_session_events(session_id)]
