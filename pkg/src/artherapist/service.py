"""HTTP surface: plan configuration, session launch and ingest, reports.

JSON over HTTP/1.1 under the versioned prefix /api/v1; evolution is
additive only. Doctor identity arrives as the trusted X-Doctor-Id header
(authentication is a deployment concern); the experience gate on raw
event access and the involvement gate on level overrides are enforced
here. Every mutation either fully applies or returns an error envelope
with no partial state; reads are idempotent. Absent metrics serialize
as explicit nulls, never zero.

Error envelopes: {"error": {"status", "code", "message", "details"}}
with codes from the closed set documented in docs/API.md.
"""

from __future__ import annotations

import secrets
import time

from fastapi import Body, FastAPI, Header, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import runner, storage
from .domain import ValidationError
from .simulator import BehaviorParams
from .storage import Store

#: closed error code set; status must match the code
ERROR_CODES = {
    "validation_failed": 400,
    "malformed_events": 400,
    "level_unresolved": 400,
    "missing_registration": 400,
    "missing_header": 400,
    "missing_precondition": 400,
    "bad_request": 400,
    "forbidden": 403,
    "not_found": 404,
    "duplicate_id": 409,
    "sequence_conflict": 409,
    "segment_sealed": 409,
    "session_not_sealed": 409,
    "version_conflict": 412,
}

#: document collections: URL segment -> (doc_type, id field in the body)
COLLECTIONS = {
    "patients": ("patient", "id"),
    "doctors": ("doctor", "id"),
    "games": ("game", "game_id"),
    "programs": ("program", "program_id"),
    "treatments": ("treatment", "treatment_id"),
}


def error_response(code: str, message: str, details: list[str] | None = None) -> JSONResponse:
    status = ERROR_CODES[code]
    payload = {"error": {"status": status, "code": code, "message": message, "details": details or []}}
    return JSONResponse(status_code=status, content=payload)


def _if_match_version(if_match: str | None) -> int | None:
    if if_match is None:
        return None
    try:
        return int(if_match.strip().strip('"'))
    except ValueError:
        return -1


def create_app(store: Store) -> FastAPI:
    app = FastAPI(title="artherapist", version="1.0", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["Location", "ETag"],
    )

    @app.exception_handler(storage.NotFound)
    async def _not_found(_request: Request, exc: storage.NotFound):
        return error_response("not_found", str(exc))

    @app.exception_handler(storage.DuplicateId)
    async def _duplicate(_request: Request, exc: storage.DuplicateId):
        return error_response("duplicate_id", str(exc))

    @app.exception_handler(storage.VersionConflict)
    async def _conflict(_request: Request, exc: storage.VersionConflict):
        return error_response("version_conflict", str(exc))

    @app.exception_handler(storage.DocumentInvalid)
    async def _invalid(_request: Request, exc: storage.DocumentInvalid):
        return error_response("validation_failed", "document failed validation", exc.errors)

    @app.exception_handler(storage.SequenceGap)
    async def _gap(_request: Request, exc: storage.SequenceGap):
        return error_response("sequence_conflict", str(exc))

    @app.exception_handler(storage.SealedSegment)
    async def _sealed(_request: Request, exc: storage.SealedSegment):
        return error_response("segment_sealed", str(exc))

    @app.exception_handler(runner.MalformedEvents)
    async def _malformed(_request: Request, exc: runner.MalformedEvents):
        return error_response("malformed_events", str(exc))

    @app.exception_handler(runner.MissingRegistration)
    async def _unregistered(_request: Request, exc: runner.MissingRegistration):
        return error_response("missing_registration", str(exc))

    @app.exception_handler(runner.LevelUnresolved)
    async def _level(_request: Request, exc: runner.LevelUnresolved):
        return error_response("level_unresolved", str(exc))

    # -- sessions (registered before the generic document routes so the
    # fixed paths win the match) -------------------------------------------

    @app.post("/api/v1/sessions", status_code=201)
    def launch_session(body: dict = Body(...)):
        """Run a simulated session synchronously and return its metrics."""
        patient_id = body.get("patient_id")
        program_id = body.get("program_id")
        if not isinstance(patient_id, str) or not isinstance(program_id, str):
            return error_response(
                "bad_request", "patient_id and program_id are required strings"
            )
        seed = body.get("seed")
        if seed is None:
            seed = secrets.randbits(63)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            return error_response("bad_request", "seed must be a non-negative integer")
        behavior = None
        if body.get("behavior") is not None:
            try:
                behavior = BehaviorParams.from_dict(body["behavior"])
            except (ValueError, TypeError) as exc:
                return error_response("bad_request", f"behavior: {exc}")
        session_id = body.get("session_id") or f"sess-{secrets.token_hex(8)}"
        if not isinstance(session_id, str):
            return error_response("bad_request", "session_id must be a string")

        outcome = runner.run_simulated_session(
            store,
            patient_id=patient_id,
            program_id=program_id,
            session_id=session_id,
            config_seed=seed,
            behavior=behavior,
        )
        return {
            "session_id": outcome.session_id,
            "seed": seed,
            "metrics": outcome.metrics.to_dict(),
            "transition": outcome.transition.to_dict(),
            "patient_version": outcome.patient_version,
        }

    @app.post("/api/v1/sessions/{session_id:path}/events", status_code=202)
    def ingest_session_events(session_id: str, body: dict = Body(...)):
        """Append an external event batch in sequence order; the batch
        holding the terminal event finalizes the session."""
        events = body.get("events")
        if not isinstance(events, list) or not events:
            return error_response("malformed_events", "events must be a non-empty list")
        result = runner.ingest_events(
            store,
            session_id,
            events,
            patient_id=body.get("patient_id"),
            program_id=body.get("program_id"),
        )
        payload = {"session_id": session_id, "last_seq": result.last_seq, "sealed": result.sealed}
        if result.outcome is not None:
            payload["metrics"] = result.outcome.metrics.to_dict()
            payload["transition"] = result.outcome.transition.to_dict()
        return payload

    @app.get("/api/v1/sessions/{session_id:path}/metrics")
    def session_metrics(session_id: str):
        """Measure vector for a sealed session, recomputed from the log
        by replay on every call (never cached counters)."""
        meta = store.session_meta(session_id)
        if not meta.sealed:
            return error_response(
                "session_not_sealed", f"session '{session_id}' has no terminal event yet"
            )
        metrics = runner.score_stored_session(store, session_id)
        return {"session_id": session_id, "metrics": metrics.to_dict()}

    # -- reports ------------------------------------------------------------

    @app.get("/api/v1/patients/{patient_id:path}/report")
    def patient_report(
        patient_id: str,
        include: str | None = Query(default=None),
        doctor_id: str | None = Header(default=None, alias="X-Doctor-Id"),
    ):
        """Profile snapshot, per-session metric series in time order, and
        the level-transition history. Raw event logs are included only for
        senior or expert doctors requesting ?include=events."""
        if doctor_id is None:
            return error_response("missing_header", "X-Doctor-Id header is required")
        envelope = store.get_document("patient", patient_id)
        progress = store.load_progress(patient_id)

        sessions = []
        for record in progress:
            if record.decision == "override" or not store.session_exists(record.session_id):
                continue
            metrics = runner.score_stored_session(store, record.session_id)
            sessions.append(
                {
                    "session_id": record.session_id,
                    "ordinal": record.ordinal,
                    "wall_time": record.wall_time,
                    "level": record.level_before,
                    "metrics": metrics.to_dict(),
                }
            )

        payload = {
            "patient": envelope.body,
            "patient_version": envelope.version,
            "current_level": envelope.body.get("level"),
            "sessions": sessions,
            "transitions": [
                {
                    "ordinal": r.ordinal,
                    "session_id": r.session_id,
                    "wall_time": r.wall_time,
                    "decision": r.decision,
                    "from_level": r.level_before,
                    "to_level": r.level_after,
                    "pi": r.pi,
                    "threshold": r.threshold,
                    "reason": r.reason,
                }
                for r in progress
            ],
        }

        if include == "events":
            try:
                doctor = store.load_doctor(doctor_id)
            except (storage.NotFound, ValidationError):
                return error_response(
                    "forbidden", f"doctor '{doctor_id}' is not known, raw events withheld"
                )
            if not doctor.may_view_raw_events:
                return error_response(
                    "forbidden",
                    "raw event access requires senior or expert experience",
                )
            payload["events"] = {
                s["session_id"]: runner.load_session_events_wire(store, s["session_id"])
                for s in sessions
            }
        return payload

    @app.post("/api/v1/patients/{patient_id:path}/level-override")
    def level_override(
        patient_id: str,
        body: dict = Body(...),
        doctor_id: str | None = Header(default=None, alias="X-Doctor-Id"),
        if_match: str | None = Header(default=None, alias="If-Match"),
    ):
        """Doctor-forced level change, gated on involvement (guide or
        full) and version-checked against the patient document."""
        if doctor_id is None:
            return error_response("missing_header", "X-Doctor-Id header is required")
        expected = _if_match_version(if_match)
        if expected is None:
            return error_response(
                "missing_precondition", "If-Match header with the current version is required"
            )
        try:
            doctor = store.load_doctor(doctor_id)
        except (storage.NotFound, ValidationError):
            return error_response("forbidden", f"doctor '{doctor_id}' is not known")
        if not doctor.may_override_level:
            return error_response(
                "forbidden", "level override requires guide or full involvement"
            )
        to_level = body.get("to_level")
        if not isinstance(to_level, int) or isinstance(to_level, bool) or to_level < 1:
            return error_response("bad_request", "to_level must be an integer >= 1")

        envelope = store.get_document("patient", patient_id)
        updated = dict(envelope.body)
        from_level = updated.get("level")
        updated["level"] = to_level
        version = store.put_document("patient", patient_id, updated, expected_version=expected)
        store.append_progress(
            patient_id,
            storage.ProgressRecord(
                ordinal=store.next_progress_ordinal(patient_id),
                session_id="",
                wall_time=time.time(),
                level_before=from_level,
                level_after=to_level,
                decision="override",
                pi=None,
                threshold=None,
                reason="doctor-override",
            ),
        )
        return {"patient_id": patient_id, "level": to_level, "version": version}

    # -- documents (generic, registered last) -------------------------------

    @app.post("/api/v1/{collection}", status_code=201)
    def create_document(collection: str, body: dict = Body(...)):
        """Create a document; 400 with the full violation list, 409 on a
        duplicate id."""
        if collection not in COLLECTIONS:
            return error_response("not_found", f"unknown collection '{collection}'")
        doc_type, id_field = COLLECTIONS[collection]
        doc_id = body.get(id_field) if isinstance(body, dict) else None
        if not isinstance(doc_id, str) or not doc_id:
            return error_response(
                "validation_failed", "document failed validation",
                [f"{id_field}: must be a non-empty string"],
            )
        version = store.create_document(doc_type, doc_id, body)
        envelope = store.get_document(doc_type, doc_id)
        return JSONResponse(
            status_code=201,
            content=envelope.to_dict(),
            headers={"Location": f"/api/v1/{collection}/{doc_id}", "ETag": str(version)},
        )

    @app.get("/api/v1/{collection}")
    def list_documents(collection: str):
        if collection not in COLLECTIONS:
            return error_response("not_found", f"unknown collection '{collection}'")
        doc_type, _ = COLLECTIONS[collection]
        ids = store.list_documents(doc_type)
        return {
            "items": [
                {"doc_id": doc_id, "version": store.get_document(doc_type, doc_id).version}
                for doc_id in ids
            ]
        }

    @app.get("/api/v1/{collection}/{doc_id:path}")
    def get_document(collection: str, doc_id: str):
        if collection not in COLLECTIONS:
            return error_response("not_found", f"unknown collection '{collection}'")
        doc_type, _ = COLLECTIONS[collection]
        envelope = store.get_document(doc_type, doc_id)
        return JSONResponse(content=envelope.to_dict(), headers={"ETag": str(envelope.version)})

    @app.put("/api/v1/{collection}/{doc_id:path}")
    def update_document(
        collection: str,
        doc_id: str,
        body: dict = Body(...),
        if_match: str | None = Header(default=None, alias="If-Match"),
    ):
        """Version-checked update; requires If-Match with the current
        version, 412 when stale, 404 for unknown documents."""
        if collection not in COLLECTIONS:
            return error_response("not_found", f"unknown collection '{collection}'")
        doc_type, id_field = COLLECTIONS[collection]
        expected = _if_match_version(if_match)
        if expected is None:
            return error_response(
                "missing_precondition", "If-Match header with the current version is required"
            )
        if isinstance(body, dict) and body.get(id_field) != doc_id:
            return error_response(
                "validation_failed", "document failed validation",
                [f"{id_field}: must match the URL id '{doc_id}'"],
            )
        store.get_document(doc_type, doc_id)  # 404 before any version math
        version = store.put_document(doc_type, doc_id, body, expected_version=expected)
        envelope = store.get_document(doc_type, doc_id)
        return JSONResponse(content=envelope.to_dict(), headers={"ETag": str(version)})

    return app
