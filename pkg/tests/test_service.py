"""HTTP API contract: documented status codes, error envelopes, explicit
nulls for absent metrics, and the doctor gating rules."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from artherapist.presets import (
    DEFAULT_GAME_ID,
    DEFAULT_PROGRAM_ID,
    default_doctor_body,
    default_game_body,
    default_program_body,
)
from artherapist.service import create_app
from artherapist.storage import Store

from .test_engine import run_worked_session


@pytest.fixture()
def store(tmp_path):
    return Store(tmp_path / "store")


@pytest.fixture()
def client(store):
    with TestClient(create_app(store)) as c:
        yield c


@pytest.fixture()
def seeded(client, store):
    """Store with the preset game/program, two doctors, and one patient."""
    assert client.post("/api/v1/games", json=default_game_body()).status_code == 201
    assert client.post("/api/v1/programs", json=default_program_body()).status_code == 201
    assert client.post("/api/v1/doctors", json=default_doctor_body()).status_code == 201
    assert (
        client.post(
            "/api/v1/doctors",
            json={"id": "junior-doc", "experience": "junior", "involvement": "monitor"},
        ).status_code
        == 201
    )
    assert (
        client.post(
            "/api/v1/patients", json={"id": "p1", "level": 1, "preferences": []}
        ).status_code
        == 201
    )
    return client


def launch(client, **overrides):
    body = {"patient_id": "p1", "program_id": DEFAULT_PROGRAM_ID, "seed": 42}
    body.update(overrides)
    return client.post("/api/v1/sessions", json=body)


class TestDocumentEndpoints:
    def test_create_returns_envelope_and_location(self, client):
        response = client.post(
            "/api/v1/patients", json={"id": "p1", "level": 1, "preferences": []}
        )
        assert response.status_code == 201
        assert response.headers["Location"] == "/api/v1/patients/p1"
        envelope = response.json()
        assert envelope["version"] == 1
        assert envelope["body"]["id"] == "p1"

    def test_duplicate_create_conflicts(self, client):
        body = {"id": "p1", "level": 1, "preferences": []}
        client.post("/api/v1/patients", json=body)
        response = client.post("/api/v1/patients", json=body)
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "duplicate_id"

    def test_validation_lists_every_violation(self, client):
        response = client.post(
            "/api/v1/patients",
            json={"id": "p2", "level": 0, "performance_index": 1.2, "preferences": []},
        )
        assert response.status_code == 400
        details = response.json()["error"]["details"]
        assert len(details) == 2

    def test_fresh_store_lists_empty(self, client):
        response = client.get("/api/v1/patients")
        assert response.status_code == 200
        assert response.json() == {"items": []}

    def test_get_unknown_document(self, client):
        response = client.get("/api/v1/patients/ghost")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "not_found"

    def test_unknown_collection(self, client):
        assert client.post("/api/v1/wizards", json={"id": "w"}).status_code == 404

    def test_program_update_with_current_version(self, seeded):
        body = default_program_body()
        body["progression_policy"]["advance_threshold"] = 0.6
        response = seeded.put(
            f"/api/v1/programs/{DEFAULT_PROGRAM_ID}", json=body, headers={"If-Match": "1"}
        )
        assert response.status_code == 200
        assert response.json()["version"] == 2
        assert (
            response.json()["body"]["progression_policy"]["advance_threshold"] == 0.6
        )

    def test_program_update_stale_version(self, seeded):
        body = default_program_body()
        seeded.put(
            f"/api/v1/programs/{DEFAULT_PROGRAM_ID}", json=body, headers={"If-Match": "1"}
        )
        response = seeded.put(
            f"/api/v1/programs/{DEFAULT_PROGRAM_ID}", json=body, headers={"If-Match": "1"}
        )
        assert response.status_code == 412
        assert response.json()["error"]["code"] == "version_conflict"

    def test_program_update_threshold_inversion_rejected(self, seeded):
        body = default_program_body()
        body["progression_policy"]["regress_threshold"] = 0.9
        response = seeded.put(
            f"/api/v1/programs/{DEFAULT_PROGRAM_ID}", json=body, headers={"If-Match": "1"}
        )
        assert response.status_code == 400
        assert any("strictly below" in d for d in response.json()["error"]["details"])

    def test_program_update_requires_if_match(self, seeded):
        response = seeded.put(
            f"/api/v1/programs/{DEFAULT_PROGRAM_ID}", json=default_program_body()
        )
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "missing_precondition"

    def test_program_update_unknown_id(self, seeded):
        body = default_program_body()
        body["program_id"] = "ghost"
        response = seeded.put("/api/v1/programs/ghost", json=body, headers={"If-Match": "1"})
        assert response.status_code == 404

    def test_treatment_requires_resolvable_references(self, seeded):
        response = seeded.post(
            "/api/v1/treatments",
            json={
                "treatment_id": "t1",
                "patient": "p1",
                "doctor": "resident-doctor",
                "game": DEFAULT_GAME_ID,
                "programs": [DEFAULT_PROGRAM_ID],
            },
        )
        assert response.status_code == 201
        bad = seeded.post(
            "/api/v1/treatments",
            json={
                "treatment_id": "t2",
                "patient": "nobody",
                "doctor": "resident-doctor",
                "game": DEFAULT_GAME_ID,
                "programs": [DEFAULT_PROGRAM_ID],
            },
        )
        assert bad.status_code == 400
        assert any("unresolved" in d for d in bad.json()["error"]["details"])


class TestSessionLaunch:
    def test_launch_returns_metrics(self, seeded):
        response = launch(seeded)
        assert response.status_code == 201
        payload = response.json()
        assert payload["seed"] == 42
        assert set(payload["metrics"]) == {"M", "SD", "GF", "IAF", "IMF", "EF", "CRF", "PI", "GT"}
        assert payload["transition"]["from_level"] == 1

    def test_same_seed_same_metrics(self, seeded):
        first = launch(seeded, session_id="a").json()
        second = launch(seeded, session_id="b").json()
        assert first["metrics"] == second["metrics"]

    def test_unknown_patient_or_program(self, seeded):
        assert launch(seeded, patient_id="ghost").status_code == 404
        assert launch(seeded, program_id="ghost").status_code == 404

    def test_bad_behavior_rejected(self, seeded):
        response = launch(seeded, behavior={"attention": 2.0})
        assert response.status_code == 400

    def test_unresolved_level_rejected(self, seeded, store):
        store.put_document(
            "patient", "p1", {"id": "p1", "level": 9, "preferences": []}, expected_version=1
        )
        response = launch(seeded)
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "level_unresolved"


def worked_session_batches():
    session = run_worked_session()
    from artherapist.engine import event_to_dict

    wire = [event_to_dict(e) for e in session.events]
    for event in wire:
        event["session_id"] = "ext-1"
    return wire


class TestSessionIngest:
    def test_ingest_batches_then_finalize(self, seeded):
        wire = worked_session_batches()
        first = seeded.post(
            "/api/v1/sessions/ext-1/events",
            json={"patient_id": "p1", "program_id": DEFAULT_PROGRAM_ID, "events": wire[:5]},
        )
        assert first.status_code == 202
        assert first.json() == {"session_id": "ext-1", "last_seq": 4, "sealed": False}

        rest = seeded.post("/api/v1/sessions/ext-1/events", json={"events": wire[5:]})
        assert rest.status_code == 202
        payload = rest.json()
        assert payload["sealed"] is True
        assert payload["metrics"]["PI"] == pytest.approx(0.54, abs=1e-12)

        # finalize updated the patient profile
        profile = seeded.get("/api/v1/patients/p1").json()["body"]
        assert profile["performance_index"] == pytest.approx(0.54, abs=1e-12)

    def test_seq_gap_conflicts(self, seeded):
        wire = worked_session_batches()
        seeded.post(
            "/api/v1/sessions/ext-1/events",
            json={"patient_id": "p1", "program_id": DEFAULT_PROGRAM_ID, "events": wire[:3]},
        )
        response = seeded.post("/api/v1/sessions/ext-1/events", json={"events": wire[5:]})
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "sequence_conflict"

    def test_first_batch_requires_registration(self, seeded):
        wire = worked_session_batches()
        response = seeded.post("/api/v1/sessions/ext-1/events", json={"events": wire[:3]})
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "missing_registration"

    def test_malformed_event_rejected_atomically(self, seeded):
        wire = worked_session_batches()
        wire[2]["kind"] = "nonsense"
        response = seeded.post(
            "/api/v1/sessions/ext-1/events",
            json={"patient_id": "p1", "program_id": DEFAULT_PROGRAM_ID, "events": wire[:5]},
        )
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "malformed_events"
        # nothing persisted: the next good batch starting at 0 is accepted
        ok = seeded.post(
            "/api/v1/sessions/ext-1/events",
            json={
                "patient_id": "p1",
                "program_id": DEFAULT_PROGRAM_ID,
                "events": worked_session_batches()[:5],
            },
        )
        assert ok.status_code == 202

    def test_ingest_after_seal_conflicts(self, seeded):
        wire = worked_session_batches()
        seeded.post(
            "/api/v1/sessions/ext-1/events",
            json={"patient_id": "p1", "program_id": DEFAULT_PROGRAM_ID, "events": wire},
        )
        again = seeded.post("/api/v1/sessions/ext-1/events", json={"events": wire[-1:]})
        assert again.status_code == 409
        assert again.json()["error"]["code"] == "segment_sealed"


class TestSessionMetricsEndpoint:
    def test_sealed_session_metrics(self, seeded):
        session_id = launch(seeded).json()["session_id"]
        response = seeded.get(f"/api/v1/sessions/{session_id}/metrics")
        assert response.status_code == 200
        assert response.json()["metrics"]["GF"] is not None

    def test_api_metrics_equal_launch_metrics(self, seeded):
        launched = launch(seeded).json()
        fetched = seeded.get(f"/api/v1/sessions/{launched['session_id']}/metrics").json()
        assert fetched["metrics"] == launched["metrics"]

    def test_unknown_session(self, seeded):
        assert seeded.get("/api/v1/sessions/ghost/metrics").status_code == 404

    def test_unsealed_session_conflicts(self, seeded):
        wire = worked_session_batches()
        seeded.post(
            "/api/v1/sessions/ext-1/events",
            json={"patient_id": "p1", "program_id": DEFAULT_PROGRAM_ID, "events": wire[:5]},
        )
        response = seeded.get("/api/v1/sessions/ext-1/metrics")
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "session_not_sealed"

    def test_absent_metrics_serialize_as_nulls(self, seeded):
        response = launch(
            seeded,
            behavior={"attention": 0.0, "impulsivity": 0.0, "dropout_hazard": 1.0, "seed": 1},
        )
        session_id = response.json()["session_id"]
        metrics = seeded.get(f"/api/v1/sessions/{session_id}/metrics").json()["metrics"]
        assert metrics["GF"] == 0.0
        for key in ("M", "SD", "IAF", "IMF", "EF", "CRF", "PI"):
            assert metrics[key] is None


class TestPatientReport:
    def test_report_with_one_session(self, seeded):
        wire = worked_session_batches()
        seeded.post(
            "/api/v1/sessions/ext-1/events",
            json={"patient_id": "p1", "program_id": DEFAULT_PROGRAM_ID, "events": wire},
        )
        response = seeded.get(
            "/api/v1/patients/p1/report", headers={"X-Doctor-Id": "resident-doctor"}
        )
        assert response.status_code == 200
        report = response.json()
        assert [s["metrics"]["PI"] for s in report["sessions"]] == [pytest.approx(0.54, abs=1e-12)]
        assert report["transitions"][0]["decision"] == "stay"
        assert "events" not in report

    def test_zero_session_patient_empty_series(self, seeded):
        response = seeded.get(
            "/api/v1/patients/p1/report", headers={"X-Doctor-Id": "resident-doctor"}
        )
        assert response.status_code == 200
        assert response.json()["sessions"] == []

    def test_missing_doctor_header(self, seeded):
        assert seeded.get("/api/v1/patients/p1/report").status_code == 400

    def test_unknown_patient(self, seeded):
        response = seeded.get(
            "/api/v1/patients/ghost/report", headers={"X-Doctor-Id": "resident-doctor"}
        )
        assert response.status_code == 404

    def test_junior_doctor_denied_raw_events(self, seeded):
        launch(seeded)
        response = seeded.get(
            "/api/v1/patients/p1/report",
            params={"include": "events"},
            headers={"X-Doctor-Id": "junior-doc"},
        )
        assert response.status_code == 403
        assert response.json()["error"]["code"] == "forbidden"

    def test_senior_doctor_gets_raw_events(self, seeded):
        session_id = launch(seeded).json()["session_id"]
        response = seeded.get(
            "/api/v1/patients/p1/report",
            params={"include": "events"},
            headers={"X-Doctor-Id": "resident-doctor"},
        )
        assert response.status_code == 200
        events = response.json()["events"][session_id]
        assert events[0]["kind"] == "session_started"
        assert events[-1]["kind"] in ("session_completed", "session_aborted")


class TestLevelOverride:
    def test_guide_doctor_forces_level(self, seeded):
        response = seeded.post(
            "/api/v1/patients/p1/level-override",
            json={"to_level": 2},
            headers={"X-Doctor-Id": "resident-doctor", "If-Match": "1"},
        )
        assert response.status_code == 200
        assert response.json()["level"] == 2
        report = seeded.get(
            "/api/v1/patients/p1/report", headers={"X-Doctor-Id": "resident-doctor"}
        ).json()
        assert report["transitions"][-1]["decision"] == "override"
        assert report["transitions"][-1]["reason"] == "doctor-override"
        assert report["current_level"] == 2

    def test_monitor_involvement_forbidden(self, seeded):
        response = seeded.post(
            "/api/v1/patients/p1/level-override",
            json={"to_level": 2},
            headers={"X-Doctor-Id": "junior-doc", "If-Match": "1"},
        )
        assert response.status_code == 403

    def test_stale_version_conflicts(self, seeded):
        response = seeded.post(
            "/api/v1/patients/p1/level-override",
            json={"to_level": 2},
            headers={"X-Doctor-Id": "resident-doctor", "If-Match": "7"},
        )
        assert response.status_code == 412

    def test_next_session_uses_overridden_level(self, seeded):
        seeded.post(
            "/api/v1/patients/p1/level-override",
            json={"to_level": 3},
            headers={"X-Doctor-Id": "resident-doctor", "If-Match": "1"},
        )
        payload = launch(seeded).json()
        assert payload["transition"]["from_level"] == 3
