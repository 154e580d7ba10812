"""Domain validators: completeness of error reporting, round-trips, and
totality over arbitrary input."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artherapist.domain import (
    ValidationError,
    cross_validate_program,
    derive_session_config,
    validate_doctor_profile,
    validate_game_definition,
    validate_patient_profile,
    validate_progression_policy,
    validate_treatment,
    validate_treatment_program,
)
from artherapist.presets import (
    default_doctor_body,
    default_game_body,
    default_program_body,
)


def game():
    return validate_game_definition(default_game_body())


def program():
    return validate_treatment_program(default_program_body())


class TestPatientProfile:
    def test_minimal_complete_profile(self):
        profile = validate_patient_profile({"id": "p1", "level": 1, "preferences": []})
        assert profile.id == "p1"
        assert profile.level == 1
        assert profile.performance_index is None
        assert profile.preferences == frozenset()

    def test_empty_id_rejected(self):
        with pytest.raises(ValidationError) as exc:
            validate_patient_profile({"id": "", "level": 1})
        assert any("id" in e for e in exc.value.errors)

    def test_all_violations_reported_together(self):
        with pytest.raises(ValidationError) as exc:
            validate_patient_profile({"id": "p2", "level": 0, "performance_index": 1.2})
        errors = exc.value.errors
        assert any("level" in e for e in errors)
        assert any("performance_index" in e for e in errors)
        assert len(errors) == 2

    def test_round_trip(self):
        profile = validate_patient_profile(
            {"id": "p3", "level": 2, "performance_index": 0.4, "preferences": ["b", "a"]}
        )
        assert validate_patient_profile(profile.to_dict()) == profile

    @pytest.mark.parametrize(
        "candidate",
        [
            {"id": "x", "level": True},
            {"id": "x", "level": 1, "performance_index": float("nan")},
            {"id": "x", "level": 1, "preferences": "oops"},
            {"id": "x", "level": 1, "preferences": [1, 2]},
        ],
    )
    def test_individual_invariants_reported(self, candidate):
        with pytest.raises(ValidationError) as exc:
            validate_patient_profile(candidate)
        assert exc.value.errors


class TestDoctorProfile:
    def test_valid(self):
        doctor = validate_doctor_profile(default_doctor_body())
        assert doctor.may_view_raw_events
        assert doctor.may_override_level

    def test_junior_monitor_gating(self):
        doctor = validate_doctor_profile(
            {"id": "d2", "experience": "junior", "involvement": "monitor"}
        )
        assert not doctor.may_view_raw_events
        assert not doctor.may_override_level

    def test_bad_enums_both_reported(self):
        with pytest.raises(ValidationError) as exc:
            validate_doctor_profile({"id": "d3", "experience": "guru", "involvement": "boss"})
        assert len(exc.value.errors) == 2

    def test_round_trip(self):
        doctor = validate_doctor_profile(default_doctor_body())
        assert validate_doctor_profile(doctor.to_dict()) == doctor


class TestGameDefinition:
    def test_preset_game_valid_and_round_trips(self):
        g = game()
        assert g.max_level == 3
        assert validate_game_definition(g.to_dict()) == g

    def test_non_contiguous_levels_rejected(self):
        body = default_game_body()
        body["levels"][1]["level_number"] = 5
        with pytest.raises(ValidationError) as exc:
            validate_game_definition(body)
        assert any("contiguous" in e for e in exc.value.errors)

    def test_try_budget_exceeding_level_budget_rejected(self):
        body = default_game_body()
        body["levels"][0]["try_time"] = 10.0  # 10 tries * 10 s > 60 s
        with pytest.raises(ValidationError) as exc:
            validate_game_definition(body)
        assert any("max_time" in e for e in exc.value.errors)

    def test_distractors_exceeding_pool_rejected(self):
        body = default_game_body()
        body["levels"][0]["distractors_per_try"] = 4
        with pytest.raises(ValidationError) as exc:
            validate_game_definition(body)
        assert any("distractors_per_try" in e for e in exc.value.errors)

    def test_degenerate_region_rejected(self):
        body = default_game_body()
        region = body["levels"][0]["objects"][0]["placement_region"]
        region["max_corner"] = region["min_corner"]
        with pytest.raises(ValidationError) as exc:
            validate_game_definition(body)
        assert any("positive extent" in e for e in exc.value.errors)

    def test_custom_shape_label_accepted(self):
        body = default_game_body()
        body["levels"][0]["objects"][0]["shape"] = "custom:teapot"
        assert validate_game_definition(body)

    def test_bare_custom_prefix_rejected(self):
        body = default_game_body()
        body["levels"][0]["objects"][0]["shape"] = "custom:"
        with pytest.raises(ValidationError):
            validate_game_definition(body)

    def test_nonpositive_object_size_rejected(self):
        body = default_game_body()
        body["levels"][0]["objects"][0]["base_size"] = 0.0
        with pytest.raises(ValidationError) as exc:
            validate_game_definition(body)
        assert any("base_size" in e for e in exc.value.errors)


class TestProgram:
    def test_preset_program_round_trips(self):
        p = program()
        assert validate_treatment_program(p.to_dict()) == p

    def test_threshold_ordering_enforced(self):
        body = default_program_body()
        body["progression_policy"]["regress_threshold"] = 0.9
        with pytest.raises(ValidationError) as exc:
            validate_treatment_program(body)
        assert any("strictly below" in e for e in exc.value.errors)

    def test_policy_bounds(self):
        with pytest.raises(ValidationError) as exc:
            validate_progression_policy(
                {"advance_threshold": 1.5, "regress_threshold": -0.1, "min_sessions_at_level": 0}
            )
        assert len(exc.value.errors) == 3

    def test_cross_validation_resolves_levels(self):
        p = program()
        assert cross_validate_program(p, {"collect-shapes": game()}) == []

    def test_cross_validation_flags_unknown_level(self):
        body = default_program_body()
        body["session_specs"].append({"game": "collect-shapes", "level": 5})
        p = validate_treatment_program(body)
        errors = cross_validate_program(p, {"collect-shapes": game()})
        assert any("level 5" in e for e in errors)

    def test_cross_validation_flags_cap_below_level_budget(self):
        body = default_program_body()
        body["duration_cap"] = 0.5  # 30 s < the 60 s level budget
        p = validate_treatment_program(body)
        errors = cross_validate_program(p, {"collect-shapes": game()})
        assert any("duration_cap" in e for e in errors)


class TestTreatment:
    CONTEXT = dict(
        patients={"p1": validate_patient_profile({"id": "p1", "level": 1, "preferences": []})},
        doctors={"d1": validate_doctor_profile(default_doctor_body())},
        games={"collect-shapes": None},  # replaced in setup
        programs={"starter-program": None},
    )

    def context(self):
        ctx = dict(self.CONTEXT)
        ctx["games"] = {"collect-shapes": game()}
        ctx["programs"] = {"starter-program": program()}
        return ctx

    def assembly(self):
        return {
            "treatment_id": "t1",
            "patient": "p1",
            "doctor": "d1",
            "game": "collect-shapes",
            "programs": ["starter-program"],
        }

    def test_well_formed_assembly(self):
        treatment = validate_treatment(self.assembly(), **self.context())
        assert treatment.programs == ("starter-program",)
        assert validate_treatment(treatment.to_dict(), **self.context()) == treatment

    def test_dangling_program_reference(self):
        raw = self.assembly()
        raw["programs"] = ["nope"]
        with pytest.raises(ValidationError) as exc:
            validate_treatment(raw, **self.context())
        assert any("unresolved reference 'nope'" in e for e in exc.value.errors)

    def test_patient_level_beyond_game(self):
        ctx = self.context()
        ctx["patients"] = {
            "p1": validate_patient_profile({"id": "p1", "level": 9, "preferences": []})
        }
        with pytest.raises(ValidationError) as exc:
            validate_treatment(self.assembly(), **ctx)
        assert any("level 9" in e for e in exc.value.errors)


class TestDeriveSessionConfig:
    def test_field_projection(self):
        g, p = game(), program()
        level = g.levels[0]
        config = derive_session_config(
            level, p, session_id="s1", patient_id="p1", seed=11
        )
        assert config.planned_tries == level.tries_per_session
        assert config.try_time == level.try_time
        assert config.max_time == level.max_time
        assert config.object_pool == level.objects
        assert config.distractors_per_try == level.distractors_per_try
        assert config.validate() == []

    def test_purity(self):
        g, p = game(), program()
        a = derive_session_config(g.levels[1], p, session_id="s", patient_id="p", seed=3)
        b = derive_session_config(g.levels[1], p, session_id="s", patient_id="p", seed=3)
        assert a == b

    def test_single_try_filling_budget(self):
        body = default_game_body()
        body["levels"] = [dict(body["levels"][0], tries_per_session=1, try_time=60.0)]
        g = validate_game_definition(body)
        config = derive_session_config(
            g.levels[0], program(), session_id="s", patient_id="p", seed=1
        )
        assert config.planned_tries == 1
        assert config.try_time == config.max_time


# arbitrary JSON-ish values: validators must either accept or raise
# ValidationError, never anything else
json_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers()
    | st.floats(allow_nan=True, allow_infinity=True)
    | st.text(max_size=8),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=12,
)


@given(json_values)
@settings(max_examples=400)
def test_validation_is_total(candidate):
    for validator in (
        validate_patient_profile,
        validate_doctor_profile,
        validate_game_definition,
        validate_treatment_program,
        validate_progression_policy,
    ):
        try:
            validator(candidate)
        except ValidationError as exc:
            assert exc.errors
