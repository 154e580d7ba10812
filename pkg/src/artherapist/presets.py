"""Built-in game, program, and doctor documents.

Used by the CLI to seed fresh stores and by the sweep harness; every
knob is an ordinary document afterwards, editable through the API.
"""

from __future__ import annotations

from .domain import (
    SessionConfig,
    validate_doctor_profile,
    validate_game_definition,
    validate_treatment_program,
)

DEFAULT_GAME_ID = "collect-shapes"
DEFAULT_PROGRAM_ID = "starter-program"
DEFAULT_DOCTOR_ID = "resident-doctor"

_SHAPES = ["cube", "sphere", "cone", "custom:star", "custom:ring", "custom:prism"]


def _region() -> dict:
    # fresh dict per object so callers may mutate bodies freely
    return {"min_corner": [-1.5, 0.0, -1.5], "max_corner": [1.5, 1.8, 1.5]}


def _objects(count: int) -> list[dict]:
    return [
        {
            "object_id": f"obj-{i}",
            "shape": _SHAPES[i % len(_SHAPES)],
            "base_size": 0.25,
            "placement_region": _region(),
        }
        for i in range(count)
    ]


def default_game_body() -> dict:
    return {
        "game_id": DEFAULT_GAME_ID,
        "type": "drag_and_drop",
        "levels": [
            {
                "level_number": 1,
                "objects": _objects(4),
                "max_time": 60.0,
                "try_time": 5.0,
                "tries_per_session": 10,
                "distractors_per_try": 2,
                "effects": "voice: collect the glowing shape",
            },
            {
                "level_number": 2,
                "objects": _objects(5),
                "max_time": 60.0,
                "try_time": 4.0,
                "tries_per_session": 12,
                "distractors_per_try": 3,
                "effects": "voice: collect the glowing shape, quickly",
            },
            {
                "level_number": 3,
                "objects": _objects(6),
                "max_time": 60.0,
                "try_time": 3.5,
                "tries_per_session": 12,
                "distractors_per_try": 4,
                "effects": None,
            },
        ],
    }


def default_program_body() -> dict:
    return {
        "program_id": DEFAULT_PROGRAM_ID,
        "session_specs": [
            {"game": DEFAULT_GAME_ID, "level": 1},
            {"game": DEFAULT_GAME_ID, "level": 2},
            {"game": DEFAULT_GAME_ID, "level": 3},
        ],
        "duration_cap": 20.0,
        "progression_policy": {
            "advance_threshold": 0.7,
            "regress_threshold": 0.3,
            "min_sessions_at_level": 2,
        },
    }


def default_doctor_body() -> dict:
    return {"id": DEFAULT_DOCTOR_ID, "experience": "senior", "involvement": "guide"}


def sweep_session_config(
    *, tries: int = 10, try_time: float = 5.0, seed: int = 0
) -> SessionConfig:
    """Harness config for parameter sweeps: four objects on display per
    try (one target, three distractors)."""
    game = validate_game_definition(
        {
            "game_id": "sweep-harness",
            "type": "multiple_choice",
            "levels": [
                {
                    "level_number": 1,
                    "objects": _objects(4),
                    "max_time": tries * try_time,
                    "try_time": try_time,
                    "tries_per_session": tries,
                    "distractors_per_try": 3,
                }
            ],
        }
    )
    level = game.levels[0]
    return SessionConfig(
        session_id="sweep",
        patient_id="sweep-patient",
        level_number=level.level_number,
        planned_tries=level.tries_per_session,
        try_time=level.try_time,
        max_time=level.max_time,
        object_pool=level.objects,
        distractors_per_try=level.distractors_per_try,
        seed=seed,
    )


def validated_defaults() -> None:
    """Sanity hook: all preset bodies must pass their validators."""
    validate_game_definition(default_game_body())
    validate_treatment_program(default_program_body())
    validate_doctor_profile(default_doctor_body())
