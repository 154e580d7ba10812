"""Validated domain types shared by every other module.

Patient and doctor profiles, game and level definitions, treatment
programs, and the session configuration derived from them. Validators
are total: any candidate mapping yields either a validated value or a
ValidationError carrying the complete list of violated invariants,
never just the first. All values are immutable after validation and
safe to share across threads without coordination.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

MINUTES_TO_SECONDS = 60.0

BASE_SHAPES = ("cube", "sphere", "cone")
CUSTOM_SHAPE_PREFIX = "custom:"


class ValidationError(Exception):
    """Raised with the full list of violated invariants."""

    def __init__(self, errors: Iterable[str]):
        self.errors = [str(e) for e in errors]
        super().__init__("; ".join(self.errors) or "validation failed")


class Experience(str, enum.Enum):
    JUNIOR = "junior"
    SENIOR = "senior"
    EXPERT = "expert"


class Involvement(str, enum.Enum):
    MONITOR = "monitor"
    GUIDE = "guide"
    FULL = "full"


class GameType(str, enum.Enum):
    DRAG_AND_DROP = "drag_and_drop"
    MULTIPLE_CHOICE = "multiple_choice"


def is_valid_shape(value: str) -> bool:
    """Base shapes plus free-form custom labels ("custom:<label>")."""
    if value in BASE_SHAPES:
        return True
    return value.startswith(CUSTOM_SHAPE_PREFIX) and len(value) > len(CUSTOM_SHAPE_PREFIX)


Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box with strictly positive extent on every axis."""

    min_corner: Vec3
    max_corner: Vec3

    def to_dict(self) -> dict:
        return {"min_corner": list(self.min_corner), "max_corner": list(self.max_corner)}


@dataclass(frozen=True)
class ObjectSpec:
    object_id: str
    shape: str
    base_size: float
    placement_region: Box3

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "shape": self.shape,
            "base_size": self.base_size,
            "placement_region": self.placement_region.to_dict(),
        }


@dataclass(frozen=True)
class LevelDefinition:
    level_number: int
    objects: tuple[ObjectSpec, ...]
    max_time: float
    try_time: float
    tries_per_session: int
    distractors_per_try: int
    effects: str | None = None

    def to_dict(self) -> dict:
        return {
            "level_number": self.level_number,
            "objects": [o.to_dict() for o in self.objects],
            "max_time": self.max_time,
            "try_time": self.try_time,
            "tries_per_session": self.tries_per_session,
            "distractors_per_try": self.distractors_per_try,
            "effects": self.effects,
        }


@dataclass(frozen=True)
class GameDefinition:
    game_id: str
    type: GameType
    levels: tuple[LevelDefinition, ...]

    @property
    def max_level(self) -> int:
        return self.levels[-1].level_number

    def level(self, level_number: int) -> LevelDefinition | None:
        for lvl in self.levels:
            if lvl.level_number == level_number:
                return lvl
        return None

    def to_dict(self) -> dict:
        return {
            "game_id": self.game_id,
            "type": self.type.value,
            "levels": [lvl.to_dict() for lvl in self.levels],
        }


@dataclass(frozen=True)
class PatientProfile:
    id: str
    level: int
    performance_index: float | None
    preferences: frozenset[str]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "level": self.level,
            "performance_index": self.performance_index,
            "preferences": sorted(self.preferences),
        }


@dataclass(frozen=True)
class DoctorProfile:
    id: str
    experience: Experience
    involvement: Involvement

    @property
    def may_view_raw_events(self) -> bool:
        """Experience gates access to detailed data (raw event logs)."""
        return self.experience in (Experience.SENIOR, Experience.EXPERT)

    @property
    def may_override_level(self) -> bool:
        return self.involvement in (Involvement.GUIDE, Involvement.FULL)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "experience": self.experience.value,
            "involvement": self.involvement.value,
        }


@dataclass(frozen=True)
class ProgressionPolicy:
    advance_threshold: float
    regress_threshold: float
    min_sessions_at_level: int

    def to_dict(self) -> dict:
        return {
            "advance_threshold": self.advance_threshold,
            "regress_threshold": self.regress_threshold,
            "min_sessions_at_level": self.min_sessions_at_level,
        }


@dataclass(frozen=True)
class SessionSpec:
    """Reference to one (game, level) pair of a program."""

    game: str
    level: int

    def to_dict(self) -> dict:
        return {"game": self.game, "level": self.level}


@dataclass(frozen=True)
class TreatmentProgram:
    program_id: str
    session_specs: tuple[SessionSpec, ...]
    duration_cap: float  # minutes for the whole program
    progression_policy: ProgressionPolicy

    def to_dict(self) -> dict:
        return {
            "program_id": self.program_id,
            "session_specs": [s.to_dict() for s in self.session_specs],
            "duration_cap": self.duration_cap,
            "progression_policy": self.progression_policy.to_dict(),
        }


@dataclass(frozen=True)
class Treatment:
    treatment_id: str
    patient: str
    doctor: str
    game: str
    programs: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "treatment_id": self.treatment_id,
            "patient": self.patient,
            "doctor": self.doctor,
            "game": self.game,
            "programs": list(self.programs),
        }


@dataclass(frozen=True)
class SessionConfig:
    """Everything one game session needs; the seed fully determines all
    randomized choices (target pick, distractor set, placements)."""

    session_id: str
    patient_id: str
    level_number: int
    planned_tries: int
    try_time: float
    max_time: float
    object_pool: tuple[ObjectSpec, ...]
    distractors_per_try: int
    seed: int
    appearance_interval: float = 0.5  # gap between consecutive object appearances

    def validate(self) -> list[str]:
        errors = []
        if not self.session_id:
            errors.append("session_id: must be non-empty")
        if self.planned_tries < 1:
            errors.append("planned_tries: must be >= 1")
        if not (math.isfinite(self.try_time) and self.try_time > 0):
            errors.append("try_time: must be a positive finite number")
        if not (math.isfinite(self.max_time) and self.max_time > 0):
            errors.append("max_time: must be a positive finite number")
        if self.distractors_per_try < 0:
            errors.append("distractors_per_try: must be >= 0")
        if self.distractors_per_try + 1 > len(self.object_pool):
            errors.append("distractors_per_try: needs distractors_per_try + 1 <= pool size")
        if self.appearance_interval < 0:
            errors.append("appearance_interval: must be >= 0")
        return errors


# ---------------------------------------------------------------------------
# parsing helpers (total: collect errors, never crash on foreign input)
# ---------------------------------------------------------------------------


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value: Any) -> bool:
    if isinstance(value, bool):
        return False
    return isinstance(value, (int, float)) and math.isfinite(value)


def _check_mapping(raw: Any, label: str) -> list[str]:
    if not isinstance(raw, Mapping):
        return [f"{label}: expected a mapping, got {type(raw).__name__}"]
    return []


def _read_id(raw: Mapping, key: str, errors: list[str], label: str = "") -> str:
    prefix = f"{label}." if label else ""
    value = raw.get(key)
    if not isinstance(value, str) or not value:
        errors.append(f"{prefix}{key}: must be a non-empty string")
        return ""
    return value


def _read_positive_int(raw: Mapping, key: str, errors: list[str], label: str = "") -> int:
    prefix = f"{label}." if label else ""
    value = raw.get(key)
    if not _is_int(value) or value < 1:
        errors.append(f"{prefix}{key}: must be an integer >= 1")
        return 1
    return value


def _read_nonneg_int(raw: Mapping, key: str, errors: list[str], label: str = "") -> int:
    prefix = f"{label}." if label else ""
    value = raw.get(key)
    if not _is_int(value) or value < 0:
        errors.append(f"{prefix}{key}: must be an integer >= 0")
        return 0
    return value


def _read_positive_real(raw: Mapping, key: str, errors: list[str], label: str = "") -> float:
    prefix = f"{label}." if label else ""
    value = raw.get(key)
    if not _is_real(value) or value <= 0:
        errors.append(f"{prefix}{key}: must be a positive finite number")
        return 1.0
    return float(value)


def _read_vec3(value: Any, label: str, errors: list[str]) -> Vec3:
    if (
        isinstance(value, (list, tuple))
        and len(value) == 3
        and all(_is_real(v) for v in value)
    ):
        return (float(value[0]), float(value[1]), float(value[2]))
    errors.append(f"{label}: must be a list of three finite numbers")
    return (0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# validators
# ---------------------------------------------------------------------------


def validate_patient_profile(raw: Any) -> PatientProfile:
    """Parse and validate a raw patient record.

    The profile must be complete before the patient can join a program:
    non-empty id, level >= 1, performance index (when present) in [0, 1].
    The level's upper bound against the assigned game is a cross-reference
    checked by validate_treatment.
    """
    errors = _check_mapping(raw, "patient")
    if errors:
        raise ValidationError(errors)

    patient_id = _read_id(raw, "id", errors)
    level = _read_positive_int(raw, "level", errors)

    pi = raw.get("performance_index")
    if pi is not None:
        if not _is_real(pi) or not (0.0 <= float(pi) <= 1.0):
            errors.append("performance_index: must lie in [0, 1] when present")
            pi = None
        else:
            pi = float(pi)

    prefs_raw = raw.get("preferences", [])
    preferences: frozenset[str] = frozenset()
    if isinstance(prefs_raw, (list, tuple, set, frozenset)) and all(
        isinstance(p, str) for p in prefs_raw
    ):
        preferences = frozenset(prefs_raw)
    else:
        errors.append("preferences: must be a list of strings")

    if errors:
        raise ValidationError(errors)
    return PatientProfile(
        id=patient_id, level=level, performance_index=pi, preferences=preferences
    )


def validate_doctor_profile(raw: Any) -> DoctorProfile:
    errors = _check_mapping(raw, "doctor")
    if errors:
        raise ValidationError(errors)

    doctor_id = _read_id(raw, "id", errors)

    experience = raw.get("experience")
    try:
        experience = Experience(experience)
    except ValueError:
        errors.append(
            "experience: must be one of " + ", ".join(e.value for e in Experience)
        )
        experience = Experience.JUNIOR

    involvement = raw.get("involvement")
    try:
        involvement = Involvement(involvement)
    except ValueError:
        errors.append(
            "involvement: must be one of " + ", ".join(i.value for i in Involvement)
        )
        involvement = Involvement.MONITOR

    if errors:
        raise ValidationError(errors)
    return DoctorProfile(id=doctor_id, experience=experience, involvement=involvement)


def _validate_object_spec(raw: Any, label: str, errors: list[str]) -> ObjectSpec:
    if _check_mapping(raw, label):
        errors.append(f"{label}: expected a mapping")
        return ObjectSpec("", "cube", 1.0, Box3((0, 0, 0), (1, 1, 1)))

    object_id = _read_id(raw, "object_id", errors, label)
    shape = raw.get("shape")
    if not isinstance(shape, str) or not is_valid_shape(shape):
        errors.append(
            f"{label}.shape: must be one of {', '.join(BASE_SHAPES)} or 'custom:<label>'"
        )
        shape = "cube"
    base_size = _read_positive_real(raw, "base_size", errors, label)

    region_raw = raw.get("placement_region")
    region = Box3((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    if isinstance(region_raw, Mapping):
        lo = _read_vec3(region_raw.get("min_corner"), f"{label}.placement_region.min_corner", errors)
        hi = _read_vec3(region_raw.get("max_corner"), f"{label}.placement_region.max_corner", errors)
        if all(h > l for l, h in zip(lo, hi)):
            region = Box3(lo, hi)
        else:
            errors.append(
                f"{label}.placement_region: must have strictly positive extent on every axis"
            )
    else:
        errors.append(f"{label}.placement_region: expected a mapping with min/max corners")

    return ObjectSpec(object_id, shape, base_size, region)


def _validate_level(raw: Any, index: int, errors: list[str]) -> LevelDefinition:
    label = f"levels[{index}]"
    if _check_mapping(raw, label):
        errors.append(f"{label}: expected a mapping")
        return LevelDefinition(index + 1, (), 1.0, 1.0, 1, 0)

    number = _read_positive_int(raw, "level_number", errors, label)
    if number != index + 1:
        errors.append(f"{label}.level_number: levels must be numbered 1..n contiguously")

    objects_raw = raw.get("objects")
    objects: list[ObjectSpec] = []
    if isinstance(objects_raw, (list, tuple)) and objects_raw:
        objects = [
            _validate_object_spec(o, f"{label}.objects[{i}]", errors)
            for i, o in enumerate(objects_raw)
        ]
    else:
        errors.append(f"{label}.objects: must be a non-empty list")

    max_time = _read_positive_real(raw, "max_time", errors, label)
    try_time = _read_positive_real(raw, "try_time", errors, label)
    tries = _read_positive_int(raw, "tries_per_session", errors, label)
    distractors = _read_nonneg_int(raw, "distractors_per_try", errors, label)

    if try_time * tries > max_time:
        errors.append(f"{label}: try_time * tries_per_session must not exceed max_time")
    if objects and distractors + 1 > len(objects):
        errors.append(f"{label}: distractors_per_try + 1 must not exceed the object count")

    effects = raw.get("effects")
    if effects is not None and not isinstance(effects, str):
        errors.append(f"{label}.effects: must be a string when present")
        effects = None

    return LevelDefinition(
        level_number=number,
        objects=tuple(objects),
        max_time=max_time,
        try_time=try_time,
        tries_per_session=tries,
        distractors_per_try=distractors,
        effects=effects,
    )


def validate_game_definition(raw: Any) -> GameDefinition:
    """Parse and validate a game: type plus contiguously numbered levels.

    Difficulty monotonicity across levels is deliberately not enforced;
    any per-level settings are accepted as long as each level is
    internally consistent.
    """
    errors = _check_mapping(raw, "game")
    if errors:
        raise ValidationError(errors)

    game_id = _read_id(raw, "game_id", errors)

    game_type = raw.get("type")
    try:
        game_type = GameType(game_type)
    except ValueError:
        errors.append("type: must be one of " + ", ".join(t.value for t in GameType))
        game_type = GameType.DRAG_AND_DROP

    levels_raw = raw.get("levels")
    levels: list[LevelDefinition] = []
    if isinstance(levels_raw, (list, tuple)) and levels_raw:
        levels = [_validate_level(l, i, errors) for i, l in enumerate(levels_raw)]
    else:
        errors.append("levels: must be a non-empty list")

    if errors:
        raise ValidationError(errors)
    return GameDefinition(game_id=game_id, type=game_type, levels=tuple(levels))


def validate_progression_policy(raw: Any) -> ProgressionPolicy:
    errors = _check_mapping(raw, "progression_policy")
    if errors:
        raise ValidationError(errors)

    advance = raw.get("advance_threshold")
    if not _is_real(advance) or not (0.0 < float(advance) <= 1.0):
        errors.append("advance_threshold: must lie in (0, 1]")
        advance = 1.0
    advance = float(advance)

    regress = raw.get("regress_threshold")
    if not _is_real(regress) or not (0.0 <= float(regress)):
        errors.append("regress_threshold: must be >= 0")
        regress = 0.0
    regress = float(regress)
    if regress >= advance:
        errors.append("regress_threshold: must be strictly below advance_threshold")

    min_sessions = _read_positive_int(raw, "min_sessions_at_level", errors)

    if errors:
        raise ValidationError(errors)
    return ProgressionPolicy(
        advance_threshold=advance,
        regress_threshold=regress,
        min_sessions_at_level=min_sessions,
    )


def validate_treatment_program(raw: Any) -> TreatmentProgram:
    """Local program invariants; cross-references against games are
    checked by cross_validate_program / validate_treatment."""
    errors = _check_mapping(raw, "program")
    if errors:
        raise ValidationError(errors)

    program_id = _read_id(raw, "program_id", errors)

    specs_raw = raw.get("session_specs")
    specs: list[SessionSpec] = []
    if isinstance(specs_raw, (list, tuple)) and specs_raw:
        for i, spec in enumerate(specs_raw):
            label = f"session_specs[{i}]"
            if not isinstance(spec, Mapping):
                errors.append(f"{label}: expected a mapping")
                continue
            game_ref = _read_id(spec, "game", errors, label)
            level_ref = _read_positive_int(spec, "level", errors, label)
            specs.append(SessionSpec(game=game_ref, level=level_ref))
    else:
        errors.append("session_specs: must be a non-empty list")

    duration_cap = _read_positive_real(raw, "duration_cap", errors)

    policy_raw = raw.get("progression_policy")
    policy = ProgressionPolicy(0.7, 0.3, 1)
    try:
        policy = validate_progression_policy(policy_raw)
    except ValidationError as exc:
        errors.extend(f"progression_policy.{e}" for e in exc.errors)

    if errors:
        raise ValidationError(errors)
    return TreatmentProgram(
        program_id=program_id,
        session_specs=tuple(specs),
        duration_cap=duration_cap,
        progression_policy=policy,
    )


def cross_validate_program(
    program: TreatmentProgram, games: Mapping[str, GameDefinition]
) -> list[str]:
    """Resolve a program's (game, level) references and check the duration
    cap covers every referenced level (cap is minutes, level budget seconds)."""
    errors = []
    cap_seconds = program.duration_cap * MINUTES_TO_SECONDS
    for i, spec in enumerate(program.session_specs):
        label = f"session_specs[{i}]"
        game = games.get(spec.game)
        if game is None:
            errors.append(f"{label}.game: unresolved game '{spec.game}'")
            continue
        level = game.level(spec.level)
        if level is None:
            errors.append(
                f"{label}.level: level {spec.level} not defined by game '{spec.game}'"
            )
            continue
        if cap_seconds < level.max_time:
            errors.append(
                f"duration_cap: {program.duration_cap} min is below the "
                f"{level.max_time} s budget of level {spec.level}"
            )
    return errors


def validate_treatment(
    raw: Any,
    *,
    patients: Mapping[str, PatientProfile],
    doctors: Mapping[str, DoctorProfile],
    games: Mapping[str, GameDefinition],
    programs: Mapping[str, TreatmentProgram],
) -> Treatment:
    """Validate a treatment assembly: every reference must resolve and the
    patient's level must exist in the referenced game."""
    errors = _check_mapping(raw, "treatment")
    if errors:
        raise ValidationError(errors)

    treatment_id = _read_id(raw, "treatment_id", errors)
    patient_ref = _read_id(raw, "patient", errors)
    doctor_ref = _read_id(raw, "doctor", errors)
    game_ref = _read_id(raw, "game", errors)

    program_refs_raw = raw.get("programs")
    program_refs: list[str] = []
    if (
        isinstance(program_refs_raw, (list, tuple))
        and program_refs_raw
        and all(isinstance(p, str) and p for p in program_refs_raw)
    ):
        program_refs = list(program_refs_raw)
    else:
        errors.append("programs: must be a non-empty list of program ids")

    patient = patients.get(patient_ref)
    if patient_ref and patient is None:
        errors.append(f"patient: unresolved reference '{patient_ref}'")
    if doctor_ref and doctor_ref not in doctors:
        errors.append(f"doctor: unresolved reference '{doctor_ref}'")
    game = games.get(game_ref)
    if game_ref and game is None:
        errors.append(f"game: unresolved reference '{game_ref}'")

    if patient is not None and game is not None and game.level(patient.level) is None:
        errors.append(
            f"patient: level {patient.level} is outside game "
            f"'{game.game_id}' levels 1..{game.max_level}"
        )

    for ref in program_refs:
        program = programs.get(ref)
        if program is None:
            errors.append(f"programs: unresolved reference '{ref}'")
            continue
        errors.extend(f"programs[{ref}].{e}" for e in cross_validate_program(program, games))

    if errors:
        raise ValidationError(errors)
    return Treatment(
        treatment_id=treatment_id,
        patient=patient_ref,
        doctor=doctor_ref,
        game=game_ref,
        programs=tuple(program_refs),
    )


def derive_session_config(
    level: LevelDefinition,
    program: TreatmentProgram,
    *,
    session_id: str,
    patient_id: str,
    seed: int,
) -> SessionConfig:
    """Project a level's settings into a runnable session configuration.

    Pure function of its inputs; the program supplies context only (its
    duration cap was already checked against the level budget).
    """
    return SessionConfig(
        session_id=session_id,
        patient_id=patient_id,
        level_number=level.level_number,
        planned_tries=level.tries_per_session,
        try_time=level.try_time,
        max_time=level.max_time,
        object_pool=level.objects,
        distractors_per_try=level.distractors_per_try,
        seed=seed,
    )
