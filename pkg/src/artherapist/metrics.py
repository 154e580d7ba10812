"""Session performance measures, computed from a session tally.

All operations are pure functions of immutable inputs. Counters follow
the standard continuous-performance-test vocabulary: a session of T
planned tries partitions into correct tries (C), omission errors (no
response within the per-try budget), commission errors (response to a
non-target), and uncompleted tries (K, never attempted because play
stopped early).

Degenerate denominators yield absence, never zero and never NaN: a
silent zero would fake good performance. Absence is an explicit None in
SessionMetrics and serializes as an explicit null.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable


class TryOutcome(str, enum.Enum):
    CORRECT = "correct"
    COMMISSION_ERROR = "commission_error"
    OMISSION_ERROR = "omission_error"
    UNCOMPLETED = "uncompleted"


#: outcomes that carry a response time
RESPONDED = (TryOutcome.CORRECT, TryOutcome.COMMISSION_ERROR)


@dataclass(frozen=True)
class TryRecord:
    """One resolved (or never-resolved) try of a session."""

    try_index: int
    outcome: TryOutcome
    response_time: float | None = None

    def check(self, try_time: float) -> list[str]:
        errors = []
        if self.outcome in RESPONDED:
            if self.response_time is None:
                errors.append(f"try {self.try_index}: responded outcome needs a response_time")
            elif not (0.0 < self.response_time <= try_time):
                errors.append(
                    f"try {self.try_index}: response_time {self.response_time} "
                    f"outside (0, {try_time}]"
                )
        elif self.response_time is not None:
            errors.append(f"try {self.try_index}: {self.outcome.value} carries no response_time")
        return errors


@dataclass(frozen=True)
class SessionTally:
    """Counted outcomes of one session.

    correct + omission_errors + commission_errors + uncompleted must
    partition planned_tries; crt_list holds the correct response times
    in try order, each in (0, try_time].
    """

    planned_tries: int
    correct: int
    omission_errors: int
    commission_errors: int
    uncompleted: int
    crt_list: tuple[float, ...]
    try_time: float
    elapsed: float  # actual session time, seconds

    @property
    def incorrect(self) -> int:
        """Errors of either kind; always derived, never stored."""
        return self.omission_errors + self.commission_errors

    @property
    def attempted(self) -> int:
        return self.correct + self.incorrect

    def check(self) -> list[str]:
        errors = []
        if self.planned_tries < 1:
            errors.append("planned_tries: must be >= 1")
        for name in ("correct", "omission_errors", "commission_errors", "uncompleted"):
            if getattr(self, name) < 0:
                errors.append(f"{name}: must be >= 0")
        if (
            self.correct + self.omission_errors + self.commission_errors + self.uncompleted
            != self.planned_tries
        ):
            errors.append("counts must partition planned_tries")
        if len(self.crt_list) != self.correct:
            errors.append("crt_list length must equal the correct count")
        if not (math.isfinite(self.try_time) and self.try_time > 0):
            errors.append("try_time: must be a positive finite number")
        else:
            for i, t in enumerate(self.crt_list):
                if not (0.0 < t <= self.try_time):
                    errors.append(f"crt_list[{i}]: {t} outside (0, {self.try_time}]")
        if not (math.isfinite(self.elapsed) and self.elapsed >= 0):
            errors.append("elapsed: must be a finite number >= 0")
        return errors


@dataclass(frozen=True)
class SessionMetrics:
    """The per-session measure vector; None marks an undefined measure."""

    mean_crt: float | None
    sd_crt: float | None
    gf: float | None
    iaf: float | None
    imf: float | None
    ef: float | None
    crf: float | None
    pi: float | None
    gt: float

    def to_dict(self) -> dict:
        """Wire form: the documented report keys, absent values as null."""
        return {
            "M": self.mean_crt,
            "SD": self.sd_crt,
            "GF": self.gf,
            "IAF": self.iaf,
            "IMF": self.imf,
            "EF": self.ef,
            "CRF": self.crf,
            "PI": self.pi,
            "GT": self.gt,
        }


METRIC_KEYS = ("M", "SD", "GF", "IAF", "IMF", "EF", "CRF", "PI", "GT")


def tally(
    tries: Iterable[TryRecord], planned_tries: int, try_time: float, elapsed: float
) -> SessionTally:
    """Count a record list into a tally; crt_list preserves try order.

    Raises ValueError on a record count mismatch or any record violating
    the per-record rules (for example a response time beyond the budget).
    """
    records = list(tries)
    errors = []
    if len(records) != planned_tries:
        errors.append(f"expected {planned_tries} records, got {len(records)}")
    for record in records:
        errors.extend(record.check(try_time))
    if errors:
        raise ValueError("; ".join(errors))

    counts = {outcome: 0 for outcome in TryOutcome}
    crt_list = []
    for record in records:
        counts[record.outcome] += 1
        if record.outcome == TryOutcome.CORRECT:
            crt_list.append(float(record.response_time))

    result = SessionTally(
        planned_tries=planned_tries,
        correct=counts[TryOutcome.CORRECT],
        omission_errors=counts[TryOutcome.OMISSION_ERROR],
        commission_errors=counts[TryOutcome.COMMISSION_ERROR],
        uncompleted=counts[TryOutcome.UNCOMPLETED],
        crt_list=tuple(crt_list),
        try_time=try_time,
        elapsed=elapsed,
    )
    remaining = result.check()
    if remaining:
        raise ValueError("; ".join(remaining))
    return result


def mean_crt(t: SessionTally) -> float | None:
    """Mean correct response time: sum(crt) / correct; None when no
    correct try exists."""
    if t.correct < 1:
        return None
    return sum(t.crt_list) / t.correct


def sd_crt(t: SessionTally) -> float | None:
    """Sample standard deviation of the correct response times, divisor
    correct - 1; None below two correct tries."""
    if t.correct < 2:
        return None
    m = mean_crt(t)
    return math.sqrt(sum((x - m) ** 2 for x in t.crt_list) / (t.correct - 1))


def engagement_factor(t: SessionTally) -> float:
    """Share of planned tries actually attempted: (correct + incorrect)
    over planned. 1.0 for a completed session, 0.0 for an immediate
    dropout."""
    return t.attempted / t.planned_tries


def inattention_factor(t: SessionTally) -> float | None:
    """Omission errors over attempted tries; uncompleted tries are
    excluded from the denominator. None when nothing was attempted."""
    if t.attempted < 1:
        return None
    return t.omission_errors / t.attempted


def impulsivity_factor(t: SessionTally) -> float | None:
    """Commission errors over attempted tries; None when nothing was
    attempted."""
    if t.attempted < 1:
        return None
    return t.commission_errors / t.attempted


def error_factor(t: SessionTally) -> float | None:
    """Overall error rate over attempted tries.

    Computed as inattention + impulsivity over the exact same arithmetic
    path, so the identity ef == iaf + imf holds bit for bit.
    """
    iaf = inattention_factor(t)
    imf = impulsivity_factor(t)
    if iaf is None or imf is None:
        return None
    return iaf + imf


def correct_response_factor(t: SessionTally) -> float | None:
    """Total correct response time relative to the maximum allowed for
    the correct tries: sum(crt) / (correct * try_time). In (0, 1] when
    defined because every crt lies in (0, try_time]; None when no
    correct try exists."""
    if t.correct < 1:
        return None
    return sum(t.crt_list) / (t.correct * t.try_time)


def performance_index(crf: float, ef: float, gf: float) -> float:
    """Composite score: [((1 - crf) + (1 - ef)) / 2] * gf.

    Strictly decreasing in crf and in ef for fixed gf > 0; strictly
    increasing in gf while the mean term stays positive. All inputs must
    be present and in [0, 1].
    """
    for name, value in (("crf", crf), ("ef", ef), ("gf", gf)):
        if value is None:
            raise ValueError(f"{name}: required for the performance index")
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"{name}: {value} outside [0, 1]")
    return ((1.0 - crf) + (1.0 - ef)) / 2.0 * gf


def compute_session_metrics(t: SessionTally) -> SessionMetrics:
    """Assemble the full measure vector from a tally.

    Presence rules: mean needs one correct try, sd two; the factor trio
    needs at least one attempted try; crf and pi additionally need a
    correct try. Pure and deterministic.
    """
    errors = t.check()
    if errors:
        raise ValueError("; ".join(errors))

    crf = correct_response_factor(t)
    ef = error_factor(t)
    gf = engagement_factor(t)
    pi = performance_index(crf, ef, gf) if crf is not None and ef is not None else None

    return SessionMetrics(
        mean_crt=mean_crt(t),
        sd_crt=sd_crt(t),
        gf=gf,
        iaf=inattention_factor(t),
        imf=impulsivity_factor(t),
        ef=ef,
        crf=crf,
        pi=pi,
        gt=t.elapsed,
    )
