"""Independent reference scorer used as the test oracle.

Recomputes every session measure directly from the raw try records in a
single pass, on purpose sharing no code with the metrics engine. The
error rate here divides the error count directly instead of summing the
two component factors, so the engine's identity claim is checked against
a genuinely different arithmetic path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from artherapist.metrics import TryOutcome, TryRecord


@dataclass
class NaiveMetrics:
    mean_crt: float | None
    sd_crt: float | None
    gf: float
    iaf: float | None
    imf: float | None
    ef: float | None
    crf: float | None
    pi: float | None
    gt: float


def score(
    records: list[TryRecord], planned_tries: int, try_time: float, elapsed: float
) -> NaiveMetrics:
    correct_times = []
    correct = omissions = commissions = uncompleted = 0
    for record in records:
        if record.outcome == TryOutcome.CORRECT:
            correct += 1
            correct_times.append(record.response_time)
        elif record.outcome == TryOutcome.OMISSION_ERROR:
            omissions += 1
        elif record.outcome == TryOutcome.COMMISSION_ERROR:
            commissions += 1
        else:
            uncompleted += 1
    assert correct + omissions + commissions + uncompleted == planned_tries

    attempted = correct + omissions + commissions

    mean = sum(correct_times) / correct if correct >= 1 else None
    sd = None
    if correct >= 2:
        sd = math.sqrt(sum((t - mean) ** 2 for t in correct_times) / (correct - 1))

    gf = attempted / planned_tries

    iaf = omissions / attempted if attempted >= 1 else None
    imf = commissions / attempted if attempted >= 1 else None
    # deliberate single-division path, unlike the engine
    ef = (omissions + commissions) / attempted if attempted >= 1 else None

    crf = sum(correct_times) / (correct * try_time) if correct >= 1 else None

    pi = None
    if crf is not None and ef is not None:
        pi = ((1.0 - crf) + (1.0 - ef)) / 2.0 * gf

    return NaiveMetrics(mean, sd, gf, iaf, imf, ef, crf, pi, elapsed)
