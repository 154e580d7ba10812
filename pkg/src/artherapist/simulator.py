"""Synthetic patient behavior driven against the session engine.

A small generative model, not a validated cognitive one: it exists so
the whole system can be exercised end to end and so the measures'
discriminative behavior is testable without human subjects. Per try the
decision order is fixed: quit, else answer impulsively (uniform over
everything on display, with a faster response-time distribution), else
register the target with the configured attention probability, else let
the try time out. Response times are lognormal, clamped to the per-try
budget, since reaction times are right-skewed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace, fields
from typing import Any, Mapping

from .domain import SessionConfig
from .engine import GameSession, TryPresented
from .metrics import METRIC_KEYS, compute_session_metrics
from .rng import RandomStream

#: impulsive answers use a location parameter this much lower (log-seconds)
IMPULSIVE_SPEEDUP = 0.5


@dataclass(frozen=True)
class BehaviorParams:
    """Knobs of the generative model, all probabilities in [0, 1]."""

    attention: float = 0.75
    impulsivity: float = 0.15
    rt_log_mean: float = 0.4
    rt_log_sd: float = 0.35
    dropout_hazard: float = 0.05
    seed: int = 0

    def check(self) -> list[str]:
        errors = []
        for name in ("attention", "impulsivity", "dropout_hazard"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
                errors.append(f"{name}: must lie in [0, 1]")
        if not (isinstance(self.rt_log_mean, (int, float)) and math.isfinite(self.rt_log_mean)):
            errors.append("rt_log_mean: must be a finite number")
        if not (isinstance(self.rt_log_sd, (int, float)) and self.rt_log_sd > 0):
            errors.append("rt_log_sd: must be > 0")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            errors.append("seed: must be a non-negative integer")
        return errors

    def __post_init__(self):
        errors = self.check()
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "BehaviorParams":
        if not isinstance(raw, Mapping):
            raise ValueError("behavior parameters: expected a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"behavior parameters: unknown fields {sorted(unknown)}")
        return cls(**dict(raw))

    def to_dict(self) -> dict:
        return {
            "attention": self.attention,
            "impulsivity": self.impulsivity,
            "rt_log_mean": self.rt_log_mean,
            "rt_log_sd": self.rt_log_sd,
            "dropout_hazard": self.dropout_hazard,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Respond:
    object_id: str
    response_time: float


@dataclass(frozen=True)
class NoResponse:
    pass


@dataclass(frozen=True)
class Quit:
    pass


SimAction = Respond | NoResponse | Quit


def simulate_try(
    params: BehaviorParams, presented: TryPresented, try_time: float, stream: RandomStream
) -> SimAction:
    """One try's action under the generative model; response times are
    clamped into (0, try_time]."""
    if stream.random() < params.dropout_hazard:
        return Quit()
    if stream.random() < params.impulsivity:
        choice = stream.choice(presented.placements)
        rt = stream.lognormal(params.rt_log_mean - IMPULSIVE_SPEEDUP, params.rt_log_sd)
        return Respond(choice.object_id, min(rt, try_time))
    if stream.random() < params.attention:
        rt = stream.lognormal(params.rt_log_mean, params.rt_log_sd)
        return Respond(presented.target_object_id, min(rt, try_time))
    return NoResponse()


def simulate_session(params: BehaviorParams, config: SessionConfig) -> GameSession:
    """Run one full session; deterministic given (params.seed, config.seed).

    Returns the finished GameSession with its complete event log.
    """
    session = GameSession(config)
    session.start()
    behavior = RandomStream(params.seed)
    while not session.is_finished:
        presented = session.current_presented
        action = simulate_try(
            params, presented, config.try_time, behavior.split(f"try/{presented.try_index}")
        )
        if isinstance(action, Quit):
            session.abort(at=session.try_start)
        elif isinstance(action, Respond):
            position = next(
                p.position for p in presented.placements if p.object_id == action.object_id
            )
            session.record_response(
                action.object_id, at=session.try_start + action.response_time,
                player_position=position,
            )
        else:
            session.deliver_timeout(at=session.try_deadline)
    return session


@dataclass(frozen=True)
class MetricAggregate:
    mean: float | None
    sd: float | None
    defined: int


@dataclass(frozen=True)
class SweepCell:
    index: int
    params: BehaviorParams
    sessions: int
    aggregates: dict[str, MetricAggregate]


def _aggregate(values: list[float]) -> MetricAggregate:
    # sums before ratios, so aggregation is order-independent
    n = len(values)
    if n == 0:
        return MetricAggregate(None, None, 0)
    mean = sum(values) / n
    if n == 1:
        return MetricAggregate(mean, None, 1)
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    return MetricAggregate(mean, sd, n)


def sweep(
    grid: list[BehaviorParams], sessions_per_cell: int, config: SessionConfig
) -> list[SweepCell]:
    """Mean and spread of every session measure per behavior cell.

    Deterministic given the cell seeds and the config seed; cells and
    sessions are independent, so execution order does not matter.
    """
    if not grid:
        raise ValueError("parameter grid must not be empty")
    if sessions_per_cell < 1:
        raise ValueError("sessions_per_cell must be >= 1")

    cells = []
    config_stream = RandomStream(config.seed)
    for ci, params in enumerate(grid):
        samples: dict[str, list[float]] = {key: [] for key in METRIC_KEYS}
        behavior_stream = RandomStream(params.seed)
        for si in range(sessions_per_cell):
            cell_config = replace(
                config,
                session_id=f"cell{ci}-s{si}",
                seed=config_stream.split(f"cell/{ci}/session/{si}").seed,
            )
            cell_params = replace(params, seed=behavior_stream.split(f"session/{si}").seed)
            session = simulate_session(cell_params, cell_config)
            metrics = compute_session_metrics(session.live_tally())
            for key, value in metrics.to_dict().items():
                if value is not None:
                    samples[key].append(value)
        cells.append(
            SweepCell(
                index=ci,
                params=params,
                sessions=sessions_per_cell,
                aggregates={key: _aggregate(values) for key, values in samples.items()},
            )
        )
    return cells
