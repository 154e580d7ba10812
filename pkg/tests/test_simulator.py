"""Behavior model: degenerate parameter corners, Monte-Carlo rates,
determinism, and sweep aggregation."""

from __future__ import annotations

import pytest

from artherapist.engine import replay
from artherapist.metrics import compute_session_metrics
from artherapist.presets import sweep_session_config
from artherapist.rng import RandomStream
from artherapist.simulator import (
    BehaviorParams,
    NoResponse,
    Quit,
    Respond,
    simulate_session,
    simulate_try,
    sweep,
)
from artherapist.storage import event_to_line


def params(**overrides) -> BehaviorParams:
    base = dict(attention=0.75, impulsivity=0.1, dropout_hazard=0.0, seed=5)
    base.update(overrides)
    return BehaviorParams(**base)


class TestBehaviorParams:
    def test_ranges_enforced(self):
        with pytest.raises(ValueError, match="attention"):
            BehaviorParams(attention=1.5)
        with pytest.raises(ValueError, match="dropout_hazard"):
            BehaviorParams(dropout_hazard=-0.1)
        with pytest.raises(ValueError, match="rt_log_sd"):
            BehaviorParams(rt_log_sd=0.0)

    def test_from_dict_rejects_unknown_fields(self):
        with pytest.raises(ValueError, match="unknown fields"):
            BehaviorParams.from_dict({"attentiveness": 0.5})

    def test_round_trip(self):
        p = params(attention=0.3)
        assert BehaviorParams.from_dict(p.to_dict()) == p


class TestSimulateTry:
    def presented(self, seed=1):
        from artherapist.engine import GameSession

        session = GameSession(sweep_session_config(seed=seed))
        session.start()
        return session.current_presented

    def test_full_attention_always_hits_target(self):
        presented = self.presented()
        stream = RandomStream(9)
        for i in range(200):
            action = simulate_try(
                params(attention=1.0, impulsivity=0.0), presented, 5.0, stream.split(str(i))
            )
            assert isinstance(action, Respond)
            assert action.object_id == presented.target_object_id
            assert 0.0 < action.response_time <= 5.0

    def test_no_attention_always_omits(self):
        presented = self.presented()
        stream = RandomStream(10)
        for i in range(200):
            action = simulate_try(
                params(attention=0.0, impulsivity=0.0), presented, 5.0, stream.split(str(i))
            )
            assert isinstance(action, NoResponse)

    def test_certain_dropout_always_quits(self):
        presented = self.presented()
        action = simulate_try(
            params(dropout_hazard=1.0), presented, 5.0, RandomStream(11)
        )
        assert isinstance(action, Quit)

    def test_pure_impulsivity_hits_target_at_chance(self):
        # four objects on display, so the target rate converges to 1/4
        presented = self.presented()
        stream = RandomStream(12)
        hits = 0
        n = 10_000
        for i in range(n):
            action = simulate_try(
                params(attention=0.0, impulsivity=1.0), presented, 5.0, stream.split(str(i))
            )
            assert isinstance(action, Respond)
            hits += action.object_id == presented.target_object_id
        assert hits / n == pytest.approx(0.25, abs=0.02)


class TestSimulateSession:
    def test_perfect_attention_full_engagement(self):
        config = sweep_session_config(seed=21)
        session = simulate_session(params(attention=1.0, impulsivity=0.0), config)
        tally = session.live_tally()
        assert tally.correct == config.planned_tries
        assert (tally.omission_errors, tally.commission_errors, tally.uncompleted) == (0, 0, 0)
        assert compute_session_metrics(tally).gf == 1.0

    def test_certain_dropout_aborts_immediately(self):
        config = sweep_session_config(seed=22)
        session = simulate_session(params(dropout_hazard=1.0), config)
        tally = session.live_tally()
        assert tally.uncompleted == config.planned_tries
        assert session.events[-1].kind == "session_aborted"

    def test_fixed_seeds_reproduce_logs_byte_for_byte(self):
        config = sweep_session_config(seed=23)
        a = simulate_session(params(seed=77), config)
        b = simulate_session(params(seed=77), config)
        assert [event_to_line(e) for e in a.events] == [event_to_line(e) for e in b.events]

    def test_simulated_logs_always_replayable(self):
        for seed in range(120):
            config = sweep_session_config(seed=seed)
            p = BehaviorParams(
                attention=(seed % 10) / 10.0,
                impulsivity=(seed % 7) / 7.0,
                dropout_hazard=(seed % 5) / 10.0,
                seed=seed,
            )
            session = simulate_session(p, config)
            assert replay(
                session.events, config.try_time, config.planned_tries
            ) == session.live_tally()

    def test_response_times_within_budget(self):
        config = sweep_session_config(seed=31, try_time=1.5)
        session = simulate_session(params(rt_log_mean=1.2, seed=3), config)
        for value in session.live_tally().crt_list:
            assert 0.0 < value <= 1.5


class TestSweep:
    def test_single_cell_single_session_equals_that_session(self):
        config = sweep_session_config(seed=41)
        cell_params = params(seed=91)
        [cell] = sweep([cell_params], 1, config)
        expected_config = sweep_session_config(seed=41)
        expected = simulate_session(
            BehaviorParams(
                **{**cell_params.to_dict(), "seed": RandomStream(91).split("session/0").seed}
            ),
            expected_config.__class__(
                **{
                    **expected_config.__dict__,
                    "session_id": "cell0-s0",
                    "seed": RandomStream(41).split("cell/0/session/0").seed,
                }
            ),
        )
        metrics = compute_session_metrics(expected.live_tally()).to_dict()
        for key, aggregate in cell.aggregates.items():
            if metrics[key] is None:
                assert aggregate.mean is None and aggregate.defined == 0
            else:
                assert aggregate.mean == pytest.approx(metrics[key], abs=1e-12)
                assert aggregate.defined == 1

    def test_attention_orders_inattention_factor(self):
        config = sweep_session_config(seed=52)
        grid = [
            params(attention=0.2, seed=1),
            params(attention=0.9, seed=2),
        ]
        low, high = sweep(grid, 400, config)
        assert low.aggregates["IAF"].mean > high.aggregates["IAF"].mean + 0.1

    def test_impulsivity_orders_impulsivity_factor(self):
        config = sweep_session_config(seed=53)
        grid = [
            params(impulsivity=0.1, seed=3),
            params(impulsivity=0.8, seed=4),
        ]
        low, high = sweep(grid, 400, config)
        assert high.aggregates["IMF"].mean > low.aggregates["IMF"].mean + 0.1

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            sweep([], 10, sweep_session_config())

    def test_deterministic(self):
        config = sweep_session_config(seed=60)
        grid = [params(seed=8)]
        first = sweep(grid, 25, config)
        second = sweep(grid, 25, config)
        assert first == second
