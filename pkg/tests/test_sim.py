import math

import numpy as np
import pytest

from app.core.exceptions import ArgumentError
from app.models.pem import CATEGORIES, LOC_Z, OCCLUSIONS
from app.models.scenario import Action, ScenarioConfig, SimState
from app.services.oracle.enumeration import action_block
from app.services.pem.network import PemModel
from app.services.sim import (
    ConstantSource,
    PemSource,
    proposal_features,
    replay,
    rollout,
    rollout_log_probability,
    salient_of_state,
    simulate,
    step,
)
from tests.helpers.builders import make_trajectory

EPS = 1e-6


def _state(gap: float, speed: float = 19.44, braking: bool = False) -> SimState:
    return SimState(
        step=0,
        ego_pos=0.0,
        ego_speed=speed,
        lead_pos=gap,
        lead_speed=speed,
        braking=braking,
    )


def test_detection_inside_range_brakes_by_one_euler_step():
    nxt = step(_state(8.0), Action(detected=True), ScenarioConfig())
    assert nxt.ego_speed == pytest.approx(19.04)
    assert nxt.ego_pos == pytest.approx(19.44 * 0.05)
    assert nxt.braking


def test_missed_detection_keeps_target_speed():
    nxt = step(_state(8.0), Action(detected=False), ScenarioConfig())
    assert nxt.ego_speed == pytest.approx(19.44)
    assert not nxt.braking


def test_detection_outside_range_does_not_brake():
    nxt = step(_state(14.0), Action(detected=True), ScenarioConfig())
    assert nxt.ego_speed == pytest.approx(19.44)


def test_braking_holds_after_a_later_miss():
    nxt = step(_state(12.0, braking=True), Action(detected=False), ScenarioConfig())
    assert nxt.ego_speed == pytest.approx(19.04)
    assert nxt.braking


def test_ego_never_passes_the_lead():
    stopped = SimState(
        step=0, ego_pos=0.0, ego_speed=19.44, lead_pos=0.5, lead_speed=0.0
    )
    nxt = step(stopped, Action(detected=False), ScenarioConfig())
    assert nxt.gap >= 0.0


def test_lead_stops_after_scripted_braking():
    cfg = ScenarioConfig(horizon=60, lead_brake_step=0, lead_deceleration=8.0)
    history = replay(np.ones((1, cfg.n_actions), dtype=bool), cfg)
    assert history.lead_speed[0, 48] > 0.0
    assert history.lead_speed[0, 49] == 0.0
    assert np.all(history.lead_speed[0, 49:] == 0.0)


def test_always_detected_keeps_clear_of_crash_threshold():
    cfg = ScenarioConfig()
    (traj,) = simulate(ConstantSource(1 - EPS), ConstantSource(1 - EPS), cfg, [0])
    assert traj.gap.min() > cfg.crash_threshold


def test_never_detected_crashes():
    cfg = ScenarioConfig()
    (traj,) = simulate(ConstantSource(EPS), ConstantSource(EPS), cfg, [0])
    assert traj.gap.min() < cfg.crash_threshold


def test_simulation_is_deterministic_per_seed():
    cfg = ScenarioConfig()
    source = ConstantSource(0.3)
    first = simulate(source, source, cfg, [1, 2, 3])
    second = simulate(source, source, cfg, [1, 2, 3])
    for a, b in zip(first, second, strict=True):
        assert np.array_equal(a.actions, b.actions)
        assert np.array_equal(a.ego_pos, b.ego_pos)
        assert np.array_equal(a.target_p, b.target_p)


def test_batch_does_not_change_individual_rollouts():
    cfg = ScenarioConfig.small()
    source = ConstantSource(0.4)
    batch = simulate(source, source, cfg, [5, 6, 7])
    (alone,) = simulate(source, source, cfg, [6])
    assert np.array_equal(batch[1].actions, alone.actions)
    assert np.array_equal(batch[1].gap, alone.gap)


def test_replaying_actions_reproduces_states():
    cfg = ScenarioConfig()
    pem = PemSource(PemModel.gap_logistic(-0.25, 3.0))
    trajectories = simulate(pem, pem, cfg, list(range(20)))
    actions = np.stack([traj.actions for traj in trajectories])
    history = replay(actions, cfg)
    for i, traj in enumerate(trajectories):
        assert np.array_equal(history.ego_pos[i], traj.ego_pos)
        assert np.array_equal(history.ego_speed[i], traj.ego_speed)
        assert np.array_equal(history.gap[i], traj.gap)


def test_replay_rejects_wrong_sequence_length():
    with pytest.raises(ArgumentError):
        replay(np.ones((1, 3), dtype=bool), ScenarioConfig.small())


def test_streams_match_when_sampler_is_the_target():
    pem = PemSource(PemModel.gap_logistic(-0.25, 4.0))
    (traj,) = simulate(pem, pem, ScenarioConfig(), [9])
    assert np.array_equal(traj.target_p, traj.proposal_p)


def test_recorded_probabilities_stay_in_clamp_band():
    trajectories = simulate(
        ConstantSource(0.0), ConstantSource(1.0), ScenarioConfig.small(), [0, 1]
    )
    for traj in trajectories:
        for stream in (traj.target_p, traj.proposal_p):
            assert stream.min() >= EPS
            assert stream.max() <= 1 - EPS


def test_streams_record_the_realized_action():
    sampler = ConstantSource(0.3)
    target = ConstantSource(0.8)
    (traj,) = simulate(sampler, target, ScenarioConfig.small(), [4])
    expected_q = np.where(traj.actions, 0.3, 0.7)
    expected_p = np.where(traj.actions, 0.8, 0.2)
    assert np.allclose(traj.proposal_p, expected_q)
    assert np.allclose(traj.target_p, expected_p)


def test_detection_never_shrinks_the_minimum_gap():
    cfg = ScenarioConfig.small()
    actions = action_block(cfg.n_actions, 0, 0)
    base_min = replay(actions, cfg).gap.min(axis=1)
    for j in range(cfg.n_actions):
        missed = ~actions[:, j]
        flipped = actions[missed].copy()
        flipped[:, j] = True
        flipped_min = replay(flipped, cfg).gap.min(axis=1)
        assert np.all(flipped_min >= base_min[missed]), f"flip at step {j}"


@pytest.mark.parametrize("gap", [12.3, 0.0])
def test_salient_projection_is_a_car_straight_ahead(gap):
    salient = salient_of_state(_state(gap))
    assert salient[CATEGORIES.index("car")] == 1.0
    assert salient[len(CATEGORIES) + OCCLUSIONS.index("none")] == 1.0
    assert salient[LOC_Z] == gap
    assert salient[-1] == 0.0


def test_salient_projection_depends_only_on_gap():
    a = SimState(step=3, ego_pos=10.0, ego_speed=5.0, lead_pos=22.0, lead_speed=1.0)
    b = SimState(step=9, ego_pos=40.0, ego_speed=15.0, lead_pos=52.0, lead_speed=9.0)
    assert np.array_equal(salient_of_state(a), salient_of_state(b))
    assert proposal_features(a).tolist() == [12.0]


def test_rollout_log_probability_of_twenty_misses():
    traj = make_trajectory(np.arange(21.0), target_p=[0.01] * 20)
    assert rollout_log_probability(traj) == pytest.approx(20 * math.log(0.01))


def test_rollout_log_probability_of_product():
    traj = make_trajectory([3.0, 2.0, 1.0], proposal_p=[0.5, 0.25])
    assert rollout_log_probability(traj, "proposal") == pytest.approx(math.log(0.125))


def test_missing_stream_is_an_argument_error():
    with pytest.raises(ArgumentError):
        rollout_log_probability(make_trajectory([3.0, 2.0]), "proposal")


def test_single_rollout_matches_its_batch_entry():
    cfg = ScenarioConfig.small()
    sampler, target = ConstantSource(0.4), ConstantSource(0.9)
    traj = rollout(sampler, target, cfg, 6)
    (batched,) = simulate(sampler, target, cfg, [6])
    assert np.array_equal(traj.actions, batched.actions)
    assert np.array_equal(traj.target_p, batched.target_p)
