import numpy as np
import pytest

from app.core.exceptions import StallError
from app.models.config import CemConfig, OptimizerConfig
from app.models.scenario import ScenarioConfig
from app.services.ais import (
    ProposalModel,
    ProposalSource,
    adaptive_est,
    cem_threshold,
    elite_quota,
    kl_training_set,
    proposal_curve,
    select_elite,
)
from app.services.oracle.enumeration import exact_mu
from app.services.pem.network import PemModel
from app.services.sim.dynamics import KinematicBatch
from app.services.sim.rollout import replay
from app.services.sim.sources import PemSource
from app.services.stl.robustness import batch_robustness, semantics_for
from tests.helpers.builders import (
    CLASSICAL,
    crash_formula,
    make_trajectory,
    tuned_gap_pem,
)

SMALL = ScenarioConfig.small()
FORMULA = crash_formula(SMALL.horizon)
FAST_CEM = CemConfig(
    stages=5,
    samples_per_stage=40,
    eval_samples=40,
    pretrain_samples=20,
    optimizer=OptimizerConfig(learning_rate=1e-2, epochs=150),
)


def _braking_band(scenario: ScenarioConfig) -> np.ndarray:
    """Undetected-path gaps at which a first detection still prevents the crash."""
    n = scenario.n_actions
    sequences = np.zeros((n + 1, n), dtype=bool)
    for t in range(n):
        sequences[t + 1, t] = True
    history = replay(sequences, scenario)
    robustness = batch_robustness(
        history.channels(), crash_formula(scenario.horizon), semantics_for(CLASSICAL)
    )
    gaps = history.gap[0, :n]
    saved = robustness[1:] > 0
    return gaps[saved & (gaps < scenario.emergency_range)]


def test_braking_band_of_small_scenario():
    band = _braking_band(SMALL)
    assert len(band) == 4
    assert np.all(np.diff(band) < 0)
    assert band[0] < SMALL.emergency_range


def test_elite_on_a_plateau_is_the_rollouts_strictly_below():
    robustness = np.array([7.0] * 195 + [5.6] * 4 + [3.7])
    quota = elite_quota(200, 0.95, "lower")
    gamma_k = cem_threshold(np.sort(robustness), 0.95, tail="lower")

    assert quota == 11
    assert gamma_k == 7.0
    assert list(select_elite(robustness, gamma_k, quota)) == [195, 196, 197, 198, 199]


def test_elite_keeps_the_tie_when_nothing_lies_below():
    assert select_elite(np.full(50, 7.0), 7.0, quota=3).size == 50


def test_elite_within_quota_keeps_the_level():
    assert list(select_elite(np.arange(20.0), 2.0, quota=3)) == [0, 1, 2]


def _braking_trajectory():
    traj = make_trajectory(
        [12.0, 11.0, 9.0, 8.0, 7.0],
        target_p=[0.9] * 4,
        proposal_p=[0.5] * 4,
        actions=[True, False, True, True],
    )
    traj.braking = np.array([False, False, False, True, True])
    return traj


def test_kl_rows_come_from_states_that_can_start_braking():
    data = kl_training_set(
        [_braking_trajectory()], np.array([-1.0]), 0.0, 0.1, emergency_range=10.0
    )
    assert data.features.ravel().tolist() == [9.0]
    assert data.actions.tolist() == [1.0]
    assert data.elite.tolist() == [0]


def test_kl_rows_skip_braking_states_without_a_range():
    data = kl_training_set([_braking_trajectory()], np.array([-1.0]), 0.0, 0.1)
    assert data.features.ravel().tolist() == [12.0, 11.0, 9.0]


def test_elite_without_adaptable_states_stalls():
    traj = _braking_trajectory()
    traj.braking = np.ones(5, dtype=bool)
    with pytest.raises(StallError):
        kl_training_set([traj], np.array([-1.0]), 0.0, 0.1, emergency_range=10.0)


def test_sampler_follows_pem_outside_emergency_range():
    pem = PemSource(PemModel.gap_logistic(-0.25, 2.0))
    sampler = ProposalSource(ProposalModel.untrained(), pem, emergency_range=10.0)
    gaps = np.array([12.0, 10.0, 9.0, 4.0])
    q = sampler.at_gaps(gaps)
    p = pem.at_gaps(gaps)
    assert q[:2].tolist() == p[:2].tolist()
    assert q[2:] == pytest.approx([0.5, 0.5])


def test_attenuating_sampler_never_detects_more_readily_than_pem():
    pem = PemSource(PemModel.gap_logistic(-0.25, 2.0))
    sampler = ProposalSource(
        ProposalModel.untrained(), pem, emergency_range=10.0, attenuate_only=True
    )
    gaps = np.array([9.0, 4.0])
    q = sampler.at_gaps(gaps)
    assert q[0] == pytest.approx(pem.at_gaps(gaps)[0])
    assert q[1] == pytest.approx(0.5)
    assert np.all(q <= pem.at_gaps(gaps) + 1e-12)


def test_sampler_follows_pem_once_braking():
    pem = PemSource(PemModel.gap_logistic(-0.25, 2.0))
    sampler = ProposalSource(ProposalModel.untrained(), pem, emergency_range=10.0)
    batch = KinematicBatch(
        step=4,
        ego_pos=np.zeros(2),
        ego_speed=np.full(2, 10.0),
        lead_pos=np.full(2, 9.0),
        lead_speed=np.full(2, 8.0),
        braking=np.array([False, True]),
    )
    q = sampler.probabilities(batch)
    assert q[0] == pytest.approx(0.5)
    assert q[1] == pytest.approx(pem.probabilities(batch)[1])


def test_always_detected_pem_never_fails_and_stalls():
    pem = PemModel.constant(1 - 1e-6)
    result = adaptive_est(pem, FORMULA, SMALL, FAST_CEM, CLASSICAL, seed=0)
    assert result.report.mu_hat == 0.0
    assert result.report.failures == 0
    assert result.report.stalled
    assert all(stage.n_fail == 0 for stage in result.stages)


def test_blind_pem_fails_at_the_first_stage():
    pem = PemModel.constant(1e-6)
    result = adaptive_est(pem, FORMULA, SMALL, FAST_CEM, CLASSICAL, seed=0)
    assert result.report.stage_thresholds[0] == FAST_CEM.gamma
    assert result.report.stage_failure_fractions[0] == 1.0
    assert result.report.failure_fraction == 1.0
    assert result.report.mu_hat == pytest.approx(1.0, rel=1e-3)


def test_adaptive_run_is_deterministic_per_seed():
    pem = PemModel.gap_logistic(-0.25, 2.0)
    first = adaptive_est(pem, FORMULA, SMALL, FAST_CEM, CLASSICAL, seed=11)
    second = adaptive_est(pem, FORMULA, SMALL, FAST_CEM, CLASSICAL, seed=11)
    assert first.report.model_dump() == second.report.model_dump()
    assert np.array_equal(first.proposal.params, second.proposal.params)


def test_report_carries_every_stage():
    pem = PemModel.gap_logistic(-0.25, 2.0)
    result = adaptive_est(pem, FORMULA, SMALL, FAST_CEM, CLASSICAL, seed=3)
    report = result.report
    assert report.method == "adaptive"
    assert report.seed == 3
    assert len(report.stage_thresholds) == len(result.stages)
    assert all(level >= FAST_CEM.gamma for level in report.stage_thresholds)
    assert all(stage.n_elite >= 1 for stage in result.stages)
    assert len(result.final_trajectories) == FAST_CEM.eval_samples
    assert report.n_simulations >= FAST_CEM.pretrain_samples + FAST_CEM.eval_samples


def test_pretrained_proposal_starts_near_zero_log_weight():
    pem = PemModel.gap_logistic(-0.25, 3.0)
    cem = FAST_CEM.model_copy(update={"optimizer": OptimizerConfig(learning_rate=1e-2)})
    result = adaptive_est(pem, FORMULA, SMALL, cem, CLASSICAL, seed=5)
    assert abs(result.stages[0].mean_log_weight) < 1.0


def test_requested_curve_stages_are_recorded():
    pem = PemModel.gap_logistic(-0.25, 2.0)
    result = adaptive_est(
        pem, FORMULA, SMALL, FAST_CEM, CLASSICAL, seed=0, curve_stages=(0, 2)
    )
    assert set(result.curves) == {0, 2}
    curve = result.curves[0]
    assert len(curve) == 101
    assert curve[0].gap_m == 0.0
    assert curve[-1].gap_m == pytest.approx(SMALL.initial_gap)


def test_adapted_sampler_matches_pem_at_large_gaps():
    pem = PemModel.gap_logistic(-0.25, 2.0)
    result = adaptive_est(pem, FORMULA, SMALL, FAST_CEM, CLASSICAL, seed=1)
    far = [p for p in result.curve if p.gap_m >= SMALL.emergency_range]
    assert far
    assert all(abs(p.sampler_p - p.pem_p) <= 0.02 for p in far)
    assert all(p.sampler_p <= p.pem_p + 1e-12 for p in result.curve)


@pytest.fixture(scope="module")
def tuned_runs():
    pem, _ = tuned_gap_pem(SMALL, FORMULA, target_log10=-7.0)
    oracle = exact_mu(pem, SMALL, FORMULA, CLASSICAL)
    cem = CemConfig(stages=10, samples_per_stage=200, eval_samples=200)
    results = [
        adaptive_est(pem, FORMULA, SMALL, cem, CLASSICAL, seed=seed)
        for seed in range(10)
    ]
    return pem, oracle, results


@pytest.mark.slow
def test_adaptive_estimate_tracks_exact_probability(tuned_runs):
    _, oracle, results = tuned_runs
    mu = oracle.mu
    assert 1e-8 <= mu <= 1e-6

    within = sum(
        1
        for result in results
        if result.report.mu_hat > 0 and mu / 3 <= result.report.mu_hat <= 3 * mu
    )
    assert within >= 8
    assert all(result.report.wall_clock_s < 60.0 for result in results)


@pytest.mark.slow
def test_adapted_proposal_samples_likely_failures(tuned_runs):
    _, oracle, results = tuned_runs
    assert oracle.mean_failure_nll is not None

    representative = 0
    for result in results:
        report = result.report
        if report.failure_fraction < 0.30 or report.mean_failure_nll is None:
            continue
        if abs(report.mean_failure_nll - oracle.mean_failure_nll) <= 2.0:
            representative += 1
    assert representative >= 8


@pytest.mark.slow
def test_adapted_proposal_lowers_detection_in_braking_band(tuned_runs):
    pem, _, results = tuned_runs
    band = _braking_band(SMALL)

    lowered = 0
    for result in results:
        points = proposal_curve(result.proposal, pem, band)
        if all(point.proposal_p <= point.pem_p for point in points):
            lowered += 1
    assert lowered >= 9
