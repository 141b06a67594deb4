import math

import numpy as np
import pytest

from acgd.envs import ControllableSuccessEnv
from acgd.params import sample_assignment
from acgd.sched import (
    CurriculumConfig, CurriculumScheduler, CurriculumState, DifficultyCoefficient, SuccessRateTracker,
    mixing_probability, choose_reset_mode, update_difficulty, record_episode_outcome, curriculum_step,
)
from common.domain import ResetMode, EpisodeOutcome
from common.errors import ConfigurationError


def _state(sr_d=0.0, sr_r=0.0, delta_d=0.0, delta_r=0.0, iteration=0, total=100, seen=1):
    return CurriculumState(
        demo=DifficultyCoefficient(delta_d, SuccessRateTracker(sr_d, 0.05, seen)),
        regular=DifficultyCoefficient(delta_r, SuccessRateTracker(sr_r, 0.05, seen)),
        total_iterations=total,
        iteration=iteration)


def test_mixing_probability_examples():
    assert mixing_probability(0.0, 0, 100) == 0.0
    assert mixing_probability(1.0, 100, 100) == 1.0
    assert mixing_probability(0.4, 50, 100) == pytest.approx(0.45, abs=1e-12)


def test_mixing_probability_rejects_zero_iterations():
    with pytest.raises(ConfigurationError):
        mixing_probability(0.5, 0, 0)


def test_choose_reset_mode_certain_branches(rng):
    never = _state(sr_r=0.0, iteration=0)
    always = _state(sr_r=1.0, iteration=100)
    assert all(choose_reset_mode(never, rng) is ResetMode.DEMONSTRATION for _ in range(1000))
    assert all(choose_reset_mode(always, rng) is ResetMode.REGULAR for _ in range(1000))


def test_choose_reset_mode_frequency():
    rng = np.random.default_rng(12345)
    state = _state(sr_r=0.4, iteration=50)
    draws = 100_000
    regular = sum(choose_reset_mode(state, rng) is ResetMode.REGULAR for _ in range(draws))
    assert abs(regular / draws - 0.45) <= 0.01


@pytest.mark.parametrize('delta, sr, expected', [
    (0.1, 0.7, 0.102),
    (0.5, 0.5, 0.5),
    (1.0, 0.9, 1.0),
    (0.0, 0.1, 0.0),
    (0.3, 0.2, 0.298),
])
def test_update_difficulty_examples(delta, sr, expected):
    state = _state()
    coef = DifficultyCoefficient(delta, SuccessRateTracker(sr, 0.05, 10))
    assert update_difficulty(coef, state).delta == pytest.approx(expected, abs=1e-12)


def test_update_difficulty_interval_is_closed():
    state = _state()
    for sr in (0.4, 0.6):
        coef = DifficultyCoefficient(0.5, SuccessRateTracker(sr, 0.05, 10))
        assert update_difficulty(coef, state).delta == 0.5


def test_update_difficulty_waits_for_evidence():
    coef = DifficultyCoefficient(0.5, SuccessRateTracker(0.0, 0.05, 0))
    assert update_difficulty(coef, _state()) == coef


def test_record_episode_outcome_examples():
    tracker = SuccessRateTracker(0.5, 0.05, 3)
    assert record_episode_outcome(tracker, 1).sr == pytest.approx(0.525, abs=1e-12)
    assert record_episode_outcome(tracker, 0).sr == pytest.approx(0.475, abs=1e-12)
    assert record_episode_outcome(tracker, 1).episodes_seen == 4


def test_record_episode_outcome_converges_monotonically():
    tracker = SuccessRateTracker(0.0, 0.05, 0)
    episodes = math.ceil(math.log(0.01) / math.log(1 - 0.05))
    previous = tracker.sr
    for _ in range(episodes):
        tracker = record_episode_outcome(tracker, 1)
        assert tracker.sr > previous
        previous = tracker.sr
    assert tracker.sr >= 0.99


def test_record_episode_outcome_rejects_out_of_range():
    with pytest.raises(ValueError):
        record_episode_outcome(SuccessRateTracker(), 2)


def test_curriculum_step_without_episodes_only_advances_iteration():
    state = _state(sr_d=0.9, delta_d=0.2, delta_r=0.3, iteration=4)
    after = curriculum_step(state, [])
    assert after.iteration == 5
    assert after.demo == state.demo
    assert after.regular == state.regular


def test_curriculum_step_moves_only_the_reporting_mode():
    state = _state(sr_d=0.9, sr_r=0.9, delta_d=0.2, delta_r=0.3)
    outcomes = [EpisodeOutcome(ResetMode.DEMONSTRATION, True) for _ in range(4)]
    after = curriculum_step(state, outcomes)
    assert after.demo.delta == pytest.approx(0.2 + 0.002, abs=1e-12)
    assert after.regular.delta == 0.3
    assert after.demo.tracker.episodes_seen == state.demo.tracker.episodes_seen + 4


def test_curriculum_step_dead_zone():
    state = _state(sr_d=0.5, delta_d=0.2)
    outcomes = [EpisodeOutcome(ResetMode.DEMONSTRATION, True), EpisodeOutcome(ResetMode.DEMONSTRATION, False)]
    after = curriculum_step(state, outcomes)
    assert 0.4 <= after.demo.tracker.sr <= 0.6
    assert after.demo.delta == 0.2


def test_curriculum_state_validates_interval():
    with pytest.raises(ConfigurationError):
        CurriculumConfig(alpha=0.7, beta=0.6)
    with pytest.raises(ConfigurationError):
        CurriculumConfig(granularity='batch')
    with pytest.raises(ConfigurationError):
        CurriculumState.initial(CurriculumConfig(), 0)


def test_controller_keeps_success_rate_in_interval():
    env = ControllableSuccessEnv()
    config = CurriculumConfig()
    scheduler = CurriculumScheduler(config, total_iterations=3000, demo_resets=False)
    rng = np.random.default_rng(2024)

    rates = []
    for _ in range(3000):
        mode = scheduler.choose_reset_mode(rng)
        assignment = sample_assignment(env.registry, scheduler.param_delta(mode), mode, rng)
        env.reset_regular(assignment, rng)
        result = env.step(np.zeros(3))
        scheduler.step([EpisodeOutcome(mode, result.success)])
        rates.append(scheduler.state.regular.tracker.sr)

    after_warmup = np.array(rates[500:])
    inside = (after_warmup >= config.alpha - 0.1) & (after_warmup <= config.beta + 0.1)
    assert inside.mean() >= 0.8
    assert scheduler.state.regular.delta > 0.3


def test_iteration_granularity_fixes_the_mode_per_iteration():
    scheduler = CurriculumScheduler(CurriculumConfig(granularity='iteration'), total_iterations=10)
    rng = np.random.default_rng(1)
    for _ in range(5):
        scheduler.begin_iteration(rng)
        modes = {scheduler.choose_reset_mode(rng) for _ in range(50)}
        assert len(modes) == 1
        scheduler.step([])


def test_scheduler_state_dict_round_trip():
    scheduler = CurriculumScheduler(CurriculumConfig(smoothing=1.0), total_iterations=10)
    scheduler.step([EpisodeOutcome(ResetMode.DEMONSTRATION, True), EpisodeOutcome(ResetMode.REGULAR, False)])

    restored = CurriculumScheduler(CurriculumConfig(smoothing=1.0), total_iterations=10)
    restored.load_state_dict(scheduler.state_dict())
    assert restored.state == scheduler.state
    assert restored.metrics() == scheduler.metrics()


def test_scheduler_needs_a_reset_mode():
    with pytest.raises(ConfigurationError):
        CurriculumScheduler(CurriculumConfig(), 10, demo_resets=False, regular_resets=False)
