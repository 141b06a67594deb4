import numpy as np
import pytest

from acgd.baselines import (
    make_scheduler, uniform_demo_sampler, linear_schedule, shared_delta_mode, constant_difficulty_mode,
    behavior_cloning_train, bc_initialized_network, BehaviorCloningConfig, CURRICULUM_FREE, METHOD_SUMMARY,
)
from acgd.demos import sample_demo_restart
from acgd.envs import BlockStackEnv
from acgd.params import sample_assignment
from acgd.rl.network import PolicyNetwork
from acgd.sched import CurriculumConfig, CurriculumScheduler
from common.domain import MethodSpec, ResetMode, EpisodeOutcome
from common.errors import ConfigurationError
from common.preprocessing import DemoPreprocessor

N = 20


def successes(mode, count=1):
    return [EpisodeOutcome(mode, True) for _ in range(count)]


def test_every_method_is_described():
    assert set(METHOD_SUMMARY) == set(MethodSpec)


@pytest.mark.parametrize('method', CURRICULUM_FREE)
def test_curriculum_free_methods_use_regular_resets_at_full_difficulty(method, rng):
    scheduler = make_scheduler(method, CurriculumConfig(), N)
    for _ in range(5):
        assert scheduler.choose_reset_mode(rng) is ResetMode.REGULAR
        assert scheduler.param_delta(ResetMode.REGULAR) == 1.0
        scheduler.step([EpisodeOutcome(ResetMode.REGULAR, False)])


def test_uniform_curriculum_is_frozen_demo_window(rng):
    scheduler = make_scheduler(MethodSpec.UNIFORM_DEMO_CURRICULUM, CurriculumConfig(), N)
    for _ in range(5):
        assert scheduler.choose_reset_mode(rng) is ResetMode.DEMONSTRATION
        assert scheduler.window_delta == 1.0
        scheduler.step([EpisodeOutcome(ResetMode.DEMONSTRATION, False)])


def test_linear_curriculum_follows_the_schedule(rng):
    scheduler = make_scheduler(MethodSpec.LINEAR_DEMO_CURRICULUM, CurriculumConfig(), N)
    for i in range(N + 1):
        assert scheduler.window_delta == pytest.approx(i / N)
        assert scheduler.choose_reset_mode(rng) is ResetMode.DEMONSTRATION
        scheduler.step(successes(ResetMode.DEMONSTRATION, 3))


def test_linear_with_regular_resets_mixes_both_modes():
    scheduler = make_scheduler(MethodSpec.LINEAR_WITH_REGULAR_RESETS, CurriculumConfig(), N)
    for _ in range(N // 2):
        scheduler.step([])
    assert scheduler.window_delta == pytest.approx(0.5)
    assert scheduler.param_delta(ResetMode.REGULAR) == pytest.approx(0.5)
    rng = np.random.default_rng(0)
    modes = {scheduler.choose_reset_mode(rng) for _ in range(200)}
    assert modes == {ResetMode.REGULAR, ResetMode.DEMONSTRATION}


def test_behavior_cloning_has_no_scheduler():
    with pytest.raises(ConfigurationError):
        make_scheduler(MethodSpec.BC, CurriculumConfig(), N)


@pytest.mark.parametrize('i, expected', [(0, 0.0), (N, 1.0), (N // 4, 0.25), (2 * N, 1.0)])
def test_linear_schedule(i, expected):
    assert linear_schedule(i, N) == pytest.approx(expected, abs=1e-12)


def test_linear_schedule_rejects_zero_iterations():
    with pytest.raises(ConfigurationError):
        linear_schedule(0, 0)


def test_shared_delta_rises_by_increment_on_success_stream():
    config = CurriculumConfig(smoothing=1.0)
    scheduler = make_scheduler(MethodSpec.SHARED_DELTA, config, N)
    assert scheduler.shared_delta
    for k in range(1, 6):
        mode = ResetMode.DEMONSTRATION if k % 2 else ResetMode.REGULAR
        scheduler.step(successes(mode))
        assert scheduler.state.demo.delta == scheduler.state.regular.delta
        assert scheduler.state.demo.delta == pytest.approx(k * config.increment, abs=1e-12)


def test_shared_delta_pools_every_episode():
    scheduler = shared_delta_mode(CurriculumScheduler(CurriculumConfig(), N))
    scheduler.step([EpisodeOutcome(ResetMode.REGULAR, True), EpisodeOutcome(ResetMode.DEMONSTRATION, False)])
    assert scheduler._pooled.episodes_seen == 2


def test_constant_difficulty_pins_parameters_and_keeps_adaptive_window():
    config = CurriculumConfig(smoothing=1.0)
    scheduler = constant_difficulty_mode(CurriculumScheduler(config, N))
    assert scheduler.param_delta(ResetMode.DEMONSTRATION) == 1.0
    assert scheduler.param_delta(ResetMode.REGULAR) == 1.0

    scheduler.step(successes(ResetMode.DEMONSTRATION))
    assert scheduler.window_delta == pytest.approx(config.increment, abs=1e-12)
    for _ in range(N):
        scheduler.step([])
    assert scheduler.param_delta(ResetMode.DEMONSTRATION) == 1.0
    assert scheduler.param_delta(ResetMode.REGULAR) == 1.0


def test_constant_difficulty_method():
    scheduler = make_scheduler(MethodSpec.CONSTANT_MAX_DIFFICULTY, CurriculumConfig(), N)
    assert scheduler.constant_param_difficulty
    assert scheduler.window_delta == 0.0


def test_uniform_sampler_is_restart_at_full_delta(block_stack_demos):
    for seed in range(20):
        expected, _, _ = sample_demo_restart(block_stack_demos, 1.0, np.random.default_rng(seed))
        assert uniform_demo_sampler(block_stack_demos, np.random.default_rng(seed)).same_as(expected)


def test_behavior_cloning_loss_decreases(block_stack_bc_demos):
    env = BlockStackEnv()
    network = PolicyNetwork(env.obs_dim, env.action_dim, np.random.default_rng(0))
    config = BehaviorCloningConfig(epochs=10)
    _, history = behavior_cloning_train(block_stack_bc_demos, network, config, env, seed=0)
    assert len(history.train_loss) == 10
    assert all(later < earlier for earlier, later in zip(history.train_loss, history.train_loss[1:]))
    assert all(np.isfinite(history.validation_loss))


def test_held_out_rows_come_from_unseen_demonstrations(block_stack_bc_demos):
    preprocessor = DemoPreprocessor()
    X, y, groups = preprocessor.preprocess_data(block_stack_bc_demos, BlockStackEnv())
    assert len(groups) == len(X)
    assert set(groups) == set(range(len(block_stack_bc_demos)))

    tagged = groups[:, None].astype(np.float64)
    train, held_out, y_train, y_held_out = preprocessor.split_data_on_train_and_test(tagged, y, groups, test_size=0.1, random_state=0)
    assert len(held_out) > 0
    assert set(train.ravel()).isdisjoint(held_out.ravel())
    assert len(train) + len(held_out) == len(X)
    assert len(y_train) == len(train) and len(y_held_out) == len(held_out)


def test_behavior_cloning_needs_actions(block_stack_demos):
    env = BlockStackEnv()
    network = PolicyNetwork(env.obs_dim, env.action_dim, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        behavior_cloning_train(block_stack_demos, network, BehaviorCloningConfig(epochs=1), env, seed=0)


def test_bc_initialization_keeps_policy_and_resets_value_head():
    network = PolicyNetwork(4, 3, np.random.default_rng(0), hidden_sizes=(8,))
    mean_before = network.mean_head.W.copy()
    value_before = network.value_head.W.copy()
    bc_initialized_network(network, np.random.default_rng(1))
    np.testing.assert_array_equal(network.mean_head.W, mean_before)
    assert not np.array_equal(network.value_head.W, value_before)


def test_behavior_cloning_config_validation():
    with pytest.raises(ConfigurationError):
        BehaviorCloningConfig(validation_fraction=1.0)


def test_adaptive_curriculum_raises_both_difficulties_under_a_reliable_policy(block_stack_demos):
    """The scripted expert stands in for a trained policy: steady success must open both coefficients."""
    env = BlockStackEnv()
    rng = np.random.default_rng(0)
    iterations = 30
    scheduler = make_scheduler(MethodSpec.ACGD, CurriculumConfig(increment=0.05), iterations)
    regular_episodes = 0
    for _ in range(iterations):
        scheduler.begin_iteration(rng)
        outcomes = []
        for _ in range(8):
            mode = scheduler.choose_reset_mode(rng)
            assignment = sample_assignment(env.registry, scheduler.param_delta(mode), mode, rng)
            if mode is ResetMode.DEMONSTRATION:
                snapshot, _, _ = sample_demo_restart(block_stack_demos, scheduler.window_delta, rng)
                env.reset_from_state(snapshot, assignment, rng)
            else:
                regular_episodes += 1
                env.reset_regular(assignment, rng)
            while not env.done:
                result = env.step(env.expert_action())
            outcomes.append(EpisodeOutcome(mode, result.success))
        scheduler.step(outcomes)

    assert regular_episodes > 0
    assert scheduler.window_delta > 0.0
    assert scheduler.param_delta(ResetMode.REGULAR) > 0.0
