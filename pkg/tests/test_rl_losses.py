import numpy as np
import pytest
from scipy.integrate import quad

from acgd.rl.losses import discounted_return, compute_gae, normalize_advantages, ppo_policy_loss, value_loss, total_loss
from acgd.rl.network import gaussian_log_prob
from acgd.rl.optim import linear_lr, clip_grad_norm
from acgd.rl.ppo import PpoConfig
from common.errors import ShapeError, ConfigurationError


@pytest.mark.parametrize('rewards, expected', [
    ([1.0], 1.0),
    ([0.0, 0.0, 1.0], 0.9801),
    ([0.0, 0.0, 0.0, 0.0], 0.0),
])
def test_discounted_return_examples(rewards, expected):
    assert discounted_return(rewards, 0.99) == pytest.approx(expected, abs=1e-12)


def test_gae_hand_expansion():
    advantages, returns = compute_gae([0.0, 1.0], [0.5, 0.25], [0.0, 1.0], 0.0, 0.99, 0.95)
    np.testing.assert_allclose(advantages, [0.452875, 0.75], atol=1e-12)
    np.testing.assert_allclose(returns, [0.952875, 1.0], atol=1e-12)


def test_gae_with_zero_values_and_unit_tau_is_the_discounted_return():
    rewards = np.array([0.3, -1.0, 0.0, 2.0, 0.5])
    advantages, _ = compute_gae(rewards, np.zeros(5), np.zeros(5), 0.0, 0.97, 1.0)
    expected = [discounted_return(rewards[t:], 0.97) for t in range(5)]
    np.testing.assert_allclose(advantages, expected, atol=1e-12)


def test_gae_of_zeros():
    advantages, returns = compute_gae(np.zeros(6), np.zeros(6), np.zeros(6), 0.0, 0.99, 0.95)
    assert np.all(advantages == 0.0) and np.all(returns == 0.0)


def _monte_carlo_advantages(rewards, values, dones, bootstrap, gamma):
    T = len(rewards)
    advantages = np.zeros(T)
    for t in range(T):
        ret, discount = 0.0, 1.0
        for i in range(t, T):
            ret += discount * rewards[i]
            discount *= gamma
            if dones[i]:
                break
        else:
            ret += discount * bootstrap
        advantages[t] = ret - values[t]
    return advantages


def test_gae_unit_tau_matches_monte_carlo_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(200):
        T = int(rng.integers(1, 17))
        rewards = rng.normal(size=T)
        values = rng.normal(size=T)
        dones = (rng.random(T) < 0.2).astype(float)
        bootstrap = float(rng.normal())
        gamma = float(rng.uniform(0.8, 1.0))
        advantages, _ = compute_gae(rewards, values, dones, bootstrap, gamma, 1.0)
        expected = _monte_carlo_advantages(rewards, values, dones, bootstrap, gamma)
        np.testing.assert_allclose(advantages, expected, rtol=0.0, atol=1e-10)


def test_gae_over_actors_matches_per_actor_gae():
    rng = np.random.default_rng(1)
    rewards, values = rng.normal(size=(12, 3)), rng.normal(size=(12, 3))
    dones = (rng.random((12, 3)) < 0.25).astype(float)
    bootstrap = rng.normal(size=3)
    batched, _ = compute_gae(rewards, values, dones, bootstrap, 0.99, 0.95)
    for k in range(3):
        single, _ = compute_gae(rewards[:, k], values[:, k], dones[:, k], bootstrap[k], 0.99, 0.95)
        np.testing.assert_array_equal(batched[:, k], single)


def test_gae_rejects_length_mismatch():
    with pytest.raises(ShapeError):
        compute_gae(np.zeros(3), np.zeros(4), np.zeros(3), 0.0, 0.99, 0.95)


def test_advantage_normalization():
    advantages = normalize_advantages(np.random.default_rng(2).normal(3.0, 5.0, size=(64, 8)))
    assert abs(advantages.mean()) < 1e-6
    assert abs(advantages.std() - 1.0) < 1e-6


@pytest.mark.parametrize('ratio, advantage, expected', [
    (1.0, 2.0, -2.0),
    (2.0, 1.0, -1.1),
    (1.2, -1.0, 1.2),
    (0.5, 1.0, -0.5),
    (0.5, -1.0, 0.9),
])
def test_ppo_policy_loss_examples(ratio, advantage, expected):
    assert ppo_policy_loss(ratio, advantage, 0.1) == pytest.approx(expected, abs=1e-12)


def test_clip_is_inactive_inside_the_trust_region():
    rng = np.random.default_rng(3)
    ratio = rng.uniform(0.9, 1.1, size=100)
    advantage = rng.normal(size=100)
    assert ppo_policy_loss(ratio, advantage, 0.1) == -np.mean(ratio * advantage)


def test_total_loss_examples():
    config = PpoConfig()
    assert total_loss(1.0, 0.0, 0.0, config) == 1.0
    assert total_loss(0.0, 2.0, 0.0, config) == 1.0
    assert total_loss(0.0, 0.0, 1.0, config) == pytest.approx(-0.01, abs=1e-12)


def test_value_loss_clipping_takes_the_pessimistic_term():
    values, returns, old = np.array([1.0]), np.array([0.0]), np.array([0.5])
    assert value_loss(values, returns) == 1.0
    assert value_loss(values, returns, old, 0.1) == 1.0
    assert value_loss(np.array([0.2]), returns, old, 0.1) == pytest.approx(0.16, abs=1e-12)


def test_gaussian_density_integrates_to_one():
    mean, log_std = np.array([[0.3]]), np.array([-0.2])
    integral, _ = quad(lambda a: np.exp(gaussian_log_prob(np.array([[a]]), mean, log_std)[0]), -np.inf, np.inf)
    assert integral == pytest.approx(1.0, abs=1e-8)


def test_gaussian_log_prob_factorizes_over_dimensions():
    rng = np.random.default_rng(4)
    actions, mean, log_std = rng.normal(size=(5, 3)), rng.normal(size=(5, 3)), rng.normal(size=3) * 0.3
    joint = gaussian_log_prob(actions, mean, log_std)
    separate = sum(gaussian_log_prob(actions[:, [d]], mean[:, [d]], log_std[[d]]) for d in range(3))
    np.testing.assert_allclose(joint, separate, atol=1e-12)


def test_linear_learning_rate_schedule():
    assert linear_lr(2.5e-4, 0, 1000) == 2.5e-4
    assert linear_lr(2.5e-4, 500, 1000) == pytest.approx(1.25e-4)
    assert linear_lr(2.5e-4, 1000, 1000) == 0.0
    assert linear_lr(2.5e-4, 1200, 1000) == 0.0


def test_gradient_norm_clipping():
    grads = {'a': np.array([3.0]), 'b': np.array([4.0])}
    clipped, norm = clip_grad_norm(grads, 0.5)
    assert norm == 5.0
    assert clipped['a'][0] == pytest.approx(0.3) and clipped['b'][0] == pytest.approx(0.4)
    untouched, _ = clip_grad_norm(grads, 10.0)
    assert untouched is grads


def test_ppo_config_validation():
    with pytest.raises(ConfigurationError):
        PpoConfig(clip=1.5)
    with pytest.raises(ConfigurationError):
        PpoConfig(actors=0)
    config = PpoConfig(actors=8, steps_per_actor=512, total_steps=500_000)
    assert config.batch_size == 4096
    assert config.iterations == 123
