import dataclasses

import numpy as np
import pytest

from acgd.rl.losses import Minibatch, loss_and_gradient, behavior_cloning_loss_and_gradient
from acgd.rl.network import PolicyNetwork, gaussian_log_prob
from acgd.rl.ppo import PpoConfig
from common.errors import NumericalError

H = 1e-5


def make_batch(network: PolicyNetwork, rng: np.random.Generator, n: int = 16) -> Minibatch:
    obs = rng.normal(size=(n, network.obs_dim))
    mean, log_std, values = network.forward(obs)
    actions = mean + np.exp(log_std) * rng.normal(size=mean.shape)
    # ratios of 0.61, 1 and 1.65 keep every sample away from the clip kinks at 0.9 and 1.1
    shift = rng.choice([-0.5, 0.0, 0.5], size=n)
    return Minibatch(
        obs=obs,
        actions=actions,
        old_log_probs=gaussian_log_prob(actions, mean, log_std) + shift,
        advantages=rng.normal(size=n),
        returns=values + rng.normal(size=n),
        old_values=values.copy())


def numeric_gradient(loss, param: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
        original = param[idx]
        param[idx] = original + H
        up = loss()
        param[idx] = original - H
        down = loss()
        param[idx] = original
        grad[idx] = (up - down) / (2 * H)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


@pytest.mark.parametrize('seed', range(20))
def test_ppo_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    network = PolicyNetwork(5, 3, rng, hidden_sizes=(8, 8))
    batch = make_batch(network, rng)
    config = PpoConfig()

    _, grads = loss_and_gradient(network, batch, config)
    for name, param in network.parameters().items():
        numeric = numeric_gradient(lambda: loss_and_gradient(network, batch, config)[0].total, param)
        assert relative_error(grads[name], numeric) < 1e-4, name


def test_clipped_value_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    network = PolicyNetwork(4, 3, rng, hidden_sizes=(6,))
    batch = make_batch(network, rng)
    batch.old_values = batch.old_values + rng.choice([-0.5, 0.5], size=batch.old_values.shape)
    config = PpoConfig(clip_value=True)

    _, grads = loss_and_gradient(network, batch, config)
    for name, param in network.parameters().items():
        numeric = numeric_gradient(lambda: loss_and_gradient(network, batch, config)[0].total, param)
        assert relative_error(grads[name], numeric) < 1e-4, name


def test_behavior_cloning_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    network = PolicyNetwork(5, 3, rng, hidden_sizes=(8, 8))
    obs, actions = rng.normal(size=(12, 5)), rng.uniform(-1, 1, size=(12, 3))

    _, grads = behavior_cloning_loss_and_gradient(network, obs, actions)
    for name, param in network.parameters().items():
        numeric = numeric_gradient(lambda: behavior_cloning_loss_and_gradient(network, obs, actions)[0], param)
        assert relative_error(grads[name], numeric) < 1e-4, name


def test_disconnected_parameters_get_zero_gradient():
    rng = np.random.default_rng(6)
    network = PolicyNetwork(5, 3, rng, hidden_sizes=(8,))
    _, grads = behavior_cloning_loss_and_gradient(network, rng.normal(size=(10, 5)), rng.normal(size=(10, 3)))
    assert np.all(grads['value.W'] == 0.0)
    assert np.all(grads['value.b'] == 0.0)


def test_log_std_outside_bounds_gets_zero_gradient():
    rng = np.random.default_rng(7)
    network = PolicyNetwork(5, 3, rng, hidden_sizes=(8,))
    network.log_std[0] = 3.0
    _, grads = behavior_cloning_loss_and_gradient(network, rng.normal(size=(10, 5)), rng.normal(size=(10, 3)))
    assert grads['log_std'][0] == 0.0
    assert grads['log_std'][1] != 0.0


def test_doubling_the_value_term_doubles_its_gradient():
    rng = np.random.default_rng(8)
    network = PolicyNetwork(5, 3, rng, hidden_sizes=(8,))
    batch = make_batch(network, rng)
    batch.advantages = np.zeros_like(batch.advantages)
    base = PpoConfig(entropy_coef=0.0, value_coef=0.5)

    _, single = loss_and_gradient(network, batch, base)
    _, double = loss_and_gradient(network, batch, dataclasses.replace(base, value_coef=1.0))
    for name in single:
        np.testing.assert_allclose(double[name], 2.0 * single[name], rtol=1e-12, atol=0.0)


def test_non_finite_loss_is_reported():
    rng = np.random.default_rng(9)
    network = PolicyNetwork(5, 3, rng, hidden_sizes=(8,))
    batch = make_batch(network, rng)
    batch.obs[0, 0] = np.nan
    with pytest.raises(NumericalError):
        loss_and_gradient(network, batch, PpoConfig())


def test_forward_outputs_are_finite_and_bounded():
    rng = np.random.default_rng(10)
    network = PolicyNetwork(5, 3, rng)
    network.log_std[:] = [-9.0, 0.0, 9.0]
    mean, log_std, value = network.forward(rng.normal(size=(4, 5)) * 100)
    assert np.all(np.isfinite(mean)) and np.all(np.isfinite(value))
    np.testing.assert_array_equal(log_std, [-5.0, 0.0, 2.0])


def test_flat_parameters_round_trip():
    rng = np.random.default_rng(11)
    network = PolicyNetwork(5, 3, rng, hidden_sizes=(8,))
    other = PolicyNetwork(5, 3, np.random.default_rng(12), hidden_sizes=(8,))
    other.set_flat(network.get_flat())
    np.testing.assert_array_equal(other.get_flat(), network.get_flat())
    with pytest.raises(ValueError):
        other.set_flat(np.zeros(3))
