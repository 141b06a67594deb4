import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Optional, Dict

import numpy as np

from acgd.rl.network import PolicyNetwork, Params, gaussian_log_prob, gaussian_entropy
from common.errors import ShapeError, NumericalError

logger = logging.getLogger(__name__)


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1]. Got: {gamma}")
    ret = 0.0
    for r in reversed(list(rewards)):
        ret = r + gamma * ret
    return float(ret)


def compute_gae(
        rewards: np.ndarray,
        values: np.ndarray,
        dones: np.ndarray,
        bootstrap_value,
        gamma: float,
        tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """Works on (T,) arrays or on (T, actors) arrays with one bootstrap value per actor."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if not rewards.shape == values.shape == dones.shape:
        raise ShapeError(f"rewards {rewards.shape}, values {values.shape} and dones {dones.shape} must have equal shapes.")

    advantages = np.zeros_like(rewards)
    next_value = np.asarray(bootstrap_value, dtype=np.float64)
    last = np.zeros(rewards.shape[1:])
    for t in reversed(range(rewards.shape[0])):
        not_done = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        last = delta + gamma * tau * not_done * last
        advantages[t] = last
        next_value = values[t]
    return advantages, advantages + values


def normalize_advantages(advantages: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    return (advantages - advantages.mean()) / (advantages.std() + eps)


def ppo_policy_loss(ratio, advantage, clip: float) -> float:
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    surrogate = np.minimum(ratio * advantage, np.clip(ratio, 1.0 - clip, 1.0 + clip) * advantage)
    return float(-np.mean(surrogate))


def value_loss(values: np.ndarray, returns: np.ndarray, old_values: Optional[np.ndarray] = None, clip: Optional[float] = None) -> float:
    unclipped = (values - returns) ** 2
    if old_values is None or clip is None:
        return float(np.mean(unclipped))
    clipped = (old_values + np.clip(values - old_values, -clip, clip) - returns) ** 2
    return float(np.mean(np.maximum(unclipped, clipped)))


def total_loss(policy_loss: float, value_loss: float, entropy: float, config) -> float:
    return policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy


@dataclass
class Minibatch:
    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    old_values: np.ndarray


@dataclass
class LossTerms:
    total: float
    policy: float
    value: float
    entropy: float
    approx_kl: float
    clip_fraction: float


def loss_and_gradient(network: PolicyNetwork, batch: Minibatch, config) -> Tuple[LossTerms, Params]:
    """
    Evaluate the PPO objective on a minibatch and its exact gradient.

    The surrogate's derivative with respect to the ratio is the advantage when the
    unclipped term is the minimum and zero otherwise.
    """
    n = batch.obs.shape[0]
    mean, log_std, values = network.forward(batch.obs)
    std = np.exp(log_std)

    log_probs = gaussian_log_prob(batch.actions, mean, log_std)
    ratio = np.exp(log_probs - batch.old_log_probs)
    adv = batch.advantages

    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - config.clip, 1.0 + config.clip) * adv
    policy = float(-np.mean(np.minimum(unclipped, clipped)))
    d_ratio = np.where(unclipped <= clipped, -adv, 0.0) / n
    d_log_prob = d_ratio * ratio

    value_clip = config.clip if config.clip_value else None
    vloss = value_loss(values, batch.returns, batch.old_values, value_clip)
    residual = values - batch.returns
    if value_clip is None:
        d_values = 2.0 * residual / n
    else:
        delta = values - batch.old_values
        clipped_values = batch.old_values + np.clip(delta, -value_clip, value_clip)
        clipped_residual = clipped_values - batch.returns
        use_unclipped = residual ** 2 >= clipped_residual ** 2
        passes = np.abs(delta) < value_clip
        d_values = np.where(use_unclipped, 2.0 * residual, 2.0 * clipped_residual * passes) / n
    d_values = config.value_coef * d_values

    entropy = gaussian_entropy(log_std)
    total = total_loss(policy, vloss, entropy, config)
    if not np.isfinite(total):
        raise NumericalError(
            f"Non-finite PPO loss: policy={policy}, value={vloss}, entropy={entropy}, "
            f"max |ratio|={np.max(np.abs(ratio)) if ratio.size else 0.0}, log_std={log_std.tolist()}")

    z = (batch.actions - mean) / std
    d_mean = d_log_prob[:, None] * z / std
    d_log_std = np.sum(d_log_prob[:, None] * (z ** 2 - 1.0), axis=0) - config.entropy_coef

    grads = network.backward(d_mean, d_log_std, d_values)
    terms = LossTerms(
        total=total,
        policy=policy,
        value=vloss,
        entropy=entropy,
        approx_kl=float(np.mean(batch.old_log_probs - log_probs)),
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > config.clip)))
    return terms, grads


def behavior_cloning_loss_and_gradient(network: PolicyNetwork, obs: np.ndarray, actions: np.ndarray) -> Tuple[float, Params]:
    """Mean Gaussian negative log-likelihood of demonstrated actions; the value head receives no gradient."""
    n = obs.shape[0]
    mean, log_std, _ = network.forward(obs)
    std = np.exp(log_std)
    loss = float(-np.mean(gaussian_log_prob(actions, mean, log_std)))
    if not np.isfinite(loss):
        raise NumericalError(f"Non-finite behaviour cloning loss; log_std={log_std.tolist()}")

    z = (actions - mean) / std
    d_mean = -z / std / n
    d_log_std = -np.sum(z ** 2 - 1.0, axis=0) / n
    grads = network.backward(d_mean, d_log_std, np.zeros(n))
    return loss, grads


def gradient_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g ** 2)) for g in grads.values())))
