import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Dict, Any, Protocol, Callable

import numpy as np

from acgd.demos import DemoStore, sample_demo_restart
from acgd.envs import Env
from acgd.params import sample_assignment
from acgd.rl.buffer import RolloutBuffer
from acgd.rl.losses import compute_gae, normalize_advantages, loss_and_gradient
from acgd.rl.network import PolicyNetwork, gaussian_log_prob
from acgd.rl.optim import Adam, clip_grad_norm, linear_lr
from acgd.sched import CurriculumScheduler
from common.domain import ResetMode, EpisodeOutcome, EnvSnapshot
from common.errors import ConfigurationError, CheckpointError

logger = logging.getLogger(__name__)


@dataclass
class PpoConfig:
    lr: float = 2.5e-4
    adam_eps: float = 1e-5
    gamma: float = 0.99
    gae_tau: float = 0.95
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    actors: int = 8
    steps_per_actor: int = 512
    minibatch_size: int = 4096
    epochs: int = 4
    clip: float = 0.1
    total_steps: int = 500_000
    normalize_advantages: bool = True
    clip_value: bool = False
    hidden_sizes: List[int] = field(default_factory=lambda: [64, 64])
    init_log_std: float = -0.5

    def __post_init__(self):
        positive = ['lr', 'adam_eps', 'gamma', 'max_grad_norm', 'actors', 'steps_per_actor', 'minibatch_size', 'epochs', 'total_steps']
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"PPO option {name} must be positive. Got: {getattr(self, name)}")
        if not 0.0 < self.clip < 1.0:
            raise ConfigurationError(f"PPO clip must lie in (0, 1). Got: {self.clip}")
        if not 0.0 < self.gamma <= 1.0 or not 0.0 <= self.gae_tau <= 1.0:
            raise ConfigurationError(f"Invalid discounting: gamma={self.gamma}, gae_tau={self.gae_tau}")
        if self.entropy_coef < 0 or self.value_coef < 0:
            raise ConfigurationError("Loss coefficients must be nonnegative.")

    @property
    def batch_size(self) -> int:
        return self.actors * self.steps_per_actor

    @property
    def iterations(self) -> int:
        return math.ceil(self.total_steps / self.batch_size)


class Actor(Protocol):
    def act(self, obs: np.ndarray, env: Env) -> np.ndarray:
        ...


class PolicyActor:
    """Deterministic policy: the Gaussian mean."""

    def __init__(self, network: PolicyNetwork):
        self.network = network

    def act(self, obs: np.ndarray, env: Env) -> np.ndarray:
        mean, _, _ = self.network.forward(obs)
        return mean[0]


class ExpertActor:
    def act(self, obs: np.ndarray, env: Env) -> np.ndarray:
        return env.expert_action()


@dataclass(frozen=True)
class EvaluationResult:
    success_rate: float
    mean_success_length: float
    mean_return: float
    episodes: int


def evaluate(actor: Actor, env: Env, episodes: int, seed: int, delta: float = 1.0) -> EvaluationResult:
    rng = np.random.default_rng(seed)
    successes, success_lengths, returns = 0, [], []
    for _ in range(episodes):
        assignment = sample_assignment(env.registry, delta, ResetMode.REGULAR, rng)
        obs = env.reset_regular(assignment, rng)
        episode_return, length = 0.0, 0
        while not env.done:
            result = env.step(actor.act(obs, env))
            obs = result.obs
            episode_return += result.reward
            length += 1
        if result.success:
            successes += 1
            success_lengths.append(length)
        returns.append(episode_return)

    return EvaluationResult(
        success_rate=successes / episodes if episodes else 0.0,
        mean_success_length=float(np.mean(success_lengths)) if success_lengths else float('nan'),
        mean_return=float(np.mean(returns)) if returns else 0.0,
        episodes=episodes)


class PpoTrainer:
    """
    Collects rollouts from `config.actors` environments and updates the policy with PPO.

    Each actor owns a private random stream derived from the run seed; environments reset
    through the curriculum scheduler, which is stepped once per iteration with the
    outcomes of the episodes that finished during that iteration. Collection is serial
    and batched through one network forward per step, so runs are reproducible bit for bit.
    """

    def __init__(
            self,
            envs: List[Env],
            scheduler: CurriculumScheduler,
            config: PpoConfig,
            seed: int,
            demos: Optional[DemoStore] = None,
            network: Optional[PolicyNetwork] = None,
            demo_sampler: Optional[Callable[[DemoStore, np.random.Generator], EnvSnapshot]] = None):
        if len(envs) != config.actors:
            raise ConfigurationError(f"Expected {config.actors} environments. Got: {len(envs)}")
        if scheduler.demo_resets and (demos is None or len(demos) == 0):
            raise ConfigurationError("Demonstration resets are enabled but no demonstrations were provided.")
        if demos is not None and len(demos) and demos.env_id != envs[0].env_id:
            raise ConfigurationError(f"Demonstrations of {demos.env_id} cannot drive {envs[0].env_id}.")

        self.envs = envs
        self.scheduler = scheduler
        self.config = config
        self.demos = demos
        self.demo_sampler = demo_sampler

        streams = np.random.SeedSequence(seed).spawn(config.actors + 2)
        self.actor_rngs = [np.random.default_rng(s) for s in streams[:config.actors]]
        self.rng = np.random.default_rng(streams[config.actors])
        if network is None:
            network = PolicyNetwork(
                envs[0].obs_dim,
                envs[0].action_dim,
                np.random.default_rng(streams[config.actors + 1]),
                hidden_sizes=config.hidden_sizes,
                init_log_std=config.init_log_std)
        self.network = network
        self.optimizer = Adam(lr=config.lr, eps=config.adam_eps)

        self.env_steps = 0
        self.iteration = 0
        self._obs: List[Optional[np.ndarray]] = [None] * config.actors
        self._modes: List[ResetMode] = [ResetMode.REGULAR] * config.actors
        self._lengths = [0] * config.actors
        self._returns = [0.0] * config.actors

    def _reset_actor(self, k: int) -> None:
        env = self.envs[k]
        rng = self.actor_rngs[k]
        mode = self.scheduler.choose_reset_mode(rng)
        if mode is ResetMode.DEMONSTRATION:
            if self.demo_sampler is not None:
                snapshot = self.demo_sampler(self.demos, rng)
            else:
                snapshot, _, _ = sample_demo_restart(self.demos, self.scheduler.window_delta, rng)
            assignment = sample_assignment(env.registry, self.scheduler.param_delta(mode), mode, rng)
            obs = env.reset_from_state(snapshot, assignment, rng)
        else:
            assignment = sample_assignment(env.registry, self.scheduler.param_delta(mode), mode, rng)
            obs = env.reset_regular(assignment, rng)

        self._obs[k] = obs
        self._modes[k] = mode
        self._lengths[k] = 0
        self._returns[k] = 0.0

    def _collect(self) -> RolloutBuffer:
        cfg = self.config
        buffer = RolloutBuffer(cfg.steps_per_actor, cfg.actors, self.envs[0].obs_dim, self.envs[0].action_dim)
        for k in range(cfg.actors):
            if self._obs[k] is None:
                self._reset_actor(k)

        for _ in range(cfg.steps_per_actor):
            obs = np.stack(self._obs)
            mean, log_std, values = self.network.forward(obs)
            noise = np.stack([rng.standard_normal(mean.shape[1]) for rng in self.actor_rngs])
            actions = mean + np.exp(log_std) * noise
            log_probs = gaussian_log_prob(actions, mean, log_std)

            modes = list(self._modes)
            rewards = np.zeros(cfg.actors)
            dones = np.zeros(cfg.actors)
            for k, env in enumerate(self.envs):
                result = env.step(actions[k])
                reward = result.reward
                self._lengths[k] += 1
                self._returns[k] += result.reward
                if result.done:
                    if result.info.get('truncated', False) and not result.success:
                        _, _, final_value = self.network.forward(result.obs)
                        reward += cfg.gamma * final_value[0]
                    buffer.finish_episode(EpisodeOutcome(
                        reset_mode=self._modes[k],
                        success=result.success,
                        length=self._lengths[k],
                        episode_return=self._returns[k]))
                    dones[k] = 1.0
                    self._reset_actor(k)
                else:
                    self._obs[k] = result.obs
                rewards[k] = reward

            buffer.add(obs, actions, log_probs, rewards, values, dones, modes)
            self.env_steps += cfg.actors
        return buffer

    def train_iteration(self) -> Dict[str, Any]:
        cfg = self.config
        lr = linear_lr(cfg.lr, self.env_steps, cfg.total_steps)
        self.scheduler.begin_iteration(self.rng)
        buffer = self._collect()

        _, _, last_values = self.network.forward(np.stack(self._obs))
        advantages, returns = compute_gae(buffer.rewards, buffer.values, buffer.dones, last_values, cfg.gamma, cfg.gae_tau)
        if cfg.normalize_advantages:
            advantages = normalize_advantages(advantages)

        flat = cfg.batch_size
        minibatch = min(cfg.minibatch_size, flat)
        totals = {'policy_loss': 0.0, 'value_loss': 0.0, 'entropy': 0.0, 'approx_kl': 0.0, 'clip_fraction': 0.0}
        updates = 0
        for _ in range(cfg.epochs):
            permutation = self.rng.permutation(flat)
            for start in range(0, flat, minibatch):
                batch = buffer.minibatch(permutation[start:start + minibatch], advantages, returns)
                terms, grads = loss_and_gradient(self.network, batch, cfg)
                grads, _ = clip_grad_norm(grads, cfg.max_grad_norm)
                self.optimizer.step(self.network.parameters(), grads, lr)
                totals['policy_loss'] += terms.policy
                totals['value_loss'] += terms.value
                totals['entropy'] += terms.entropy
                totals['approx_kl'] += terms.approx_kl
                totals['clip_fraction'] += terms.clip_fraction
                updates += 1

        outcomes = buffer.episodes
        self.scheduler.step(outcomes)
        self.iteration += 1

        demo_episodes = [o for o in outcomes if o.reset_mode is ResetMode.DEMONSTRATION]
        metrics = {
            'iter': self.iteration,
            'env_steps': self.env_steps,
            **self.scheduler.metrics(),
            'mean_episode_length': float(np.mean([o.length for o in outcomes])) if outcomes else float('nan'),
            'episodes_d': len(demo_episodes),
            'episodes_r': len(outcomes) - len(demo_episodes),
            **{name: value / updates for name, value in totals.items()},
            'learning_rate': lr,
        }
        logger.debug(f"Iteration {self.iteration}: {metrics}")
        return metrics

    # -- checkpointing -------------------------------------------------------------------

    def state_dict(self) -> Dict[str, Any]:
        return {
            'params': self.network.get_flat(),
            'architecture': self.network.architecture(),
            'optimizer': self.optimizer.state_dict(),
            'scheduler': self.scheduler.state_dict(),
            'rng': self.rng.bit_generator.state,
            'actor_rngs': [rng.bit_generator.state for rng in self.actor_rngs],
            'envs': [
                None if obs is None else {'env_id': env.env_id, 'values': env.save_state().values}
                for env, obs in zip(self.envs, self._obs)
            ],
            'modes': [m.value for m in self._modes],
            'lengths': list(self._lengths),
            'returns': list(self._returns),
            'env_steps': self.env_steps,
            'iteration': self.iteration,
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        if state['architecture'] != self.network.architecture():
            raise CheckpointError(f"Checkpoint network {state['architecture']} does not match {self.network.architecture()}.")
        if len(state['actor_rngs']) != self.config.actors:
            raise CheckpointError(f"Checkpoint holds {len(state['actor_rngs'])} actors, config expects {self.config.actors}.")

        self.network.set_flat(np.asarray(state['params'], dtype=np.float64))
        self.optimizer.load_state_dict(state['optimizer'])
        self.scheduler.load_state_dict(state['scheduler'])
        self.rng.bit_generator.state = state['rng']
        for rng, rng_state in zip(self.actor_rngs, state['actor_rngs']):
            rng.bit_generator.state = rng_state

        for k, (env, saved) in enumerate(zip(self.envs, state['envs'])):
            if saved is None:
                self._obs[k] = None
                continue
            snapshot = EnvSnapshot(env_id=saved['env_id'], values=np.asarray(saved['values'], dtype=np.float64))
            self._obs[k] = env.restore(snapshot, self.actor_rngs[k])

        self._modes = [ResetMode(m) for m in state['modes']]
        self._lengths = [int(n) for n in state['lengths']]
        self._returns = [float(r) for r in state['returns']]
        self.env_steps = int(state['env_steps'])
        self.iteration = int(state['iteration'])
