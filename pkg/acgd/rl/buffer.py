import logging
from typing import List

import numpy as np

from acgd.rl.losses import Minibatch
from common.domain import EpisodeOutcome, ResetMode
from common.errors import ShapeError

logger = logging.getLogger(__name__)


class RolloutBuffer:
    """Fixed-size (steps, actors) storage for one PPO iteration."""

    def __init__(self, steps: int, actors: int, obs_dim: int, act_dim: int):
        self.steps = steps
        self.actors = actors
        self.obs = np.zeros((steps, actors, obs_dim))
        self.actions = np.zeros((steps, actors, act_dim))
        self.log_probs = np.zeros((steps, actors))
        self.rewards = np.zeros((steps, actors))
        self.values = np.zeros((steps, actors))
        self.dones = np.zeros((steps, actors))
        self.demo_reset = np.zeros((steps, actors), dtype=bool)
        self.episodes: List[EpisodeOutcome] = []
        self._t = 0

    def __len__(self):
        return self._t

    @property
    def full(self) -> bool:
        return self._t == self.steps

    def add(self, obs, actions, log_probs, rewards, values, dones, modes: List[ResetMode]) -> None:
        if self.full:
            raise ShapeError(f"Rollout buffer holds at most {self.steps} steps.")
        if len(modes) != self.actors:
            raise ShapeError(f"Expected {self.actors} reset modes. Got: {len(modes)}")
        t = self._t
        self.obs[t] = obs
        self.actions[t] = actions
        self.log_probs[t] = log_probs
        self.rewards[t] = rewards
        self.values[t] = values
        self.dones[t] = dones
        self.demo_reset[t] = [m is ResetMode.DEMONSTRATION for m in modes]
        self._t += 1

    def finish_episode(self, outcome: EpisodeOutcome) -> None:
        self.episodes.append(outcome)

    def minibatch(self, indices: np.ndarray, advantages: np.ndarray, returns: np.ndarray) -> Minibatch:
        flat = self.steps * self.actors
        return Minibatch(
            obs=self.obs.reshape(flat, -1)[indices],
            actions=self.actions.reshape(flat, -1)[indices],
            old_log_probs=self.log_probs.reshape(flat)[indices],
            advantages=advantages.reshape(flat)[indices],
            returns=returns.reshape(flat)[indices],
            old_values=self.values.reshape(flat)[indices])
