"""Tiny environments with known optimal behaviour, used to check the controller and the learner in isolation."""
import logging
from typing import Optional

import numpy as np

from acgd.envs.base import Env, RewardConfig, ACTION_DIM
from acgd.params import ParamRegistry, TaskParam
from common.domain import EnvSnapshot, ParamAssignment, StepResult
from common.errors import SnapshotMismatchError, EpisodeFinishedError

logger = logging.getLogger(__name__)


class SyntheticEnv(Env):
    def __init__(self, reward: Optional[RewardConfig] = None, max_steps: Optional[int] = None):
        super().__init__(reward, max_steps)
        self._values = np.zeros(self.state_size)

    state_size: int = 1

    def _start(self, values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        self._rng = rng
        self._values = np.array(values, dtype=np.float64, copy=True)
        self._done = False
        return self.observation()

    def restore(self, snapshot: EnvSnapshot, rng: np.random.Generator) -> np.ndarray:
        self._check_snapshot(snapshot)
        if snapshot.values.shape != (self.state_size,):
            raise SnapshotMismatchError(f"Snapshot of size {snapshot.values.shape} does not fit {self.env_id}.")
        return self._start(snapshot.values, rng)

    def reset_from_state(
            self,
            snapshot: EnvSnapshot,
            assignment: Optional[ParamAssignment],
            rng: np.random.Generator) -> np.ndarray:
        self.restore(snapshot, rng)
        if assignment is not None:
            self._apply(assignment)
        return self.observation()

    def _apply(self, assignment: ParamAssignment) -> None:
        pass

    def save_state(self) -> EnvSnapshot:
        return EnvSnapshot(env_id=self.env_id, values=self._values.copy())

    def expert_action(self) -> np.ndarray:
        return np.zeros(ACTION_DIM)

    def _check_running(self) -> None:
        if self._done:
            raise EpisodeFinishedError(f"{self.env_id}: step called on a finished episode; reset first.")


class ControllableSuccessEnv(SyntheticEnv):
    """One-step episodes that succeed with probability 1 - 0.8 * difficulty, whatever the action."""
    env_id = 'controllable_success'
    default_max_steps = 1
    state_size = 3  # t, difficulty, success

    @classmethod
    def default_registry(cls) -> ParamRegistry:
        return ParamRegistry([TaskParam('difficulty', 0.0, 0.0, 1.0, 0.0, 0.0, 1.0)])

    @property
    def obs_dim(self) -> int:
        return 1

    @staticmethod
    def success_probability(difficulty: float) -> float:
        return 1.0 - 0.8 * difficulty

    def reset_regular(self, assignment: ParamAssignment, rng: np.random.Generator) -> np.ndarray:
        self._check_regular_assignment(assignment)
        return self._start(np.array([0.0, assignment.values['difficulty'], 0.0]), rng)

    def _apply(self, assignment: ParamAssignment) -> None:
        if 'difficulty' in assignment.values:
            self._values[1] = assignment.values['difficulty']

    def observation(self) -> np.ndarray:
        return self._values[1:2].copy()

    def step(self, action: np.ndarray) -> StepResult:
        self._check_running()
        success = bool(self._rng.random() < self.success_probability(self._values[1]))
        self._values[0] += 1.0
        self._values[2] = float(success)
        self._done = True
        return StepResult(obs=self.observation(), reward=float(success), done=True, success=success, info={'phi': 0.0})

    def success_predicate(self, snapshot: EnvSnapshot) -> bool:
        return bool(snapshot.values[2] > 0.0)


class ActionPenaltyEnv(SyntheticEnv):
    """Fixed-length episodes with reward -|a|^2; the optimal policy outputs zero."""
    env_id = 'action_penalty'
    default_max_steps = 16
    state_size = 1

    @classmethod
    def default_registry(cls) -> ParamRegistry:
        return ParamRegistry()

    @property
    def obs_dim(self) -> int:
        return 1

    def reset_regular(self, assignment: ParamAssignment, rng: np.random.Generator) -> np.ndarray:
        return self._start(np.zeros(1), rng)

    def observation(self) -> np.ndarray:
        return np.array([1.0 - self._values[0] / self.max_steps])

    def step(self, action: np.ndarray) -> StepResult:
        self._check_running()
        a = np.clip(np.asarray(action, dtype=np.float64).reshape(ACTION_DIM), -1.0, 1.0)
        self._values[0] += 1.0
        self._done = self._values[0] >= self.max_steps
        return StepResult(
            obs=self.observation(),
            reward=-float(np.dot(a, a)),
            done=self._done,
            success=False,
            info={'phi': 0.0, 'truncated': self._done})

    def success_predicate(self, snapshot: EnvSnapshot) -> bool:
        return False
