import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Tuple, Optional

import numpy as np

from acgd.params import ParamRegistry
from common.domain import EnvSnapshot, ParamAssignment, StepResult
from common.errors import ConfigurationError, SnapshotMismatchError, EpisodeFinishedError

logger = logging.getLogger(__name__)

ACTION_DIM = 3
EPS = 1e-9
WORLD_LO = np.array([-1.0, 0.0])
WORLD_HI = np.array([1.0, 1.0])
FALL_SPEED = 0.05
SETTLE_DECAY = 0.5
SETTLE_STOP = 1e-4
GRASP_TOLERANCE = 0.05
MAX_GRIPPER_WIDTH = 0.2
EXPERT_FRACTION = 0.3
TRAVEL_HEIGHT = 0.35


@dataclass
class RewardConfig:
    mode: str = 'sparse'
    k_phi: Optional[float] = None
    w_reach: float = 0.1
    w_carry: float = 0.1
    bonus_grasp: float = 1.0
    bonus_place: float = 5.0

    def __post_init__(self):
        if self.mode not in ['sparse', 'shaped']:
            raise ConfigurationError(
                f"""
                Invalid reward mode: {self.mode}.
                Options available: ['sparse', 'shaped'].
                """)


def penalty(k_phi: float, amount: float) -> float:
    return min(0.5, k_phi * amount)


class StateLayout:
    """Named slices over the flat float64 snapshot vector."""

    def __init__(self, fields: List[Tuple[str, int]]):
        self._slices: Dict[str, slice] = {}
        offset = 0
        for name, size in fields:
            self._slices[name] = slice(offset, offset + size)
            offset += size
        self.size = offset

    def __contains__(self, name: str) -> bool:
        return name in self._slices

    def get(self, values: np.ndarray, name: str) -> np.ndarray:
        return values[self._slices[name]]

    def scalar(self, values: np.ndarray, name: str) -> float:
        return float(values[self._slices[name]][0])

    def set(self, values: np.ndarray, name: str, value) -> None:
        values[self._slices[name]] = value


class Env(ABC):
    """Interface shared by every environment the trainer can drive."""
    env_id: str = ''
    action_dim: int = ACTION_DIM
    default_max_steps: int = 100
    default_k_phi: float = 5.0

    def __init__(self, reward: Optional[RewardConfig] = None, max_steps: Optional[int] = None):
        self.reward_config = reward if reward is not None else RewardConfig()
        self.max_steps = max_steps if max_steps is not None else self.default_max_steps
        self.registry: ParamRegistry = self.default_registry()
        self._rng: Optional[np.random.Generator] = None
        self._done = True

    @classmethod
    @abstractmethod
    def default_registry(cls) -> ParamRegistry:
        raise NotImplementedError()

    @property
    @abstractmethod
    def obs_dim(self) -> int:
        raise NotImplementedError()

    @abstractmethod
    def reset_regular(self, assignment: ParamAssignment, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError()

    @abstractmethod
    def reset_from_state(
            self,
            snapshot: EnvSnapshot,
            assignment: Optional[ParamAssignment],
            rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError()

    @abstractmethod
    def restore(self, snapshot: EnvSnapshot, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError()

    @abstractmethod
    def step(self, action: np.ndarray) -> StepResult:
        raise NotImplementedError()

    @abstractmethod
    def save_state(self) -> EnvSnapshot:
        raise NotImplementedError()

    @abstractmethod
    def observation(self) -> np.ndarray:
        raise NotImplementedError()

    @abstractmethod
    def success_predicate(self, snapshot: EnvSnapshot) -> bool:
        raise NotImplementedError()

    @abstractmethod
    def expert_action(self) -> np.ndarray:
        raise NotImplementedError()

    @property
    def k_phi(self) -> float:
        k_phi = self.reward_config.k_phi
        return self.default_k_phi if k_phi is None else k_phi

    @property
    def done(self) -> bool:
        return self._done

    def _check_snapshot(self, snapshot: EnvSnapshot) -> None:
        if snapshot.env_id != self.env_id:
            raise SnapshotMismatchError(
                f"Snapshot recorded in {snapshot.env_id} cannot be restored into {self.env_id}.")

    def _check_regular_assignment(self, assignment: ParamAssignment) -> None:
        missing = [name for name in self.registry.names if name not in assignment.values]
        if missing:
            raise ConfigurationError(f"Assignment for {self.env_id} misses required parameters: {missing}.")


class ManipulationEnv(Env):
    """
    Kinematic 2D manipulation world in the vertical plane.

    A point gripper moves by clamped relative actions; blocks are axis-aligned squares
    that can be grasped, carried, released, pushed and stacked. The whole episode state
    lives in one flat vector so that any state can be saved and restored exactly.
    Subclasses define the objects, the initial layout, the success rule and the expert.
    """
    n_blocks: int = 1
    extra_fields: List[Tuple[str, int]] = []

    def __init__(self, reward: Optional[RewardConfig] = None, max_steps: Optional[int] = None):
        super().__init__(reward, max_steps)
        n = self.n_blocks
        self.layout = StateLayout([
            ('t', 1),
            ('gripper', 2),
            ('closed', 1),
            ('attached', 1),
            ('attach_offset', 2),
            ('grasp_rewarded', 1),
            ('hold', 1),
            ('contact_steps', 1),
            ('pos', 2 * n),
            ('vel', 2 * n),
            ('size', n),
            ('initial', 2 * n),
            ('noise', 2 * n),
            *self.extra_fields,
            ('params', len(self.registry)),
        ])
        self._state = np.zeros(self.layout.size)
        self._params: Dict[str, float] = self.registry.easiest()

    # -- state accessors -----------------------------------------------------------------

    @property
    def t(self) -> int:
        return int(self._field('t')[0])

    @property
    def gripper(self) -> np.ndarray:
        return self._field('gripper').copy()

    @property
    def closed(self) -> bool:
        return bool(self._field('closed')[0])

    @property
    def attached(self) -> int:
        return int(self._field('attached')[0])

    @property
    def pos(self) -> np.ndarray:
        return self._field('pos').reshape(self.n_blocks, 2)

    @property
    def vel(self) -> np.ndarray:
        return self._field('vel').reshape(self.n_blocks, 2)

    @property
    def size(self) -> np.ndarray:
        return self._field('size')

    @property
    def params(self) -> Dict[str, float]:
        return dict(self._params)

    def _field(self, name: str) -> np.ndarray:
        return self.layout.get(self._state, name)

    def _set(self, name: str, value) -> None:
        self.layout.set(self._state, name, value)

    def decode(self, snapshot: EnvSnapshot, name: str) -> np.ndarray:
        return self.layout.get(snapshot.values, name)

    def with_fields(self, snapshot: EnvSnapshot, **updates) -> EnvSnapshot:
        values = snapshot.values.copy()
        for name, value in updates.items():
            self.layout.set(values, name, value)
        return EnvSnapshot(env_id=snapshot.env_id, values=values)

    def snapshot_params(self, snapshot: EnvSnapshot) -> Dict[str, float]:
        return dict(zip(self.registry.names, self.decode(snapshot, 'params').tolist()))

    @property
    def obs_dim(self) -> int:
        return 4 + 2 * self.n_observed

    @property
    def n_observed(self) -> int:
        return self.n_blocks

    @property
    def locked_params(self) -> List[str]:
        return [p.name for p in self.registry if not p.demo_compatible]

    # -- resets --------------------------------------------------------------------------

    def reset_regular(self, assignment: ParamAssignment, rng: np.random.Generator) -> np.ndarray:
        self._check_regular_assignment(assignment)
        self._rng = rng
        self._params = {name: float(assignment.values[name]) for name in self.registry.names}
        self._state = np.zeros(self.layout.size)
        self._set('attached', -1.0)
        self._layout_regular(rng)
        self._set('initial', self._field('pos').copy())
        self._sample_noise()
        self._store_params()
        self._done = False
        return self.observation()

    def reset_from_state(
            self,
            snapshot: EnvSnapshot,
            assignment: Optional[ParamAssignment],
            rng: np.random.Generator) -> np.ndarray:
        self.restore(snapshot, rng)
        if assignment is not None:
            locked = set(self.locked_params)
            for name, value in assignment.values.items():
                if name in self._params and name not in locked:
                    self._params[name] = float(value)
            self._store_params()
        return self.observation()

    def restore(self, snapshot: EnvSnapshot, rng: np.random.Generator) -> np.ndarray:
        self._check_snapshot(snapshot)
        if snapshot.values.shape != (self.layout.size,):
            raise SnapshotMismatchError(
                f"Snapshot of size {snapshot.values.shape} does not fit {self.env_id} layout of size {self.layout.size}.")
        self._rng = rng
        self._state = np.array(snapshot.values, dtype=np.float64, copy=True)
        self._params = self.snapshot_params(snapshot)
        self._done = False
        return self.observation()

    def save_state(self) -> EnvSnapshot:
        return EnvSnapshot(env_id=self.env_id, values=self._state.copy())

    def _store_params(self) -> None:
        self._set('params', [self._params[name] for name in self.registry.names])

    @abstractmethod
    def _layout_regular(self, rng: np.random.Generator) -> None:
        raise NotImplementedError()

    # -- dynamics ------------------------------------------------------------------------

    def step(self, action: np.ndarray) -> StepResult:
        if self._done:
            raise EpisodeFinishedError(f"{self.env_id}: step called on a finished episode; reset first.")

        a = np.clip(np.asarray(action, dtype=np.float64).reshape(ACTION_DIM), -1.0, 1.0)
        shaped = self.reward_config.mode == 'shaped'
        prev = self.save_state() if shaped else None

        self._apply_grip(a[2] > 0.0)
        self._move_gripper(a[:2])
        self._settle_blocks()
        if self._in_contact():
            self._set('contact_steps', self._field('contact_steps')[0] + 1)
        self._set('t', self.t + 1)
        self._update_progress()
        self._sample_noise()

        state = self.save_state()
        success = self.success_predicate(state)
        phi = self.penalty_value()
        if shaped:
            reward = self.shaped_reward(state, prev)
        else:
            reward = 1.0 - phi if success else 0.0

        truncated = not success and self.t >= self.max_steps
        self._done = success or truncated
        info = {
            'phi': phi,
            'grasped': self.attached >= 0,
            'hold': int(self._field('hold')[0]),
            'truncated': truncated,
        }
        return StepResult(obs=self.observation(), reward=float(reward), done=self._done, success=success, info=info)

    def _apply_grip(self, close: bool) -> None:
        if close and not self.closed:
            self._set('closed', 1.0)
            idx = self._nearest_graspable()
            if idx >= 0:
                self._set('attached', float(idx))
                self._set('attach_offset', self.pos[idx] - self.gripper)
                vel = self.vel
                vel[idx] = 0.0
                self._set('vel', vel.ravel())
                if idx == self._manipulated():
                    self._set('grasp_rewarded', 1.0)
        elif not close and self.closed:
            self._set('closed', 0.0)
            idx = self.attached
            if idx >= 0:
                self._set('attached', -1.0)
                self._set('attach_offset', [0.0, 0.0])
                vel = self.vel
                vel[idx] = [self._params['bounciness'] * self._rng.uniform(-1.0, 1.0), 0.0]
                self._set('vel', vel.ravel())

    def _nearest_graspable(self) -> int:
        distances = np.linalg.norm(self.pos - self.gripper, axis=1)
        idx = int(np.argmin(distances))
        return idx if distances[idx] <= GRASP_TOLERANCE else -1

    def _move_gripper(self, a: np.ndarray) -> None:
        move = a * self._params['gripper_speed'] + np.array([self._params['control_offset'], 0.0])
        gripper = np.clip(self.gripper + move, WORLD_LO, WORLD_HI)

        i = self.attached
        if i < 0:
            self._set('gripper', gripper)
            return

        pos = self.pos
        size = self.size
        offset = self._field('attach_offset')
        prev_bottom = pos[i, 1] - size[i] / 2
        center = gripper + offset

        half = size[i] / 2
        center[0] = np.clip(center[0], WORLD_LO[0] + half, WORLD_HI[0] - half)
        center[1] = max(center[1], half)

        for j in range(self.n_blocks):
            if j == i:
                continue
            overlap_x = (size[i] + size[j]) / 2 - abs(center[0] - pos[j, 0])
            overlap_y = (size[i] + size[j]) / 2 - abs(center[1] - pos[j, 1])
            if overlap_x <= 1e-12 or overlap_y <= 1e-12:
                continue
            top_j = pos[j, 1] + size[j] / 2
            if prev_bottom >= top_j - EPS:
                center[1] = top_j + half
            else:
                direction = np.sign(pos[j, 0] - center[0]) or np.sign(move[0]) or 1.0
                pos[j, 0] = np.clip(pos[j, 0] + direction * overlap_x, WORLD_LO[0] + size[j] / 2, WORLD_HI[0] - size[j] / 2)

        pos[i] = center
        self._set('pos', pos.ravel())
        self._set('gripper', center - offset)

    def _support_height(self, i: int, pos: np.ndarray) -> float:
        size = self.size
        bottom = pos[i, 1] - size[i] / 2
        support = 0.0
        for j in range(self.n_blocks):
            if j == i or j == self.attached:
                continue
            overlap_x = (size[i] + size[j]) / 2 - abs(pos[i, 0] - pos[j, 0])
            top_j = pos[j, 1] + size[j] / 2
            if overlap_x > 1e-12 and top_j <= bottom + EPS:
                support = max(support, top_j)
        return support

    def _settle_blocks(self) -> None:
        pos = self.pos
        vel = self.vel
        size = self.size
        free = [i for i in range(self.n_blocks) if i != self.attached]
        for i in sorted(free, key=lambda k: pos[k, 1] - size[k] / 2):
            support = self._support_height(i, pos)
            bottom = pos[i, 1] - size[i] / 2
            if bottom > support + EPS:
                new_bottom = max(bottom - FALL_SPEED, support)
                if new_bottom <= support + EPS:
                    pos[i, 1] = support + size[i] / 2
                    vel[i] = [self._params['bounciness'] * self._rng.uniform(-1.0, 1.0), 0.0]
                else:
                    pos[i, 1] = new_bottom + size[i] / 2
                    vel[i] = [0.0, new_bottom - bottom]
                continue

            pos[i, 1] = support + size[i] / 2
            vel[i, 1] = 0.0
            if vel[i, 0] != 0.0:
                pos[i, 0] = np.clip(pos[i, 0] + vel[i, 0], WORLD_LO[0] + size[i] / 2, WORLD_HI[0] - size[i] / 2)
                vel[i, 0] *= SETTLE_DECAY
                if abs(vel[i, 0]) < SETTLE_STOP:
                    vel[i, 0] = 0.0

        self._set('pos', pos.ravel())
        self._set('vel', vel.ravel())

    def _sample_noise(self) -> None:
        scale = self._params.get('obs_noise', 0.0)
        if scale > 0.0:
            self._set('noise', self._rng.normal(0.0, scale, size=2 * self.n_blocks))
        else:
            self._set('noise', np.zeros(2 * self.n_blocks))

    def _in_contact(self) -> bool:
        return False

    def _update_progress(self) -> None:
        pass

    def resting(self, i: int, pos: Optional[np.ndarray] = None) -> bool:
        pos = self.pos if pos is None else pos
        return abs(pos[i, 1] - self.size[i] / 2 - self._support_height(i, pos)) <= EPS

    # -- observations and rewards --------------------------------------------------------

    def gripper_width(self) -> float:
        if not self.closed:
            return 1.0
        if self.attached >= 0:
            return float(self.size[self.attached] / MAX_GRIPPER_WIDTH)
        return 0.0

    def _observed_points(self) -> np.ndarray:
        return self.pos

    def observation(self) -> np.ndarray:
        remaining = min(max((self.max_steps - self.t) / self.max_steps, 0.0), 1.0)
        points = self._observed_points()
        noise = self._field('noise').reshape(self.n_blocks, 2)
        rel = points - self.gripper
        rel[:self.n_blocks] += noise
        return np.concatenate([self.gripper, [self.gripper_width(), remaining], rel.ravel()])

    @abstractmethod
    def penalty_value(self) -> float:
        raise NotImplementedError()

    @abstractmethod
    def _manipulated(self) -> int:
        raise NotImplementedError()

    @abstractmethod
    def _goal_above(self, snapshot: EnvSnapshot) -> np.ndarray:
        raise NotImplementedError()

    def shaped_reward(self, state: EnvSnapshot, prev_state: EnvSnapshot) -> float:
        cfg = self.reward_config
        k = self._manipulated()
        gripper = self.decode(state, 'gripper')
        obj = self.decode(state, 'pos').reshape(self.n_blocks, 2)[k]
        carrying = int(self.decode(state, 'attached')[0]) == k

        if carrying:
            reward = -cfg.w_carry * float(np.linalg.norm(obj - self._goal_above(state)))
        else:
            reward = -cfg.w_reach * float(np.linalg.norm(gripper - obj))

        if carrying and not self.decode(prev_state, 'grasp_rewarded')[0]:
            reward += cfg.bonus_grasp
        if self.success_predicate(state):
            reward += cfg.bonus_place
        return reward

    # -- expert --------------------------------------------------------------------------

    def _expert_move(self, target: np.ndarray, close: bool) -> np.ndarray:
        speed = self._params['gripper_speed']
        delta = np.asarray(target, dtype=np.float64) - self.gripper - np.array([self._params['control_offset'], 0.0])
        move = np.clip(delta / speed, -EXPERT_FRACTION, EXPERT_FRACTION)
        return np.array([move[0], move[1], 1.0 if close else -1.0])

    def _expert_grasp(self, k: int) -> np.ndarray:
        target = self.pos[k]
        if self.closed:
            return np.array([0.0, 0.0, -1.0])
        if not self.resting(k) or abs(self.vel[k, 0]) > 0.0:
            return self._expert_move(self.gripper, close=False)
        if abs(self.gripper[0] - target[0]) > 1e-6:
            height = max(self.gripper[1], target[1] + self.size[k])
            return self._expert_move(np.array([target[0], height]), close=False)
        if abs(self.gripper[1] - target[1]) > 1e-6:
            return self._expert_move(target, close=False)
        return np.array([0.0, 0.0, 1.0])

    def _expert_carry(self, k: int, target_x: float, rest_y: float) -> np.ndarray:
        offset = self._field('attach_offset')
        block = self.pos[k]
        if abs(block[0] - target_x) > 1e-6:
            if block[1] < TRAVEL_HEIGHT - 1e-6:
                return self._expert_move(np.array([self.gripper[0], TRAVEL_HEIGHT - offset[1]]), close=True)
            return self._expert_move(np.array([target_x - offset[0], TRAVEL_HEIGHT - offset[1]]), close=True)
        if block[1] > rest_y + 1e-6:
            return self._expert_move(np.array([target_x - offset[0], rest_y - offset[1]]), close=True)
        return np.array([0.0, 0.0, -1.0])

    def _expert_retreat(self) -> np.ndarray:
        if self.gripper[1] < TRAVEL_HEIGHT - 1e-6:
            return self._expert_move(np.array([self.gripper[0], TRAVEL_HEIGHT]), close=False)
        return self._expert_move(self.gripper, close=False)


def scripted_expert(env: Env) -> np.ndarray:
    return env.expert_action()
