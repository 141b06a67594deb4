import logging

import numpy as np

from acgd.envs.base import ManipulationEnv, EPS, WORLD_LO, WORLD_HI, penalty
from acgd.envs.registries import BlockStackParams
from acgd.params import ParamRegistry
from common.domain import EnvSnapshot

logger = logging.getLogger(__name__)

BOTTOM = 0
TOP = 1
BOTTOM_BLOCK_SIZE = 0.1
STACK_TOLERANCE = 0.03
LAYOUT_RANGE = 0.3


class BlockStackEnv(ManipulationEnv):
    """
    Stack a small block on a larger one.

    Success requires the top block to rest on the bottom block, centred within
    `STACK_TOLERANCE` and slower than `final_velocity_threshold`, for
    `success_hold_steps` consecutive steps. Moving the bottom block costs reward.
    """
    env_id = 'block_stack_2d'
    default_max_steps = 250
    default_k_phi = 5.0
    n_blocks = 2

    @classmethod
    def default_registry(cls) -> ParamRegistry:
        return BlockStackParams.generate()

    def _layout_regular(self, rng: np.random.Generator) -> None:
        top_size = self._params['block_size']
        x0 = rng.uniform(-LAYOUT_RANGE, LAYOUT_RANGE)
        side = 1.0 if rng.random() < 0.5 else -1.0
        x1 = float(np.clip(x0 + side * self._params['block_distance'], WORLD_LO[0] + top_size / 2, WORLD_HI[0] - top_size / 2))

        self._set('size', [BOTTOM_BLOCK_SIZE, top_size])
        self._set('pos', [x0, BOTTOM_BLOCK_SIZE / 2, x1, top_size / 2])
        gx = float(np.clip(x1 + self._params['gripper_lateral_offset'], WORLD_LO[0], WORLD_HI[0]))
        self._set('gripper', [gx, self._params['gripper_height']])

    def _stacked(self) -> bool:
        pos = self.pos
        size = self.size
        top_of_bottom = pos[BOTTOM, 1] + size[BOTTOM] / 2
        return (
            self.attached != TOP
            and abs(pos[TOP, 1] - size[TOP] / 2 - top_of_bottom) <= EPS
            and abs(pos[TOP, 0] - pos[BOTTOM, 0]) <= STACK_TOLERANCE + EPS
        )

    def _update_progress(self) -> None:
        speed = float(np.linalg.norm(self.vel[TOP]))
        bottom_on_table = abs(self.pos[BOTTOM, 1] - self.size[BOTTOM] / 2) <= EPS
        stable = self._stacked() and bottom_on_table and speed <= self._params['final_velocity_threshold']
        self._set('hold', self._field('hold')[0] + 1 if stable else 0.0)

    def success_predicate(self, snapshot: EnvSnapshot) -> bool:
        hold = self.decode(snapshot, 'hold')[0]
        required = self.snapshot_params(snapshot)['success_hold_steps']
        return bool(hold >= required)

    def bottom_displacement(self) -> float:
        initial = self._field('initial').reshape(self.n_blocks, 2)
        return float(np.linalg.norm(self.pos[BOTTOM] - initial[BOTTOM]))

    def penalty_value(self) -> float:
        return penalty(self.k_phi, self.bottom_displacement())

    def _manipulated(self) -> int:
        return TOP

    def _goal_above(self, snapshot: EnvSnapshot) -> np.ndarray:
        pos = self.decode(snapshot, 'pos').reshape(self.n_blocks, 2)
        size = self.decode(snapshot, 'size')
        return np.array([pos[BOTTOM, 0], pos[BOTTOM, 1] + size[BOTTOM] / 2 + size[TOP] / 2])

    def expert_action(self) -> np.ndarray:
        if self.attached == TOP:
            rest_y = self.pos[BOTTOM, 1] + self.size[BOTTOM] / 2 + self.size[TOP] / 2
            return self._expert_carry(TOP, self.pos[BOTTOM, 0], rest_y)
        if self._stacked():
            return self._expert_retreat()
        return self._expert_grasp(TOP)
