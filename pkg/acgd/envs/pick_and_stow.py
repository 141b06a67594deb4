import logging

import numpy as np

from acgd.envs.base import ManipulationEnv, EPS, WORLD_LO, WORLD_HI, penalty
from acgd.envs.registries import PickAndStowParams
from acgd.params import ParamRegistry
from common.domain import EnvSnapshot

logger = logging.getLogger(__name__)

BLOCK = 0
WALL_HEIGHT = 0.08
WALL_THICKNESS = 0.01
LAYOUT_RANGE = 0.3


class PickAndStowEnv(ManipulationEnv):
    """Pick a block from the table and drop it into an open box; touching the box walls costs reward."""
    env_id = 'pick_and_stow_2d'
    default_max_steps = 150
    default_k_phi = 0.05
    n_blocks = 1
    extra_fields = [('box', 2)]

    @classmethod
    def default_registry(cls) -> ParamRegistry:
        return PickAndStowParams.generate()

    @property
    def n_observed(self) -> int:
        return 2

    @property
    def box_x(self) -> float:
        return float(self._field('box')[0])

    @property
    def box_width(self) -> float:
        return float(self._field('box')[1])

    def _layout_regular(self, rng: np.random.Generator) -> None:
        size = self._params['block_size']
        box_x = rng.uniform(-LAYOUT_RANGE, LAYOUT_RANGE)
        side = 1.0 if rng.random() < 0.5 else -1.0
        x = float(np.clip(box_x + side * self._params['object_distance'], WORLD_LO[0] + size / 2, WORLD_HI[0] - size / 2))

        self._set('box', [box_x, self._params['box_width']])
        self._set('size', [size])
        self._set('pos', [x, size / 2])
        gx = float(np.clip(x + self._params['gripper_lateral_offset'], WORLD_LO[0], WORLD_HI[0]))
        self._set('gripper', [gx, self._params['gripper_height']])

    def _observed_points(self) -> np.ndarray:
        return np.vstack([self.pos, [[self.box_x, 0.0]]])

    def _walls(self):
        inner = self.box_width / 2
        return [
            (self.box_x - inner - WALL_THICKNESS, self.box_x - inner),
            (self.box_x + inner, self.box_x + inner + WALL_THICKNESS),
        ]

    def _in_contact(self) -> bool:
        g = self.gripper
        pos = self.pos[BLOCK]
        half = self.size[BLOCK] / 2
        for lo, hi in self._walls():
            if lo <= g[0] <= hi and g[1] <= WALL_HEIGHT:
                return True
            if min(pos[0] + half, hi) - max(pos[0] - half, lo) > 1e-12 and pos[1] - half < WALL_HEIGHT - 1e-12:
                return True
        return False

    def success_predicate(self, snapshot: EnvSnapshot) -> bool:
        pos = self.decode(snapshot, 'pos')
        size = self.decode(snapshot, 'size')[BLOCK]
        box_x, box_width = self.decode(snapshot, 'box')
        free = self.decode(snapshot, 'attached')[0] < 0
        gripper_open = self.decode(snapshot, 'closed')[0] == 0.0
        on_table = abs(pos[1] - size / 2) <= EPS
        inside = abs(pos[0] - box_x) <= (box_width - size) / 2 + EPS
        return bool(free and gripper_open and on_table and inside)

    def penalty_value(self) -> float:
        return penalty(self.k_phi, float(self._field('contact_steps')[0]))

    def _manipulated(self) -> int:
        return BLOCK

    def _goal_above(self, snapshot: EnvSnapshot) -> np.ndarray:
        box_x = self.decode(snapshot, 'box')[0]
        size = self.decode(snapshot, 'size')[BLOCK]
        return np.array([box_x, size / 2])

    def expert_action(self) -> np.ndarray:
        if self.attached == BLOCK:
            return self._expert_carry(BLOCK, self.box_x, self.size[BLOCK] / 2)
        if self.success_predicate(self.save_state()):
            return self._expert_retreat()
        return self._expert_grasp(BLOCK)
