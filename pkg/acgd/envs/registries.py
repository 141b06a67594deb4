import logging

from acgd.params import TaskParam, ParamRegistry
from common.domain import ResetClass

logger = logging.getLogger(__name__)

DEMO = ResetClass.DEMO_COMPATIBLE
REGULAR = ResetClass.REGULAR_ONLY


class RegistryGenerator:
    @classmethod
    def generate(cls) -> ParamRegistry:
        declared = {}
        for cls_ in reversed(cls.__mro__):
            declared.update({k: v for k, v in vars(cls_).items() if isinstance(v, TaskParam)})

        return ParamRegistry(declared.values())


class ManipulationParams(RegistryGenerator):
    gripper_speed = TaskParam('gripper_speed', 0.05, 0.0, 0.05, 0.01, 0.03, 0.07)
    control_offset = TaskParam('control_offset', 0.0, 0.0, 0.0, 0.004, -0.01, 0.01)
    obs_noise = TaskParam('obs_noise', 0.0, 0.0, 0.01, 0.005, 0.0, 0.03)
    bounciness = TaskParam('bounciness', 0.0, 0.0, 0.01, 0.005, 0.0, 0.03)
    gripper_height = TaskParam('gripper_height', 0.25, 0.0, 0.6, 0.1, 0.15, 0.9, REGULAR)
    gripper_lateral_offset = TaskParam('gripper_lateral_offset', 0.0, 0.0, 0.0, 0.15, -0.3, 0.3, REGULAR)


class BlockStackParams(ManipulationParams):
    success_hold_steps = TaskParam('success_hold_steps', 10.0, 0.0, 15.0, 2.0, 10.0, 25.0, DEMO, integer=True)
    block_distance = TaskParam('block_distance', 0.15, 0.0, 0.5, 0.1, 0.15, 0.7, REGULAR)
    final_velocity_threshold = TaskParam('final_velocity_threshold', 0.01, 0.0, 0.002, 0.0, 0.001, 0.02, REGULAR)
    block_size = TaskParam('block_size', 0.08, 0.0, 0.06, 0.005, 0.05, 0.09, REGULAR)


class PickAndStowParams(ManipulationParams):
    object_distance = TaskParam('object_distance', 0.25, 0.0, 0.6, 0.1, 0.25, 0.7, REGULAR)
    block_size = TaskParam('block_size', 0.06, 0.0, 0.05, 0.005, 0.04, 0.07, REGULAR)
    box_width = TaskParam('box_width', 0.3, 0.0, 0.2, 0.02, 0.16, 0.34, REGULAR)
