from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Any

import numpy as np


class ResetMode(Enum):
    REGULAR = 'regular'
    DEMONSTRATION = 'demonstration'


class ResetClass(Enum):
    # H_d: may be re-randomized on top of a demonstration state.
    DEMO_COMPATIBLE = 'demo_compatible'
    # H_a: only randomized by regular resets.
    REGULAR_ONLY = 'regular_only'


class MethodSpec(Enum):
    ACGD = 'ACGD'
    SPARSE_PPO = 'SparsePPO'
    SHAPED_PPO = 'ShapedPPO'
    BC = 'BC'
    BC_INIT_PPO = 'BCInitPPO'
    UNIFORM_DEMO_CURRICULUM = 'UniformDemoCurriculum'
    LINEAR_DEMO_CURRICULUM = 'LinearDemoCurriculum'
    LINEAR_WITH_REGULAR_RESETS = 'LinearWithRegularResets'
    SHARED_DELTA = 'SharedDelta'
    CONSTANT_MAX_DIFFICULTY = 'ConstantMaxDifficulty'

    @classmethod
    def parse(cls, name: str) -> 'MethodSpec':
        for method in cls:
            if method.value == name or method.name == name:
                return method
        raise ValueError(
            f"""
            Invalid --method option: {name}.
            Options available: {[m.value for m in cls]}.
            """)


@dataclass(frozen=True)
class ParamAssignment:
    values: Dict[str, float]
    delta_used: float
    reset_mode: ResetMode


@dataclass(frozen=True, eq=False)
class EnvSnapshot:
    env_id: str
    values: np.ndarray

    def same_as(self, other: 'EnvSnapshot') -> bool:
        return self.env_id == other.env_id and np.array_equal(self.values, other.values)


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    success: bool
    info: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class EpisodeOutcome:
    reset_mode: ResetMode
    success: bool
    length: int = 0
    episode_return: float = 0.0
