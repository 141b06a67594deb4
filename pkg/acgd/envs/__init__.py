import logging
from typing import Dict, Type, Optional

from acgd.envs.base import Env, ManipulationEnv, RewardConfig, scripted_expert
from acgd.envs.block_stack import BlockStackEnv
from acgd.envs.pick_and_stow import PickAndStowEnv
from acgd.envs.synthetic import ControllableSuccessEnv, ActionPenaltyEnv
from acgd.params import ParamRegistry

logger = logging.getLogger(__name__)

ENVIRONMENTS: Dict[str, Type[Env]] = {
    env.env_id: env for env in [PickAndStowEnv, BlockStackEnv, ControllableSuccessEnv, ActionPenaltyEnv]
}


def make_env(
        env_id: str,
        reward: Optional[RewardConfig] = None,
        max_steps: Optional[int] = None,
        registry: Optional[ParamRegistry] = None) -> Env:
    if env_id not in ENVIRONMENTS:
        raise ValueError(
            f"""
            Invalid environment id: {env_id}.
            Options available: {list(ENVIRONMENTS)}.
            """)

    env = ENVIRONMENTS[env_id](reward=reward, max_steps=max_steps)
    if registry is not None:
        if registry.names != env.registry.names:
            raise ValueError(f"Registry {registry.names} does not match {env_id} parameters {env.registry.names}.")
        env.registry = registry
    return env


__all__ = [
    'Env', 'ManipulationEnv', 'RewardConfig', 'scripted_expert', 'make_env', 'ENVIRONMENTS',
    'BlockStackEnv', 'PickAndStowEnv', 'ControllableSuccessEnv', 'ActionPenaltyEnv',
]
