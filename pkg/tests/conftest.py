import numpy as np
import pytest

from acgd.demos import record_demonstrations
from acgd.envs import BlockStackEnv, PickAndStowEnv, ControllableSuccessEnv
from acgd.params import sample_assignment
from acgd.rl.ppo import PpoConfig
from common.domain import ResetMode
from experiment.config import ExperimentConfig


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def block_stack():
    return BlockStackEnv()


@pytest.fixture
def pick_and_stow():
    return PickAndStowEnv()


@pytest.fixture
def reset_at():
    def _reset(env, delta, seed=0):
        rng = np.random.default_rng(seed)
        assignment = sample_assignment(env.registry, delta, ResetMode.REGULAR, rng)
        return env.reset_regular(assignment, rng), rng
    return _reset


@pytest.fixture(scope='session')
def block_stack_demos():
    return record_demonstrations(BlockStackEnv(), 5, seed=7)


@pytest.fixture(scope='session')
def block_stack_bc_demos():
    return record_demonstrations(BlockStackEnv(), 20, seed=8, with_actions=True)


@pytest.fixture(scope='session')
def synthetic_demos():
    return record_demonstrations(ControllableSuccessEnv(), 3, seed=0)


@pytest.fixture
def tiny_ppo():
    return PpoConfig(actors=2, steps_per_actor=16, minibatch_size=16, epochs=2, total_steps=2 * 16 * 5, hidden_sizes=[8, 8])


@pytest.fixture
def tiny_experiment(tmp_path):
    """Four PPO iterations on the one-step synthetic task; overrides go into the config dict."""
    def _config(name='run', **overrides) -> ExperimentConfig:
        d = {
            'env': 'controllable_success',
            'method': 'ACGD',
            'seeds': [0, 1],
            'ppo': {
                'actors': 2,
                'steps_per_actor': 8,
                'minibatch_size': 16,
                'epochs': 1,
                'total_steps': 64,
                'hidden_sizes': [8, 8],
            },
            'demos': {'count': 2, 'seed': 3},
            'bc': {'epochs': 2, 'demos': 3},
            'eval_interval': 2,
            'eval_episodes': 5,
            'checkpoint_interval': 2,
            'output_dir': str(tmp_path / name),
        }
        d.update(overrides)
        return ExperimentConfig.from_dict(d)
    return _config
