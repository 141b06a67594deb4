import logging
from pathlib import Path
from typing import Optional

import numpy as np

from acgd.baselines import behavior_cloning_train
from acgd.rl.network import PolicyNetwork
from acgd.rl.ppo import PolicyActor, evaluate
from experiment.runner import ExperimentRunner, eval_seed
from utils.decorators import Decorators

logger = logging.getLogger(__name__)


class BehaviorCloningRunner(ExperimentRunner):
    """
    Behaviour cloning consumes no environment transitions. Its metrics rows repeat the
    cloned policy's evaluation on the same iteration grid the PPO methods use, so that
    curves from both kinds of runs align by env_steps.
    """

    def prepare_shared_artifacts(self) -> None:
        self.repository.demos(self.make_env(), self.config, with_actions=True)

    @Decorators.log_exception
    @Decorators.log_duration
    def run_seed(self, seed: int, resume: Optional[Path] = None) -> None:
        cfg = self.config
        env = self.make_env()
        store = self.repository.demos(env, cfg, with_actions=True)

        rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        network = PolicyNetwork(env.obs_dim, env.action_dim, rng, cfg.ppo.hidden_sizes, cfg.ppo.init_log_std)
        network, history = behavior_cloning_train(store, network, cfg.bc, env, seed)

        total_iterations = cfg.ppo.iterations
        result = evaluate(PolicyActor(network), env, cfg.eval_episodes, eval_seed(seed, total_iterations))
        logger.info(f"Seed {seed}: cloned policy success {result.success_rate:.2f}.")

        log = self.repository.metrics_log(seed)
        log.reset()
        for i in range(1, total_iterations + 1):
            row = {
                'iter': i,
                'env_steps': i * cfg.ppo.batch_size,
                'policy_loss': history.train_loss[-1],
                'config_hash': self._config_hash,
            }
            if i % cfg.eval_interval == 0 or i == total_iterations:
                row['eval_success_rate'] = result.success_rate
                row['eval_success_length'] = result.mean_success_length
            log.append(row)
