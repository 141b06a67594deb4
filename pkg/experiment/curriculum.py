import logging
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Dict, Any

import numpy as np
from tqdm import tqdm

from acgd.baselines import (
    make_scheduler, uniform_demo_sampler, USES_DEMO_RESETS, behavior_cloning_train, bc_initialized_network,
)
from acgd.rl.network import PolicyNetwork
from acgd.rl.ppo import PpoTrainer, PolicyActor, evaluate
from common.domain import MethodSpec
from common.errors import CheckpointError
from experiment.checkpoint import save_checkpoint, load_checkpoint
from experiment.runner import ExperimentRunner, eval_seed
from utils.decorators import Decorators

logger = logging.getLogger(__name__)


class PpoExperimentRunner(ExperimentRunner):
    """Every PPO-trained method: the adaptive curriculum, its ablations, the non-adaptive curricula and plain PPO."""

    def prepare_shared_artifacts(self) -> None:
        method = self.config.method_spec
        if method in USES_DEMO_RESETS:
            self.repository.demos(self.make_env(), self.config)
        if method is MethodSpec.BC_INIT_PPO:
            self.repository.demos(self.make_env(), self.config, with_actions=True)

    def _initial_network(self, seed: int) -> Optional[PolicyNetwork]:
        if self.config.method_spec is not MethodSpec.BC_INIT_PPO:
            return None

        env = self.make_env()
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        network = PolicyNetwork(env.obs_dim, env.action_dim, rng, self.config.ppo.hidden_sizes, self.config.ppo.init_log_std)
        store = self.repository.demos(env, self.config, with_actions=True)
        network, _ = behavior_cloning_train(store, network, self.config.bc, env, seed)
        return bc_initialized_network(network, rng)

    def _meta(self, seed: int, offset: int) -> Dict[str, Any]:
        cfg = self.config
        return {
            'seed': seed,
            'csv_offset': offset,
            'config_hash': self._config_hash,
            'env': cfg.env,
            'reward': asdict(cfg.effective_reward),
            'max_episode_steps': cfg.max_episode_steps,
            'params': cfg.params,
        }

    @Decorators.log_exception
    @Decorators.log_duration
    def run_seed(self, seed: int, resume: Optional[Path] = None) -> None:
        cfg = self.config
        method = cfg.method_spec
        envs = [self.make_env() for _ in range(cfg.ppo.actors)]
        total_iterations = cfg.ppo.iterations
        scheduler = make_scheduler(method, cfg.curriculum, total_iterations)
        demos = self.repository.demos(envs[0], cfg) if method in USES_DEMO_RESETS else None
        sampler = uniform_demo_sampler if method is MethodSpec.UNIFORM_DEMO_CURRICULUM else None
        trainer = PpoTrainer(
            envs, scheduler, cfg.ppo, seed, demos=demos, network=self._initial_network(seed), demo_sampler=sampler)

        log = self.repository.metrics_log(seed)
        checkpoint_path = self.repository.checkpoint_path(seed)
        if resume is not None:
            state, meta = load_checkpoint(resume)
            if meta['config_hash'] != self._config_hash or meta['seed'] != seed:
                raise CheckpointError(f"Checkpoint {resume} belongs to another run (seed {meta['seed']}).")
            trainer.load_state_dict(state)
            log.truncate(meta['csv_offset'])
            logger.warning(f"Resuming seed {seed} from iteration {trainer.iteration}.")
        else:
            log.reset()

        eval_env = self.make_env()
        logger.info(f"Seed {seed}: {total_iterations} iterations of {cfg.ppo.batch_size} transitions.")
        for _ in tqdm(range(trainer.iteration, total_iterations), desc=f"{cfg.method} seed {seed}", disable=None):
            metrics = trainer.train_iteration()
            row = {**metrics, 'config_hash': self._config_hash}

            i = trainer.iteration
            if i % cfg.eval_interval == 0 or i == total_iterations:
                result = evaluate(PolicyActor(trainer.network), eval_env, cfg.eval_episodes, eval_seed(seed, i))
                row['eval_success_rate'] = result.success_rate
                row['eval_success_length'] = result.mean_success_length
                logger.info(
                    f"Seed {seed}, iteration {i}: eval success {result.success_rate:.2f}, "
                    f"delta_d {metrics['delta_d']:.3f}, delta_r {metrics['delta_r']:.3f}")
            log.append(row)

            if i % cfg.checkpoint_interval == 0 or i == total_iterations:
                save_checkpoint(checkpoint_path, trainer.state_dict(), self._meta(seed, log.offset()))
