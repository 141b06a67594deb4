import logging
import os
import pprint
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional, Dict, Any, final

import numpy as np
import pandas as pd

from acgd.envs import make_env, Env
from acgd.params import ParamRegistry
from experiment.config import ExperimentConfig
from experiment.repository import RunRepository, seed_summary, aggregate
from utils.decorators import Decorators

logger = logging.getLogger(__name__)


class ExperimentRunner(ABC):
    """
    Runs one configured method over all seeds of an experiment and writes the run directory.

    Subclasses implement `run_seed`, which must leave `seed_<s>/metrics.csv` behind.
    Seeds run serially, or as independent ray tasks when `workers > 1`.
    """

    def __init__(self, config: ExperimentConfig, force: bool = False, resume: Optional[Path] = None):
        self._config = config
        self._force = force
        self._resume = Path(resume) if resume is not None else None
        self._repository = RunRepository(config.output_dir)
        self._config_hash = config.config_hash()

    @property
    def config(self) -> ExperimentConfig:
        return self._config

    @property
    def repository(self) -> RunRepository:
        return self._repository

    def _configure_environment(self):
        import ray
        os.environ['RAY_IGNORE_UNHANDLED_ERRORS'] = '1'
        if not ray.is_initialized():
            ray.init(object_store_memory=10**9, log_to_driver=False, logging_level=logging.ERROR)
        logger.info(f"Prepared ray with {self._config.workers} workers.")

    def make_env(self) -> Env:
        cfg = self._config
        env = make_env(cfg.env, reward=cfg.effective_reward, max_steps=cfg.max_episode_steps)
        if cfg.params:
            env.registry = env.registry.override(cfg.params)
        return env

    def registry(self) -> ParamRegistry:
        return self.make_env().registry

    @abstractmethod
    def run_seed(self, seed: int, resume: Optional[Path] = None) -> None:
        raise NotImplementedError()

    def _resume_for(self, seed: int) -> Optional[Path]:
        if self._resume is None:
            return None
        if self._resume.parent.name == f'seed_{seed}':
            return self._resume
        checkpoint = self._repository.root / f'seed_{seed}' / 'checkpoint.npz'
        return checkpoint if checkpoint.exists() else None

    @Decorators.log_exception
    @Decorators.log_duration
    def run(self) -> Path:
        cfg = self._config
        self._repository.prepare(cfg, force=self._force, resume=self._resume is not None)
        logger.info(f"Running {cfg.method} on {cfg.env} with seeds {cfg.seeds} (config hash {self._config_hash[:12]}).")
        self.prepare_shared_artifacts()

        if cfg.workers > 1 and len(cfg.seeds) > 1:
            self._configure_environment()
            import ray
            remote_seed = ray.remote(_run_seed_task)
            pending = [
                remote_seed.remote(cfg.to_dict(), type(self).__module__, type(self).__name__, seed, self._resume_for(seed))
                for seed in cfg.seeds
            ]
            ray.get(pending)
        else:
            for seed in cfg.seeds:
                self.run_seed(seed, resume=self._resume_for(seed))

        self.summarize()
        return self._repository.root

    def prepare_shared_artifacts(self) -> None:
        """Hook for artifacts every seed reads, written once before seeds start."""

    @final
    def summarize(self) -> Dict[str, Any]:
        per_seed = [
            seed_summary(seed, self._repository.metrics_log(seed).read())
            for seed in self._config.seeds
        ]
        summary = {
            'env': self._config.env,
            'method': self._config.method,
            'config_hash': self._config_hash,
            'seeds': per_seed,
            **aggregate(per_seed),
        }
        table = pd.DataFrame(per_seed)
        self._repository.write_summary(summary, table)
        self.examine_quality(summary)
        return summary

    @final
    def examine_quality(self, summary: Dict[str, Any]) -> None:
        for s in summary['seeds']:
            logger.info(f"Seed {s['seed']}: final success {s['final_success']:.3f}, AUC {s['auc']:.3f}")
        logger.info(
            f"{summary['method']} on {summary['env']}: final success "
            f"{summary['final_success_mean']:.3f} ± {summary['final_success_std']:.3f}")
        logger.debug(pprint.pformat(summary))


def eval_seed(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([seed, iteration]).generate_state(1)[0])


def _run_seed_task(config_dict: Dict[str, Any], module: str, name: str, seed: int, resume: Optional[Path]) -> None:
    import importlib
    runner_class = getattr(importlib.import_module(module), name)
    runner = runner_class(ExperimentConfig.from_dict(config_dict))
    runner.run_seed(seed, resume=resume)
