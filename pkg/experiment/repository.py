import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import List, Dict, Any, Union

import numpy as np
import pandas as pd

from acgd.demos import DemoStore, record_demonstrations, save_store, load_store, verify_trajectory
from acgd.envs import Env
from common.errors import ConfigurationError
from experiment.config import ExperimentConfig, dump_config, load_config

logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    'iter', 'env_steps', 'delta_d', 'delta_r', 'sr_d', 'sr_r', 'eval_success_rate', 'eval_success_length',
    'mean_episode_length', 'episodes_d', 'episodes_r', 'policy_loss', 'value_loss', 'entropy', 'approx_kl',
    'clip_fraction', 'learning_rate', 'config_hash',
]


class MetricsLog:
    """Append-only per-seed metrics CSV; the byte offset after each row is what checkpoints record."""

    def __init__(self, path: Path):
        self.path = path

    def reset(self) -> None:
        if self.path.exists():
            self.path.unlink()

    def offset(self) -> int:
        return self.path.stat().st_size if self.path.exists() else 0

    def truncate(self, offset: int) -> None:
        size = self.offset()
        if size > offset:
            logger.warning(f"Dropping {size - offset} bytes of metrics written after the checkpoint in {self.path}.")
            with open(self.path, 'r+b') as f:
                f.truncate(offset)

    def append(self, row: Dict[str, Any]) -> None:
        frame = pd.DataFrame([row], columns=METRICS_COLUMNS)
        frame.to_csv(self.path, mode='a', header=self.offset() == 0, index=False, lineterminator='\n')

    def read(self) -> pd.DataFrame:
        return pd.read_csv(self.path)


@dataclass
class RunRecord:
    path: Path
    config: ExperimentConfig
    summary: Dict[str, Any]
    metrics: Dict[int, pd.DataFrame]

    @property
    def label(self) -> str:
        return f"{self.config.method}@{self.path.name}"


class RunRepository:
    """Layout of one run directory: config.yaml, demos, seed_<s>/ with metrics and checkpoint, summaries."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    @property
    def config_path(self) -> Path:
        return self.root / 'config.yaml'

    @property
    def demos_path(self) -> Path:
        return self.root / 'demos.jsonl'

    @property
    def bc_demos_path(self) -> Path:
        return self.root / 'bc_demos.jsonl'

    def seed_dir(self, seed: int) -> Path:
        path = self.root / f'seed_{seed}'
        path.mkdir(parents=True, exist_ok=True)
        return path

    def metrics_log(self, seed: int) -> MetricsLog:
        return MetricsLog(self.seed_dir(seed) / 'metrics.csv')

    def checkpoint_path(self, seed: int) -> Path:
        return self.seed_dir(seed) / 'checkpoint.npz'

    def prepare(self, config: ExperimentConfig, force: bool = False, resume: bool = False) -> None:
        if self.root.exists() and any(self.root.iterdir()) and not resume:
            if not force:
                raise ConfigurationError(f"Output directory {self.root} already exists; pass --force to overwrite.")
            logger.warning(f"Overwriting existing output directory {self.root}.")
            shutil.rmtree(self.root)
        if resume and self.config_path.exists():
            previous = load_config(self.config_path)
            if previous.config_hash() != config.config_hash():
                raise ConfigurationError(f"Cannot resume {self.root}: the config differs from the recorded one.")
        self.root.mkdir(parents=True, exist_ok=True)
        dump_config(config, self.config_path)

    def demos(self, env: Env, config: ExperimentConfig, with_actions: bool = False) -> DemoStore:
        path = self.bc_demos_path if with_actions else self.demos_path
        if path.exists():
            return load_store(path)

        source = config.demos.path
        if source is not None and not with_actions:
            store = load_store(source)
            if store.env_id != env.env_id:
                raise ConfigurationError(f"Demonstrations in {source} were recorded in {store.env_id}, not {env.env_id}.")
            rng = np.random.default_rng(config.demos.seed)
            for i, trajectory in enumerate(store.trajectories):
                if not verify_trajectory(env, trajectory, rng):
                    raise ConfigurationError(f"Demonstration {i} in {source} does not replay to a successful state in {env.env_id}.")
            logger.info(f"Verified {len(store)} demonstrations from {source}.")
        else:
            count = config.bc.demos if with_actions else config.demos.count
            seed = config.demos.seed + (1 if with_actions else 0)
            store = record_demonstrations(env, count, seed, with_actions=with_actions)
        save_store(store, path)
        return store

    def write_summary(self, summary: Dict[str, Any], table: pd.DataFrame) -> None:
        with open(self.root / 'summary.json', 'w', encoding='utf-8', newline='\n') as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write('\n')
        with open(self.root / 'summary.txt', 'w', encoding='utf-8', newline='\n') as f:
            f.write(table.to_string(index=False) + '\n')

    def load(self) -> RunRecord:
        if not self.config_path.exists():
            raise ConfigurationError(f"{self.root} is not a run directory (config.yaml missing).")
        config = load_config(self.config_path)
        summary_path = self.root / 'summary.json'
        summary = json.loads(summary_path.read_text(encoding='utf-8')) if summary_path.exists() else {}
        metrics = {}
        for seed in config.seeds:
            path = self.root / f'seed_{seed}' / 'metrics.csv'
            if path.exists():
                metrics[seed] = pd.read_csv(path)
        return RunRecord(path=self.root, config=config, summary=summary, metrics=metrics)


def eval_points(metrics: pd.DataFrame) -> pd.DataFrame:
    return metrics.dropna(subset=['eval_success_rate'])


def seed_summary(seed: int, metrics: pd.DataFrame) -> Dict[str, Any]:
    points = eval_points(metrics)
    if points.empty:
        return {'seed': seed, 'final_success': float('nan'), 'final_success_length': float('nan'), 'auc': float('nan')}
    final = points.iloc[-1]
    length = final['eval_success_length']
    return {
        'seed': seed,
        'final_success': float(final['eval_success_rate']),
        'final_success_length': None if pd.isna(length) else float(length),
        'auc': float(points['eval_success_rate'].mean()),
    }


def aggregate(per_seed: List[Dict[str, Any]]) -> Dict[str, float]:
    finals = np.array([s['final_success'] for s in per_seed], dtype=np.float64)
    aucs = np.array([s['auc'] for s in per_seed], dtype=np.float64)
    return {
        'final_success_mean': float(np.mean(finals)),
        'final_success_std': float(np.std(finals)),
        'auc_mean': float(np.mean(aucs)),
        'auc_std': float(np.std(aucs)),
    }
