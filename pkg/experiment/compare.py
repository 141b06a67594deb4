import logging
from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd

from acgd.baselines import METHOD_SUMMARY
from common.errors import ConfigurationError
from experiment.repository import RunRepository, RunRecord, eval_points, seed_summary

logger = logging.getLogger(__name__)


def _curves(record: RunRecord) -> pd.DataFrame:
    frames = []
    for seed, metrics in record.metrics.items():
        points = eval_points(metrics)[['env_steps', 'eval_success_rate']].copy()
        points['seed'] = seed
        frames.append(points)
    stacked = pd.concat(frames, ignore_index=True)
    grouped = stacked.groupby('env_steps')['eval_success_rate']
    curve = pd.DataFrame({
        'mean': grouped.mean(),
        'std': grouped.std(ddof=0),
        'seeds': grouped.count(),
    }).reset_index()
    curve.insert(0, 'method', record.config.method)
    curve.insert(0, 'run', record.label)
    return curve


def _ranking_row(record: RunRecord) -> dict:
    per_seed = [seed_summary(seed, metrics) for seed, metrics in record.metrics.items()]
    finals = np.array([s['final_success'] for s in per_seed], dtype=np.float64)
    aucs = np.array([s['auc'] for s in per_seed], dtype=np.float64)
    return {
        'run': record.label,
        'method': record.config.method,
        'description': METHOD_SUMMARY[record.config.method_spec],
        'final_mean': float(np.mean(finals)),
        'final_std': float(np.std(finals)),
        'auc_mean': float(np.mean(aucs)),
        'per_seed': ';'.join(f"{s['seed']}:{s['final_success']:.4f}" for s in per_seed),
    }


def compare(run_dirs: List[Union[str, Path]], out_dir: Union[str, Path]) -> pd.DataFrame:
    if not run_dirs:
        raise ConfigurationError("Nothing to compare: no run directories given.")

    records = [RunRepository(path).load() for path in run_dirs]
    env_ids = sorted({r.config.env for r in records})
    if len(env_ids) > 1:
        raise ConfigurationError(
            f"Runs were trained on different environments {env_ids}; success rates are not comparable across tasks.")
    for record in records:
        if not record.metrics:
            raise ConfigurationError(f"Run {record.path} has no metrics yet.")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = pd.concat([_curves(r) for r in records], ignore_index=True)
    curves.to_csv(out_dir / 'curves.csv', index=False, lineterminator='\n')

    ranking = pd.DataFrame([_ranking_row(r) for r in records])
    ranking = ranking.sort_values(['final_mean', 'auc_mean'], ascending=False, kind='mergesort').reset_index(drop=True)
    ranking.insert(0, 'rank', np.arange(1, len(ranking) + 1))
    ranking.to_csv(out_dir / 'ranking.csv', index=False, lineterminator='\n')

    for row in ranking.itertuples():
        logger.info(f"{row.rank}. {row.run} ({row.description}): final success {row.final_mean:.3f} ± {row.final_std:.3f}, AUC {row.auc_mean:.3f}")
    return ranking
