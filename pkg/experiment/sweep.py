import logging
import shutil
from pathlib import Path
from typing import List, Any, Sequence

import pandas as pd
from tqdm import tqdm

from common.errors import ConfigurationError
from experiment.config import ExperimentConfig
from experiment.repository import RunRepository, seed_summary, aggregate

logger = logging.getLogger(__name__)

AXES = ['interval', 'increment', 'mixing-mode']


def parse_values(axis: str, values: Sequence[str]) -> List[Any]:
    if axis not in AXES:
        raise ValueError(
            f"""
            Invalid --axis option: {axis}.
            Options available: {AXES}.
            """)
    if not values:
        raise ConfigurationError(f"Sweep over {axis} needs at least one value.")

    if axis == 'interval':
        parsed = []
        for value in values:
            parts = str(value).split(',')
            if len(parts) != 2:
                raise ConfigurationError(f"Interval values look like 'alpha,beta'. Got: {value}")
            parsed.append((float(parts[0]), float(parts[1])))
        return parsed
    if axis == 'increment':
        return [float(v) for v in values]
    return [str(v) for v in values]


def _label(axis: str, value: Any) -> str:
    if axis == 'interval':
        return f"{value[0]:g}-{value[1]:g}"
    return f"{value:g}" if isinstance(value, float) else str(value)


def _cell_config(config: ExperimentConfig, axis: str, value: Any, root: Path) -> ExperimentConfig:
    d = config.to_dict()
    if axis == 'interval':
        d['curriculum']['alpha'], d['curriculum']['beta'] = value
    elif axis == 'increment':
        d['curriculum']['increment'] = value
    else:
        d['curriculum']['granularity'] = value
    d['output_dir'] = str(root / f"{axis}={_label(axis, value)}")
    return ExperimentConfig.from_dict(d)


def sweep(config: ExperimentConfig, axis: str, values: Sequence[Any], runner_factory, force: bool = False) -> Path:
    """Run the experiment once per value of one curriculum axis; write long-format curves and a summary."""
    if not values:
        raise ConfigurationError(f"Sweep over {axis} needs at least one value.")

    root = Path(config.output_dir)
    if root.exists() and any(root.iterdir()):
        if not force:
            raise ConfigurationError(f"Sweep directory {root} already exists; pass --force to overwrite.")
        logger.warning(f"Overwriting existing sweep directory {root}.")
        shutil.rmtree(root)
    root.mkdir(parents=True, exist_ok=True)
    curves, summary = [], []
    for value in tqdm(values, desc=f"Sweep {axis}"):
        cell = _cell_config(config, axis, value, root)
        runner_factory(cell, force).run()

        record = RunRepository(cell.output_dir).load()
        label = _label(axis, value)
        per_seed = []
        for seed, metrics in record.metrics.items():
            frame = metrics[['iter', 'env_steps', 'delta_d', 'delta_r', 'sr_d', 'sr_r', 'eval_success_rate']].copy()
            frame.insert(0, 'seed', seed)
            frame.insert(0, 'value', label)
            frame.insert(0, 'axis', axis)
            curves.append(frame)
            per_seed.append(seed_summary(seed, metrics))
        summary.append({'axis': axis, 'value': label, **aggregate(per_seed)})
        logger.info(f"Sweep {axis}={label}: final success {summary[-1]['final_success_mean']:.3f}")

    pd.concat(curves, ignore_index=True).to_csv(root / 'sweep.csv', index=False, lineterminator='\n')
    pd.DataFrame(summary).to_csv(root / 'sweep_summary.csv', index=False, lineterminator='\n')
    return root
