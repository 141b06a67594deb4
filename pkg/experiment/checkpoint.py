import json
import logging
import os
from pathlib import Path
from typing import Dict, Any, Tuple, Union

import numpy as np

from common.errors import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


def _to_json(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def save_checkpoint(path: Union[str, Path], trainer_state: Dict[str, Any], meta: Dict[str, Any]) -> None:
    """Write parameters and optimizer moments as arrays, everything else as one JSON string; atomically."""
    path = Path(path)
    optimizer = trainer_state['optimizer']
    arrays = {
        'version': np.array(CHECKPOINT_VERSION),
        'params': np.asarray(trainer_state['params'], dtype=np.float64),
    }
    for name, m in optimizer['m'].items():
        arrays[f'adam_m/{name}'] = m
    for name, v in optimizer['v'].items():
        arrays[f'adam_v/{name}'] = v

    rest = {k: v for k, v in trainer_state.items() if k not in ('params', 'optimizer')}
    rest['adam_t'] = optimizer['t']
    rest['meta'] = meta
    arrays['state'] = np.array(json.dumps(rest, default=_to_json, sort_keys=True))

    tmp = path.with_name(path.name + '.tmp')
    with open(tmp, 'wb') as f:
        np.savez(f, **arrays)
    os.replace(tmp, path)
    logger.debug(f"Checkpoint written to {path} at iteration {trainer_state['iteration']}.")


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint {path} does not exist.")

    try:
        with np.load(path, allow_pickle=False) as data:
            version = int(data['version'])
            if version != CHECKPOINT_VERSION:
                raise CheckpointError(f"Unsupported checkpoint version {version}; expected {CHECKPOINT_VERSION}.")
            params = data['params'].copy()
            m = {k[len('adam_m/'):]: data[k].copy() for k in data.files if k.startswith('adam_m/')}
            v = {k[len('adam_v/'):]: data[k].copy() for k in data.files if k.startswith('adam_v/')}
            rest = json.loads(str(data['state']))
    except (KeyError, ValueError, OSError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"Malformed checkpoint {path}: {exc}") from exc

    meta = rest.pop('meta')
    state = dict(rest)
    state['params'] = params
    state['optimizer'] = {'t': state.pop('adam_t'), 'm': m, 'v': v}
    return state, meta
