"""
Demonstration recording, persistence and reverse-trajectory restarts.

A demonstration is the list of full environment snapshots visited by a successful expert
episode. Curriculum restarts read only the snapshots; the recorded actions exist for the
behaviour cloning baseline.
"""
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Tuple, Callable, Dict, Any, Union

import numpy as np
from tqdm import tqdm

from acgd.envs import Env, scripted_expert
from acgd.params import sample_assignment
from common.domain import EnvSnapshot, ParamAssignment, ResetMode
from common.errors import (
    ConfigurationError, ExpertFailureError, DemoFormatError, DemoVersionError, ChecksumMismatchError
)

logger = logging.getLogger(__name__)

FORMAT_NAME = 'acgd-demos'
STATES_ONLY = 1
STATES_AND_ACTIONS = 2
SUPPORTED_VERSIONS = (STATES_ONLY, STATES_AND_ACTIONS)
DEFAULT_RETRIES = 10

ExpertPolicy = Callable[[Env], np.ndarray]


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: Tuple[EnvSnapshot, ...]
    env_id: str
    param_snapshot: ParamAssignment
    meta: Dict[str, Any] = field(default_factory=dict)
    actions: Optional[Tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        if len(self.states) < 2:
            raise ConfigurationError(f"A trajectory needs at least two states. Got: {len(self.states)}")
        if self.actions is not None and len(self.actions) != len(self.states) - 1:
            raise ConfigurationError(
                f"Trajectory with {len(self.states)} states must carry {len(self.states) - 1} actions. Got: {len(self.actions)}")

    def __len__(self):
        return len(self.states)

    def __getitem__(self, index: int) -> EnvSnapshot:
        return self.states[index]


@dataclass(frozen=True, eq=False)
class DemoStore:
    trajectories: Tuple[Trajectory, ...]

    def __post_init__(self):
        env_ids = {t.env_id for t in self.trajectories}
        if len(env_ids) > 1:
            raise ConfigurationError(f"A store holds demonstrations of one environment. Got: {sorted(env_ids)}")

    def __len__(self):
        return len(self.trajectories)

    @property
    def env_id(self) -> Optional[str]:
        return self.trajectories[0].env_id if self.trajectories else None

    @property
    def has_actions(self) -> bool:
        return bool(self.trajectories) and all(t.actions is not None for t in self.trajectories)

    @property
    def version(self) -> int:
        return STATES_AND_ACTIONS if self.has_actions else STATES_ONLY


def record_demonstration(
        env: Env,
        expert_policy: ExpertPolicy,
        rng: np.random.Generator,
        with_actions: bool = False,
        max_retries: int = DEFAULT_RETRIES) -> Trajectory:
    for attempt in range(1, max_retries + 1):
        assignment = sample_assignment(env.registry, 0.0, ResetMode.REGULAR, rng)
        env.reset_regular(assignment, rng)
        states = [env.save_state()]
        actions = []

        result = None
        while not env.done:
            action = np.asarray(expert_policy(env), dtype=np.float64)
            result = env.step(action)
            states.append(env.save_state())
            actions.append(action.copy())

        if result is not None and result.success:
            logger.debug(f"Demonstration recorded in {env.env_id}: {len(states)} states, attempt {attempt}.")
            return Trajectory(
                states=tuple(states),
                env_id=env.env_id,
                param_snapshot=assignment,
                meta={'recorder': getattr(expert_policy, '__name__', 'expert'), 'timestamp': datetime.now().isoformat()},
                actions=tuple(actions) if with_actions else None)

        logger.warning(f"Expert failed in {env.env_id} on attempt {attempt}/{max_retries}.")

    raise ExpertFailureError(f"Expert did not solve {env.env_id} within {max_retries} attempts.")


def record_demonstrations(
        env: Env,
        count: int,
        seed: int,
        with_actions: bool = False,
        expert_policy: ExpertPolicy = scripted_expert) -> DemoStore:
    if count <= 0:
        raise ConfigurationError(f"Number of demonstrations must be positive. Got: {count}")

    streams = np.random.SeedSequence(seed).spawn(count)
    trajectories = [
        record_demonstration(env, expert_policy, np.random.default_rng(s), with_actions=with_actions)
        for s in tqdm(streams, desc=f"Recording {env.env_id}", disable=count < 20)
    ]
    lengths = [len(t) for t in trajectories]
    logger.info(f"Recorded {count} demonstrations in {env.env_id}. Length: {np.mean(lengths):.1f} ± {np.std(lengths):.1f}.")
    return DemoStore(tuple(trajectories))


def verify_trajectory(env: Env, trajectory: Trajectory, rng: np.random.Generator) -> bool:
    for snapshot in trajectory.states:
        env.restore(snapshot, rng)
        if not env.save_state().same_as(snapshot):
            return False
    return env.success_predicate(trajectory.states[-1])


def sample_window(T: int, delta_d: float) -> range:
    if T < 1:
        raise ValueError(f"Trajectory length must be at least 1. Got: {T}")
    if not 0.0 <= delta_d <= 1.0:
        raise ValueError(f"delta_d must lie in [0, 1]. Got: {delta_d}")

    # round first: (1 - 0.7) * 10 is 3.0000000000000004 in floating point
    start = math.ceil(round((1.0 - delta_d) * (T - 1), 9))
    return range(max(start, 0), T)


def sample_demo_restart(
        store: DemoStore,
        delta_d: float,
        rng: np.random.Generator) -> Tuple[EnvSnapshot, Trajectory, int]:
    if len(store) == 0:
        raise ConfigurationError("Demonstration restarts need a non-empty demonstration store.")

    trajectory = store.trajectories[int(rng.integers(len(store)))]
    window = sample_window(len(trajectory), delta_d)
    index = window[int(rng.integers(len(window)))]
    return trajectory[index], trajectory, index


# -- persistence -------------------------------------------------------------------------

def _dumps(record: Dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(',', ':'), allow_nan=False)


def _body_lines(store: DemoStore) -> List[str]:
    with_actions = store.version == STATES_AND_ACTIONS
    lines = []
    for k, trajectory in enumerate(store.trajectories):
        assignment = trajectory.param_snapshot
        lines.append(_dumps({
            'type': 'trajectory',
            'index': k,
            'env_id': trajectory.env_id,
            'length': len(trajectory),
            'params': assignment.values,
            'delta_used': assignment.delta_used,
            'reset_mode': assignment.reset_mode.value,
            'meta': trajectory.meta,
        }))
        for t, snapshot in enumerate(trajectory.states):
            record = {'type': 'state', 't': t, 'values': snapshot.values.tolist()}
            if with_actions:
                record['action'] = trajectory.actions[t].tolist() if t < len(trajectory.actions) else None
            lines.append(_dumps(record))
    return lines


def checksum(body: str) -> str:
    return hashlib.sha256(body.encode('utf-8')).hexdigest()


def serialize_store(store: DemoStore) -> str:
    if len(store) == 0:
        raise ConfigurationError("Refusing to serialize an empty demonstration store.")

    body = ''.join(line + '\n' for line in _body_lines(store))
    header = _dumps({
        'format': FORMAT_NAME,
        'version': store.version,
        'env_id': store.env_id,
        'count': len(store),
        'checksum': checksum(body),
    })
    return header + '\n' + body


def _decode(line: str, number: int, record: str) -> Dict[str, Any]:
    try:
        decoded = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DemoFormatError(f"Malformed JSON: {exc.msg}", line=number, record=record) from exc
    if not isinstance(decoded, dict):
        raise DemoFormatError("Expected a JSON object", line=number, record=record)
    return decoded


def _require(record: Dict[str, Any], key: str, kind, number: int, name: str):
    if key not in record:
        raise DemoFormatError(f"Missing field '{key}'", line=number, record=name)
    value = record[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise DemoFormatError(f"Field '{key}' has unexpected type {type(value).__name__}", line=number, record=name)
    return value


def _vector(values: Any, number: int, name: str, key: str) -> np.ndarray:
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise DemoFormatError(f"Field '{key}' must be a list of numbers", line=number, record=name)
    return np.array(values, dtype=np.float64)


def parse_store(text: str) -> DemoStore:
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    if not lines:
        raise DemoFormatError("Empty demonstration file", line=1, record='header')

    header = _decode(lines[0], 1, 'header')
    if header.get('format') != FORMAT_NAME:
        raise DemoFormatError(f"Unknown format {header.get('format')!r}", line=1, record='header')
    version = header.get('version')
    if version not in SUPPORTED_VERSIONS:
        raise DemoVersionError(
            f"Unsupported demonstration format version {version!r}; supported: {list(SUPPORTED_VERSIONS)}",
            line=1, record='header')
    env_id = _require(header, 'env_id', str, 1, 'header')
    count = _require(header, 'count', int, 1, 'header')
    expected_checksum = _require(header, 'checksum', str, 1, 'header')

    trajectories = []
    cursor = 1
    for k in range(count):
        name = f"trajectory {k}"
        if cursor >= len(lines):
            raise DemoFormatError(f"Expected {count} trajectories, found {k}", line=cursor + 1, record=name)
        head = _decode(lines[cursor], cursor + 1, name)
        if head.get('type') != 'trajectory':
            raise DemoFormatError(f"Expected a trajectory record, found {head.get('type')!r}", line=cursor + 1, record=name)
        length = _require(head, 'length', int, cursor + 1, name)
        params = _require(head, 'params', dict, cursor + 1, name)
        delta_used = _require(head, 'delta_used', (int, float), cursor + 1, name)
        if head.get('env_id') != env_id:
            raise DemoFormatError(f"Trajectory env_id {head.get('env_id')!r} differs from {env_id!r}", line=cursor + 1, record=name)
        cursor += 1

        states, actions = [], []
        for t in range(length):
            state_name = f"{name} state {t}"
            if cursor >= len(lines):
                raise DemoFormatError(
                    f"Expected {length} state records, found {t} before end of file", line=cursor + 1, record=state_name)
            record = _decode(lines[cursor], cursor + 1, state_name)
            if record.get('type') != 'state' or record.get('t') != t:
                raise DemoFormatError("Expected state record in sequence", line=cursor + 1, record=state_name)
            states.append(EnvSnapshot(env_id=env_id, values=_vector(record.get('values'), cursor + 1, state_name, 'values')))
            if version == STATES_AND_ACTIONS:
                if 'action' not in record:
                    raise DemoFormatError("Missing field 'action'", line=cursor + 1, record=state_name)
                if t < length - 1:
                    actions.append(_vector(record['action'], cursor + 1, state_name, 'action'))
            cursor += 1

        try:
            trajectories.append(Trajectory(
                states=tuple(states),
                env_id=env_id,
                param_snapshot=ParamAssignment(
                    values={str(n): float(v) for n, v in params.items()},
                    delta_used=float(delta_used),
                    reset_mode=ResetMode(head.get('reset_mode', ResetMode.REGULAR.value))),
                meta=head.get('meta', {}),
                actions=tuple(actions) if version == STATES_AND_ACTIONS else None))
        except (ConfigurationError, ValueError) as exc:
            raise DemoFormatError(str(exc), line=cursor, record=name) from exc

    if cursor != len(lines):
        raise DemoFormatError("Unexpected trailing records", line=cursor + 1, record='trailer')

    body = ''.join(line + '\n' for line in lines[1:])
    if checksum(body) != expected_checksum:
        raise ChecksumMismatchError("Demonstration file checksum mismatch", line=1, record='header')

    return DemoStore(tuple(trajectories))


def save_store(store: DemoStore, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_store(store), encoding='utf-8')
    logger.info(f"Saved {len(store)} demonstrations (format version {store.version}) to {path}.")


def load_store(path: Union[str, Path]) -> DemoStore:
    store = parse_store(Path(path).read_text(encoding='utf-8'))
    logger.info(f"Loaded {len(store)} demonstrations of {store.env_id} from {path}.")
    return store
