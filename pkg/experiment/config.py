import copy
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import List, Optional, Dict, Any, Union

import yaml

from acgd.baselines import BehaviorCloningConfig
from acgd.envs import RewardConfig, ENVIRONMENTS
from acgd.rl.ppo import PpoConfig
from acgd.sched import CurriculumConfig
from common.domain import MethodSpec
from common.errors import ConfigurationError

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1
UNHASHED_FIELDS = ('output_dir', 'workers')


@dataclass
class DemoConfig:
    count: int = 10
    seed: int = 12345
    path: Optional[str] = None


@dataclass
class ExperimentConfig:
    env: str = 'block_stack_2d'
    method: str = MethodSpec.ACGD.value
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    ppo: PpoConfig = field(default_factory=PpoConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    bc: BehaviorCloningConfig = field(default_factory=BehaviorCloningConfig)
    demos: DemoConfig = field(default_factory=DemoConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    params: Optional[List[Dict[str, Any]]] = None
    max_episode_steps: Optional[int] = None
    eval_interval: int = 10
    eval_episodes: int = 50
    checkpoint_interval: int = 10
    workers: int = 1
    output_dir: str = 'runs/default'
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if self.version != CONFIG_VERSION:
            raise ConfigurationError(f"Unsupported config version {self.version}; expected {CONFIG_VERSION}.")
        if self.env not in ENVIRONMENTS:
            raise ConfigurationError(
                f"""
                Invalid env option: {self.env}.
                Options available: {list(ENVIRONMENTS)}.
                """)
        MethodSpec.parse(self.method)
        if not self.seeds:
            raise ConfigurationError("At least one seed is required.")
        for name in ['eval_interval', 'eval_episodes', 'checkpoint_interval', 'workers']:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive. Got: {getattr(self, name)}")

    @property
    def method_spec(self) -> MethodSpec:
        return MethodSpec.parse(self.method)

    @property
    def effective_reward(self) -> RewardConfig:
        if self.method_spec is MethodSpec.SHAPED_PPO:
            return dataclasses.replace(self.reward, mode='shaped')
        return self.reward

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d['ppo']['hidden_sizes'] = list(d['ppo']['hidden_sizes'])
        return d

    def config_hash(self) -> str:
        d = self.to_dict()
        for name in UNHASHED_FIELDS:
            d.pop(name, None)
        canonical = json.dumps(d, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def with_overrides(self, **overrides) -> 'ExperimentConfig':
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig.from_dict(d)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> 'ExperimentConfig':
        return _build(cls, d, 'config')


NESTED = {
    'ppo': PpoConfig,
    'curriculum': CurriculumConfig,
    'bc': BehaviorCloningConfig,
    'demos': DemoConfig,
    'reward': RewardConfig,
}


def _build(kind, d: Optional[Dict[str, Any]], where: str):
    d = copy.deepcopy(d or {})
    if not isinstance(d, dict):
        raise ConfigurationError(f"Section '{where}' must be a mapping. Got: {type(d).__name__}")

    known = {f.name for f in dataclasses.fields(kind)}
    unknown = set(d) - known
    if unknown:
        raise ConfigurationError(
            f"""
            Unknown keys in section '{where}': {sorted(unknown)}.
            Options available: {sorted(known)}.
            """)

    if kind is ExperimentConfig:
        for name, nested in NESTED.items():
            if name in d:
                d[name] = _build(nested, d[name], name)
    try:
        return kind(**d)
    except TypeError as exc:
        raise ConfigurationError(f"Malformed section '{where}': {exc}") from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    with open(path, encoding='utf-8') as f:
        raw = yaml.safe_load(f)
    config = ExperimentConfig.from_dict(raw)
    logger.info(f"Loaded config {path} (hash {config.config_hash()[:12]}).")
    return config


def dump_config(config: ExperimentConfig, path: Union[str, Path]) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=True)
