"""
Difficulty parameter registry.

Every task parameter H^j carries an easy and a hard sampling distribution
(mu_init, sigma_init) -> (mu_end, sigma_end). A difficulty coefficient delta in [0, 1]
interpolates both moments linearly; concrete values for an episode are drawn from the
interpolated distribution and kept inside the parameter bounds.
"""
import logging
import math
from dataclasses import dataclass, asdict
from typing import Tuple, List, Dict, Iterable, Optional, Any

import numpy as np

from common.domain import ResetClass, ResetMode, ParamAssignment
from common.errors import ConfigurationError

logger = logging.getLogger(__name__)

MAX_RESAMPLES = 8
DISTRIBUTIONS = ('normal', 'uniform')


@dataclass(frozen=True)
class TaskParam:
    name: str
    mu_init: float
    sigma_init: float
    mu_end: float
    sigma_end: float
    lo: float
    hi: float
    reset_class: ResetClass = ResetClass.DEMO_COMPATIBLE
    distribution: str = 'normal'
    integer: bool = False

    def __post_init__(self):
        if self.sigma_init < 0 or self.sigma_end < 0:
            raise ConfigurationError(f"Parameter {self.name}: sigma must be nonnegative.")
        if self.lo > self.hi:
            raise ConfigurationError(f"Parameter {self.name}: lo={self.lo} exceeds hi={self.hi}.")
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigurationError(
                f"""
                Invalid distribution for parameter {self.name}: {self.distribution}.
                Options available: {list(DISTRIBUTIONS)}.
                """)

    @property
    def demo_compatible(self) -> bool:
        return self.reset_class is ResetClass.DEMO_COMPATIBLE

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d['reset_class'] = self.reset_class.value
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> 'TaskParam':
        d = dict(d)
        try:
            d['reset_class'] = ResetClass(d.get('reset_class', ResetClass.DEMO_COMPATIBLE.value))
            return cls(**d)
        except TypeError as exc:
            raise ConfigurationError(f"Malformed parameter declaration {d}: {exc}") from exc
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"Malformed parameter declaration {d}: {exc}") from exc


class ParamRegistry:
    """Immutable ordered collection of task parameters."""

    def __init__(self, params: Iterable[TaskParam] = ()):
        self._params: Tuple[TaskParam, ...] = tuple(params)
        names = [p.name for p in self._params]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"Duplicate parameter names in registry: {names}.")

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def __getitem__(self, name: str) -> TaskParam:
        for p in self._params:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def names(self) -> List[str]:
        return [p.name for p in self._params]

    def legal_for(self, mode: ResetMode) -> List[TaskParam]:
        if mode is ResetMode.DEMONSTRATION:
            return [p for p in self._params if p.demo_compatible]
        return list(self._params)

    def easiest(self) -> Dict[str, float]:
        return {p.name: _finalize(p, p.mu_init) for p in self._params}

    def to_config(self) -> List[Dict[str, Any]]:
        return [p.to_dict() for p in self._params]

    @classmethod
    def from_config(cls, declarations: List[Dict[str, Any]]) -> 'ParamRegistry':
        return cls(TaskParam.from_dict(d) for d in declarations)

    def override(self, declarations: Optional[List[Dict[str, Any]]]) -> 'ParamRegistry':
        if not declarations:
            return self
        replaced = {d['name']: TaskParam.from_dict(d) for d in declarations}
        unknown = set(replaced) - set(self.names)
        if unknown:
            raise ConfigurationError(f"Unknown parameters for this environment: {sorted(unknown)}.")
        return ParamRegistry(replaced.get(p.name, p) for p in self._params)


def interpolate(param: TaskParam, delta: float) -> Tuple[float, float]:
    mu = param.mu_init + delta * (param.mu_end - param.mu_init)
    sigma = param.sigma_init + delta * (param.sigma_end - param.sigma_init)
    return mu, sigma


def _finalize(param: TaskParam, value: float) -> float:
    value = min(max(value, param.lo), param.hi)
    if param.integer:
        value = float(min(max(round(value), math.ceil(param.lo)), math.floor(param.hi)))
    return float(value)


def _draw(param: TaskParam, mu: float, sigma: float, rng: np.random.Generator) -> float:
    if param.distribution == 'uniform':
        half_width = math.sqrt(3.0) * sigma
        return float(rng.uniform(mu - half_width, mu + half_width))
    return float(rng.normal(mu, sigma))


def sample_value(param: TaskParam, delta: float, rng: np.random.Generator) -> float:
    mu, sigma = interpolate(param, delta)
    if sigma == 0.0:
        return _finalize(param, mu)

    value = _draw(param, mu, sigma, rng)
    for _ in range(MAX_RESAMPLES):
        if param.lo <= value <= param.hi:
            break
        value = _draw(param, mu, sigma, rng)
    return _finalize(param, value)


def sample_assignment(
        registry: Iterable[TaskParam],
        delta: float,
        mode: ResetMode,
        rng: np.random.Generator) -> ParamAssignment:
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1]. Got: {delta}")

    if not isinstance(registry, ParamRegistry):
        registry = ParamRegistry(registry)

    values = {p.name: sample_value(p, delta, rng) for p in registry.legal_for(mode)}
    return ParamAssignment(values=values, delta_used=float(delta), reset_mode=mode)
