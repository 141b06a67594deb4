"""
Adaptive curriculum controller.

The controller keeps one difficulty coefficient per reset mode (demonstration and regular
resets). After every PPO iteration, each coefficient moves by +increment when the success
rate of its reset mode is above the desired interval, by -increment when below, and stays
put inside the interval. The probability of choosing a regular reset grows with the
regular-reset success rate and with training progress.
"""
import logging
from dataclasses import dataclass, field, replace, asdict
from enum import Enum
from typing import Tuple, Iterable, Dict, Any, Optional, List

import numpy as np

from common.domain import ResetMode, EpisodeOutcome
from common.errors import ConfigurationError

logger = logging.getLogger(__name__)


class Granularity(Enum):
    EPISODE = 'episode'
    ITERATION = 'iteration'


class DeltaRule(Enum):
    ADAPTIVE = 'adaptive'
    LINEAR = 'linear'
    FIXED_MAX = 'fixed_max'


@dataclass
class CurriculumConfig:
    alpha: float = 0.4
    beta: float = 0.6
    increment: float = 0.002
    smoothing: float = 0.05
    granularity: str = Granularity.EPISODE.value

    def __post_init__(self):
        if not 0.0 <= self.alpha < self.beta <= 1.0:
            raise ConfigurationError(f"Interval must satisfy 0 <= alpha < beta <= 1. Got: [{self.alpha}, {self.beta}]")
        if not 0.0 < self.smoothing <= 1.0:
            raise ConfigurationError(f"EMA smoothing must lie in (0, 1]. Got: {self.smoothing}")
        if self.increment < 0.0:
            raise ConfigurationError(f"Increment must be nonnegative. Got: {self.increment}")
        if self.granularity not in [g.value for g in Granularity]:
            raise ConfigurationError(
                f"""
                Invalid granularity: {self.granularity}.
                Options available: {[g.value for g in Granularity]}.
                """)


@dataclass(frozen=True)
class SuccessRateTracker:
    sr: float = 0.0
    smoothing: float = 0.05
    episodes_seen: int = 0


@dataclass(frozen=True)
class DifficultyCoefficient:
    delta: float = 0.0
    tracker: SuccessRateTracker = field(default_factory=SuccessRateTracker)


@dataclass(frozen=True)
class CurriculumState:
    demo: DifficultyCoefficient
    regular: DifficultyCoefficient
    total_iterations: int
    iteration: int = 0
    interval: Tuple[float, float] = (0.4, 0.6)
    increment: float = 0.002

    def __post_init__(self):
        alpha, beta = self.interval
        if not 0.0 <= alpha < beta <= 1.0:
            raise ConfigurationError(f"Interval must satisfy 0 <= alpha < beta <= 1. Got: {self.interval}")
        if self.total_iterations <= 0:
            raise ConfigurationError(f"Total iterations must be positive. Got: {self.total_iterations}")
        if not 0 <= self.iteration <= self.total_iterations:
            raise ConfigurationError(f"Iteration {self.iteration} outside [0, {self.total_iterations}].")

    @classmethod
    def initial(cls, config: CurriculumConfig, total_iterations: int) -> 'CurriculumState':
        tracker = SuccessRateTracker(smoothing=config.smoothing)
        return cls(
            demo=DifficultyCoefficient(tracker=tracker),
            regular=DifficultyCoefficient(tracker=tracker),
            total_iterations=total_iterations,
            interval=(config.alpha, config.beta),
            increment=config.increment)

    def coefficient(self, mode: ResetMode) -> DifficultyCoefficient:
        return self.demo if mode is ResetMode.DEMONSTRATION else self.regular


def mixing_probability(sr_r: float, i: int, n: int) -> float:
    if n <= 0:
        raise ConfigurationError(f"Number of iterations must be positive. Got: {n}")
    return min(max(0.5 * (sr_r + i / n), 0.0), 1.0)


def choose_reset_mode(state: CurriculumState, rng: np.random.Generator) -> ResetMode:
    p = mixing_probability(state.regular.tracker.sr, state.iteration, state.total_iterations)
    if rng.random() < p:
        return ResetMode.REGULAR
    return ResetMode.DEMONSTRATION


def update_difficulty(coef: DifficultyCoefficient, state: CurriculumState) -> DifficultyCoefficient:
    # No evidence yet: never move the coefficient.
    if coef.tracker.episodes_seen == 0:
        return coef

    alpha, beta = state.interval
    sr = coef.tracker.sr
    delta = coef.delta + state.increment * (sr > beta) - state.increment * (sr < alpha)
    return replace(coef, delta=min(max(delta, 0.0), 1.0))


def record_episode_outcome(tracker: SuccessRateTracker, success: float) -> SuccessRateTracker:
    if not 0.0 <= success <= 1.0:
        raise ValueError(f"Episode outcome must lie in [0, 1]. Got: {success}")
    sr = (1.0 - tracker.smoothing) * tracker.sr + tracker.smoothing * float(success)
    return replace(tracker, sr=sr, episodes_seen=tracker.episodes_seen + 1)


def _record_all(tracker: SuccessRateTracker, outcomes: Iterable[EpisodeOutcome]) -> SuccessRateTracker:
    for outcome in outcomes:
        tracker = record_episode_outcome(tracker, float(outcome.success))
    return tracker


def curriculum_step(state: CurriculumState, episode_outcomes: Iterable[EpisodeOutcome]) -> CurriculumState:
    episode_outcomes = list(episode_outcomes)
    coefficients = {}
    for mode in ResetMode:
        coef = state.coefficient(mode)
        outcomes = [o for o in episode_outcomes if o.reset_mode is mode]
        if outcomes:
            coef = replace(coef, tracker=_record_all(coef.tracker, outcomes))
            coef = update_difficulty(coef, state)
        coefficients[mode] = coef

    return replace(
        state,
        demo=coefficients[ResetMode.DEMONSTRATION],
        regular=coefficients[ResetMode.REGULAR],
        iteration=min(state.iteration + 1, state.total_iterations))


def linear_delta(i: int, n: int) -> float:
    if n <= 0:
        raise ConfigurationError(f"Number of iterations must be positive. Got: {n}")
    return min(max(i / n, 0.0), 1.0)


class CurriculumScheduler:
    """
    Owns the curriculum state of one training run and applies a method's rules to it.

    The plain adaptive controller is the default. Baselines and ablations reconfigure how
    the demonstration window and the parameter difficulty move (adaptive, linear, pinned at
    the maximum), whether either reset mode is used at all, whether both coefficients share
    one pooled success tracker, and whether the reset mode is drawn per episode or once per
    iteration.

    All mutation happens in `begin_iteration` and `step`, which the training coordinator
    calls between iterations; actors only read from the scheduler while collecting.
    """

    def __init__(
            self,
            config: CurriculumConfig,
            total_iterations: int,
            demo_resets: bool = True,
            regular_resets: bool = True,
            demo_rule: DeltaRule = DeltaRule.ADAPTIVE,
            regular_rule: DeltaRule = DeltaRule.ADAPTIVE,
            constant_param_difficulty: bool = False,
            shared_delta: bool = False):
        if not demo_resets and not regular_resets:
            raise ConfigurationError("At least one reset mode must be enabled.")

        self._config = config
        self._granularity = Granularity(config.granularity)
        self.demo_resets = demo_resets
        self.regular_resets = regular_resets
        self.demo_rule = demo_rule
        self.regular_rule = regular_rule
        self.constant_param_difficulty = constant_param_difficulty
        self.shared_delta = shared_delta

        self._state = CurriculumState.initial(config, total_iterations)
        self._pooled = SuccessRateTracker(smoothing=config.smoothing)
        self._iteration_mode: Optional[ResetMode] = None
        self._state = self._apply_rules(self._state)

    @property
    def state(self) -> CurriculumState:
        return self._state

    @property
    def window_delta(self) -> float:
        return self._state.demo.delta

    def param_delta(self, mode: ResetMode) -> float:
        if self.constant_param_difficulty:
            return 1.0
        return self._state.coefficient(mode).delta

    def begin_iteration(self, rng: np.random.Generator) -> None:
        if self._granularity is Granularity.ITERATION:
            self._iteration_mode = self._draw_mode(rng)

    def choose_reset_mode(self, rng: np.random.Generator) -> ResetMode:
        if self._granularity is Granularity.ITERATION and self._iteration_mode is not None:
            return self._iteration_mode
        return self._draw_mode(rng)

    def _draw_mode(self, rng: np.random.Generator) -> ResetMode:
        if not self.regular_resets:
            return ResetMode.DEMONSTRATION
        if not self.demo_resets:
            return ResetMode.REGULAR
        return choose_reset_mode(self._state, rng)

    def step(self, outcomes: List[EpisodeOutcome]) -> CurriculumState:
        if self.shared_delta:
            self._state = self._shared_step(outcomes)
        else:
            self._state = curriculum_step(self._state, outcomes)
        self._state = self._apply_rules(self._state)
        self._iteration_mode = None
        return self._state

    def _shared_step(self, outcomes: List[EpisodeOutcome]) -> CurriculumState:
        state = curriculum_step(self._state, outcomes)
        if not outcomes:
            return state

        self._pooled = _record_all(self._pooled, outcomes)
        shared = update_difficulty(DifficultyCoefficient(self._state.demo.delta, self._pooled), self._state)
        return replace(
            state,
            demo=replace(state.demo, delta=shared.delta),
            regular=replace(state.regular, delta=shared.delta))

    def _apply_rules(self, state: CurriculumState) -> CurriculumState:
        return replace(
            state,
            demo=self._ruled(state.demo, self.demo_rule, state),
            regular=self._ruled(state.regular, self.regular_rule, state))

    @staticmethod
    def _ruled(coef: DifficultyCoefficient, rule: DeltaRule, state: CurriculumState) -> DifficultyCoefficient:
        if rule is DeltaRule.LINEAR:
            return replace(coef, delta=linear_delta(state.iteration, state.total_iterations))
        if rule is DeltaRule.FIXED_MAX:
            return replace(coef, delta=1.0)
        return coef

    def metrics(self) -> Dict[str, float]:
        return {
            'delta_d': self._state.demo.delta,
            'delta_r': self._state.regular.delta,
            'sr_d': self._state.demo.tracker.sr,
            'sr_r': self._state.regular.tracker.sr,
        }

    def state_dict(self) -> Dict[str, Any]:
        return {
            'state': asdict(self._state),
            'pooled': asdict(self._pooled),
            'iteration_mode': None if self._iteration_mode is None else self._iteration_mode.value,
        }

    def load_state_dict(self, d: Dict[str, Any]) -> None:
        s = d['state']
        self._state = CurriculumState(
            demo=_coefficient_from_dict(s['demo']),
            regular=_coefficient_from_dict(s['regular']),
            total_iterations=int(s['total_iterations']),
            iteration=int(s['iteration']),
            interval=tuple(s['interval']),
            increment=float(s['increment']))
        self._pooled = SuccessRateTracker(**d['pooled'])
        mode = d.get('iteration_mode')
        self._iteration_mode = None if mode is None else ResetMode(mode)


def _coefficient_from_dict(d: Dict[str, Any]) -> DifficultyCoefficient:
    return DifficultyCoefficient(delta=float(d['delta']), tracker=SuccessRateTracker(**d['tracker']))
