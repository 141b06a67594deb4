"""
Comparison methods: curriculum-free PPO, behaviour cloning, and non-adaptive or ablated curricula.

Every curriculum method is the adaptive scheduler with some of its rules replaced, so all
methods share one trainer and consume the same number of environment transitions.
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple, List, Dict

import numpy as np

from acgd.demos import DemoStore, sample_demo_restart
from acgd.rl.losses import behavior_cloning_loss_and_gradient
from acgd.rl.network import PolicyNetwork
from acgd.rl.optim import Adam
from acgd.sched import CurriculumScheduler, CurriculumConfig, DeltaRule, linear_delta
from common.domain import EnvSnapshot, MethodSpec
from common.errors import ConfigurationError
from common.preprocessing import DemoPreprocessor

logger = logging.getLogger(__name__)

CURRICULUM_FREE = (MethodSpec.SPARSE_PPO, MethodSpec.SHAPED_PPO, MethodSpec.BC_INIT_PPO)
USES_DEMO_RESETS = (
    MethodSpec.ACGD,
    MethodSpec.UNIFORM_DEMO_CURRICULUM,
    MethodSpec.LINEAR_DEMO_CURRICULUM,
    MethodSpec.LINEAR_WITH_REGULAR_RESETS,
    MethodSpec.SHARED_DELTA,
    MethodSpec.CONSTANT_MAX_DIFFICULTY,
)


def uniform_demo_sampler(store: DemoStore, rng: np.random.Generator) -> EnvSnapshot:
    snapshot, _, _ = sample_demo_restart(store, 1.0, rng)
    return snapshot


def linear_schedule(i: int, n: int) -> float:
    return linear_delta(i, n)


def shared_delta_mode(scheduler: CurriculumScheduler) -> CurriculumScheduler:
    scheduler.shared_delta = True
    return scheduler


def constant_difficulty_mode(scheduler: CurriculumScheduler) -> CurriculumScheduler:
    scheduler.constant_param_difficulty = True
    return scheduler


def make_scheduler(method: MethodSpec, config: CurriculumConfig, total_iterations: int) -> CurriculumScheduler:
    if method is MethodSpec.BC:
        raise ConfigurationError("Behaviour cloning does not train with a curriculum scheduler.")

    if method in CURRICULUM_FREE:
        return CurriculumScheduler(
            config, total_iterations,
            demo_resets=False,
            regular_rule=DeltaRule.FIXED_MAX)
    if method is MethodSpec.UNIFORM_DEMO_CURRICULUM:
        return CurriculumScheduler(
            config, total_iterations,
            regular_resets=False,
            demo_rule=DeltaRule.FIXED_MAX)
    if method is MethodSpec.LINEAR_DEMO_CURRICULUM:
        return CurriculumScheduler(
            config, total_iterations,
            regular_resets=False,
            demo_rule=DeltaRule.LINEAR)
    if method is MethodSpec.LINEAR_WITH_REGULAR_RESETS:
        return CurriculumScheduler(
            config, total_iterations,
            demo_rule=DeltaRule.LINEAR,
            regular_rule=DeltaRule.LINEAR)

    scheduler = CurriculumScheduler(config, total_iterations)
    if method is MethodSpec.SHARED_DELTA:
        return shared_delta_mode(scheduler)
    if method is MethodSpec.CONSTANT_MAX_DIFFICULTY:
        return constant_difficulty_mode(scheduler)
    return scheduler


@dataclass
class BehaviorCloningConfig:
    lr: float = 1e-3
    epochs: int = 50
    minibatch_size: int = 256
    validation_fraction: float = 0.1
    demos: int = 100

    def __post_init__(self):
        if self.lr <= 0 or self.epochs <= 0 or self.minibatch_size <= 0:
            raise ConfigurationError("Behaviour cloning lr, epochs and minibatch size must be positive.")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigurationError(f"Validation fraction must lie in [0, 1). Got: {self.validation_fraction}")


@dataclass
class BehaviorCloningHistory:
    train_loss: List[float] = field(default_factory=list)
    validation_loss: List[float] = field(default_factory=list)


def _nll(network: PolicyNetwork, X: np.ndarray, y: np.ndarray) -> float:
    if len(X) == 0:
        return float('nan')
    loss, _ = behavior_cloning_loss_and_gradient(network, X, y)
    return loss


def behavior_cloning_train(
        store: DemoStore,
        network: PolicyNetwork,
        config: BehaviorCloningConfig,
        env,
        seed: int) -> Tuple[PolicyNetwork, BehaviorCloningHistory]:
    preprocessor = DemoPreprocessor()
    X, y, groups = preprocessor.preprocess_data(store, env)
    X_train, X_val, y_train, y_val = preprocessor.split_data_on_train_and_test(
        X, y, groups, test_size=config.validation_fraction, random_state=seed)
    logger.info(f'Rows: {X_train.shape[0]} train, {X_val.shape[0]} held out. Columns: {X_train.shape[1]}')

    rng = np.random.default_rng(seed)
    optimizer = Adam(lr=config.lr, eps=1e-8)
    history = BehaviorCloningHistory()
    for epoch in range(config.epochs):
        permutation = rng.permutation(len(X_train))
        for start in range(0, len(X_train), config.minibatch_size):
            idx = permutation[start:start + config.minibatch_size]
            _, grads = behavior_cloning_loss_and_gradient(network, X_train[idx], y_train[idx])
            optimizer.step(network.parameters(), grads)

        history.train_loss.append(_nll(network, X_train, y_train))
        history.validation_loss.append(_nll(network, X_val, y_val))
        logger.debug(f"BC epoch {epoch + 1}: train {history.train_loss[-1]:.4f}, held out {history.validation_loss[-1]:.4f}")

    logger.info(f"Behaviour cloning finished. Train NLL: {history.train_loss[-1]:.3f}. Held-out NLL: {history.validation_loss[-1]:.3f}")
    return network, history


def bc_initialized_network(network: PolicyNetwork, rng: np.random.Generator) -> PolicyNetwork:
    network.reset_value_head(rng)
    return network


METHOD_SUMMARY: Dict[MethodSpec, str] = {
    MethodSpec.ACGD: 'adaptive demo window and parameter difficulty, mixed resets',
    MethodSpec.SPARSE_PPO: 'regular resets at full difficulty, sparse reward',
    MethodSpec.SHAPED_PPO: 'regular resets at full difficulty, shaped reward',
    MethodSpec.BC: 'behaviour cloning on demonstrated actions',
    MethodSpec.BC_INIT_PPO: 'sparse PPO starting from the cloned policy',
    MethodSpec.UNIFORM_DEMO_CURRICULUM: 'uniform demonstration restarts only',
    MethodSpec.LINEAR_DEMO_CURRICULUM: 'linearly growing demonstration window only',
    MethodSpec.LINEAR_WITH_REGULAR_RESETS: 'linear difficulty on both reset modes, mixed resets',
    MethodSpec.SHARED_DELTA: 'one difficulty shared by both reset modes',
    MethodSpec.CONSTANT_MAX_DIFFICULTY: 'adaptive demo window, parameters pinned at full difficulty',
}
