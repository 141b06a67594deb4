import logging
from typing import Tuple, List

import numpy as np
from sklearn.model_selection import GroupShuffleSplit

from common.errors import ConfigurationError

logger = logging.getLogger(__name__)


class DemoPreprocessor:
    """Turns an action-carrying demonstration store into an (observations, actions) dataset."""

    def preprocess_data(self, store, env) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Rows are (observation, action) pairs; `groups` holds the demonstration index of each row."""
        if not store.has_actions:
            raise ConfigurationError("Behaviour cloning needs a demonstration store recorded with actions.")

        rng = np.random.default_rng(0)
        observations, actions, groups = [], [], []
        for i, trajectory in enumerate(store.trajectories):
            for snapshot, action in zip(trajectory.states[:-1], trajectory.actions):
                observations.append(env.restore(snapshot, rng))
                actions.append(np.clip(action, -1.0, 1.0))
                groups.append(i)

        X = np.asarray(observations, dtype=np.float64)
        y = np.asarray(actions, dtype=np.float64)

        assert len(X) == len(y), f"X size is {len(X)} and y size is {len(y)}."
        logger.info(f"Behaviour cloning dataset: {X.shape[0]} pairs from {len(store)} demonstrations.")
        return X, y, np.asarray(groups, dtype=np.int64)

    def split_data_on_train_and_test(
            self,
            X: np.ndarray,
            y: np.ndarray,
            groups: np.ndarray,
            test_size: float = 0.1,
            random_state: int = 42) -> List[np.ndarray]:
        # whole demonstrations go to one side
        if test_size <= 0.0 or len(np.unique(groups)) < 2:
            return [X, X[:0], y, y[:0]]
        splitter = GroupShuffleSplit(n_splits=1, test_size=test_size, random_state=random_state)
        train, test = next(splitter.split(X, y, groups=groups))
        return [X[train], X[test], y[train], y[test]]
