"""
Diagonal-Gaussian actor-critic MLP with hand-written backward passes.

Arrays are batch-first: observations (B, obs_dim), action means (B, act_dim), values (B,).
The log standard deviation is a free vector shared by all states.
"""
import logging
from typing import Dict, List, Tuple, Sequence, Optional

import numpy as np

logger = logging.getLogger(__name__)

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

Params = Dict[str, np.ndarray]


class Linear:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, scale: float = 1.0):
        self.W = rng.normal(0.0, 1.0, size=(n_in, n_out)) * (scale / np.sqrt(n_in))
        self.b = np.zeros(n_out)
        self._x: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.W + self.b

    def backward(self, grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        grad_W = self._x.T @ grad_out
        grad_b = grad_out.sum(axis=0)
        return grad_out @ self.W.T, grad_W, grad_b


class Tanh:
    def __init__(self):
        self._y: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = np.tanh(x)
        return self._y

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * (1.0 - self._y ** 2)


class PolicyNetwork:
    """
    Shared tanh trunk feeding an action-mean head and a value head.

    `forward` caches activations; `backward` takes the loss gradients with respect to the
    three outputs (means, effective log-std, values) and returns gradients for every
    parameter, keyed like `parameters()`.
    """

    def __init__(
            self,
            obs_dim: int,
            act_dim: int,
            rng: np.random.Generator,
            hidden_sizes: Sequence[int] = (64, 64),
            init_log_std: float = -0.5):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)

        sizes = (obs_dim,) + self.hidden_sizes
        self.trunk: List[Linear] = [Linear(n_in, n_out, rng, scale=np.sqrt(2.0)) for n_in, n_out in zip(sizes[:-1], sizes[1:])]
        self.activations: List[Tanh] = [Tanh() for _ in self.trunk]
        self.mean_head = Linear(sizes[-1], act_dim, rng, scale=0.01)
        self.value_head = Linear(sizes[-1], 1, rng, scale=1.0)
        self.log_std = np.full(act_dim, float(init_log_std))

    def _layers(self) -> List[Tuple[str, Linear]]:
        named = [(f'trunk.{i}', layer) for i, layer in enumerate(self.trunk)]
        return named + [('mean', self.mean_head), ('value', self.value_head)]

    def parameters(self) -> Params:
        params = {}
        for name, layer in self._layers():
            params[f'{name}.W'] = layer.W
            params[f'{name}.b'] = layer.b
        params['log_std'] = self.log_std
        return params

    def effective_log_std(self) -> np.ndarray:
        return np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def forward(self, obs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        h = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        for layer, activation in zip(self.trunk, self.activations):
            h = activation.forward(layer.forward(h))
        mean = self.mean_head.forward(h)
        value = self.value_head.forward(h)[:, 0]
        return mean, self.effective_log_std(), value

    def backward(self, grad_mean: np.ndarray, grad_log_std: np.ndarray, grad_value: np.ndarray) -> Params:
        grads = {}
        grad_h, grads['mean.W'], grads['mean.b'] = self.mean_head.backward(grad_mean)
        grad_h_value, grads['value.W'], grads['value.b'] = self.value_head.backward(grad_value[:, None])
        grad_h = grad_h + grad_h_value

        for i in reversed(range(len(self.trunk))):
            grad_h = self.activations[i].backward(grad_h)
            grad_h, grads[f'trunk.{i}.W'], grads[f'trunk.{i}.b'] = self.trunk[i].backward(grad_h)

        inside = (self.log_std >= LOG_STD_MIN) & (self.log_std <= LOG_STD_MAX)
        grads['log_std'] = np.where(inside, grad_log_std, 0.0)
        return grads

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        mean, log_std, value = self.forward(obs)
        actions = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
        return actions, gaussian_log_prob(actions, mean, log_std), value

    def reset_value_head(self, rng: np.random.Generator) -> None:
        self.value_head = Linear(self.value_head.W.shape[0], 1, rng, scale=1.0)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters().values()])

    def set_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for p in self.parameters().values():
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise ValueError(f"Flat parameter vector of size {flat.size} does not match network of size {offset}.")

    def architecture(self) -> Dict[str, object]:
        return {'obs_dim': self.obs_dim, 'act_dim': self.act_dim, 'hidden_sizes': list(self.hidden_sizes)}


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z ** 2, axis=-1) - np.sum(log_std) - 0.5 * mean.shape[-1] * np.log(2.0 * np.pi)


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std + 0.5 * np.log(2.0 * np.pi * np.e)))
