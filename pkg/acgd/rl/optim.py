import logging
from typing import Dict, Any, Tuple

import numpy as np

from acgd.rl.network import Params
from acgd.rl.losses import gradient_norm

logger = logging.getLogger(__name__)


def linear_lr(lr0: float, step: int, total_steps: int) -> float:
    return lr0 * max(1.0 - step / total_steps, 0.0)


def clip_grad_norm(grads: Params, max_norm: float) -> Tuple[Params, float]:
    norm = gradient_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}, norm


class Adam:
    def __init__(self, lr: float = 2.5e-4, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-5):
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Params, grads: Params, lr: float = None) -> None:
        lr = self.lr if lr is None else lr
        beta1, beta2 = self.betas
        self.t += 1
        for name, p in params.items():
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            m_hat = m / (1.0 - beta1 ** self.t)
            v_hat = v / (1.0 - beta2 ** self.t)
            p -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> Dict[str, Any]:
        return {'t': self.t, 'm': {k: v.copy() for k, v in self.m.items()}, 'v': {k: v.copy() for k, v in self.v.items()}}

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.t = int(state['t'])
        self.m = {k: np.array(v, dtype=np.float64) for k, v in state['m'].items()}
        self.v = {k: np.array(v, dtype=np.float64) for k, v in state['v'].items()}
