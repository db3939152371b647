from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np


@dataclass
class AdamWState:
    step: int = 0
    moments: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


class AdamW:
    """Adam with decoupled weight decay, updating numpy parameter arrays in place."""

    def __init__(self, lr: float, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.01):
        self.lr, self.betas, self.eps, self.weight_decay = lr, betas, eps, weight_decay
        self.state = AdamWState()

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        beta1, beta2 = self.betas
        self.state.step += 1
        bias_correction1 = 1 - beta1 ** self.state.step
        bias_correction2 = 1 - beta2 ** self.state.step
        for name in sorted(params):
            p, grad = params[name], grads[name]
            if name not in self.state.moments:
                self.state.moments[name] = (np.zeros_like(p), np.zeros_like(p))
            m, v = self.state.moments[name]
            # decay the weights directly, not through the gradient
            p *= 1 - self.lr * self.weight_decay
            m *= beta1
            m += (1 - beta1) * grad
            v *= beta2
            v += (1 - beta2) * grad * grad
            p -= self.lr * (m / bias_correction1) / (np.sqrt(v / bias_correction2) + self.eps)
        return params
