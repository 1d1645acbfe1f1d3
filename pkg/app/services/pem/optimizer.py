import numpy as np

from app.models.config import OptimizerConfig


class Adam:
    """Adaptive-moment gradient descent on a flat parameter vector."""

    def __init__(self, config: OptimizerConfig, n_params: int):
        self.config = config
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        cfg = self.config
        self.t += 1
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * grad**2
        m_hat = self.m / (1.0 - cfg.beta1**self.t)
        v_hat = self.v / (1.0 - cfg.beta2**self.t)
        return params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
