"""
최적화 모듈

Adam(분리된 weight decay), 전역 노름 기울기 클리핑,
다단계 학습률 스케줄과 커리큘럼 예측 구간을 제공합니다.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.config import RunConfig
from src.tensor import Tensor

logger = logging.getLogger(__name__)


def global_grad_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.asarray(g, dtype=np.float64) ** 2)) for g in grads)))


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> Tuple[List[np.ndarray], float]:
    """
    전역 노름이 max_norm을 넘으면 max_norm/norm 비율로 축소합니다.

    Returns:
        (클리핑된 기울기, 클리핑 전 노름)
    """
    norm = global_grad_norm(grads)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads], norm
    return list(grads), norm


class Adam:
    """
    편향 보정 Adam + 분리된 weight decay (θ ← θ - lr·wd·θ)

    유한하지 않은 기울기가 있으면 스텝을 건너뛰고 skipped_steps를 증가시킵니다.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 0.002, betas: Tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0, max_norm: Optional[float] = None):
        self.params = [p for p in params if p.requires_grad]
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.max_norm = max_norm
        self.t = 0
        self.m = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]
        self.v = [np.zeros_like(p.data, dtype=np.float64) for p in self.params]
        self.skipped_steps = 0
        self.last_norm = 0.0

    @classmethod
    def from_config(cls, params: Sequence[Tensor], config: RunConfig) -> "Adam":
        return cls(params, lr=config.lr, eps=config.eps, weight_decay=config.weight_decay,
                   max_norm=config.max_norm)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self, lr: Optional[float] = None) -> bool:
        """
        한 스텝 갱신합니다.

        Returns:
            bool: 갱신 여부 (유한하지 않은 기울기면 False)
        """
        lr = self.lr if lr is None else lr
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in self.params]
        if not all(np.all(np.isfinite(g)) for g in grads):
            self.skipped_steps += 1
            logger.warning(f"유한하지 않은 기울기로 옵티마이저 스텝을 건너뜁니다 (누적 {self.skipped_steps}회)")
            return False
        if self.max_norm is not None:
            grads, self.last_norm = clip_grad_norm(grads, self.max_norm)
        else:
            self.last_norm = global_grad_norm(grads)

        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = np.asarray(g, dtype=np.float64)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            value = p.data.astype(np.float64)
            if self.weight_decay:
                value = value - lr * self.weight_decay * value
            p.data = (value - update).astype(p.dtype)
        return True


def lr_schedule(epoch: int, config: RunConfig) -> float:
    """lr = base · γ^(epoch 이하인 milestone 수)"""
    passed = sum(1 for m in config.milestones if m <= epoch)
    return config.lr * config.gamma ** passed


def curriculum_horizon(epoch: int, config: RunConfig) -> int:
    """
    감독할 예측 구간 길이

    warm_epochs 동안은 1, 이후 cl_epochs마다 1씩 늘어 output_len에서 멈춥니다.
    """
    horizon = config.output_len
    if not config.use_curriculum:
        return horizon
    if epoch < config.warm_epochs:
        return 1
    return min(horizon, 1 + (epoch - config.warm_epochs) // config.cl_epochs)
