"""
중앙 차분 기울기 검사 유틸리티

  ∂f/∂θ_i ≈ (f(θ + h·e_i) - f(θ - h·e_i)) / 2h,  h = 1e-5

배정밀도 텐서에서 사용해야 의미 있는 상대 오차를 얻습니다.
"""

import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from src.tensor import Tensor, backward, no_grad

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5


def numeric_grad(fn: Callable[[], float], array: np.ndarray, h: float = DEFAULT_STEP,
                 indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    array를 제자리에서 흔들며 스칼라 함수 fn의 수치 기울기를 구합니다.

    Args:
        indices: 검사할 평탄화 인덱스 (None이면 전체)
    """
    grad = np.zeros(array.shape, dtype=np.float64)
    flat = array.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in (range(flat.size) if indices is None else indices):
        original = flat[i]
        flat[i] = original + h
        plus = fn()
        flat[i] = original - h
        minus = fn()
        flat[i] = original
        flat_grad[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """노름 기준 상대 오차 ‖a - n‖ / max(‖a‖, ‖n‖)"""
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / scale


def check_gradients(loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor], h: float = DEFAULT_STEP,
                    max_entries: Optional[int] = None, seed: int = 0) -> Dict[int, float]:
    """
    역전파 기울기와 수치 기울기를 비교합니다.

    Args:
        loss_fn: 같은 입력으로 스칼라 손실 텐서를 다시 계산하는 함수
        tensors: 검사할 텐서들 (requires_grad=True, float64)
        max_entries: 텐서마다 무작위로 고를 원소 수 (None이면 전체)

    Returns:
        {텐서 순번: 상대 오차}
    """
    for t in tensors:
        t.zero_grad()
    backward(loss_fn())
    rng = np.random.default_rng(seed)

    def value() -> float:
        with no_grad():
            return float(loss_fn().item())

    errors: Dict[int, float] = {}
    for n, t in enumerate(tensors):
        analytic = np.zeros(t.shape) if t.grad is None else np.asarray(t.grad, dtype=np.float64)
        if max_entries is not None and t.size > max_entries:
            indices = rng.choice(t.size, size=max_entries, replace=False)
        else:
            indices = np.arange(t.size)
        numeric = numeric_grad(value, t.data, h, indices)
        errors[n] = relative_error(analytic.reshape(-1)[indices], numeric.reshape(-1)[indices])
        logger.debug(f"기울기 검사: tensor={n}, shape={t.shape}, rel_err={errors[n]:.3e}")
    return errors
