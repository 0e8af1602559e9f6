"""
손실 및 평가 지표 모듈

모든 계산은 유효(결측이 아닌) 데이터 포인트에서만 수행합니다.
  MAE  = mean |ŷ - y|
  RMSE = sqrt(mean (ŷ - y)²)
  MAPE = 100 · mean |ŷ - y| / (|y| + ε), ε = 1e-5
"""

import logging
from typing import Iterable, List, Optional, Sequence

import numpy as np

from src import ops
from src.entities import MetricsReport, MetricsRow
from src.errors import ShapeError
from src.tensor import Tensor

logger = logging.getLogger(__name__)

MAPE_EPS = 1e-5
REPORT_HORIZONS = (3, 6, 12)


def _valid_mask(target: np.ndarray, null_val: float, mask: Optional[np.ndarray]) -> np.ndarray:
    if mask is not None:
        return np.asarray(mask, dtype=bool)
    if np.isnan(null_val):
        return ~np.isnan(target)
    return target != null_val


def masked_mae_loss(pred: Tensor, target: np.ndarray, null_val: float = 0.0,
                    mask: Optional[np.ndarray] = None) -> Tensor:
    """
    유효 포인트에 대한 평균 절대 오차 (데이터 항만 계산)

    L2 항은 옵티마이저의 분리된 weight decay로 적용됩니다.
    유효 포인트가 없으면 경고와 함께 0을 반환합니다.

    Args:
        pred: 예측 텐서
        target: 같은 모양의 목표 값
        mask: 유효 여부. None이면 target != null_val
    """
    target = np.asarray(target, dtype=pred.dtype)
    if pred.shape != target.shape:
        raise ShapeError("예측과 목표의 모양이 다릅니다", pred.shape, target.shape)
    valid = _valid_mask(target, null_val, mask)
    count = int(valid.sum())
    if count == 0:
        logger.warning("유효한 데이터 포인트가 없어 손실을 0으로 둡니다")
        return Tensor(np.zeros((), dtype=pred.dtype))
    weights = valid.astype(pred.dtype) / pred.dtype.type(count)
    safe_target = np.where(valid, target, 0.0).astype(pred.dtype)
    return ops.sum(ops.mul(ops.abs(ops.sub(pred, safe_target)), weights))


def l2_penalty(params: Iterable[Tensor]) -> float:
    """Σθ² (보고용)"""
    return float(sum(np.sum(p.data.astype(np.float64) ** 2) for p in params))


def _row(label: str, pred: np.ndarray, target: np.ndarray, valid: np.ndarray) -> MetricsRow:
    count = int(valid.sum())
    if count == 0:
        logger.warning(f"horizon {label}: 유효한 데이터 포인트가 없습니다")
        return {"horizon": label, "mae": 0.0, "rmse": 0.0, "mape": 0.0, "count": 0}
    err = (pred - target)[valid]
    y = target[valid]
    return {
        "horizon": label,
        "mae": float(np.mean(np.abs(err))),
        "rmse": float(np.sqrt(np.mean(err * err))),
        "mape": float(100.0 * np.mean(np.abs(err) / (np.abs(y) + MAPE_EPS))),
        "count": count,
    }


def compute_metrics(pred: np.ndarray, target: np.ndarray, null_val: float = 0.0,
                    mask: Optional[np.ndarray] = None,
                    horizons: Sequence[int] = REPORT_HORIZONS) -> List[MetricsRow]:
    """
    구간별(3, 6, 12 스텝) 지표와 전체 평균 지표를 계산합니다.

    Args:
        pred, target: (S, H, N, D) 원 단위 값
        horizons: 1부터 시작하는 스텝 번호 (H보다 큰 값은 생략)

    Returns:
        [h3, h6, h12, avg] 순서의 행
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError("예측과 목표의 모양이 다릅니다", pred.shape, target.shape)
    valid = _valid_mask(target, null_val, mask)
    rows: List[MetricsRow] = []
    if pred.ndim >= 2:
        for h in horizons:
            if h <= pred.shape[1]:
                rows.append(_row(str(h), pred[:, h - 1], target[:, h - 1], valid[:, h - 1]))
    rows.append(_row("avg", pred, target, valid))
    return rows


def build_report(split: str, rows: List[MetricsRow], samples: int, seconds: float) -> MetricsReport:
    return {"split": split, "rows": rows, "samples": int(samples), "seconds": float(seconds)}


def row_for(report: MetricsReport, horizon: str = "avg") -> MetricsRow:
    for row in report["rows"]:
        if row["horizon"] == horizon:
            return row
    raise KeyError(horizon)
