"""
학습 컨텍스트 모듈

LangGraph 상태(TrainState)는 JSON으로 직렬화 가능한 가벼운 값만 담고,
모델/저장소/옵티마이저/데이터/난수 생성기 같은 무거운 객체는
TrainingContext에 두고 노드 함수에 인자로 전달합니다.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.checkpoint import CheckpointManager
from src.config import RunConfig
from src.data import DatasetBundle
from src.model import RASTModel
from src.optim import Adam
from src.store.store import RetrievalStore
from src.tensor import no_grad

logger = logging.getLogger(__name__)


@dataclass
class TrainingContext:
    config: RunConfig
    dataset: DatasetBundle
    model: RASTModel
    store: Optional[RetrievalStore]
    optimizer: Adam
    rng: np.random.Generator
    checkpoints: CheckpointManager
    run_info: Dict[str, Any] = field(default_factory=dict)  # run.json 기본 항목 (데이터 출처 등)
    events: List[Dict[str, Any]] = field(default_factory=list)
    failure: Optional[BaseException] = None

    def is_update_epoch(self, epoch: int) -> bool:
        """뱅크 갱신 에폭 여부 ((epoch + 1) % update_interval == 0)"""
        return self.store is not None and (epoch + 1) % self.config.update_interval == 0

    def log_event(self, event: str, epoch: int, **details: Any) -> Dict[str, Any]:
        record = {"event": event, "epoch": int(epoch), **details}
        self.events.append(record)
        return record


@dataclass
class Predictions:
    """한 분할 전체의 예측과 목표 (정규화 단위와 원 단위)"""
    pred: np.ndarray  # (S, H, N, D_out) 정규화 단위
    target: np.ndarray  # (S, H, N, D_out) 정규화 단위
    target_raw: np.ndarray
    mask: np.ndarray
    seconds: float

    @property
    def samples(self) -> int:
        return int(self.pred.shape[0])


def run_inference(model: RASTModel, store: Optional[RetrievalStore], dataset: DatasetBundle,
                  split: str, batch_size: int) -> Predictions:
    """
    평가 모드에서 분할 전체를 예측합니다. 뱅크에는 아무것도 기록하지 않습니다.
    """
    was_training = model.training
    model.eval()
    preds, targets, raws, masks = [], [], [], []
    start = time.perf_counter()
    with no_grad():
        for batch in dataset.batches(split, batch_size):
            preds.append(model(batch.x, store=store).data.astype(np.float64))
            targets.append(batch.y)
            raws.append(batch.y_raw)
            masks.append(batch.mask)
    seconds = time.perf_counter() - start
    model.train(was_training)
    if not preds:
        shape = (0, dataset.output_len, dataset.num_nodes, dataset.output_dim)
        empty = np.zeros(shape)
        return Predictions(empty, empty, empty, np.zeros(shape, dtype=bool), seconds)
    return Predictions(
        pred=np.concatenate(preds),
        target=np.concatenate(targets),
        target_raw=np.concatenate(raws),
        mask=np.concatenate(masks),
        seconds=seconds,
    )


def masked_mae(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> Tuple[Optional[float], int]:
    """유효 포인트 평균 절대 오차와 포인트 수 (유효 포인트가 없으면 None)"""
    count = int(mask.sum())
    if count == 0:
        return None, 0
    return float(np.abs(pred - target)[mask].mean()), count
