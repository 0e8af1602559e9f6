import logging
import math
import time

import numpy as np

from src.context import TrainingContext
from src.entities import EpochRecord, RESULT_DIVERGED, RESULT_EPOCH_DONE, RESULT_ERROR, TrainState
from src.errors import NumericError
from src.metrics import masked_mae_loss
from src.optim import curriculum_horizon, lr_schedule
from src.tensor import backward
from src.utils.decorator import node

logger = logging.getLogger(__name__)

# 손실이 유한하지 않은 에폭이 이만큼 연속되면 학습을 중단
DIVERGENCE_PATIENCE = 3


def run_epoch(context: TrainingContext, epoch: int) -> EpochRecord:
    """
    학습 분할 전체를 한 번 돌며 파라미터를 갱신합니다.

    예측의 앞 horizon 스텝에만 손실을 걸고(커리큘럼), 스텝마다 보류된 모멘텀을 반영합니다.
    """
    config = context.config
    model, store, optimizer = context.model, context.store, context.optimizer
    lr = lr_schedule(epoch, config)
    horizon = curriculum_horizon(epoch, config)
    collect = context.is_update_epoch(epoch)
    skipped_before = optimizer.skipped_steps

    model.train()
    losses = []
    start = time.perf_counter()
    for batch in context.dataset.batches("train", config.batch_size, rng=context.rng, shuffle=True):
        optimizer.zero_grad()
        try:
            pred = model(batch.x, store=store, collect=collect)
        except NumericError as e:
            logger.warning(f"epoch {epoch}: 순전파 중 수치 오류 발생: {e}")
            losses.append(math.nan)
            continue
        loss = masked_mae_loss(pred[:, :horizon], batch.y[:, :horizon], config.null_val,
                               mask=batch.mask[:, :horizon])
        value = loss.item()
        losses.append(value)
        if loss.requires_grad and math.isfinite(value):
            backward(loss)
            optimizer.step(lr)
        if store is not None:
            store.commit_momentum()
    seconds = time.perf_counter() - start

    train_loss = float(np.mean(losses)) if losses else math.nan
    return {
        "epoch": epoch,
        "lr": lr,
        "horizon": horizon,
        "train_loss": train_loss,
        "val_mae": None,
        "skipped_steps": optimizer.skipped_steps - skipped_before,
        "seconds": seconds,
    }


@node
def train_epoch(state: TrainState, context: TrainingContext) -> TrainState:
    try:
        epoch = state["epoch"]
        record = run_epoch(context, epoch)
        state["history"].append(record)
        logger.info(
            f"epoch {epoch}: lr={record['lr']:.6g}, horizon={record['horizon']}, "
            f"train_loss={record['train_loss']:.6f}, {record['seconds']:.2f}s"
        )

        if math.isfinite(record["train_loss"]):
            state["nonfinite_streak"] = 0
        else:
            state["nonfinite_streak"] += 1
            logger.warning(f"epoch {epoch}: 학습 손실이 유한하지 않습니다 (연속 {state['nonfinite_streak']}회)")

        if state["nonfinite_streak"] >= DIVERGENCE_PATIENCE:
            state["error"] = (
                f"학습 손실이 {DIVERGENCE_PATIENCE} 에폭 연속 유한하지 않아 중단합니다 "
                f"(epoch={epoch}, lr={record['lr']:.6g}, skipped_steps={record['skipped_steps']})"
            )
            state["node_result"] = RESULT_DIVERGED
        else:
            state["node_result"] = RESULT_EPOCH_DONE
        return state

    except Exception as e:
        logger.error(f"Error in train_epoch: {str(e)}")
        context.failure = e
        state["error"] = str(e)
        state["node_result"] = RESULT_ERROR
        return state
