import logging
import math
from typing import Optional

from src.context import TrainingContext, masked_mae, run_inference
from src.entities import RESULT_CONTINUE, RESULT_EARLY_STOP, RESULT_ERROR, RESULT_MAX_EPOCHS, TrainState
from src.utils.decorator import node

logger = logging.getLogger(__name__)


def validation_mae(context: TrainingContext) -> Optional[float]:
    """검증 분할 전체 구간의 masked MAE (정규화 단위)"""
    predictions = run_inference(context.model, context.store, context.dataset, "val", context.config.batch_size)
    mae, _ = masked_mae(predictions.pred, predictions.target, predictions.mask)
    return mae


@node
def validate(state: TrainState, context: TrainingContext) -> TrainState:
    """
    검증 MAE를 계산하고, 개선되면 최고 체크포인트를 저장한 뒤 다음 경로를 정합니다.

    검증 분할이 비어 있으면 학습 손실을 기준으로 사용합니다.
    """
    try:
        epoch = state["epoch"]
        record = state["history"][-1]
        val_mae = validation_mae(context)
        record["val_mae"] = val_mae
        criterion = val_mae if val_mae is not None else record["train_loss"]

        best = state["best_val_mae"]
        if criterion is not None and math.isfinite(criterion) and (best is None or criterion < best):
            state["best_val_mae"] = float(criterion)
            state["best_epoch"] = epoch
            state["bad_epochs"] = 0
            context.checkpoints.save_best(context.model, context.store, {
                **context.run_info,
                "best_epoch": epoch,
                "best_val_mae": float(criterion),
            })
            context.log_event("best_checkpoint", epoch, val_mae=float(criterion))
        else:
            state["bad_epochs"] += 1

        context.checkpoints.save_json("history", state["history"])
        context.checkpoints.save_json("events", context.events)
        logger.info(f"epoch {epoch}: val_mae={val_mae}, best={state['best_val_mae']} (epoch {state['best_epoch']})")

        state["epoch"] = epoch + 1
        if state["bad_epochs"] >= context.config.patience:
            logger.info(f"{state['bad_epochs']} 에폭 동안 개선이 없어 조기 종료합니다")
            state["node_result"] = RESULT_EARLY_STOP
        elif state["epoch"] >= state["max_epochs"]:
            state["node_result"] = RESULT_MAX_EPOCHS
        else:
            state["node_result"] = RESULT_CONTINUE
        return state

    except Exception as e:
        logger.error(f"Error in validate: {str(e)}")
        context.failure = e
        state["error"] = str(e)
        state["node_result"] = RESULT_ERROR
        return state
