import logging

from src.context import TrainingContext
from src.entities import RESULT_ERROR, RESULT_STORE_REFRESHED, RESULT_STORE_SKIPPED, TrainState
from src.utils.decorator import node

logger = logging.getLogger(__name__)


@node
def refresh_store(state: TrainState, context: TrainingContext) -> TrainState:
    """
    갱신 에폭이면 두 뱅크에 update_bank → prune_and_decay → build_index를 수행합니다.
    query_only 모드(저장소 없음)에서는 항상 건너뜁니다.
    """
    try:
        epoch = state["epoch"]
        if not context.is_update_epoch(epoch):
            state["node_result"] = RESULT_STORE_SKIPPED
            return state

        store = context.store
        reports = store.refresh(epoch)
        evicted = {
            report["dimension"]: {
                reason: sum(1 for r in report["evicted"] if r["reason"] == reason)
                for reason in {r["reason"] for r in report["evicted"]}
            }
            for report in reports
        }
        sizes = {name: len(bank) for name, bank in store.banks.items()}
        context.log_event("store_rebuild", epoch, sizes=sizes, evicted=evicted)
        state["store_rebuilds"] += 1
        logger.info(f"epoch {epoch}: 저장소 재구성 완료 sizes={sizes}, evicted={evicted}")
        state["node_result"] = RESULT_STORE_REFRESHED
        return state

    except Exception as e:
        logger.error(f"Error in refresh_store: {str(e)}")
        context.failure = e
        state["error"] = str(e)
        state["node_result"] = RESULT_ERROR
        return state
