"""
데코레이터 유틸리티 모듈

이 모듈은 프로젝트에서 사용되는 함수 데코레이터를 제공합니다.
주로 LangGraph 학습 노드 함수를 위한 불변성과 로깅 기능을 지원합니다.
"""

from typing import Callable
from copy import deepcopy
import functools
import logging

from src.entities import TrainState

# 로깅 설정
logger = logging.getLogger(__name__)


def node(func: Callable[..., TrainState]) -> Callable[..., TrainState]:
    """
    LangGraph 노드를 위한 통합 데코레이터
    immutable과 node_logger 데코레이터를 결합하여 제공합니다.
    이 데코레이터를 사용하면 노드 함수는 TrainState 입력을 변경하지 않고,
    함수 호출 전후에 상태 정보가 로깅됩니다.
    """
    # 먼저 immutable 적용 후 node_logger 적용
    return node_logger(node_immutable(func))


def node_immutable(func: Callable[..., TrainState]) -> Callable[..., TrainState]:
    """
    함수가 입력 상태를 변경하지 않도록 보장하는 데코레이터
    입력 상태의 깊은 복사본을 만들어 함수에 전달합니다.
    모델, 저장소 같은 무거운 객체는 상태가 아닌 추가 인자로 전달되므로 복사되지 않습니다.
    """
    @functools.wraps(func)
    def wrapper(state: TrainState, *args, **kwargs) -> TrainState:
        state_copy = deepcopy(state)
        return func(state_copy, *args, **kwargs)

    return wrapper


def _summary(state: TrainState) -> str:
    best = state.get("best_val_mae")
    best_text = f"{best:.6f}" if isinstance(best, (int, float)) else "None"
    return (
        f"epoch={state.get('epoch')}, node_result={state.get('node_result')}, "
        f"best_val_mae={best_text}, history={len(state.get('history', []))}개, "
        f"store_rebuilds={state.get('store_rebuilds', 0)}"
    )


def node_logger(func: Callable[..., TrainState]) -> Callable[..., TrainState]:
    """
    LangGraph 노드 함수 호출과 반환값을 로깅하는 데코레이터
    각 노드의 입력과 출력 상태를 요약하여 로깅합니다.
    """
    @functools.wraps(func)
    def wrapper(state: TrainState, *args, **kwargs) -> TrainState:
        func_name = func.__name__
        module_name = func.__module__

        logger.info(f"===== 노드 시작: {module_name}.{func_name} =====")
        if hasattr(state, "get"):
            logger.info(f"입력: {_summary(state)}")

        result = func(state, *args, **kwargs)

        if hasattr(result, "get"):
            logger.info(f"출력: {_summary(result)}")
        logger.info(f"===== 노드 종료: {module_name}.{func_name} =====")
        return result

    return wrapper
