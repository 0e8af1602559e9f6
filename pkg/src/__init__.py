"""
검색 증강 시공간 예측 패키지

이 패키지는 시공간 그래프 예측 모델에 외부 패턴 저장소(메모리 뱅크) 검색을 결합한
학습/평가 엔진을 제공합니다. 학습 에폭 루프는 LangGraph 워크플로우로 구성됩니다.

무거운 모듈을 패키지 import 시점에 불러오지 않도록 여기서는 공통 타입만 노출합니다.
"""

from src.entities import (
    EpochRecord, TrainState, MetricsRow, MetricsReport, TrainResult,
    OUTPUT_FULL, OUTPUT_QUERY_ONLY, OUTPUT_RETRIEVAL_ONLY, OUTPUT_NO_MLP,
)
from src.errors import (
    RastError, ShapeError, ContractError, ConfigError, NumericError,
    DataFormatError, CheckpointError, DivergenceError,
)

__all__ = [
    # Types
    "EpochRecord", "TrainState", "MetricsRow", "MetricsReport", "TrainResult",

    # Constants
    "OUTPUT_FULL", "OUTPUT_QUERY_ONLY", "OUTPUT_RETRIEVAL_ONLY", "OUTPUT_NO_MLP",

    # Errors
    "RastError", "ShapeError", "ContractError", "ConfigError", "NumericError",
    "DataFormatError", "CheckpointError", "DivergenceError",
]
