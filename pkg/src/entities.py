"""
공통 타입 정의 모듈

이 모듈은 애플리케이션 전반에서 사용되는 공통 타입과 상수를 정의합니다.
순환 참조를 방지하기 위해 타입 정의를 중앙화합니다.
"""

from typing import Dict, List, Optional, TypedDict


class EpochRecord(TypedDict):
    """한 에폭의 학습 기록"""
    epoch: int  # 0부터 시작하는 에폭 번호
    lr: float  # 이번 에폭에 사용한 학습률
    horizon: int  # 커리큘럼으로 감독한 예측 길이
    train_loss: float  # 배치 평균 masked MAE (정규화 단위)
    val_mae: Optional[float]  # 검증 MAE (정규화 단위)
    skipped_steps: int  # 유한하지 않은 기울기로 건너뛴 스텝 수
    seconds: float  # 학습에 걸린 시간 (초)


class TrainState(TypedDict):
    """LangGraph 학습 워크플로우의 상태를 정의하는 타입"""
    epoch: int  # 현재 에폭
    max_epochs: int  # 최대 에폭
    node_result: str  # 현재 노드의 실행 결과 (문자열 상수)
    history: List[EpochRecord]  # 에폭별 기록
    best_val_mae: Optional[float]  # 지금까지 가장 좋은 검증 MAE
    best_epoch: Optional[int]  # 가장 좋은 검증 MAE를 기록한 에폭
    bad_epochs: int  # 개선이 없었던 연속 에폭 수
    nonfinite_streak: int  # 손실이 유한하지 않았던 연속 에폭 수
    store_rebuilds: int  # 저장소 재구성 횟수
    error: Optional[str]  # 오류 메시지


class MetricsRow(TypedDict):
    """한 예측 구간(horizon)의 평가 지표"""
    horizon: str  # "3", "6", "12" 또는 "avg"
    mae: float
    rmse: float
    mape: float  # 백분율
    count: int  # 유효 데이터 포인트 수


class MetricsReport(TypedDict):
    """평가 보고서"""
    split: str  # train / val / test
    rows: List[MetricsRow]  # 구간별 지표 (h3, h6, h12, avg)
    samples: int  # 평가한 윈도우 수
    seconds: float  # 추론 시간 (초)


class EvictionRecord(TypedDict):
    """제거된 패턴 하나"""
    id: int
    reason: str  # "decay" / "similarity" / "capacity"


class EvictionReport(TypedDict):
    """prune_and_decay 결과 보고서"""
    dimension: str  # spatial / temporal
    evicted: List[EvictionRecord]
    remaining: int


class BenchRow(TypedDict):
    """bench-store 결과 한 줄"""
    size: int  # 메모리 크기 M
    k: int
    flat_ms: float  # Flat 평균 질의 지연 (ms)
    ivf_ms: float  # IVF 평균 질의 지연 (ms)
    ratio: float  # ivf_ms / flat_ms
    recall: float  # Flat 대비 IVF recall@k


class TrainResult(TypedDict):
    """train 호출 결과"""
    checkpoint_dir: str
    best_epoch: Optional[int]
    best_val_mae: Optional[float]
    history: List[EpochRecord]
    metrics: MetricsReport
    store_rebuilds: int


class StoreSummary(TypedDict):
    """뱅크 스냅샷 요약 (inspect-store, 대시보드 공용)"""
    dimension: str
    entries: int
    dim: int
    momentum_histogram: Dict[str, List[float]]  # {"edges": [...], "counts": [...]}
    age_histogram: Dict[str, List[float]]


# 출력 타입 상수 (ablation 모드)
OUTPUT_FULL = "full"
OUTPUT_QUERY_ONLY = "query_only"
OUTPUT_RETRIEVAL_ONLY = "retrieval_only"
OUTPUT_NO_MLP = "no_mlp"
OUTPUT_TYPES = (OUTPUT_FULL, OUTPUT_QUERY_ONLY, OUTPUT_RETRIEVAL_ONLY, OUTPUT_NO_MLP)

# 메모리 뱅크 차원 태그
DIMENSION_SPATIAL = "spatial"
DIMENSION_TEMPORAL = "temporal"
DIMENSIONS = (DIMENSION_SPATIAL, DIMENSION_TEMPORAL)

# 인덱스 종류
INDEX_FLAT = "flat"
INDEX_IVF = "ivf"

# 제거 사유
EVICT_DECAY = "decay"
EVICT_SIMILARITY = "similarity"
EVICT_CAPACITY = "capacity"

# 노드 결과 상수 정의
# train_epoch.py 결과 상수
RESULT_EPOCH_DONE = "epoch_done"
RESULT_DIVERGED = "diverged"

# refresh_store.py 결과 상수
RESULT_STORE_REFRESHED = "store_refreshed"
RESULT_STORE_SKIPPED = "store_skipped"

# validate.py 결과 상수
RESULT_CONTINUE = "continue"
RESULT_EARLY_STOP = "early_stop"
RESULT_MAX_EPOCHS = "max_epochs"
RESULT_ERROR = "error"
