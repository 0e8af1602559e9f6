"""
실행 설정 모듈

학습/모델/저장소 정책의 모든 설정 값을 하나의 RunConfig로 관리합니다.
알 수 없는 키는 거부되며, 설정 파일(TOML/JSON)과 CLI 덮어쓰기를 지원합니다.
"""

import json
import logging
import math
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.errors import ConfigError

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """
    학습 파라미터와 모델 파라미터를 모두 담는 설정 객체

    weight_decay(손실의 L2 계수)와 lambda_div(모멘텀의 다양성 계수)는
    서로 다른 필드입니다.
    """

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # === 기본 학습 파라미터 ===
    seed: int = 0
    dtype: Literal["float64", "float32"] = "float32"
    batch_size: int = Field(32, ge=1)
    lr: float = Field(0.002, gt=0)
    max_epochs: int = Field(300, ge=1)
    weight_decay: float = Field(1.0e-5, ge=0)
    eps: float = Field(1.0e-8, gt=0)
    input_len: int = Field(12, ge=1)
    output_len: int = Field(12, ge=1)
    null_val: float = 0.0
    patience: int = Field(30, ge=1)

    # === 학습률 스케줄러 ===
    milestones: List[int] = Field(default_factory=lambda: [1, 30, 38, 46, 54, 62, 70, 80])
    gamma: float = Field(0.5, gt=0)

    # === 커리큘럼 학습 ===
    use_curriculum: bool = True
    warm_epochs: int = Field(30, ge=0)
    cl_epochs: int = Field(3, ge=1)

    # === 정규화 ===
    max_norm: float = Field(5.0, gt=0)
    train_ratio: List[float] = Field(default_factory=lambda: [0.7, 0.1, 0.2])
    norm_each_channel: bool = True
    rescale: bool = True

    # === 모델 구조 ===
    input_dim: int = Field(3, ge=1)
    output_dim: int = Field(1, ge=1)
    query_dim: int = Field(256, ge=2)
    decoupled_layers: Literal[1] = 1
    generator_layers: int = Field(3, ge=0)
    dropout: float = Field(0.1, ge=0, lt=1)
    attn_dropout: float = Field(0.1, ge=0, lt=1)
    mlp_ratio: float = Field(4.0, gt=0)
    output_type: Literal["full", "query_only", "retrieval_only", "no_mlp"] = "full"
    normalize_embeddings: bool = True
    temporal_mode: Literal["conv2d", "conv1d"] = "conv2d"
    temporal_kernel: int = Field(4, ge=1)
    temporal_dilation: int = Field(3, ge=1)
    use_spatial_encoder: bool = True
    use_temporal_encoder: bool = True
    use_query_generator: bool = True
    freeze_backbone: bool = False

    # === 검색 증강 파라미터 ===
    n_heads: int = Field(4, ge=1)
    retrieval_dim: int = Field(128, ge=1)
    top_k: int = Field(5, ge=1)
    update_interval: int = Field(10, ge=1)
    use_amp: Literal[False] = False

    # === 저장소 정책 ===
    lambda_div: float = Field(0.5, ge=0)
    tau: float = 0.1
    index_kind: Literal["ivf", "flat"] = "ivf"
    n_list: Optional[int] = Field(None, ge=1)
    n_probe: Optional[int] = Field(None, ge=1)
    ivf_iters: int = Field(20, ge=1)
    bank_capacity: int = Field(1000, ge=1)
    decay_epochs: int = Field(50, ge=0)
    prune_similarity: float = Field(0.3, ge=0, le=1)
    blend_threshold: float = Field(0.5, gt=0, le=1)
    sample_size: int = Field(512, ge=1)
    query_window: int = Field(4096, ge=1)
    cache_size: int = Field(1024, ge=0)

    @field_validator("tau")
    @classmethod
    def _check_tau(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tau는 0보다 커야 합니다")
        return value

    @field_validator("milestones")
    @classmethod
    def _check_milestones(cls, value: List[int]) -> List[int]:
        if any(m < 0 for m in value):
            raise ValueError("milestones는 음수가 될 수 없습니다")
        return sorted(value)

    @field_validator("train_ratio")
    @classmethod
    def _check_ratio(cls, value: List[float]) -> List[float]:
        if len(value) != 3 or any(r < 0 for r in value):
            raise ValueError("train_ratio는 음수가 아닌 값 3개여야 합니다")
        if not math.isclose(sum(value), 1.0, abs_tol=1e-6):
            raise ValueError(f"train_ratio의 합은 1이어야 합니다: {value}")
        return value

    @model_validator(mode="after")
    def _check_dimensions(self) -> "RunConfig":
        if self.query_dim % 2 != 0:
            raise ValueError(f"query_dim은 짝수여야 합니다: {self.query_dim}")
        if self.retrieval_dim % self.n_heads != 0:
            raise ValueError(
                f"n_heads({self.n_heads})가 retrieval_dim({self.retrieval_dim})을 나누어야 합니다"
            )
        return self

    @property
    def embed_dim(self) -> int:
        """시간/공간 인코더 출력 폭 D_tp = D_sp = query_dim / 2"""
        return self.query_dim // 2

    @property
    def fused_dim(self) -> int:
        """H_f / Z 의 폭 D_q + D_r"""
        return self.query_dim + self.retrieval_dim

    @property
    def uses_retrieval(self) -> bool:
        return self.output_type != "query_only"

    def resolved_n_list(self, size: int) -> int:
        """IVF 리스트 수 (기본값 ⌈√M⌉)"""
        if self.n_list is not None:
            return self.n_list
        return max(1, math.ceil(math.sqrt(max(size, 1))))

    def resolved_n_probe(self, n_list: int) -> int:
        """IVF 탐색 리스트 수 (기본값 ⌈n_list/4⌉)"""
        if self.n_probe is not None:
            return min(self.n_probe, n_list)
        return max(1, math.ceil(n_list / 4))


def build_config(values: Optional[Dict[str, Any]] = None, **overrides: Any) -> RunConfig:
    """
    딕셔너리와 덮어쓰기 값으로 RunConfig를 생성합니다.

    Raises:
        ConfigError: 검증 실패 또는 알 수 없는 키
    """
    merged: Dict[str, Any] = dict(values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        raise ConfigError(f"설정 검증 실패: {e}") from e


def load_config(path: Union[str, Path, None], **overrides: Any) -> RunConfig:
    """
    TOML 또는 JSON 설정 파일을 로드합니다. path가 None이면 기본값을 사용합니다.

    Args:
        path: 설정 파일 경로 (.toml / .json)
        overrides: CLI 등에서 덮어쓸 값 (None은 무시)
    """
    values: Dict[str, Any] = {}
    if path is not None:
        config_file = Path(path)
        if not config_file.exists():
            raise ConfigError(f"설정 파일이 없습니다: {config_file}")
        try:
            if config_file.suffix == ".toml":
                with open(config_file, "rb") as f:
                    values = tomllib.load(f)
            else:
                with open(config_file, "r", encoding="utf-8") as f:
                    values = json.load(f)
        except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
            raise ConfigError(f"설정 파일 파싱 중 오류 발생: {e}") from e
        logger.info(f"설정 파일을 로드했습니다: {config_file}")
    return build_config(values, **overrides)


def save_config(config: RunConfig, path: Union[str, Path]) -> None:
    """설정을 JSON으로 저장합니다."""
    config_file = Path(path)
    config_file.parent.mkdir(parents=True, exist_ok=True)
    with open(config_file, "w", encoding="utf-8") as f:
        json.dump(config.model_dump(), f, ensure_ascii=False, indent=2)
