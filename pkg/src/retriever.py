"""
검색 및 교차 어텐션 융합 모듈

질의 배치의 (batch, node) 행마다 두 뱅크에서 top-k 패턴을 검색하고,
세 단계 멀티헤드 어텐션으로 질의와 융합합니다.

  R_t = Attn(Q, E_t, E_t)     k개 검색 슬롯에 대한 어텐션
  R_s = Attn(Q, E_s, E_s)
  R_f = Attn(Q, R_s, R_t)     한 샘플의 노드 축(N)에 대한 어텐션
  H_f = [Q; R_f]

검색된 벡터는 상수로 취급되어 기울기가 뱅크로 흐르지 않습니다.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src import ops
from src.config import RunConfig
from src.encoders import QueryBatch
from src.entities import DIMENSION_SPATIAL, DIMENSION_TEMPORAL
from src.errors import ConfigError, ShapeError
from src.layers import Dropout, Linear, Module
from src.store.store import RetrievalStore
from src.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class RetrievalResult:
    """
    한 차원의 행별 검색 결과

    모든 배열의 앞 두 축은 (R, k)이며, 뱅크가 k보다 작으면 mask가 False인 슬롯으로 채웁니다.
    """

    dimension: str
    ids: np.ndarray  # (R, k), 패딩 -1
    vectors: np.ndarray  # (R, k, D_r)
    similarities: np.ndarray  # (R, k), 패딩 -inf
    momenta: np.ndarray  # (R, k)
    mask: np.ndarray  # (R, k) bool

    @property
    def query_only(self) -> bool:
        return not bool(self.mask.any())

    @classmethod
    def empty(cls, dimension: str, rows: int, k: int, dim: int) -> "RetrievalResult":
        return cls(
            dimension,
            np.full((rows, k), -1, dtype=np.int64),
            np.zeros((rows, k, dim), dtype=np.float32),
            np.full((rows, k), -np.inf),
            np.zeros((rows, k)),
            np.zeros((rows, k), dtype=bool),
        )


@dataclass
class FusedContext:
    r_s: Tensor  # (B, N, D_r)
    r_t: Tensor
    r_f: Tensor
    h_f: Tensor  # (B, N, D_q + D_r)


def retrieve(
    query: QueryBatch,
    store: RetrievalStore,
    k: int,
    training: bool = False,
    collect: bool = False,
) -> Tuple[RetrievalResult, RetrievalResult]:
    """
    E_sp / E_tp의 각 행으로 공간/시간 뱅크를 검색합니다.

    검색 키는 Q_st가 아닌 차원별 인코딩이며, 고정 투영(store.encode_keys)으로 D_r 공간에 놓입니다.
    Q_st의 학습 투영은 이후 교차 어텐션의 질의로만 쓰입니다.

    Args:
        training: True면 질의를 기록하고 모멘텀 증가량을 보류 상태로 누적합니다
        collect: True면 이번 키를 뱅크 갱신 표본에 추가합니다

    Returns:
        (spatial 결과, temporal 결과)
    """
    results = []
    for dimension, encoding in ((DIMENSION_SPATIAL, query.e_sp), (DIMENSION_TEMPORAL, query.e_tp)):
        keys = store.encode_keys(encoding.data)
        bank = store.banks[dimension]
        if collect:
            store.collect(dimension, keys)
        if len(bank) == 0:
            results.append(RetrievalResult.empty(dimension, len(keys), k, bank.dim))
            continue
        ids, sims = bank.search_rows(keys, k)
        vectors, momenta = bank.gather(ids)
        mask = ids >= 0
        if training:
            store.record_queries(dimension, keys)
            store.accumulate_momentum(dimension, ids, sims)
        results.append(RetrievalResult(dimension, ids, vectors, sims, momenta, mask))
    return results[0], results[1]


class MultiHeadAttention(Module):
    """
    스케일드 닷프로덕트 멀티헤드 어텐션

    q: (G, Lq, D_query), k/v: (G, Lk, D_kv), mask: (G, Lk) bool (True = 유효)
    출력: (G, Lq, width)
    """

    def __init__(self, query_width: int, kv_width: int, width: int, n_heads: int,
                 attn_dropout: float, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        if n_heads < 1 or width % n_heads != 0:
            raise ConfigError(f"n_heads({n_heads})가 어텐션 폭({width})을 나누어야 합니다")
        self.n_heads = n_heads
        self.width = width
        self.q_proj = Linear(query_width, width, rng, dtype)
        self.k_proj = Linear(kv_width, width, rng, dtype)
        self.v_proj = Linear(kv_width, width, rng, dtype)
        self.out_proj = Linear(width, width, rng, dtype)
        self.attn_drop = Dropout(attn_dropout)
        self.last_weights: Optional[np.ndarray] = None

    def forward(self, q: Tensor, k: Tensor, v: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        if q.ndim != 3 or k.ndim != 3 or k.shape[:2] != v.shape[:2] or q.shape[0] != k.shape[0]:
            raise ShapeError("어텐션 입력 모양이 맞지 않습니다", q.shape, k.shape, v.shape)
        groups, q_len = q.shape[:2]
        kv_len = k.shape[1]
        heads, head_dim = self.n_heads, self.width // self.n_heads

        qh = self.q_proj(q).reshape(groups, q_len, heads, head_dim).transpose(0, 2, 1, 3)
        kh = self.k_proj(k).reshape(groups, kv_len, heads, head_dim).transpose(0, 2, 3, 1)
        vh = self.v_proj(v).reshape(groups, kv_len, heads, head_dim).transpose(0, 2, 1, 3)

        scores = ops.matmul(qh, kh) * (1.0 / math.sqrt(head_dim))
        slot_mask = None
        if mask is not None:
            slot_mask = np.broadcast_to(np.asarray(mask, dtype=bool)[:, None, None, :], scores.shape)
        weights = ops.softmax(scores, axis=-1, mask=slot_mask)
        self.last_weights = weights.data
        context = ops.matmul(self.attn_drop(weights), vh)
        context = context.transpose(0, 2, 1, 3).reshape(groups, q_len, self.width)
        return self.out_proj(context)


class CrossFusion(Module):
    """세 단계 교차 어텐션으로 FusedContext를 만듭니다."""

    def __init__(self, config: RunConfig, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.dtype = dtype
        self.retrieval_dim = config.retrieval_dim
        args = (config.query_dim, config.retrieval_dim, config.retrieval_dim,
                config.n_heads, config.attn_dropout, rng, dtype)
        self.spatial_attn = MultiHeadAttention(*args)
        self.temporal_attn = MultiHeadAttention(*args)
        self.fusion_attn = MultiHeadAttention(*args)

    def _attend_slots(self, attn: MultiHeadAttention, q_st: Tensor, result: RetrievalResult) -> Tensor:
        batch, nodes, width = q_st.shape
        rows = q_st.reshape(batch * nodes, 1, width)
        slots = Tensor(result.vectors.astype(self.dtype))
        if slots.shape[0] != batch * nodes:
            raise ShapeError("검색 결과 행 수가 질의와 다릅니다", slots.shape, q_st.shape)
        out = attn(rows, slots, slots, result.mask)
        return out.reshape(batch, nodes, self.retrieval_dim)

    def forward(self, q_st: Tensor, spatial: Optional[RetrievalResult],
                temporal: Optional[RetrievalResult]) -> FusedContext:
        batch, nodes, _ = q_st.shape
        if spatial is None or temporal is None or spatial.query_only or temporal.query_only:
            zeros = Tensor(np.zeros((batch, nodes, self.retrieval_dim), dtype=q_st.dtype))
            return FusedContext(zeros, zeros, zeros, ops.concat([q_st, zeros], axis=-1))
        r_s = self._attend_slots(self.spatial_attn, q_st, spatial)
        r_t = self._attend_slots(self.temporal_attn, q_st, temporal)
        # 공간 결과를 키로, 시간 결과를 값으로 사용
        r_f = self.fusion_attn(q_st, r_s, r_t)
        return FusedContext(r_s, r_t, r_f, ops.concat([q_st, r_f], axis=-1))
