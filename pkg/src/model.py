"""
RAST 모델 모듈

인코더 → 질의 생성 → 검색 → 교차 융합 → 예측기로 이어지는 순전파를 구성합니다.
검색 저장소는 모델 밖에서 관리되며 forward 호출마다 전달됩니다.
"""

import logging
from typing import Optional

import numpy as np

from src import ops
from src.config import RunConfig
from src.encoders import GraphSpec, QueryBatch, QueryGenerator, SpatialEncoder, TemporalEncoder
from src.entities import OUTPUT_QUERY_ONLY, OUTPUT_RETRIEVAL_ONLY
from src.layers import Module
from src.predictor import Backbone, Predictor
from src.retriever import CrossFusion, FusedContext, retrieve
from src.store.store import RetrievalStore
from src.tensor import Tensor

logger = logging.getLogger(__name__)


class RASTModel(Module):
    """
    검색 증강 시공간 예측 모델

    입력 (B, L, N, D_in) → 출력 (B, H, N, D_out)

    output_type:
      - full: H_f = [Q; R_f]
      - query_only: 검색을 건너뛰고 H_f = [Q; 0]
      - retrieval_only: H_f = [0; R_f]
      - no_mlp: 백본 자리에 Q_st를 그대로 사용
    """

    def __init__(self, config: RunConfig, graph: GraphSpec, rng: Optional[np.random.Generator] = None,
                 backbone: Optional[Backbone] = None):
        super().__init__()
        self.config = config
        self.graph = graph
        self.dtype = np.dtype(config.dtype)
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.temporal_encoder = TemporalEncoder(config, rng, self.dtype)
        self.spatial_encoder = SpatialEncoder(config, rng, self.dtype)
        self.query_generator = QueryGenerator(config, rng, self.dtype)
        self.fusion = CrossFusion(config, rng, self.dtype)
        self.predictor = Predictor(config, rng, self.dtype, backbone)
        self.bind_rng(rng)
        self.last_context: Optional[FusedContext] = None
        logger.info(f"모델 생성: parameters={self.num_parameters()}, output_type={config.output_type}")

    def _zeros(self, batch: int, nodes: int, width: int) -> Tensor:
        return Tensor(np.zeros((batch, nodes, width), dtype=self.dtype))

    def encode(self, x: Tensor) -> QueryBatch:
        """시간/공간 임베딩과 질의 Q_st를 계산합니다."""
        batch, _, nodes, _ = x.shape
        width = self.config.embed_dim
        if self.config.use_temporal_encoder:
            e_tp = self.temporal_encoder(x)
        else:
            e_tp = self._zeros(batch, nodes, width)
        if self.config.use_spatial_encoder:
            e_sp = self.spatial_encoder(x, self.graph)
        else:
            e_sp = self._zeros(batch, nodes, width)
        return QueryBatch(e_tp=e_tp, e_sp=e_sp, q_st=self.query_generator(e_sp, e_tp))

    def forward(self, x, store: Optional[RetrievalStore] = None, collect: bool = False) -> Tensor:
        """
        Args:
            x: (B, L, N, D_in) 입력 윈도우
            store: 검색 저장소 (None이거나 query_only 모드이면 검색 생략)
            collect: 이번 키를 뱅크 갱신 표본으로 수집할지 여부
        """
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        query = self.encode(x)
        spatial = temporal = None
        if store is not None and self.config.output_type != OUTPUT_QUERY_ONLY:
            spatial, temporal = retrieve(query, store, self.config.top_k,
                                         training=self.training, collect=collect)
        context = self.fusion(query.q_st, spatial, temporal)
        h_f = context.h_f
        if self.config.output_type == OUTPUT_RETRIEVAL_ONLY:
            zeros = Tensor(np.zeros(query.q_st.shape, dtype=self.dtype))
            h_f = ops.concat([zeros, context.r_f], axis=-1)
        self.last_context = context
        return self.predictor(h_f, query.q_st)
