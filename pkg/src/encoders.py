"""
시공간 인코더 모듈

입력 윈도우 X (B×L×N×D_in)를 분리된 시간/공간 임베딩으로 변환하고,
두 임베딩을 융합하여 문맥 인식 질의 Q_st를 생성합니다.

  E_tp = σ(Conv(X))            시간 축을 한 번에 접는 합성곱
  E_sp = σ(W_sp(X, G))         정규화된 (A + I) 전파 후 선형 사상
  Q_st = 잔차 FFN 스택(Linear_Q([E_sp; E_tp]))
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src import ops
from src.config import RunConfig
from src.errors import ShapeError
from src.layers import Conv1d, Conv2d, FeedForward, Identity, LayerNorm, Linear, Module
from src.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class GraphSpec:
    """
    센서 그래프

    인접 행렬의 대각 성분은 무시하고 자기 루프를 정확히 한 번 더합니다.
    """

    num_nodes: int
    adjacency: np.ndarray
    edges: Optional[List[Tuple[int, int, float]]] = field(default=None, repr=False)

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.float64)
        if self.adjacency.shape != (self.num_nodes, self.num_nodes):
            raise ShapeError("인접 행렬은 N×N 이어야 합니다", self.adjacency.shape, (self.num_nodes, self.num_nodes))
        if not np.all(np.isfinite(self.adjacency)) or np.any(self.adjacency < 0):
            raise ValueError("인접 행렬에 음수 또는 유한하지 않은 가중치가 있습니다")

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Sequence[Tuple[int, int, float]]) -> "GraphSpec":
        adjacency = np.zeros((num_nodes, num_nodes))
        for src, dst, weight in edges:
            if not (0 <= src < num_nodes and 0 <= dst < num_nodes):
                raise ShapeError(f"간선 ({src}, {dst})이(가) 노드 범위를 벗어났습니다", (num_nodes,))
            adjacency[src, dst] = weight
        return cls(num_nodes, adjacency, list(edges))

    @classmethod
    def ring(cls, num_nodes: int) -> "GraphSpec":
        """양방향 단위 가중치 링 그래프"""
        edges = []
        if num_nodes > 1:
            for i in range(num_nodes):
                j = (i + 1) % num_nodes
                edges.append((i, j, 1.0))
                edges.append((j, i, 1.0))
        return cls.from_edges(num_nodes, edges)

    @classmethod
    def isolated(cls, num_nodes: int) -> "GraphSpec":
        return cls(num_nodes, np.zeros((num_nodes, num_nodes)))

    @cached_property
    def propagation(self) -> np.ndarray:
        """행 정규화된 (A + I)"""
        a = self.adjacency.copy()
        np.fill_diagonal(a, 0.0)
        a += np.eye(self.num_nodes)
        return a / a.sum(axis=1, keepdims=True)

    def permuted(self, order: Sequence[int]) -> "GraphSpec":
        order = np.asarray(order)
        return GraphSpec(self.num_nodes, self.adjacency[np.ix_(order, order)])


@dataclass
class QueryBatch:
    """인코더 출력과 질의"""

    e_tp: Tensor  # (B, N, D_tp)
    e_sp: Tensor  # (B, N, D_sp)
    q_st: Tensor  # (B, N, D_q)


def _embedding_norm(config: RunConfig, width: int, dtype) -> Module:
    return LayerNorm(width, dtype) if config.normalize_embeddings else Identity()


class TemporalEncoder(Module):
    """
    노드별 시간 인코더

    conv2d 모드: (L, D_in) 평면 전체를 덮는 커널로 시간 축을 한 번에 접습니다.
    conv1d 모드: D_in을 채널로 보고 팽창 합성곱을 적용한 뒤 시간 평균을 취합니다.
    """

    def __init__(self, config: RunConfig, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.mode = config.temporal_mode
        width = config.embed_dim
        if self.mode == "conv2d":
            self.conv = Conv2d(1, width, (config.input_len, config.input_dim), rng, dtype)
        else:
            self.conv = Conv1d(config.input_dim, width, config.temporal_kernel, rng, dtype,
                               dilation=config.temporal_dilation)
        self.norm = _embedding_norm(config, width, dtype)

    def forward(self, x: Tensor) -> Tensor:
        batch, length, nodes, channels = _check_window(x)
        rows = x.transpose(0, 2, 1, 3)  # (B, N, L, D_in)
        if self.mode == "conv2d":
            h = self.conv(rows.reshape(batch * nodes, 1, length, channels))
            h = h.mean(axis=(2, 3))
        else:
            h = self.conv(rows.transpose(0, 1, 3, 2).reshape(batch * nodes, channels, length))
            h = h.mean(axis=2)
        return self.norm(h.reshape(batch, nodes, -1))


class SpatialEncoder(Module):
    """한 번의 그래프 전파 후 시간 펼침 특징을 D_sp로 사상합니다."""

    def __init__(self, config: RunConfig, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.proj = Linear(config.input_len * config.input_dim, config.embed_dim, rng, dtype)
        self.norm = _embedding_norm(config, config.embed_dim, dtype)

    def forward(self, x: Tensor, graph: GraphSpec) -> Tensor:
        batch, length, nodes, channels = _check_window(x)
        if graph.num_nodes != nodes:
            raise ShapeError("그래프 노드 수가 입력과 다릅니다", (graph.num_nodes,), x.shape)
        flat = x.transpose(0, 2, 1, 3).reshape(batch, nodes, length * channels)
        mixed = ops.matmul(Tensor(graph.propagation.astype(x.dtype)), flat)
        return self.norm(self.proj(mixed))


class QueryGenerator(Module):
    """Linear_Q(concat) 뒤에 LayerNorm(E + FFN(E)) 잔차 레이어를 쌓습니다."""

    def __init__(self, config: RunConfig, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.in_proj = Linear(2 * config.embed_dim, config.query_dim, rng, dtype)
        depth = config.generator_layers if config.use_query_generator else 0
        hidden = int(config.mlp_ratio * config.query_dim)
        self.ffns = [FeedForward(config.query_dim, hidden, config.dropout, rng, dtype) for _ in range(depth)]
        self.norms = [LayerNorm(config.query_dim, dtype) for _ in range(depth)]

    def forward(self, e_sp: Tensor, e_tp: Tensor) -> Tensor:
        if e_sp.shape[:2] != e_tp.shape[:2]:
            raise ShapeError("E_sp와 E_tp의 (B, N)이 다릅니다", e_sp.shape, e_tp.shape)
        e = self.in_proj(ops.concat([e_sp, e_tp], axis=-1))
        for ffn, norm in zip(self.ffns, self.norms):
            e = norm(e + ffn(e))
        return e


def _check_window(x: Tensor) -> Tuple[int, int, int, int]:
    if x.ndim != 4:
        raise ShapeError("입력 윈도우는 (B, L, N, D_in) 모양이어야 합니다", x.shape)
    if not np.all(np.isfinite(x.data)):
        raise ValueError("입력 윈도우에 유한하지 않은 값이 있습니다")
    return x.shape
