"""
예측기 모듈

범용 백본 인터페이스와 잔차 강화 경로, 출력 헤드를 정의합니다.

  Z = [B(H_f) ; Conv(σ(Conv(H_f·W₁ + b₁))·W₂ + b₂)]     폭 D_q + D_r
  Ŷ = Proj(LayerNorm(Z) + FFN(Z))  →  (B, H, N, D_out)

백본 플러그인 계약:
  - 입력 (B, N, in_width), 출력 (B, N, out_width)
  - trainable이 False이면 파라미터가 옵티마이저에서 제외됩니다
  - parameters()로 열거된 파라미터는 체크포인트에 저장됩니다
"""

import logging
from typing import Callable, List, Optional

import numpy as np

from src import ops
from src.config import RunConfig
from src.entities import OUTPUT_NO_MLP
from src.errors import ConfigError, ContractError
from src.layers import Conv2d, Dropout, FeedForward, LayerNorm, Linear, Module, Parameter
from src.tensor import Tensor

logger = logging.getLogger(__name__)


class Backbone(Module):
    """백본 기본 클래스"""

    kind = "base"

    def __init__(self, in_width: int, out_width: int, trainable: bool = True):
        super().__init__()
        self.in_width = in_width
        self.out_width = out_width
        self.trainable = trainable

    def set_trainable(self, trainable: bool) -> None:
        self.trainable = trainable
        for p in self.parameters():
            p.requires_grad = trainable


class MLPBackbone(Backbone):
    """은닉층 2개(폭 mlp_ratio × 입력), ReLU, 드롭아웃"""

    kind = "mlp"

    def __init__(self, in_width: int, out_width: int, mlp_ratio: float, dropout: float,
                 rng: np.random.Generator, dtype=np.float64, trainable: bool = True):
        super().__init__(in_width, out_width, trainable)
        hidden = int(mlp_ratio * in_width)
        self.fc1 = Linear(in_width, hidden, rng, dtype)
        self.fc2 = Linear(hidden, hidden, rng, dtype)
        self.fc3 = Linear(hidden, out_width, rng, dtype)
        self.drop = Dropout(dropout)
        self.set_trainable(trainable)

    def forward(self, h_f: Tensor) -> Tensor:
        h = self.drop(ops.relu(self.fc1(h_f)))
        h = self.drop(ops.relu(self.fc2(h)))
        return self.fc3(h)


class ExternalBackbone(Backbone):
    """
    호출자가 제공한 함수를 감싸는 백본

    Args:
        fn: Tensor (B, N, in_width) → Tensor (B, N, out_width)
        params: fn이 사용하는 파라미터 (체크포인트 대상)
    """

    kind = "external"

    def __init__(self, fn: Callable[[Tensor], Tensor], in_width: int, out_width: int,
                 params: Optional[List[Parameter]] = None, trainable: bool = False):
        super().__init__(in_width, out_width, trainable)
        self.fn = fn
        self.params = list(params or [])
        for i, p in enumerate(self.params):
            setattr(self, f"param_{i}", p)
        self.set_trainable(trainable)

    def forward(self, h_f: Tensor) -> Tensor:
        out = self.fn(h_f)
        expected = h_f.shape[:-1] + (self.out_width,)
        if not isinstance(out, Tensor) or out.shape != expected:
            shape = getattr(out, "shape", None)
            raise ContractError(f"외부 백본 출력 모양이 계약과 다릅니다: {shape} != {expected}")
        return out


def passthrough_backbone(config: RunConfig) -> ExternalBackbone:
    """H_f의 질의 부분 [:D_q]를 그대로 내보내는 학습 파라미터 없는 백본"""
    query_dim = config.query_dim
    return ExternalBackbone(lambda h: h[..., :query_dim], config.fused_dim, query_dim)


class ResidualEnhancer(Module):
    """Linear(W₁) → 1×1 Conv → ReLU → Linear(W₂) → 1×1 Conv, 합성곱은 노드 축 위에서 동작"""

    def __init__(self, in_width: int, width: int, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.width = width
        self.w1 = Linear(in_width, width, rng, dtype)
        self.conv_in = Conv2d(width, width, 1, rng, dtype)
        self.w2 = Linear(width, width, rng, dtype)
        self.conv_out = Conv2d(width, width, 1, rng, dtype)

    @staticmethod
    def _node_conv(conv: Conv2d, h: Tensor) -> Tensor:
        # (B, N, C) → (B, C, N, 1) → conv → (B, N, C)
        batch, nodes, channels = h.shape
        x = h.transpose(0, 2, 1).reshape(batch, channels, nodes, 1)
        y = conv(x)
        return y.reshape(batch, channels, nodes).transpose(0, 2, 1)

    def forward(self, h_f: Tensor) -> Tensor:
        h = ops.relu(self._node_conv(self.conv_in, self.w1(h_f)))
        return self._node_conv(self.conv_out, self.w2(h))


class OutputHead(Module):
    """LayerNorm(Z) + FFN(Z) 뒤에 (H·D_out) 사상"""

    def __init__(self, config: RunConfig, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        width = config.fused_dim
        self.horizon = config.output_len
        self.out_dim = config.output_dim
        self.norm = LayerNorm(width, dtype)
        self.ffn = FeedForward(width, int(config.mlp_ratio * width), config.dropout, rng, dtype)
        self.proj = Linear(width, config.output_len * config.output_dim, rng, dtype)

    def forward(self, z: Tensor) -> Tensor:
        batch, nodes, _ = z.shape
        y = self.proj(self.norm(z) + self.ffn(z))
        y = y.reshape(batch, nodes, self.horizon, self.out_dim)
        return y.transpose(0, 2, 1, 3)


class Predictor(Module):
    """백본 + 잔차 강화 + 출력 헤드"""

    def __init__(self, config: RunConfig, rng: np.random.Generator, dtype=np.float64,
                 backbone: Optional[Backbone] = None):
        super().__init__()
        self.output_type = config.output_type
        if backbone is None:
            backbone = MLPBackbone(config.fused_dim, config.query_dim, config.mlp_ratio,
                                   config.dropout, rng, dtype, trainable=not config.freeze_backbone)
        if backbone.in_width != config.fused_dim:
            raise ConfigError(f"백본 입력 폭({backbone.in_width})이 D_q + D_r({config.fused_dim})과 다릅니다")
        if backbone.out_width + config.retrieval_dim != config.fused_dim:
            raise ConfigError(
                f"백본 출력 폭({backbone.out_width}) + D_r({config.retrieval_dim})이 "
                f"Z 폭({config.fused_dim})과 다릅니다"
            )
        self.backbone = backbone
        self.enhancer = ResidualEnhancer(config.fused_dim, config.retrieval_dim, rng, dtype)
        self.head = OutputHead(config, rng, dtype)

    def backbone_forward(self, h_f: Tensor) -> Tensor:
        return self.backbone(h_f)

    def residual_enhance(self, h_f: Tensor, backbone_out: Tensor) -> Tensor:
        return ops.concat([backbone_out, self.enhancer(h_f)], axis=-1)

    def forward(self, h_f: Tensor, q_st: Tensor) -> Tensor:
        if self.output_type == OUTPUT_NO_MLP:
            # 백본을 건너뛰고 질의를 그대로 전달
            backbone_out = q_st
        else:
            backbone_out = self.backbone_forward(h_f)
        return self.head(self.residual_enhance(h_f, backbone_out))
