"""
신경망 레이어 모듈

파라미터를 가진 Module 기본 클래스와 모델에서 재사용하는 레이어
(Linear, LayerNorm, Conv2d, Conv1d, FeedForward, Dropout)를 정의합니다.

초기화 규칙:
  - Linear: Xavier uniform
  - Conv: Kaiming normal (fan_in)
  - bias: 0
"""

import logging
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from src import ops
from src.errors import CheckpointError
from src.tensor import Tensor

logger = logging.getLogger(__name__)


class Parameter(Tensor):
    """학습 가능한 텐서. freeze되면 requires_grad가 꺼집니다."""

    def __init__(self, data: np.ndarray, name: Optional[str] = None):
        super().__init__(data, requires_grad=True, name=name)


class Module:
    """
    파라미터와 하위 모듈을 속성으로 가지는 레이어 기본 클래스

    속성 이름 순서대로 파라미터를 순회하므로 state_dict의 키 순서가 결정적입니다.
    """

    def __init__(self):
        self.training = True
        self.rng: Optional[np.random.Generator] = None

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    # === 순회 ===
    def children(self) -> Iterator[Tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "", _seen: Optional[set] = None) -> Iterator[Tuple[str, Parameter]]:
        """같은 파라미터가 여러 경로로 등록되어 있으면 처음 경로만 반환합니다."""
        seen = set() if _seen is None else _seen
        for name, value in vars(self).items():
            if isinstance(value, Parameter) and id(value) not in seen:
                seen.add(id(value))
                yield f"{prefix}{name}", value
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.", seen)

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self) -> List[Parameter]:
        return [p for p in self.parameters() if p.requires_grad]

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, child in self.children():
            yield from child.modules()

    # === 모드 ===
    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def bind_rng(self, rng: np.random.Generator) -> "Module":
        """드롭아웃 난수를 하나의 생성기 스트림으로 묶습니다."""
        for module in self.modules():
            module.rng = rng
        return self

    def freeze(self) -> "Module":
        for p in self.parameters():
            p.requires_grad = False
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    # === 직렬화 ===
    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        저장된 파라미터를 불러옵니다.

        Raises:
            CheckpointError: 키 또는 모양이 현재 모델과 다를 때
        """
        named = dict(self.named_parameters())
        missing = sorted(set(named) - set(state))
        unexpected = sorted(set(state) - set(named))
        if missing or unexpected:
            raise CheckpointError(f"파라미터 키 불일치: missing={missing[:5]}, unexpected={unexpected[:5]}")
        for name, p in named.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise CheckpointError(f"파라미터 모양 불일치: {name} {value.shape} != {p.shape}")
            p.data = value.astype(p.dtype, copy=True)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


# === 초기화 ===
def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def kaiming_normal(rng: np.random.Generator, fan_in: int, shape, dtype) -> np.ndarray:
    std = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(size=shape) * std).astype(dtype)


# === 레이어 ===
class Linear(Module):
    """y = x·W + b (W 모양: in × out)"""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 dtype=np.float64, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(xavier_uniform(rng, in_features, out_features, (in_features, out_features), dtype))
        self.bias = Parameter(np.zeros(out_features, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, width: int, dtype=np.float64, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = Parameter(np.ones(width, dtype=dtype))
        self.beta = Parameter(np.zeros(width, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)


class Identity(Module):
    def forward(self, x: Tensor) -> Tensor:
        return x


class Dropout(Module):
    def __init__(self, rate: float):
        super().__init__()
        self.rate = rate

    def forward(self, x: Tensor) -> Tensor:
        return ops.dropout(x, self.rate, self.rng, self.training)


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: Union[int, Tuple[int, int]],
                 rng: np.random.Generator, dtype=np.float64, stride=1, padding=0, bias: bool = True):
        super().__init__()
        kh, kw = (kernel_size, kernel_size) if isinstance(kernel_size, int) else kernel_size
        self.stride = stride
        self.padding = padding
        self.weight = Parameter(kaiming_normal(rng, in_channels * kh * kw, (out_channels, in_channels, kh, kw), dtype))
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class Conv1d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, dtype=np.float64, stride: int = 1,
                 padding: int = 0, dilation: int = 1, bias: bool = True):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.dilation = dilation
        self.weight = Parameter(kaiming_normal(rng, in_channels * kernel_size, (out_channels, in_channels, kernel_size), dtype))
        self.bias = Parameter(np.zeros(out_channels, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.weight, self.bias, self.stride, self.padding, self.dilation)


class FeedForward(Module):
    """Linear → ReLU → Dropout → Linear"""

    def __init__(self, width: int, hidden: int, dropout: float, rng: np.random.Generator,
                 dtype=np.float64, out_width: Optional[int] = None):
        super().__init__()
        self.fc1 = Linear(width, hidden, rng, dtype)
        self.drop = Dropout(dropout)
        self.fc2 = Linear(hidden, out_width or width, rng, dtype)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(self.drop(ops.relu(self.fc1(x))))
