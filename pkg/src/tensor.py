"""
역방향 자동 미분 텐서 모듈

numpy 배열을 감싼 Tensor와, 실행된 연산을 기록한 Tape를 제공합니다.
각 연산은 부모 텐서와 기울기 함수를 출력 텐서에 연결하고,
backward는 위상 정렬 역순으로 연산을 한 번씩 재생합니다.
"""

import contextlib
import logging
import threading
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import ContractError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

# === 기울기 기록 스위치 (스레드 단위) ===
_GRAD_STATE = threading.local()


def is_grad_enabled() -> bool:
    """현재 스레드에서 연산 기록이 켜져 있는지 반환합니다."""
    return getattr(_GRAD_STATE, "enabled", True)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """블록 안에서 실행한 연산은 테이프에 기록되지 않습니다."""
    previous = is_grad_enabled()
    _GRAD_STATE.enabled = False
    try:
        yield
    finally:
        _GRAD_STATE.enabled = previous


class Tensor:
    """
    밀집 실수 N차원 배열

    data는 행 우선 numpy 배열이고, requires_grad가 켜진 텐서는
    backward 이후 같은 모양의 grad를 가집니다.
    """

    __array_priority__ = 100

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        op: str = "leaf",
        name: Optional[str] = None,
    ):
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.name = name

    # === 기본 속성 ===
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self.backward_fn is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """같은 데이터를 공유하지만 테이프와 분리된 텐서"""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """팬아웃에 대비해 기울기를 합산합니다."""
        if grad.shape != self.data.shape:
            grad = np.broadcast_to(grad, self.data.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad = self.grad + grad

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        backward(self, grad)

    def __repr__(self) -> str:
        label = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad}{label})"

    # === 연산자 ===
    def __add__(self, other: ArrayLike) -> "Tensor":
        return _ops.add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return _ops.add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return _ops.sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return _ops.sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return _ops.mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return _ops.mul(other, self)

    def __neg__(self) -> "Tensor":
        return _ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return _ops.matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return _ops.getitem(self, index)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _ops.reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return _ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return _ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return _ops.mean(self, axis=axis, keepdims=keepdims)


class Tape:
    """
    스칼라 출력에 도달하는 연산들의 기록

    ops는 위상 정렬 순서(입력 → 출력)로 저장되며,
    replay는 역순으로 각 연산을 정확히 한 번 방문합니다.
    """

    def __init__(self, ops: List[Tensor]):
        self.ops = ops

    @classmethod
    def record(cls, output: Tensor) -> "Tape":
        order: List[Tensor] = []
        visited = set()
        # 깊은 그래프에서 재귀 한도를 피하기 위해 명시적 스택 사용
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def replay(self, seed: np.ndarray) -> None:
        grads = {id(self.ops[-1]): seed}
        for node in reversed(self.ops):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            node.accumulate_grad(grad)
            if node.backward_fn is None:
                continue
            parent_grads = node.backward_fn(grad)
            for parent, parent_grad in zip(node.parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad

    def __len__(self) -> int:
        return len(self.ops)


def backward(loss: Tensor, grad: Optional[np.ndarray] = None) -> Tape:
    """
    스칼라 손실에서 역전파하여 requires_grad 조상 텐서의 grad를 채웁니다.

    Raises:
        ContractError: 손실이 스칼라가 아니거나 테이프에 없을 때
    """
    if grad is None:
        if loss.size != 1:
            raise ContractError(f"backward는 스칼라 텐서에서만 호출할 수 있습니다: shape={loss.shape}")
        grad = np.ones_like(loss.data)
    if not loss.requires_grad:
        raise ContractError("기울기를 요구하지 않는 텐서에 backward를 호출했습니다")
    tape = Tape.record(loss)
    tape.replay(np.asarray(grad, dtype=loss.data.dtype).reshape(loss.shape))
    return tape


def as_tensor(value: Union["Tensor", ArrayLike], dtype: Optional[np.dtype] = None) -> Tensor:
    """텐서가 아니면 상수 텐서로 감쌉니다."""
    if isinstance(value, Tensor):
        return value
    array = np.asarray(value, dtype=dtype) if dtype is not None else np.asarray(value)
    return Tensor(array, requires_grad=False)


from src import ops as _ops  # noqa: E402  (순환 참조: ops가 Tensor를 사용)
