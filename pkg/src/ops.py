"""
미분 가능한 기본 연산 모듈

모델 순전파에 쓰이는 모든 연산을 정의합니다. 각 연산은 numpy로
순전파 값을 계산하고, 입력별 기울기를 돌려주는 함수를 출력 텐서에 연결합니다.

브로드캐스팅은 두 경우로 제한합니다:
  - 원소별 연산: 모양이 같거나, 한쪽 모양이 다른 쪽의 접미사(bias 형태)이거나, 0차원 스칼라
  - matmul: 선행 배치 축이 같거나, 한쪽이 2차원 행렬
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.errors import NumericError, ShapeError
from src.tensor import Tensor, is_grad_enabled

logger = logging.getLogger(__name__)

Operand = Union[Tensor, np.ndarray, float, int]
IntPair = Union[int, Tuple[int, int]]


# === 내부 헬퍼 ===
def _lift(value: Operand, like: Optional[Tensor] = None) -> Tensor:
    """상수를 텐서로 감쌉니다. like가 주어지면 같은 dtype을 사용합니다."""
    if isinstance(value, Tensor):
        return value
    if like is not None:
        return Tensor(np.asarray(value, dtype=like.dtype))
    return Tensor(np.asarray(value))


def _pair_operands(a: Operand, b: Operand) -> Tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, _lift(b, a)
    if isinstance(b, Tensor):
        return _lift(a, b), b
    return _lift(a), _lift(b)


def _result(data: np.ndarray, parents: Tuple[Tensor, ...], backward_fn, op: str) -> Tensor:
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward_fn, op=op)
    return Tensor(data, requires_grad=False, op=op)


def _check_elementwise(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    small, large = (a.shape, b.shape) if a.ndim <= b.ndim else (b.shape, a.shape)
    if large[len(large) - len(small):] != small:
        raise ShapeError(f"{op}: 모양이 같거나 한쪽이 접미사여야 합니다", a.shape, b.shape)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """접미사 브로드캐스트의 역: 선행 축을 합산합니다."""
    if grad.shape == shape:
        return grad
    if len(shape) == 0:
        return np.asarray(grad.sum())
    lead = grad.ndim - len(shape)
    return grad.sum(axis=tuple(range(lead))).reshape(shape)


def _as_pair(value: IntPair) -> Tuple[int, int]:
    if isinstance(value, int):
        return value, value
    return int(value[0]), int(value[1])


def _norm_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"축 {axis}이(가) {ndim}차원 텐서에 유효하지 않습니다")
    return axis % ndim


# === 원소별 연산 ===
def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair_operands(a, b)
    _check_elementwise(a, b, "add")

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), backward_fn, "add")


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair_operands(a, b)
    _check_elementwise(a, b, "sub")

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), backward_fn, "sub")


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _pair_operands(a, b)
    _check_elementwise(a, b, "mul")

    def backward_fn(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _result(a.data * b.data, (a, b), backward_fn, "mul")


def neg(x: Tensor) -> Tensor:
    return _result(-x.data, (x,), lambda g: (-g,), "neg")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward_fn(g):
        return (g * mask,)

    return _result(np.where(mask, x.data, 0.0).astype(x.dtype, copy=False), (x,), backward_fn, "relu")


def abs(x: Tensor) -> Tensor:  # noqa: A001
    sign = np.sign(x.data)
    return _result(np.abs(x.data), (x,), lambda g: (g * sign,), "abs")


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """
    역스케일 드롭아웃. 평가 모드이거나 rate가 0이면 입력을 그대로 돌려줍니다.

    Args:
        rate: 원소를 0으로 만들 확률
    """
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ValueError("학습 모드 드롭아웃에는 난수 생성기가 필요합니다")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
    return _result(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


# === 행렬 연산 ===
def matmul(a: Operand, b: Operand) -> Tensor:
    """
    행렬 곱. 선행 배치 축은 같거나 한쪽이 2차원이어야 합니다.

    Raises:
        ShapeError: 내부 차원 또는 배치 축 불일치
    """
    a, b = _pair_operands(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul은 2차원 이상의 텐서가 필요합니다", a.shape, b.shape)
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul 내부 차원이 일치하지 않습니다", a.shape, b.shape)
    batch_a, batch_b = a.shape[:-2], b.shape[:-2]
    if batch_a and batch_b and batch_a != batch_b:
        raise ShapeError("matmul 배치 축이 일치하지 않습니다", a.shape, b.shape)

    def backward_fn(g):
        ga = gb = None
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            if not batch_a and ga.ndim > 2:
                ga = ga.reshape((-1,) + a.shape).sum(axis=0)
        if b.requires_grad:
            if not batch_b and batch_a:
                a2 = a.data.reshape(-1, a.shape[-1])
                g2 = g.reshape(-1, g.shape[-1])
                gb = a2.T @ g2
            else:
                gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ga, gb

    return _result(np.matmul(a.data, b.data), (a, b), backward_fn, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """y = x·W + b, W는 (in, out) 모양입니다."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError("linear 입력 폭이 가중치와 맞지 않습니다", x.shape, weight.shape)
    squeeze = x.ndim == 1
    if squeeze:
        x = reshape(x, (1, x.shape[0]))
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    if squeeze:
        out = reshape(out, (weight.shape[1],))
    return out


# === 정규화/확률 ===
def softmax(x: Tensor, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    축을 따라 합이 1이 되는 softmax. 최댓값을 빼서 계산합니다.

    mask(True=유지)가 주어지면 가려진 위치의 출력은 정확히 0이며,
    모두 가려진 슬라이스는 0을 출력합니다.

    Raises:
        NumericError: 입력에 유한하지 않은 값이 있을 때
    """
    if not np.all(np.isfinite(x.data)):
        raise NumericError("softmax 입력에 유한하지 않은 값이 있습니다")
    axis = _norm_axis(axis, x.ndim)
    z = x.data
    if mask is not None:
        keep = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        z = np.where(keep, z, -np.inf)
    peak = np.max(z, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    e = np.exp(z - peak)
    total = e.sum(axis=axis, keepdims=True)
    y = np.divide(e, total, out=np.zeros_like(e), where=total > 0).astype(x.dtype, copy=False)

    def backward_fn(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _result(y, (x,), backward_fn, "softmax")


def layer_norm(
    x: Tensor,
    gamma: Optional[Tensor] = None,
    beta: Optional[Tensor] = None,
    eps: float = 1e-5,
) -> Tensor:
    """마지막 축에 대한 레이어 정규화 (gamma/beta가 없으면 아핀 변환 생략)"""
    if eps <= 0:
        raise ValueError("eps는 0보다 커야 합니다")
    width = x.shape[-1]
    for p in (gamma, beta):
        if p is not None and p.shape != (width,):
            raise ShapeError("layer_norm 아핀 파라미터 모양이 맞지 않습니다", x.shape, p.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat
    if gamma is not None:
        out = out * gamma.data
    if beta is not None:
        out = out + beta.data

    parents = tuple(t for t in (x, gamma, beta) if t is not None)

    def backward_fn(g):
        grads = []
        dxhat = g * gamma.data if gamma is not None else g
        if x.requires_grad:
            gx = (inv_std / width) * (
                width * dxhat
                - dxhat.sum(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
            )
        else:
            gx = None
        grads.append(gx)
        if gamma is not None:
            grads.append((g * xhat).reshape(-1, width).sum(axis=0))
        if beta is not None:
            grads.append(g.reshape(-1, width).sum(axis=0))
        return tuple(grads)

    return _result(out.astype(x.dtype, copy=False), parents, backward_fn, "layer_norm")


# === 합성곱 ===
def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: IntPair = 1,
    padding: IntPair = 0,
) -> Tensor:
    """
    교차 상관(cross-correlation) 2차원 합성곱

    Args:
        x: (B, C_in, H, W)
        weight: (C_out, C_in, kH, kW)
        bias: (C_out,)

    Raises:
        ShapeError: 채널 불일치 또는 커널이 패딩된 입력보다 클 때
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError("conv2d는 4차원 입력과 커널이 필요합니다", x.shape, weight.shape)
    batch, channels, height, width = x.shape
    out_ch, in_ch, kh, kw = weight.shape
    if in_ch != channels:
        raise ShapeError("conv2d 입력 채널이 커널과 맞지 않습니다", x.shape, weight.shape)
    sh, sw = _as_pair(stride)
    ph, pw = _as_pair(padding)
    if kh > height + 2 * ph or kw > width + 2 * pw:
        raise ShapeError("conv2d 커널이 패딩된 입력보다 큽니다", x.shape, weight.shape)

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    out_h, out_w = windows.shape[2], windows.shape[3]
    out = np.einsum("bchwij,ocij->bohw", windows, weight.data, optimize=True)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    parents = tuple(t for t in (x, weight, bias) if t is not None)

    def backward_fn(g):
        grads = []
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + sh * (out_h - 1) + 1:sh, j:j + sw * (out_w - 1) + 1:sw] += np.einsum(
                        "bohw,oc->bchw", g, weight.data[:, :, i, j], optimize=True
                    )
            grads.append(gxp[:, :, ph:ph + height, pw:pw + width])
        else:
            grads.append(None)
        grads.append(np.einsum("bohw,bchwij->ocij", g, windows, optimize=True) if weight.requires_grad else None)
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return _result(out.astype(x.dtype, copy=False), parents, backward_fn, "conv2d")


def conv1d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
) -> Tensor:
    """
    팽창(dilation)을 지원하는 1차원 합성곱

    Args:
        x: (B, C_in, L)
        weight: (C_out, C_in, k)
    """
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError("conv1d는 3차원 입력과 커널이 필요합니다", x.shape, weight.shape)
    batch, channels, length = x.shape
    out_ch, in_ch, k = weight.shape
    if in_ch != channels:
        raise ShapeError("conv1d 입력 채널이 커널과 맞지 않습니다", x.shape, weight.shape)
    span = (k - 1) * dilation + 1
    if span > length + 2 * padding:
        raise ShapeError("conv1d 커널 범위가 패딩된 입력보다 큽니다", x.shape, weight.shape)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding)))
    out_len = (length + 2 * padding - span) // stride + 1
    taps = [slice(i * dilation, i * dilation + stride * (out_len - 1) + 1, stride) for i in range(k)]
    cols = np.stack([xp[:, :, tap] for tap in taps], axis=-1)
    out = np.einsum("bcli,oci->bol", cols, weight.data, optimize=True)
    if bias is not None:
        out = out + bias.data[None, :, None]

    parents = tuple(t for t in (x, weight, bias) if t is not None)

    def backward_fn(g):
        grads = []
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i, tap in enumerate(taps):
                gxp[:, :, tap] += np.einsum("bol,oc->bcl", g, weight.data[:, :, i], optimize=True)
            grads.append(gxp[:, :, padding:padding + length])
        else:
            grads.append(None)
        grads.append(np.einsum("bol,bcli->oci", g, cols, optimize=True) if weight.requires_grad else None)
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return tuple(grads)

    return _result(out.astype(x.dtype, copy=False), parents, backward_fn, "conv1d")


# === 모양 연산 ===
def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError(f"reshape 불가: {e}", x.shape, tuple(shape)) from e
    return _result(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(_norm_axis(a, x.ndim) for a in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose 축 순열이 유효하지 않습니다: {axes}", x.shape)
    inverse = tuple(np.argsort(axes))
    return _result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),), "transpose")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeError("concat에는 최소 하나의 텐서가 필요합니다")
    ndim = tensors[0].ndim
    axis = _norm_axis(axis, ndim)
    reference = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[d] != reference[d] for d in range(ndim) if d != axis):
            raise ShapeError("concat 축 이외의 모양이 일치하지 않습니다", reference, t.shape)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return _result(out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def getitem(x: Tensor, index) -> Tensor:
    out = np.array(x.data[index], copy=True)
    parts = index if isinstance(index, tuple) else (index,)
    basic = all(p is Ellipsis or p is None or isinstance(p, (slice, int)) for p in parts)

    def backward_fn(g):
        full = np.zeros_like(x.data)
        if basic:
            # 기본 인덱싱은 위치가 겹치지 않음
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _result(out, (x,), backward_fn, "getitem")


# === 축약 ===
def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(np.asarray(g).reshape((1,) * len(shape)) if shape else g, shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(_norm_axis(a, len(shape)) for a in axes)
    if not keepdims:
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.asarray(x.data.sum(axis=axis, keepdims=keepdims))
    return _result(out, (x,), lambda g: (_expand_reduced(g, x.shape, axis, keepdims),), "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = np.asarray(x.data.mean(axis=axis, keepdims=keepdims))
    count = x.size // max(out.size, 1) if x.size else 1

    def backward_fn(g):
        return (_expand_reduced(g, x.shape, axis, keepdims) / count,)

    return _result(out, (x,), backward_fn, "mean")
