import numpy as np
import pytest

from src.config import RunConfig, build_config
from src.optim import Adam, clip_grad_norm, curriculum_horizon, global_grad_norm, lr_schedule
from src.tensor import Tensor


def _param(values):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)


def test_adam_matches_hand_stepped_updates():
    """상수 기울기 g의 첫 스텝 크기는 편향 보정 덕분에 lr입니다."""
    # Setup
    p = _param([1.0, -2.0])
    adam = Adam([p], lr=0.1)
    g = np.array([0.5, -3.0])

    # Execute / Verify
    p.grad = g.copy()
    assert adam.step()
    np.testing.assert_allclose(p.data, [1.0 - 0.1, -2.0 + 0.1], atol=1e-7)
    after_first = p.data.copy()

    g2 = np.array([1.0, 1.0])
    p.grad = g2.copy()
    adam.step()
    m = 0.9 * 0.1 * g + 0.1 * g2
    v = 0.999 * 0.001 * g ** 2 + 0.001 * g2 ** 2
    expected = after_first - 0.1 * (m / (1 - 0.9 ** 2)) / (np.sqrt(v / (1 - 0.999 ** 2)) + 1e-8)
    np.testing.assert_allclose(p.data, expected, rtol=1e-12)


def test_clip_grad_norm_scales_to_max():
    grads, norm = clip_grad_norm([np.array([30.0]), np.array([40.0])], 5.0)
    assert norm == pytest.approx(50.0)
    assert global_grad_norm(grads) == pytest.approx(5.0)
    np.testing.assert_allclose(np.concatenate(grads), [3.0, 4.0])
    untouched, _ = clip_grad_norm([np.array([1.0])], 5.0)
    assert untouched[0][0] == 1.0


def test_adam_records_norm_before_clipping():
    p = _param([0.0, 0.0])
    adam = Adam([p], lr=0.01, max_norm=5.0)
    p.grad = np.array([30.0, 40.0])
    adam.step()
    assert adam.last_norm == pytest.approx(50.0)


def test_adam_skips_non_finite_gradients(caplog):
    p = _param([1.0])
    adam = Adam([p])
    p.grad = np.array([np.inf])
    assert not adam.step()
    assert p.data[0] == 1.0
    assert adam.skipped_steps == 1
    assert adam.t == 0


def test_decoupled_weight_decay():
    p = _param([1.0])
    adam = Adam([p], lr=0.1, weight_decay=0.1)
    p.grad = np.zeros(1)
    adam.step()
    assert p.data[0] == pytest.approx(0.99)


def test_frozen_parameters_are_not_optimized():
    frozen = Tensor(np.ones(2))
    trainable = _param([1.0])
    adam = Adam([frozen, trainable])
    assert adam.params == [trainable]


@pytest.mark.parametrize("epoch,expected", [
    (0, 0.002), (1, 0.001), (29, 0.001), (30, 0.0005), (45, 0.00025), (80, 0.002 * 0.5 ** 8), (200, 0.002 * 0.5 ** 8),
])
def test_lr_schedule(epoch, expected):
    assert lr_schedule(epoch, RunConfig()) == pytest.approx(expected)


@pytest.mark.parametrize("epoch,expected", [(0, 1), (29, 1), (30, 1), (32, 1), (33, 2), (62, 11), (63, 12), (300, 12)])
def test_curriculum_horizon(epoch, expected):
    assert curriculum_horizon(epoch, RunConfig()) == expected


def test_curriculum_disabled_uses_full_horizon():
    assert curriculum_horizon(0, build_config(use_curriculum=False)) == 12
