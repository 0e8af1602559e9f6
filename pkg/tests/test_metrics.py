import numpy as np
import pytest

from src.metrics import MAPE_EPS, build_report, compute_metrics, l2_penalty, masked_mae_loss, row_for
from src.tensor import Tensor, backward


def test_masked_mae_skips_null_targets():
    """목표 (1, 2, 0), 예측 (2, 2, 5) → (|1-2| + |2-2|) / 2 = 0.5"""
    loss = masked_mae_loss(Tensor(np.array([2.0, 2.0, 5.0])), np.array([1.0, 2.0, 0.0]), null_val=0.0)
    assert loss.item() == pytest.approx(0.5, abs=1e-12)


def test_masked_mae_gradient_ignores_masked_points():
    pred = Tensor(np.array([2.0, 1.0, 5.0, 4.0]), requires_grad=True)
    mask = np.array([True, True, False, True])
    backward(masked_mae_loss(pred, np.array([1.0, 3.0, 0.0, 4.5]), mask=mask))
    np.testing.assert_allclose(pred.grad, [1 / 3, -1 / 3, 0.0, -1 / 3])


def test_masked_mae_nan_null_and_empty(caplog):
    loss = masked_mae_loss(Tensor(np.array([1.0, 3.0])), np.array([np.nan, 1.0]), null_val=np.nan)
    assert loss.item() == pytest.approx(2.0)
    empty = masked_mae_loss(Tensor(np.array([1.0])), np.array([0.0]))
    assert empty.item() == 0.0
    assert "유효한 데이터 포인트가 없어" in caplog.text


def test_single_point_metrics():
    """y=2, ŷ=1 → MAE 1, RMSE 1, MAPE 100/(2+ε)"""
    rows = compute_metrics(np.ones((1, 1, 1, 1)), np.full((1, 1, 1, 1), 2.0))
    assert [r["horizon"] for r in rows] == ["avg"]
    avg = rows[0]
    assert avg["mae"] == pytest.approx(1.0, abs=1e-9)
    assert avg["rmse"] == pytest.approx(1.0, abs=1e-9)
    assert avg["mape"] == pytest.approx(100.0 / (2.0 + MAPE_EPS), abs=1e-9)
    assert avg["mape"] == pytest.approx(49.99975, abs=1e-5)


def test_horizon_rows_and_mask():
    # Setup
    target = np.ones((2, 12, 3, 1))
    pred = target.copy()
    pred[:, 2] += 3.0  # 3번째 스텝
    pred[:, 11] -= 1.0  # 12번째 스텝
    mask = np.ones_like(target, dtype=bool)
    mask[0, 11] = False

    # Execute
    rows = compute_metrics(pred, target, mask=mask)
    report = build_report("test", rows, samples=2, seconds=0.5)

    # Verify
    assert [r["horizon"] for r in rows] == ["3", "6", "12", "avg"]
    assert row_for(report, "3")["mae"] == pytest.approx(3.0)
    assert row_for(report, "6")["mae"] == 0.0
    assert row_for(report, "12")["count"] == 3
    assert row_for(report)["count"] == 2 * 12 * 3 - 3
    assert row_for(report)["rmse"] == pytest.approx(np.sqrt((6 * 9 + 3 * 1) / 69))
    with pytest.raises(KeyError):
        row_for(report, "24")


def test_l2_penalty():
    assert l2_penalty([Tensor(np.array([1.0, 2.0])), Tensor(np.array([[3.0]]))]) == pytest.approx(14.0)
