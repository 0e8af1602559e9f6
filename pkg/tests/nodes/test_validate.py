import math
from unittest.mock import MagicMock, patch

from src.entities import RESULT_CONTINUE, RESULT_EARLY_STOP, RESULT_ERROR, RESULT_MAX_EPOCHS
from src.nodes.validate import validate
from tests.conftest import make_state


def _context(patience: int = 3) -> MagicMock:
    context = MagicMock()
    context.config.patience = patience
    context.run_info = {"source": "synthetic:sine"}
    context.events = []
    return context


def _history(epoch: int, loss: float = 0.4):
    return [{"epoch": epoch, "lr": 0.001, "horizon": 3, "train_loss": loss, "val_mae": None,
             "skipped_steps": 0, "seconds": 0.1}]


@patch('src.nodes.validate.validation_mae')
def test_validate_improvement_saves_best(mock_validation_mae):
    """검증 MAE가 개선되면 최고 체크포인트를 저장하고 계속 진행합니다."""
    # Setup
    mock_validation_mae.return_value = 0.25
    context = _context()
    state = make_state(epoch=4, history=_history(4), best_val_mae=0.3, best_epoch=1, bad_epochs=2)

    # Execute
    result = validate(state, context)

    # Verify
    assert result["best_val_mae"] == 0.25 and result["best_epoch"] == 4
    assert result["bad_epochs"] == 0
    assert result["history"][-1]["val_mae"] == 0.25
    assert result["epoch"] == 5
    assert result["node_result"] == RESULT_CONTINUE
    context.checkpoints.save_best.assert_called_once_with(
        context.model, context.store, {"source": "synthetic:sine", "best_epoch": 4, "best_val_mae": 0.25},
    )
    context.log_event.assert_called_once_with("best_checkpoint", 4, val_mae=0.25)


@patch('src.nodes.validate.validation_mae')
def test_validate_early_stop(mock_validation_mae):
    """개선 없는 에폭이 patience에 닿으면 조기 종료합니다."""
    # Setup
    mock_validation_mae.return_value = 0.3
    context = _context(patience=3)
    state = make_state(epoch=6, history=_history(6), best_val_mae=0.3, best_epoch=3, bad_epochs=2)

    # Execute
    result = validate(state, context)

    # Verify
    context.checkpoints.save_best.assert_not_called()
    assert result["bad_epochs"] == 3
    assert result["node_result"] == RESULT_EARLY_STOP


@patch('src.nodes.validate.validation_mae')
def test_validate_max_epochs(mock_validation_mae):
    mock_validation_mae.return_value = 0.1
    result = validate(make_state(epoch=9, max_epochs=10, history=_history(9)), _context())
    assert result["node_result"] == RESULT_MAX_EPOCHS
    assert result["best_epoch"] == 9


@patch('src.nodes.validate.validation_mae')
def test_validate_falls_back_to_train_loss(mock_validation_mae):
    """검증 분할이 비어 있으면 학습 손실을 기준으로 사용합니다."""
    mock_validation_mae.return_value = None
    result = validate(make_state(history=_history(0, loss=0.7)), _context())
    assert result["best_val_mae"] == 0.7
    assert result["history"][-1]["val_mae"] is None


@patch('src.nodes.validate.validation_mae')
def test_validate_ignores_non_finite_criterion(mock_validation_mae):
    mock_validation_mae.return_value = math.nan
    context = _context()
    result = validate(make_state(history=_history(0)), context)
    assert result["best_val_mae"] is None
    assert result["bad_epochs"] == 1
    context.checkpoints.save_best.assert_not_called()


@patch('src.nodes.validate.validation_mae')
def test_validate_error(mock_validation_mae):
    mock_validation_mae.side_effect = RuntimeError("disk full")
    context = _context()
    result = validate(make_state(history=_history(0)), context)
    assert result["node_result"] == RESULT_ERROR
    assert isinstance(context.failure, RuntimeError)
