from src.app import histogram_frame, history_frame, list_runs, metrics_frame


def _fake_run(path):
    path.mkdir(parents=True)
    (path / "config.json").write_text("{}", encoding="utf-8")
    (path / "params.npz").write_bytes(b"")
    return path


def test_list_runs_finds_nested_checkpoints(tmp_path):
    """config.json과 params.npz가 모두 있는 디렉토리만 실행으로 봅니다."""
    # Setup
    a = _fake_run(tmp_path / "a")
    b = _fake_run(tmp_path / "group" / "b")
    (tmp_path / "partial").mkdir()
    (tmp_path / "partial" / "config.json").write_text("{}", encoding="utf-8")

    # Execute / Verify
    assert list_runs(tmp_path) == [a, b]
    assert list_runs(tmp_path / "missing") == []


def test_history_frame_indexed_by_epoch():
    history = [
        {"epoch": 0, "lr": 1e-3, "horizon": 3, "train_loss": 1.0, "val_mae": 0.9, "skipped_steps": 0, "seconds": 0.1},
        {"epoch": 1, "lr": 1e-3, "horizon": 3, "train_loss": 0.8, "val_mae": 0.7, "skipped_steps": 0, "seconds": 0.1},
    ]
    frame = history_frame(history)
    assert frame.index.tolist() == [0, 1]
    assert frame["val_mae"].tolist() == [0.9, 0.7]


def test_metrics_frame_flattens_splits():
    metrics = {
        "val": {"rows": [{"horizon": 1, "mae": 1.0, "rmse": 1.5, "mape": 0.1, "count": 10}]},
        "test": {"rows": [{"horizon": 1, "mae": 2.0, "rmse": 2.5, "mape": 0.2, "count": 10},
                          {"horizon": 2, "mae": 3.0, "rmse": 3.5, "mape": 0.3, "count": 10}]},
    }
    frame = metrics_frame(metrics)
    assert frame["split"].tolist() == ["val", "test", "test"]
    assert frame["mae"].tolist() == [1.0, 2.0, 3.0]


def test_histogram_frame():
    frame = histogram_frame({"edges": [0.0, 0.5, 1.0], "counts": [2.0, 1.0]})
    assert frame.index.tolist() == ["0", "0.5"]
    assert frame["count"].tolist() == [2.0, 1.0]
    assert histogram_frame({"edges": [], "counts": []}).empty
