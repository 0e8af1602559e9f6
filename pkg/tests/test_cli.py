import json

import numpy as np
import pytest

from src.cli import EXIT_CHECKPOINT, EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from src.config import build_config
from src.entities import DIMENSION_SPATIAL
from src.store.bank import MemoryBank
from src.store.snapshot import snapshot_save


@pytest.fixture
def config_file(tmp_path, tiny_config):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_config.model_dump()), encoding="utf-8")
    return path


def test_train_then_eval(tmp_path, config_file, capsys):
    """train이 지표 JSON을 출력하고, 같은 체크포인트를 eval로 다시 평가합니다."""
    # Setup
    out = tmp_path / "run"
    data = "synthetic:sine?N=3&T=60"

    # Execute
    code = main(["train", "--config", str(config_file), "--data", data, "--out", str(out), "--epochs", "1"])
    trained = json.loads(capsys.readouterr().out)
    eval_code = main(["eval", "--ckpt", str(out), "--split", "test"])
    evaluated = json.loads(capsys.readouterr().out)

    # Verify
    assert code == EXIT_OK and eval_code == EXIT_OK
    assert trained["best_epoch"] == 0
    assert evaluated["rows"] == trained["metrics"]["rows"]


def test_config_error_exit_code(tmp_path):
    code = main(["train", "--config", str(tmp_path / "missing.toml"), "--data", "synthetic:sine",
                 "--out", str(tmp_path / "run")])
    assert code == EXIT_CONFIG


def test_invalid_config_value_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"retrieval_dim": 6, "n_heads": 4}), encoding="utf-8")
    code = main(["train", "--config", str(path), "--data", "synthetic:sine", "--out", str(tmp_path / "run")])
    assert code == EXIT_CONFIG


def test_data_error_exit_code(tmp_path, config_file):
    code = main(["train", "--config", str(config_file), "--data", str(tmp_path / "missing.stb"),
                 "--out", str(tmp_path / "run")])
    assert code == EXIT_DATA


def test_checkpoint_error_exit_code(tmp_path):
    assert main(["eval", "--ckpt", str(tmp_path / "none")]) == EXIT_CHECKPOINT


def test_inspect_store(tmp_path, capsys):
    bank = MemoryBank(DIMENSION_SPATIAL, 2, build_config(index_kind="flat"))
    for epoch in range(3):
        bank.insert(np.array([epoch, 0.0], dtype=np.float32), epoch, momentum=1.0 + epoch)
    path = snapshot_save(bank, tmp_path / "spatial.bank")

    code = main(["inspect-store", "--snapshot", str(path), "--bins", "3"])

    summary = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK
    assert summary["entries"] == 3
    assert summary["momentum_histogram"]["counts"] == [1.0, 1.0, 1.0]


def test_inspect_corrupt_snapshot(tmp_path):
    path = tmp_path / "broken.bank"
    path.write_bytes(b"RASTBANK")
    assert main(["inspect-store", "--snapshot", str(path)]) == EXIT_DATA


def test_bench_store_prints_csv(capsys):
    code = main(["bench-store", "--sizes", "200,400", "--dim", "8", "--clusters", "4", "--queries", "5"])
    lines = capsys.readouterr().out.strip().splitlines()
    assert code == EXIT_OK
    assert lines[0] == "size,k,flat_ms,ivf_ms,ratio,recall"
    assert [line.split(",")[0] for line in lines[1:]] == ["200", "400"]


def test_unknown_output_type_is_rejected(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["train", "--data", "synthetic:sine", "--out", str(tmp_path), "--output-type", "bogus"])
    assert excinfo.value.code == 2
