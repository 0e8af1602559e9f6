import numpy as np
import pytest

from src.checkpoint import CheckpointManager, is_checkpoint
from src.encoders import GraphSpec
from src.entities import DIMENSION_SPATIAL, DIMENSION_TEMPORAL
from src.errors import CheckpointError
from src.model import RASTModel
from src.store.store import RetrievalStore


def test_save_json_skips_unchanged_content(tmp_path):
    """내용이 같으면 파일 쓰기를 건너뜁니다."""
    manager = CheckpointManager(tmp_path)
    assert manager.save_json("history", [{"epoch": 0}])
    assert not manager.save_json("history", [{"epoch": 0}])
    assert manager.save_json("history", [{"epoch": 0}, {"epoch": 1}])
    assert manager.load_history() == [{"epoch": 0}, {"epoch": 1}]


def test_save_json_rewrites_deleted_file(tmp_path):
    manager = CheckpointManager(tmp_path)
    manager.save_json("events", [])
    (tmp_path / "events.json").unlink()
    assert manager.save_json("events", [])


def test_params_round_trip_and_skip(tmp_path, tiny_config, rng):
    # Setup
    manager = CheckpointManager(tmp_path)
    model = RASTModel(tiny_config, GraphSpec.ring(3), rng=rng)

    # Execute
    first = manager.save_params(model)
    second = manager.save_params(model)
    model.predictor.head.proj.bias.data += 1.0
    third = manager.save_params(model)

    # Verify
    assert (first, second, third) == (True, False, True)
    params = manager.load_params()
    np.testing.assert_array_equal(params["predictor.head.proj.bias"], model.predictor.head.proj.bias.data)
    other = RASTModel(tiny_config, GraphSpec.ring(3), rng=np.random.default_rng(9))
    other.load_state_dict(params)
    x = rng.standard_normal((1, 4, 3, 2))
    np.testing.assert_array_equal(other.eval()(x).data, model.eval()(x).data)


def test_load_full_checkpoint(tmp_path, tiny_config, tiny_dataset, rng):
    manager = CheckpointManager(tmp_path)
    model = RASTModel(tiny_config, tiny_dataset.graph, rng=rng)
    store = RetrievalStore(tiny_config)
    store.seed_banks({
        DIMENSION_SPATIAL: rng.normal(0, 3, (5, tiny_config.embed_dim)),
        DIMENSION_TEMPORAL: rng.normal(0, 3, (5, tiny_config.embed_dim)),
    })
    manager.save_config(tiny_config)
    manager.save_normalizer(tiny_dataset.normalizer)
    manager.save_best(model, store, {"source": tiny_dataset.source, "best_epoch": 0})

    loaded = CheckpointManager(tmp_path).load()

    assert loaded.config == tiny_config
    assert loaded.run_info["best_epoch"] == 0
    np.testing.assert_array_equal(loaded.normalizer.mean, tiny_dataset.normalizer.mean)
    assert len(loaded.store.spatial) == 5
    assert is_checkpoint(tmp_path)


def test_load_errors(tmp_path):
    manager = CheckpointManager(tmp_path)
    with pytest.raises(CheckpointError):
        manager.load_config()
    (tmp_path / "config.json").write_text('{"query_dim": 7}', encoding="utf-8")
    with pytest.raises(CheckpointError):
        manager.load_config()
    (tmp_path / "config.json").write_text("{broken", encoding="utf-8")
    with pytest.raises(CheckpointError):
        manager.load_config()
    with pytest.raises(CheckpointError):
        manager.load_params()
    assert not is_checkpoint(tmp_path)
