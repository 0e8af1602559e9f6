import numpy as np
import pytest

from src import ops
from src.config import build_config
from src.encoders import GraphSpec
from src.entities import DIMENSION_SPATIAL, DIMENSION_TEMPORAL, OUTPUT_TYPES
from src.model import RASTModel
from src.store.store import RetrievalStore
from src.tensor import Tensor
from src.utils.gradcheck import check_gradients


def _window(config, rng, batch=2, nodes=3):
    return rng.standard_normal((batch, config.input_len, nodes, config.input_dim))


def _store(model, config, x, rows):
    """모델 인코딩 일부로 두 뱅크를 채웁니다."""
    store = RetrievalStore(config)
    model.eval()
    query = model.encode(Tensor(x))
    model.train()
    store.seed_banks({
        DIMENSION_SPATIAL: query.e_sp.data.reshape(-1, config.embed_dim)[:rows],
        DIMENSION_TEMPORAL: query.e_tp.data.reshape(-1, config.embed_dim)[:rows],
    })
    return store


@pytest.mark.parametrize("output_type", OUTPUT_TYPES)
def test_forward_shape_for_every_output_type(tiny_config, rng, output_type):
    config = build_config(tiny_config.model_dump(), output_type=output_type)
    model = RASTModel(config, GraphSpec.ring(3), rng=rng)
    x = _window(config, rng)
    store = _store(model, config, x, 6)
    y = model(x, store)
    assert y.shape == (2, config.output_len, 3, config.output_dim)
    assert np.all(np.isfinite(y.data))


def test_query_only_ignores_store(tiny_config, rng):
    config = build_config(tiny_config.model_dump(), output_type="query_only")
    model = RASTModel(config, GraphSpec.ring(3), rng=rng).eval()
    x = _window(config, rng)
    store = _store(model, config, x, 6)
    with_store = model(x, store).data
    without = model(x, None).data
    np.testing.assert_array_equal(with_store, without)
    assert np.all(model.last_context.r_f.data == 0.0)


def test_full_model_falls_back_when_bank_empty(tiny_config, rng):
    model = RASTModel(tiny_config, GraphSpec.ring(3), rng=rng).eval()
    x = _window(tiny_config, rng)
    y = model(x, RetrievalStore(tiny_config))
    assert np.all(model.last_context.r_f.data == 0.0)
    np.testing.assert_array_equal(y.data, model(x, None).data)


def test_retrieval_changes_prediction(tiny_config, rng):
    model = RASTModel(tiny_config, GraphSpec.ring(3), rng=rng).eval()
    x = _window(tiny_config, rng)
    store = _store(model, tiny_config, x, 6)
    assert not np.allclose(model(x, store).data, model(x, None).data)


def test_same_seed_same_parameters(tiny_config):
    a = RASTModel(tiny_config, GraphSpec.ring(3))
    b = RASTModel(tiny_config, GraphSpec.ring(3))
    for (_, p), (_, q) in zip(a.named_parameters(), b.named_parameters()):
        np.testing.assert_array_equal(p.data, q.data)


def test_disabled_encoders_use_zero_embeddings(tiny_config, rng):
    config = build_config(tiny_config.model_dump(), use_temporal_encoder=False, use_spatial_encoder=False)
    model = RASTModel(config, GraphSpec.ring(3), rng=rng)
    query = model.encode(Tensor(_window(config, rng)))
    assert np.all(query.e_tp.data == 0.0) and np.all(query.e_sp.data == 0.0)


def test_end_to_end_gradients(tiny_config, rng):
    """
    검색을 포함한 전체 순전파의 모든 파라미터 기울기가 중앙 차분과 일치합니다.

    뱅크 엔트리 수를 top_k 이하로 두어 흔들어도 검색 집합이 바뀌지 않게 합니다.
    """
    # Setup
    model = RASTModel(tiny_config, GraphSpec.ring(3), rng=rng)
    x = _window(tiny_config, rng)
    store = _store(model, tiny_config, x, tiny_config.top_k - 1)
    model.eval()
    weights = rng.standard_normal((2, tiny_config.output_len, 3, tiny_config.output_dim))

    def loss():
        return ops.sum(ops.mul(model(x, store), weights))

    # Execute
    errors = check_gradients(loss, model.parameters(), max_entries=6)

    # Verify
    assert max(errors.values()) < 1e-4, errors
    assert all(p.grad is not None for p in model.parameters())
