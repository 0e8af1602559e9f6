import numpy as np
import pytest

from src.encoders import QueryBatch
from src.entities import DIMENSION_SPATIAL, DIMENSION_TEMPORAL
from src.errors import ConfigError
from src.retriever import CrossFusion, MultiHeadAttention, RetrievalResult, retrieve
from src.store.bank import flat_topk
from src.store.store import RetrievalStore
from src.tensor import Tensor


def _query(config, rng, batch=2, nodes=3):
    width = config.embed_dim
    return QueryBatch(
        e_tp=Tensor(rng.normal(0, 3, (batch, nodes, width))),
        e_sp=Tensor(rng.normal(0, 3, (batch, nodes, width))),
        q_st=Tensor(rng.standard_normal((batch, nodes, config.query_dim))),
    )


def _store(config, rng, rows):
    store = RetrievalStore(config)
    store.seed_banks({
        DIMENSION_SPATIAL: rng.normal(0, 3, (rows, config.embed_dim)),
        DIMENSION_TEMPORAL: rng.normal(0, 3, (rows, config.embed_dim)),
    })
    return store


def test_attention_rows_sum_to_one_with_mask(rng):
    # Setup
    attn = MultiHeadAttention(6, 4, 4, 2, 0.0, rng)
    q = Tensor(rng.standard_normal((5, 1, 6)))
    kv = Tensor(rng.standard_normal((5, 3, 4)))
    mask = np.ones((5, 3), dtype=bool)
    mask[:, 2] = False

    # Execute
    out = attn(q, kv, kv, mask)

    # Verify
    assert out.shape == (5, 1, 4)
    np.testing.assert_allclose(attn.last_weights.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(attn.last_weights[..., 2] == 0.0)


def test_zero_query_gives_uniform_weights(rng):
    """질의가 0이면 가중치가 균등하고 출력은 값들의 평균을 사상한 것입니다."""
    attn = MultiHeadAttention(4, 4, 4, 2, 0.0, rng)
    kv = Tensor(rng.standard_normal((1, 4, 4)))
    out = attn(Tensor(np.zeros((1, 1, 4))), kv, kv)

    np.testing.assert_allclose(attn.last_weights, 0.25)
    v = kv.data[0] @ attn.v_proj.weight.data + attn.v_proj.bias.data
    expected = v.mean(axis=0) @ attn.out_proj.weight.data + attn.out_proj.bias.data
    np.testing.assert_allclose(out.data[0, 0], expected, atol=1e-12)


def test_attention_rejects_indivisible_heads(rng):
    with pytest.raises(ConfigError):
        MultiHeadAttention(4, 4, 6, 4, 0.0, rng)


def test_retrieve_matches_brute_force(tiny_config, rng):
    # Setup
    store = _store(tiny_config, rng, 64)
    query = _query(tiny_config, rng)

    # Execute
    spatial, temporal = retrieve(query, store, tiny_config.top_k)

    # Verify
    for result, encoding in ((spatial, query.e_sp), (temporal, query.e_tp)):
        keys = store.encode_keys(encoding.data)
        expected_ids, _ = flat_topk(store.banks[result.dimension], keys, tiny_config.top_k)
        np.testing.assert_array_equal(result.ids, expected_ids)
        assert result.vectors.shape == (6, tiny_config.top_k, tiny_config.retrieval_dim)
        assert result.mask.all()


def test_small_bank_pads_and_masks(tiny_config, rng):
    store = _store(tiny_config, rng, 2)
    spatial, _ = retrieve(_query(tiny_config, rng), store, tiny_config.top_k)
    assert spatial.mask.sum(axis=1).tolist() == [2] * 6
    assert np.all(spatial.ids[:, 2] == -1)


def test_empty_bank_falls_back_to_query_only(tiny_config, rng):
    # Setup
    store = RetrievalStore(tiny_config)
    query = _query(tiny_config, rng)
    fusion = CrossFusion(tiny_config, rng)

    # Execute
    spatial, temporal = retrieve(query, store, tiny_config.top_k)
    context = fusion(query.q_st, spatial, temporal)

    # Verify
    assert spatial.query_only and temporal.query_only
    assert np.all(context.r_f.data == 0.0)
    np.testing.assert_array_equal(context.h_f.data[..., :tiny_config.query_dim], query.q_st.data)
    assert context.h_f.shape == (2, 3, tiny_config.fused_dim)


def test_training_retrieval_defers_momentum_and_collects(tiny_config, rng):
    store = _store(tiny_config, rng, 8)
    before = store.spatial.momenta().copy()

    retrieve(_query(tiny_config, rng), store, tiny_config.top_k, training=True, collect=True)

    np.testing.assert_array_equal(store.spatial.momenta(), before)
    assert len(store._queries[DIMENSION_SPATIAL]) == 6
    assert len(store._fresh[DIMENSION_TEMPORAL]) == 6
    assert store.commit_momentum() > 0
    assert store.spatial.momenta().sum() == pytest.approx(before.sum() + 6.0)


def test_eval_retrieval_leaves_store_untouched(tiny_config, rng):
    store = _store(tiny_config, rng, 8)
    retrieve(_query(tiny_config, rng), store, tiny_config.top_k)
    assert store.commit_momentum() == 0
    assert len(store._queries[DIMENSION_SPATIAL]) == 0


def test_cross_fusion_shapes(tiny_config, rng):
    store = _store(tiny_config, rng, 16)
    query = _query(tiny_config, rng)
    spatial, temporal = retrieve(query, store, tiny_config.top_k)
    context = CrossFusion(tiny_config, rng)(query.q_st, spatial, temporal)
    assert context.r_s.shape == context.r_t.shape == context.r_f.shape == (2, 3, tiny_config.retrieval_dim)
    assert context.h_f.shape == (2, 3, tiny_config.fused_dim)


def test_empty_result_is_query_only():
    assert RetrievalResult.empty(DIMENSION_SPATIAL, 4, 3, 2).query_only
