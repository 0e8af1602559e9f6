import numpy as np
import pytest

from src.config import build_config
from src.encoders import GraphSpec, QueryGenerator, SpatialEncoder, TemporalEncoder
from src.errors import ShapeError
from src.tensor import Tensor


def _window(rng, batch=2, length=4, nodes=3, channels=2):
    return Tensor(rng.standard_normal((batch, length, nodes, channels)))


def test_propagation_is_row_normalized_with_single_self_loop():
    """대각 가중치는 무시되고 자기 루프는 정확히 한 번 더해집니다."""
    graph = GraphSpec(3, np.array([[5.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 0.0, 0.0]]))
    p = graph.propagation
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    np.testing.assert_allclose(p[0], [0.5, 0.5, 0.0])
    np.testing.assert_allclose(p[2], [0.0, 0.0, 1.0])


def test_graph_rejects_bad_adjacency():
    with pytest.raises(ShapeError):
        GraphSpec(3, np.zeros((2, 3)))
    with pytest.raises(ValueError):
        GraphSpec(2, np.array([[0.0, -1.0], [0.0, 0.0]]))


def test_ring_graph_edges():
    graph = GraphSpec.ring(4)
    assert graph.adjacency[0, 1] == 1.0 and graph.adjacency[0, 3] == 1.0
    assert graph.adjacency[0, 2] == 0.0


@pytest.mark.parametrize("mode,kernel,dilation", [("conv2d", 4, 1), ("conv1d", 2, 2)])
def test_temporal_encoder_shape(tiny_config, rng, mode, kernel, dilation):
    config = build_config(tiny_config.model_dump(), temporal_mode=mode, temporal_kernel=kernel,
                          temporal_dilation=dilation)
    encoder = TemporalEncoder(config, rng)
    out = encoder(_window(rng))
    assert out.shape == (2, 3, config.embed_dim)


def test_spatial_encoder_is_permutation_equivariant(tiny_config, rng):
    """노드 순서를 바꾸면 그래프와 함께 출력도 같은 순서로 바뀝니다."""
    # Setup
    encoder = SpatialEncoder(tiny_config, rng)
    graph = GraphSpec.from_edges(3, [(0, 1, 1.0), (1, 2, 2.0), (2, 0, 0.5)])
    x = _window(rng)
    order = [2, 0, 1]

    # Execute
    base = encoder(x, graph).data
    permuted = encoder(Tensor(x.data[:, :, order]), graph.permuted(order)).data

    # Verify
    np.testing.assert_allclose(permuted, base[:, order], atol=1e-12)


def test_spatial_encoder_node_mismatch(tiny_config, rng):
    encoder = SpatialEncoder(tiny_config, rng)
    with pytest.raises(ShapeError):
        encoder(_window(rng, nodes=3), GraphSpec.ring(4))


def test_query_generator_without_residual_layers(tiny_config, rng):
    config = build_config(tiny_config.model_dump(), use_query_generator=False)
    generator = QueryGenerator(config, rng)
    assert generator.ffns == []
    e = Tensor(rng.standard_normal((2, 3, config.embed_dim)))
    assert generator(e, e).shape == (2, 3, config.query_dim)


def test_window_must_be_four_dimensional(tiny_config, rng):
    encoder = TemporalEncoder(tiny_config, rng)
    with pytest.raises(ShapeError):
        encoder(Tensor(np.zeros((2, 4, 3))))
