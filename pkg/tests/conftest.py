import numpy as np
import pytest

from src.config import build_config
from src.data import build_bundle, generate_synthetic
from src.encoders import GraphSpec
from src.entities import TrainState


@pytest.fixture
def tiny_config():
    """배정밀도 소형 설정 (N=3, L=4 기울기 검사와 빠른 학습용)"""
    return build_config(
        seed=0,
        dtype="float64",
        input_len=4,
        output_len=3,
        input_dim=2,
        output_dim=1,
        query_dim=8,
        retrieval_dim=4,
        n_heads=2,
        generator_layers=1,
        mlp_ratio=2.0,
        dropout=0.0,
        attn_dropout=0.0,
        top_k=3,
        batch_size=8,
        max_epochs=2,
        index_kind="flat",
        bank_capacity=64,
        sample_size=32,
        query_window=64,
        cache_size=16,
        use_curriculum=False,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_dataset(tiny_config):
    """노드 3개, 60 스텝 사인파 (윈도우 54개: train 38 / val 5 / test 11)"""
    series = generate_synthetic("sine", num_nodes=3, num_steps=60, seed=0)[..., :tiny_config.input_dim]
    return build_bundle(series, GraphSpec.ring(3), tiny_config, source="synthetic:sine?N=3&T=60&seed=0")


def make_state(**overrides) -> TrainState:
    state: TrainState = {
        "epoch": 0,
        "max_epochs": 10,
        "node_result": "",
        "history": [],
        "best_val_mae": None,
        "best_epoch": None,
        "bad_epochs": 0,
        "nonfinite_streak": 0,
        "store_rebuilds": 0,
        "error": None,
    }
    state.update(overrides)
    return state
