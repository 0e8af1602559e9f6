import numpy as np
import pytest

from src.config import RunConfig, build_config
from src.data import (
    build_bundle, fit_normalizer, generate_synthetic, load_dataset, read_adjacency_csv, read_stb,
    split_windows, write_stb,
)
from src.encoders import GraphSpec
from src.errors import DataFormatError


@pytest.fixture
def small_config():
    return build_config(input_len=4, output_len=3, input_dim=2)


def test_synthetic_window_counts_and_split():
    """T=1000, L=H=12 이면 윈도우 시작은 977개이고 시간 순서로 70/10/20 분할됩니다."""
    # Execute
    bundle = load_dataset("synthetic:sine?N=4&T=1000", RunConfig())

    # Verify
    assert bundle.num_windows == 1000 - 12 - 12 + 1
    assert bundle.splits == {"train": (0, 684), "val": (684, 782), "test": (782, 977)}
    assert bundle.num_nodes == 4
    assert bundle.series.shape == (1000, 4, 3)


def test_split_windows_covers_every_start():
    splits = split_windows(10, [0.7, 0.1, 0.2])
    assert splits["train"][0] == 0 and splits["test"][1] == 10
    assert splits["train"][1] == splits["val"][0] and splits["val"][1] == splits["test"][0]


def test_gather_shapes_and_alignment(small_config):
    series = generate_synthetic("sine", num_nodes=3, num_steps=60, seed=1)[..., :2]
    bundle = build_bundle(series, GraphSpec.ring(3), small_config)
    batch = bundle.gather(np.array([0, 5]))
    assert batch.x.shape == (2, 4, 3, 2)
    assert batch.y.shape == batch.y_raw.shape == batch.mask.shape == (2, 3, 3, 1)
    np.testing.assert_allclose(batch.y_raw[1, 0], series[5 + 4, :, :1])
    np.testing.assert_allclose(bundle.denormalize(batch.y), batch.y_raw)


def test_batches_shuffle_needs_rng(small_config):
    series = generate_synthetic("sine", num_nodes=2, num_steps=40)[..., :2]
    bundle = build_bundle(series, GraphSpec.ring(2), small_config)
    with pytest.raises(ValueError):
        next(bundle.batches("train", 4, shuffle=True))
    starts = np.concatenate([b.starts for b in bundle.batches("train", 4, np.random.default_rng(0), shuffle=True)])
    assert sorted(starts.tolist()) == bundle.window_starts("train").tolist()


def test_normalizer_excludes_nulls_and_marks_constant(caplog):
    series = np.zeros((4, 2, 2))
    series[..., 0] = [[2.0, 0.0], [4.0, 0.0], [0.0, 6.0], [0.0, 0.0]]
    series[..., 1] = 3.0
    normalizer = fit_normalizer(series, null_val=0.0)
    assert normalizer.mean[0] == pytest.approx(4.0)
    assert normalizer.std[1] == 1.0
    assert normalizer.constant == [False, True]
    assert "분산이 0" in caplog.text


def test_normalizer_keeps_zero_in_auxiliary_channels():
    """0이 결측인 것은 목표 채널뿐이고 보조 채널의 0(자정 등)은 통계에 포함됩니다."""
    # Setup
    series = np.zeros((4, 1, 2))
    series[:, 0, 0] = [2.0, 4.0, 0.0, 6.0]
    series[:, 0, 1] = [0.0, 0.5, 0.0, 0.5]

    # Execute
    normalizer = fit_normalizer(series, null_val=0.0)

    # Verify
    np.testing.assert_allclose(normalizer.mean, [4.0, 0.25])
    np.testing.assert_allclose(normalizer.std, [np.std([2.0, 4.0, 6.0]), 0.25])


def test_normalizer_round_trip(rng):
    values = rng.normal(50, 10, size=(20, 3, 2))
    normalizer = fit_normalizer(values, null_val=0.0)
    np.testing.assert_allclose(normalizer.denormalize(normalizer.normalize(values)), values)
    restored = type(normalizer).from_dict(normalizer.to_dict())
    np.testing.assert_array_equal(restored.mean, normalizer.mean)


def test_statistics_ignore_rows_after_training_windows(small_config):
    """학습 윈도우가 닿지 않는 행을 바꿔도 정규화 통계는 같습니다."""
    # Setup
    series = generate_synthetic("random-walk", num_nodes=3, num_steps=80, seed=2)[..., :2]
    base = build_bundle(series, GraphSpec.ring(3), small_config)
    fit_end = base.splits["train"][1] + small_config.input_len + small_config.output_len - 1
    altered = series.copy()
    altered[fit_end:, :, 0] += 1000.0

    # Execute
    other = build_bundle(altered, GraphSpec.ring(3), small_config)

    # Verify
    np.testing.assert_array_equal(base.normalizer.mean, other.normalizer.mean)
    np.testing.assert_array_equal(base.normalizer.std, other.normalizer.std)


def test_null_targets_are_masked(small_config):
    series = generate_synthetic("sine", num_nodes=2, num_steps=30)[..., :2]
    series[10, 1, 0] = 0.0
    bundle = build_bundle(series, GraphSpec.ring(2), small_config)
    batch = bundle.gather(np.array([6]))
    # 시작 6 → 목표 행 10, 11, 12
    assert not batch.mask[0, 0, 1, 0]
    assert batch.mask[0, 0, 0, 0] and batch.mask[0, 1, 1, 0]


def test_build_bundle_validation(small_config):
    with pytest.raises(DataFormatError):
        build_bundle(np.ones((5, 2, 2)), GraphSpec.ring(2), small_config)
    with pytest.raises(DataFormatError):
        build_bundle(np.ones((30, 2, 3)), GraphSpec.ring(2), small_config)


def test_stb_round_trip(tmp_path, rng):
    series = rng.random((7, 3, 2)).astype(np.float32)
    path = write_stb(tmp_path / "x.stb", series, channels=["value", "time_of_day"])
    loaded, header = read_stb(path)
    np.testing.assert_array_equal(loaded, series)
    assert header["channels"] == ["value", "time_of_day"]


def test_stb_errors(tmp_path):
    path = tmp_path / "bad.stb"
    path.write_bytes(b'{"version": 1}')
    with pytest.raises(DataFormatError):
        read_stb(path)

    path.write_bytes(b'{"version": 1, "T": 2, "N": 1, "D_in": 1}\n' + b"\x00" * 4)
    with pytest.raises(DataFormatError, match="크기 불일치"):
        read_stb(path)

    payload = np.array([1.0, np.nan], dtype="<f4").tobytes()
    path.write_bytes(b'{"version": 1, "T": 2, "N": 1, "D_in": 1}\n' + payload)
    with pytest.raises(DataFormatError) as excinfo:
        read_stb(path)
    assert excinfo.value.offset == 1


def test_adjacency_csv(tmp_path):
    path = tmp_path / "adj.csv"
    path.write_text("# num_nodes=3\nsrc,dst,weight\n0,1,0.5\n1,2,2.0\n", encoding="utf-8")
    graph = read_adjacency_csv(path)
    assert graph.num_nodes == 3
    assert graph.adjacency[0, 1] == 0.5 and graph.adjacency[1, 2] == 2.0

    path.write_text("src,dst,weight\n0,1,0.5\n", encoding="utf-8")
    with pytest.raises(DataFormatError):
        read_adjacency_csv(path)
    path.write_text("# num_nodes=2\nsrc,dst,weight\n0,5,1.0\n", encoding="utf-8")
    with pytest.raises(DataFormatError):
        read_adjacency_csv(path)


def test_load_dataset_from_stb(tmp_path, small_config):
    series = generate_synthetic("sine", num_nodes=3, num_steps=40)[..., :2]
    stb = write_stb(tmp_path / "d.stb", series)
    bundle = load_dataset(str(stb), small_config)
    assert np.all(bundle.graph.adjacency == 0.0)
    assert bundle.source == str(stb)
    with pytest.raises(DataFormatError):
        load_dataset(str(tmp_path / "missing.stb"), small_config)


def test_unknown_synthetic_kind():
    with pytest.raises(DataFormatError):
        load_dataset("synthetic:square?N=2", RunConfig())


@pytest.mark.parametrize("kind", ["sine", "regime-switch", "random-walk"])
def test_synthetic_values_positive_and_seeded(kind):
    a = generate_synthetic(kind, num_nodes=3, num_steps=200, seed=4)
    b = generate_synthetic(kind, num_nodes=3, num_steps=200, seed=4)
    np.testing.assert_array_equal(a, b)
    assert np.all(a[..., 0] > 0)
