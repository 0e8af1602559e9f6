"""
데이터 로딩 모듈

STB 바이너리 시계열, CSV 인접 간선 목록, 합성 데이터 생성기를 읽어
정규화와 윈도우 분할이 끝난 DatasetBundle을 만듭니다.

STB 형식:
  JSON 헤더 한 줄 {version, T, N, D_in, channels, null_val} + "\\n"
  + 행 우선 리틀 엔디안 float32 페이로드 (T·N·D_in개)

인접 CSV 형식:
  # num_nodes=N
  src,dst,weight
  ...
"""

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.config import RunConfig
from src.encoders import GraphSpec
from src.errors import DataFormatError, ShapeError
from src.utils.convert import is_synthetic_spec, parse_data_spec

logger = logging.getLogger(__name__)

STB_VERSION = 1
DEFAULT_CHANNELS = ["value", "time_of_day", "day_of_week"]
STEPS_PER_DAY = 288
SPLITS = ("train", "val", "test")


# === 정규화 ===
@dataclass
class Normalizer:
    """채널별 z-score 정규화 (σ = 0 채널은 σ = 1로 두고 constant로 표시)"""

    mean: np.ndarray
    std: np.ndarray
    constant: List[bool] = field(default_factory=list)

    def normalize(self, values: np.ndarray) -> np.ndarray:
        d = values.shape[-1]
        return (values - self.mean[:d]) / self.std[:d]

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        d = values.shape[-1]
        return values * self.std[:d] + self.mean[:d]

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "constant": list(self.constant)}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "Normalizer":
        return cls(np.asarray(payload["mean"], dtype=np.float64),
                   np.asarray(payload["std"], dtype=np.float64),
                   list(payload.get("constant", [])))


def fit_normalizer(series: np.ndarray, null_val: float, per_channel: bool = True) -> Normalizer:
    """
    채널별 평균/표준편차를 구합니다.

    결측값(null_val) 제외는 목표 채널(0번)에만 적용합니다. 보조 채널의 0은
    자정(time-of-day)이나 요일 0 같은 정상 값입니다.

    Args:
        series: (T, N, D) 학습 구간 원본 값
    """
    channels = series.shape[-1]
    target = series[..., 0]
    columns = [target[target != null_val]] + [series[..., c].reshape(-1) for c in range(1, channels)]
    groups = columns if per_channel else [np.concatenate(columns)]
    means, stds, constant = [], [], []
    for values in groups:
        mu = float(values.mean()) if values.size else 0.0
        sigma = float(values.std()) if values.size else 0.0
        is_constant = not sigma > 0
        means.append(mu)
        stds.append(1.0 if is_constant else sigma)
        constant.append(is_constant)
    if not per_channel:
        means, stds, constant = means * channels, stds * channels, constant * channels
    for c, flag in enumerate(constant):
        if flag:
            logger.warning(f"채널 {c}의 분산이 0입니다. σ=1로 정규화합니다")
    return Normalizer(np.asarray(means), np.asarray(stds), constant)


# === 번들 ===
@dataclass
class WindowBatch:
    x: np.ndarray  # (B, L, N, D_in) 정규화 입력
    y: np.ndarray  # (B, H, N, D_out) 정규화 목표
    y_raw: np.ndarray  # (B, H, N, D_out) 원본 목표
    mask: np.ndarray  # (B, H, N, D_out) 유효 여부
    starts: np.ndarray  # (B,) 윈도우 시작 인덱스

    def __len__(self) -> int:
        return len(self.starts)


@dataclass
class DatasetBundle:
    """
    원본 시계열, 그래프, 정규화 통계, 분할 경계

    splits는 윈도우 시작 인덱스의 반열린 구간 [start, stop) 입니다.
    """

    series: np.ndarray
    graph: GraphSpec
    normalizer: Normalizer
    null_val: float
    input_len: int
    output_len: int
    output_dim: int
    splits: Dict[str, Tuple[int, int]]
    source: str = ""
    channels: List[str] = field(default_factory=lambda: list(DEFAULT_CHANNELS))
    normalized: np.ndarray = field(init=False, repr=False)
    valid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.valid = self.series[..., 0] != self.null_val
        normalized = self.normalizer.normalize(self.series)
        normalized[..., 0] = np.where(self.valid, normalized[..., 0], self.null_val)
        self.normalized = normalized

    @property
    def num_steps(self) -> int:
        return self.series.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.series.shape[1]

    @property
    def num_windows(self) -> int:
        return self.num_steps - self.input_len - self.output_len + 1

    def window_starts(self, split: str) -> np.ndarray:
        if split not in self.splits:
            raise ValueError(f"알 수 없는 분할입니다: {split}")
        start, stop = self.splits[split]
        return np.arange(start, stop)

    def gather(self, starts: np.ndarray) -> WindowBatch:
        starts = np.asarray(starts, dtype=np.int64)
        x_idx = starts[:, None] + np.arange(self.input_len)
        y_idx = starts[:, None] + self.input_len + np.arange(self.output_len)
        d_out = self.output_dim
        mask = np.broadcast_to(self.valid[y_idx][..., None], y_idx.shape + (self.num_nodes, d_out))
        return WindowBatch(
            x=self.normalized[x_idx],
            y=self.normalized[y_idx][..., :d_out],
            y_raw=self.series[y_idx][..., :d_out],
            mask=np.array(mask),
            starts=starts,
        )

    def batches(self, split: str, batch_size: int, rng: Optional[np.random.Generator] = None,
                shuffle: bool = False) -> Iterator[WindowBatch]:
        starts = self.window_starts(split)
        if shuffle:
            if rng is None:
                raise ValueError("shuffle에는 난수 생성기가 필요합니다")
            starts = rng.permutation(starts)
        for i in range(0, len(starts), batch_size):
            yield self.gather(starts[i:i + batch_size])

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return self.normalizer.denormalize(values)


def split_windows(num_windows: int, ratios: List[float]) -> Dict[str, Tuple[int, int]]:
    """시간 순서를 유지하여 윈도우 시작 인덱스를 train/val/test로 나눕니다."""
    n_train = int(round(num_windows * ratios[0]))
    n_val = int(round(num_windows * ratios[1]))
    n_val = min(n_val, num_windows - n_train)
    return {
        "train": (0, n_train),
        "val": (n_train, n_train + n_val),
        "test": (n_train + n_val, num_windows),
    }


def build_bundle(series: np.ndarray, graph: GraphSpec, config: RunConfig, source: str = "",
                 channels: Optional[List[str]] = None) -> DatasetBundle:
    """
    원본 시계열로 번들을 만듭니다. 정규화 통계는 학습 윈도우가 덮는 행에서만 구합니다.

    Raises:
        DataFormatError: 시계열이 너무 짧거나 채널 수가 설정과 다를 때
        ShapeError: 그래프 노드 수가 시계열과 다를 때
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 3:
        raise DataFormatError(f"시계열은 (T, N, D_in) 이어야 합니다: {series.shape}")
    steps, nodes, channels_in = series.shape
    if channels_in != config.input_dim:
        raise DataFormatError(f"채널 수({channels_in})가 input_dim({config.input_dim})과 다릅니다")
    if graph.num_nodes != nodes:
        raise ShapeError("그래프 노드 수가 시계열과 다릅니다", (graph.num_nodes,), series.shape)
    num_windows = steps - config.input_len - config.output_len + 1
    if num_windows < 1:
        raise DataFormatError(f"시계열 길이({steps})가 input_len + output_len보다 짧습니다")

    splits = split_windows(num_windows, config.train_ratio)
    fit_end = splits["train"][1] + config.input_len + config.output_len - 1
    normalizer = fit_normalizer(series[:fit_end], config.null_val, config.norm_each_channel)
    bundle = DatasetBundle(
        series=series,
        graph=graph,
        normalizer=normalizer,
        null_val=config.null_val,
        input_len=config.input_len,
        output_len=config.output_len,
        output_dim=config.output_dim,
        splits=splits,
        source=source,
        channels=list(channels or DEFAULT_CHANNELS[:channels_in]),
    )
    logger.info(
        f"데이터 준비 완료: T={steps}, N={nodes}, windows={num_windows}, "
        f"train/val/test={[s[1] - s[0] for s in splits.values()]}"
    )
    return bundle


# === STB 파일 ===
def write_stb(path: Union[str, Path], series: np.ndarray, channels: Optional[List[str]] = None,
              null_val: float = 0.0) -> Path:
    series = np.asarray(series)
    steps, nodes, channels_in = series.shape
    header = {
        "version": STB_VERSION,
        "T": steps,
        "N": nodes,
        "D_in": channels_in,
        "channels": list(channels or DEFAULT_CHANNELS[:channels_in]),
        "null_val": null_val,
    }
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as f:
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        f.write(np.ascontiguousarray(series, dtype="<f4").tobytes())
    return target


def read_stb(path: Union[str, Path]) -> Tuple[np.ndarray, Dict[str, Any]]:
    """
    STB 파일을 읽습니다.

    Raises:
        DataFormatError: 헤더 오류, 페이로드 크기 불일치, NaN 포함
    """
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise DataFormatError("STB 헤더 줄바꿈이 없습니다", offset=0)
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"STB 헤더를 해석할 수 없습니다: {e}", offset=0) from e
    missing = [key for key in ("version", "T", "N", "D_in") if key not in header]
    if missing:
        raise DataFormatError(f"STB 헤더 필드가 없습니다: {missing}", offset=0)
    if header["version"] != STB_VERSION:
        raise DataFormatError(f"지원하지 않는 STB 버전입니다: {header['version']}", offset=0)

    shape = (int(header["T"]), int(header["N"]), int(header["D_in"]))
    payload = raw[newline + 1:]
    expected = int(np.prod(shape)) * 4
    if len(payload) != expected:
        raise DataFormatError(
            f"STB 페이로드 크기 불일치: {len(payload)} != {expected} bytes",
            offset=newline + 1 + min(len(payload), expected),
        )
    series = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(shape)
    bad = np.flatnonzero(~np.isfinite(series.reshape(-1)))
    if bad.size:
        index = np.unravel_index(int(bad[0]), shape)
        raise DataFormatError(f"STB 페이로드에 NaN/Inf가 있습니다: index={tuple(int(i) for i in index)}",
                              offset=int(bad[0]))
    return series, header


# === 인접 CSV ===
_NUM_NODES = re.compile(r"#\s*num_nodes\s*=\s*(\d+)")


def read_adjacency_csv(path: Union[str, Path]) -> GraphSpec:
    """'# num_nodes=N' 헤더와 src,dst,weight 열을 가진 간선 목록을 읽습니다."""
    source = Path(path)
    with open(source, "r", encoding="utf-8") as f:
        first = f.readline()
    match = _NUM_NODES.match(first.strip())
    if not match:
        raise DataFormatError(f"인접 CSV 첫 줄에 '# num_nodes=N' 헤더가 없습니다: {source}", offset=0)
    num_nodes = int(match.group(1))
    frame = pd.read_csv(source, comment="#")
    missing = {"src", "dst", "weight"} - set(frame.columns)
    if missing:
        raise DataFormatError(f"인접 CSV에 열이 없습니다: {sorted(missing)}")
    if frame[["src", "dst", "weight"]].isna().any().any():
        raise DataFormatError("인접 CSV에 빈 값이 있습니다")
    edges = [(int(s), int(d), float(w)) for s, d, w in frame[["src", "dst", "weight"]].itertuples(index=False)]
    try:
        return GraphSpec.from_edges(num_nodes, edges)
    except (ShapeError, ValueError) as e:
        raise DataFormatError(f"인접 CSV가 올바르지 않습니다: {e}") from e


# === 합성 데이터 ===
def _calendar(steps: int, nodes: int, offset: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    t = np.arange(offset, offset + steps)
    tod = (t % STEPS_PER_DAY) / STEPS_PER_DAY
    dow = ((t // STEPS_PER_DAY) % 7) / 7.0
    return np.repeat(tod[:, None], nodes, axis=1), np.repeat(dow[:, None], nodes, axis=1)


def _sine(rng: np.random.Generator, steps: int, nodes: int, period: float, noise: float) -> np.ndarray:
    t = np.arange(steps)[:, None]
    phase = rng.uniform(0, 2 * np.pi, nodes)
    amplitude = rng.uniform(10.0, 20.0, nodes)
    return 60.0 + amplitude * np.sin(2 * np.pi * t / period + phase) + noise * rng.standard_normal((steps, nodes))


def _regime_switch(rng: np.random.Generator, steps: int, nodes: int, period: float, noise: float) -> np.ndarray:
    """노드마다 임의 시점에 두 동역학(사인파/사각파)을 번갈아 사용합니다."""
    t = np.arange(steps)
    values = np.empty((steps, nodes))
    for n in range(nodes):
        phase = rng.uniform(0, 2 * np.pi)
        smooth = 60.0 + 20.0 * np.sin(2 * np.pi * t / period + phase)
        square = 40.0 + 15.0 * np.sign(np.sin(2 * np.pi * t / (1.5 * period) + phase))
        regime = np.zeros(steps, dtype=bool)
        cursor, current = 0, bool(rng.integers(0, 2))
        while cursor < steps:
            length = int(rng.integers(40, 160))
            regime[cursor:cursor + length] = current
            cursor += length
            current = not current
        values[:, n] = np.where(regime, square, smooth)
    return values + noise * rng.standard_normal((steps, nodes))


def _random_walk(rng: np.random.Generator, steps: int, nodes: int, noise: float) -> np.ndarray:
    walk = 60.0 + np.cumsum(rng.standard_normal((steps, nodes)) * max(noise, 1e-3) * 2, axis=0)
    return np.maximum(walk, 5.0)


SYNTHETIC_KINDS = ("sine", "regime-switch", "random-walk")


def generate_synthetic(kind: str, num_nodes: int = 4, num_steps: int = 1000, seed: int = 0,
                       period: float = 48.0, noise: float = 0.5) -> np.ndarray:
    """
    합성 시계열 (T, N, 3): 값, time-of-day, day-of-week

    값은 항상 양수라 null_val=0과 겹치지 않습니다.
    """
    rng = np.random.default_rng(seed)
    if kind == "sine":
        values = _sine(rng, num_steps, num_nodes, period, noise)
    elif kind == "regime-switch":
        values = _regime_switch(rng, num_steps, num_nodes, period / 2, noise)
    elif kind == "random-walk":
        values = _random_walk(rng, num_steps, num_nodes, noise)
    else:
        raise DataFormatError(f"알 수 없는 합성 데이터 종류입니다: {kind} (지원: {SYNTHETIC_KINDS})")
    values = np.maximum(values, 1.0)
    tod, dow = _calendar(num_steps, num_nodes)
    return np.stack([values, tod, dow], axis=-1)


def load_dataset(source: str, config: RunConfig, adjacency: Optional[Union[str, Path]] = None) -> DatasetBundle:
    """
    STB 파일 또는 합성 데이터 지정 문자열로 번들을 만듭니다.

    Args:
        source: STB 경로 또는 "synthetic:<kind>?N=..&T=..&seed=.."
        adjacency: 인접 CSV 경로 (STB에서만 사용, 없으면 고립 노드 그래프)
    """
    if is_synthetic_spec(source):
        try:
            kind, params = parse_data_spec(source)
        except ValueError as e:
            raise DataFormatError(f"합성 데이터 지정을 해석할 수 없습니다: {e}") from e
        series = generate_synthetic(
            kind,
            num_nodes=int(params.get("N", 4)),
            num_steps=int(params.get("T", 1000)),
            seed=int(params.get("seed", config.seed)),
            period=float(params.get("period", 48.0)),
            noise=float(params.get("noise", 0.5)),
        )
        series = series[..., :config.input_dim]
        graph = GraphSpec.ring(series.shape[1])
        return build_bundle(series, graph, config, source=source)

    path = Path(source)
    if not path.exists():
        raise DataFormatError(f"데이터 파일이 없습니다: {path}")
    series, header = read_stb(path)
    if float(header.get("null_val", config.null_val)) != config.null_val:
        logger.warning(f"파일의 null_val({header.get('null_val')})이 설정({config.null_val})과 다릅니다. 설정 값을 사용합니다")
    if adjacency is not None:
        graph = read_adjacency_csv(adjacency)
    else:
        logger.warning("인접 행렬이 지정되지 않아 고립 노드 그래프를 사용합니다")
        graph = GraphSpec.isolated(series.shape[1])
    return build_bundle(series, graph, config, source=str(path), channels=header.get("channels"))
