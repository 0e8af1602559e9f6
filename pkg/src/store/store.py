"""
이중 차원 검색 저장소 모듈

공간(M_sp)·시간(M_tp) 두 뱅크와 그 주변 상태를 묶습니다:
  - 인코딩 → 뱅크 키 공간 사상 (차원이 다르면 고정 시드 무작위 사상)
  - 최근 질의 저장소 (유사도 정리용)와 갱신 표본 저장소 (update_bank 입력용)
  - 배치 끝에 반영할 모멘텀 증가량
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from src.config import RunConfig
from src.entities import DIMENSION_SPATIAL, DIMENSION_TEMPORAL, DIMENSIONS, EvictionReport
from src.errors import ShapeError
from src.store.bank import MemoryBank, prune_and_decay, update_bank, update_momentum
from src.store.snapshot import snapshot_load, snapshot_save

logger = logging.getLogger(__name__)


class Reservoir:
    """시드 고정 reservoir 표본 (Algorithm R)"""

    def __init__(self, capacity: int, dim: int, rng: np.random.Generator):
        self.capacity = capacity
        self.dim = dim
        self.rng = rng
        self._rows = np.zeros((capacity, dim), dtype=np.float32)
        self.size = 0
        self.seen = 0

    def add(self, rows: np.ndarray) -> None:
        for row in np.asarray(rows, dtype=np.float32).reshape(-1, self.dim):
            if self.size < self.capacity:
                self._rows[self.size] = row
                self.size += 1
            else:
                slot = int(self.rng.integers(0, self.seen + 1))
                if slot < self.capacity:
                    self._rows[slot] = row
            self.seen += 1

    def sample(self) -> np.ndarray:
        return self._rows[:self.size].copy()

    def clear(self) -> None:
        self.size = 0
        self.seen = 0

    def __len__(self) -> int:
        return self.size


class RetrievalStore:
    """
    두 메모리 뱅크와 학습 중 수집 상태

    검색 키와 뱅크 벡터는 같은 공간에 있습니다. 인코더 출력 폭이 retrieval_dim과
    같으면 사상은 항등이고, 다르면 시드로 고정된 가우시안 사상을 사용합니다.
    """

    def __init__(self, config: RunConfig, seed: Optional[int] = None):
        self.config = config
        seed = config.seed if seed is None else seed
        dim = config.retrieval_dim
        self.banks: Dict[str, MemoryBank] = {name: MemoryBank(name, dim, config) for name in DIMENSIONS}
        rng = np.random.default_rng(seed + 7919)
        width = config.embed_dim
        if width == dim:
            self._projection = None
        else:
            self._projection = rng.standard_normal((width, dim)) / np.sqrt(width)
        self._queries = {name: Reservoir(config.query_window, dim, rng) for name in DIMENSIONS}
        self._fresh = {name: Reservoir(config.sample_size, dim, rng) for name in DIMENSIONS}
        self._pending: Dict[str, Dict[int, float]] = {name: {} for name in DIMENSIONS}

    @property
    def spatial(self) -> MemoryBank:
        return self.banks[DIMENSION_SPATIAL]

    @property
    def temporal(self) -> MemoryBank:
        return self.banks[DIMENSION_TEMPORAL]

    def is_empty(self) -> bool:
        return any(len(bank) == 0 for bank in self.banks.values())

    # === 키 ===
    def encode_keys(self, encodings: np.ndarray) -> np.ndarray:
        """(..., D_embed) 인코딩 → (R, D_r) float32 검색 키"""
        rows = np.asarray(encodings, dtype=np.float64).reshape(-1, encodings.shape[-1])
        if self._projection is not None:
            if rows.shape[1] != self._projection.shape[0]:
                raise ShapeError("인코딩 폭이 키 사상과 맞지 않습니다", rows.shape, self._projection.shape)
            rows = rows @ self._projection
        elif rows.shape[1] != self.config.retrieval_dim:
            raise ShapeError("인코딩 폭이 retrieval_dim과 다릅니다", rows.shape, (self.config.retrieval_dim,))
        return rows.astype(np.float32)

    # === 학습 중 수집 ===
    def record_queries(self, dimension: str, keys: np.ndarray) -> None:
        self._queries[dimension].add(keys)

    def collect(self, dimension: str, keys: np.ndarray) -> None:
        self._fresh[dimension].add(keys)

    def accumulate_momentum(self, dimension: str, ids: np.ndarray, similarities: np.ndarray) -> None:
        deltas = update_momentum(self.banks[dimension], ids, similarities,
                                 self.config.lambda_div, self.config.tau, apply=False)
        pending = self._pending[dimension]
        for entry_id, delta in deltas.items():
            pending[entry_id] = pending.get(entry_id, 0.0) + delta

    def commit_momentum(self) -> int:
        """보류된 모멘텀 증가량을 반영하고 반영한 엔트리 수를 반환합니다."""
        touched = 0
        for name, pending in self._pending.items():
            if pending:
                self.banks[name].add_momentum(pending)
                touched += len(pending)
                self._pending[name] = {}
        return touched

    # === 에폭 경계 갱신 ===
    def refresh(self, epoch: int) -> List[EvictionReport]:
        """
        수집한 표본으로 두 뱅크를 갱신하고 정리한 뒤 인덱스를 재구성합니다.
        """
        self.commit_momentum()
        reports: List[EvictionReport] = []
        for name, bank in self.banks.items():
            fresh = self._fresh[name].sample()
            if len(fresh):
                update_bank(bank, fresh, epoch)
            queries = self._queries[name].sample()
            reports.append(prune_and_decay(bank, epoch, queries if len(queries) else None))
            bank.build_index()
            self._fresh[name].clear()
            self._queries[name].clear()
        return reports

    def seed_banks(self, encodings: Dict[str, np.ndarray], epoch: int = 0) -> None:
        """인코딩으로 두 뱅크를 직접 채우고 인덱스를 구성합니다."""
        for name, values in encodings.items():
            update_bank(self.banks[name], self.encode_keys(values), epoch)
            self.banks[name].build_index()

    # === 저장 ===
    def save(self, directory: Union[str, Path]) -> None:
        directory = Path(directory)
        for name, bank in self.banks.items():
            snapshot_save(bank, directory / f"{name}.bank")

    @classmethod
    def load(cls, directory: Union[str, Path], config: RunConfig) -> "RetrievalStore":
        store = cls(config)
        directory = Path(directory)
        for name in DIMENSIONS:
            path = directory / f"{name}.bank"
            if path.exists():
                store.banks[name] = snapshot_load(path, config)
        return store
