"""
메모리 뱅크 모듈

한 차원(spatial / temporal)의 패턴 엔트리를 보관하고, 인덱스와 LRU 캐시를 관리합니다.

정책:
  1. 모멘텀: ω' = ω + softmax((s + λ·H(v)) / τ), softmax 범위는 한 질의의 k개 결과
  2. 갱신: 가장 가까운 기존 엔트리와 exp(s) ≥ blend_threshold 이면 EMA 블렌딩, 아니면 새로 삽입
  3. 정리: 오래된 엔트리(decay) → 최근 질의와 무관한 엔트리(similarity) → 용량 초과(capacity)
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.config import RunConfig
from src.entities import (
    EVICT_CAPACITY, EVICT_DECAY, EVICT_SIMILARITY, INDEX_FLAT,
    EvictionRecord, EvictionReport, StoreSummary,
)
from src.errors import ConfigError, ShapeError
from src.store.cache import LRUCache, query_key
from src.store.index import (
    IndexState, approx_similarity, build_index, flat_search, ivf_search, pairwise_similarity,
)

logger = logging.getLogger(__name__)

BLEND_RATE_MIN = 0.05
BLEND_RATE_MAX = 0.95


# === 엔트리 ===
def entropy(v: np.ndarray) -> float:
    """softmax(v) 분포의 자연로그 엔트로피 (0 ≤ H ≤ ln D)"""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size <= 1:
        return 0.0
    z = v - v.max()
    p = np.exp(z)
    p /= p.sum()
    nz = p[p > 0]
    return float(min(max(-np.sum(nz * np.log(nz)), 0.0), np.log(v.size)))


@dataclass
class PatternEntry:
    """저장된 패턴 벡터와 메타데이터"""

    vector: np.ndarray  # float32 (D_r,)
    momentum: float = 1.0
    epoch_stamp: int = 0
    insert_count: int = 1
    mean: float = 0.0
    variance: float = 0.0
    entropy: float = 0.0

    @classmethod
    def create(cls, vector: np.ndarray, epoch: int, momentum: float = 1.0, insert_count: int = 1) -> "PatternEntry":
        entry = cls(np.array(vector, dtype=np.float32, copy=True), float(momentum), int(epoch), int(insert_count))
        entry.refresh_stats()
        return entry

    def refresh_stats(self) -> None:
        values = self.vector.astype(np.float64)
        self.mean = float(values.mean())
        self.variance = float(values.var())
        self.entropy = entropy(values)


def blend_rate(similarity_value: float) -> float:
    """매칭 유사도로 정한 EMA 비율 sigmoid(s), [0.05, 0.95]로 제한"""
    rate = 1.0 / (1.0 + np.exp(-similarity_value))
    return float(np.clip(rate, BLEND_RATE_MIN, BLEND_RATE_MAX))


def blend_entry(entry: PatternEntry, fresh: np.ndarray, rate: float, epoch: int) -> None:
    """v ← (1 - ω)·v + ω·fresh, 타임스탬프를 갱신합니다."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"블렌딩 비율은 [0, 1] 범위여야 합니다: {rate}")
    mixed = (1.0 - rate) * entry.vector.astype(np.float64) + rate * np.asarray(fresh, dtype=np.float64)
    entry.vector = mixed.astype(np.float32)
    entry.epoch_stamp = int(epoch)
    entry.insert_count += 1
    entry.refresh_stats()


def momentum_shares(similarities: np.ndarray, entropies: np.ndarray, lambda_div: float, tau: float) -> np.ndarray:
    """
    한 질의의 결과들에 대한 모멘텀 증가량 (합 1)

    Raises:
        ConfigError: tau ≤ 0
    """
    if tau <= 0:
        raise ConfigError(f"tau는 0보다 커야 합니다: {tau}")
    logits = (np.asarray(similarities, dtype=np.float64) + lambda_div * np.asarray(entropies, dtype=np.float64)) / tau
    logits = logits - logits.max()
    weights = np.exp(logits)
    return weights / weights.sum()


@dataclass
class SearchResult:
    """단일 질의의 top-k 결과 (유사도 내림차순)"""

    ids: np.ndarray
    vectors: np.ndarray
    similarities: np.ndarray
    momenta: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


# === 뱅크 ===
class MemoryBank:
    """
    한 차원의 패턴 저장소

    엔트리 id는 삽입 순서대로 증가합니다. 엔트리 집합이나 벡터가 바뀌거나
    인덱스가 재구성되면 generation이 증가하고 캐시가 비워집니다.
    모멘텀만 바뀌는 경우에는 캐시를 유지합니다 (캐시에는 id와 유사도만 저장).
    """

    def __init__(self, dimension: str, dim: int, config: Optional[RunConfig] = None):
        if dim < 1:
            raise ShapeError(f"뱅크 차원은 1 이상이어야 합니다: {dim}")
        self.dimension = dimension
        self.dim = dim
        self.config = config or RunConfig()
        self.capacity = self.config.bank_capacity
        self.generation = 0
        self.index: Optional[IndexState] = None
        self.cache: LRUCache[Tuple[np.ndarray, np.ndarray]] = LRUCache(self.config.cache_size)
        self._entries: Dict[int, PatternEntry] = {}
        self._next_id = 0
        self._matrix: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self._stale = True

    # === 조회 ===
    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, entry_id: int) -> bool:
        return entry_id in self._entries

    def get(self, entry_id: int) -> PatternEntry:
        return self._entries[entry_id]

    def ids(self) -> np.ndarray:
        return self._arrays()[0]

    def vectors(self) -> np.ndarray:
        return self._arrays()[1]

    def entries(self) -> List[Tuple[int, PatternEntry]]:
        return [(i, self._entries[i]) for i in sorted(self._entries)]

    def momenta(self) -> np.ndarray:
        return np.array([self._entries[i].momentum for i in self.ids()], dtype=np.float64)

    def stamps(self) -> np.ndarray:
        return np.array([self._entries[i].epoch_stamp for i in self.ids()], dtype=np.int64)

    def _arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._matrix is None:
            ids = np.array(sorted(self._entries), dtype=np.int64)
            if len(ids):
                vectors = np.stack([self._entries[i].vector for i in ids])
            else:
                vectors = np.zeros((0, self.dim), dtype=np.float32)
            self._matrix = (ids, vectors)
        return self._matrix

    # === 변경 ===
    def _mutated(self) -> None:
        self.generation += 1
        self.cache.clear()
        self._matrix = None
        self._stale = True

    def insert(self, vector: np.ndarray, epoch: int, momentum: float = 1.0) -> int:
        vector = np.asarray(vector)
        if vector.shape != (self.dim,):
            raise ShapeError(f"{self.dimension} 뱅크 벡터 차원이 다릅니다", vector.shape, (self.dim,))
        entry_id = self._next_id
        self._next_id += 1
        self._entries[entry_id] = PatternEntry.create(vector, epoch, momentum)
        self._mutated()
        return entry_id

    def restore(self, entry: PatternEntry) -> int:
        """스냅샷에서 읽은 엔트리를 그대로 추가합니다."""
        entry_id = self._next_id
        self._next_id += 1
        self._entries[entry_id] = entry
        self._mutated()
        return entry_id

    def blend(self, entry_id: int, fresh: np.ndarray, rate: float, epoch: int) -> None:
        blend_entry(self._entries[entry_id], fresh, rate, epoch)
        self._mutated()

    def remove(self, entry_ids: Iterable[int]) -> None:
        removed = False
        for entry_id in entry_ids:
            if self._entries.pop(int(entry_id), None) is not None:
                removed = True
        if removed:
            self._mutated()

    def add_momentum(self, deltas: Dict[int, float]) -> None:
        for entry_id, delta in deltas.items():
            entry = self._entries.get(entry_id)
            if entry is not None:
                entry.momentum += float(delta)

    # === 인덱스 ===
    def build_index(self, kind: Optional[str] = None, n_list: Optional[int] = None,
                    seed: Optional[int] = None) -> IndexState:
        """
        현재 엔트리로 인덱스를 재구성합니다. 세대가 증가하고 캐시가 비워집니다.
        """
        kind = kind or self.config.index_kind
        ids, vectors = self._arrays()
        n_list = n_list or self.config.resolved_n_list(len(ids))
        seed = self.config.seed if seed is None else seed
        self.generation += 1
        self.cache.clear()
        if len(ids) == 0:
            kind = INDEX_FLAT
        self.index = build_index(ids, vectors, kind, n_list, seed, self.config.ivf_iters, self.generation)
        self._stale = False
        logger.debug(f"{self.dimension} 뱅크 인덱스 재구성: kind={self.index.kind}, entries={len(ids)}, generation={self.generation}")
        return self.index

    def _current_index(self) -> IndexState:
        if self.index is None or self._stale:
            ids, vectors = self._arrays()
            return IndexState(INDEX_FLAT, self.generation, ids, vectors)
        return self.index

    # === 검색 ===
    def search_rows(self, queries: np.ndarray, k: int, n_probe: Optional[int] = None,
                    use_cache: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """
        여러 질의 행의 top-k

        Returns:
            (ids, sims): 각 (R, k). 엔트리가 부족한 자리는 id -1, 유사도 -inf
        """
        if k < 1:
            raise ValueError(f"k는 1 이상이어야 합니다: {k}")
        queries = np.asarray(queries, dtype=np.float32)
        if queries.ndim != 2 or queries.shape[1] != self.dim:
            raise ShapeError(f"{self.dimension} 뱅크 질의 차원이 다릅니다", queries.shape, (self.dim,))
        out_ids = np.full((len(queries), k), -1, dtype=np.int64)
        out_sims = np.full((len(queries), k), -np.inf)
        if not self._entries:
            return out_ids, out_sims

        index = self._current_index()
        if n_probe is None and index.n_list:
            n_probe = self.config.resolved_n_probe(index.n_list)

        pending: List[int] = []
        keys = []
        for r, query in enumerate(queries):
            key = query_key(query, k, n_probe, self.generation) if use_cache else None
            keys.append(key)
            hit = self.cache.get(key) if use_cache else None
            if hit is None:
                pending.append(r)
            else:
                out_ids[r, :len(hit[0])], out_sims[r, :len(hit[1])] = hit
        if pending:
            ids, sims = ivf_search(index, queries[pending], k, n_probe or 1)
            for row, found_ids, found_sims in zip(pending, ids, sims):
                valid = found_ids >= 0
                out_ids[row, :valid.sum()] = found_ids[valid]
                out_sims[row, :valid.sum()] = found_sims[valid]
                if use_cache:
                    self.cache.put(keys[row], (found_ids[valid].copy(), found_sims[valid].copy()))
        return out_ids, out_sims

    def search_topk(self, query: np.ndarray, k: int, n_probe: Optional[int] = None) -> SearchResult:
        """단일 질의 top-k. 빈 뱅크는 빈 결과를 반환합니다."""
        ids, sims = self.search_rows(np.asarray(query).reshape(1, -1), k, n_probe)
        valid = ids[0] >= 0
        ids, sims = ids[0][valid], sims[0][valid]
        vectors = np.stack([self._entries[i].vector for i in ids]) if len(ids) else np.zeros((0, self.dim), np.float32)
        momenta = np.array([self._entries[i].momentum for i in ids], dtype=np.float64)
        return SearchResult(ids, vectors, sims, momenta)

    def gather(self, ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """id 배열(-1은 패딩)에 해당하는 벡터와 모멘텀을 모읍니다."""
        flat = ids.reshape(-1)
        vectors = np.zeros((flat.size, self.dim), dtype=np.float32)
        momenta = np.zeros(flat.size, dtype=np.float64)
        for n, entry_id in enumerate(flat):
            if entry_id >= 0:
                entry = self._entries[int(entry_id)]
                vectors[n] = entry.vector
                momenta[n] = entry.momentum
        return vectors.reshape(ids.shape + (self.dim,)), momenta.reshape(ids.shape)

    # === 요약 ===
    def summary(self, bins: int = 10) -> StoreSummary:
        momenta = self.momenta()
        stamps = self.stamps()
        ages = (stamps.max() - stamps) if len(stamps) else stamps
        return {
            "dimension": self.dimension,
            "entries": len(self),
            "dim": self.dim,
            "momentum_histogram": _histogram(momenta, bins),
            "age_histogram": _histogram(ages, bins),
        }


def _histogram(values: np.ndarray, bins: int) -> Dict[str, List[float]]:
    if len(values) == 0:
        return {"edges": [], "counts": []}
    counts, edges = np.histogram(values, bins=bins)
    return {"edges": [float(e) for e in edges], "counts": [float(c) for c in counts]}


# === 정책 ===
def update_momentum(bank: MemoryBank, ids: np.ndarray, similarities: np.ndarray,
                    lambda_div: float, tau: float, apply: bool = True) -> Dict[int, float]:
    """
    검색 결과로 모멘텀을 올립니다. 질의마다 증가량의 합은 1입니다.

    Args:
        ids: (R, k) 또는 (k,) 결과 id, -1은 패딩
        similarities: ids와 같은 모양의 유사도
        apply: False면 증가량만 계산합니다 (배치 끝에 한꺼번에 반영할 때)

    Returns:
        엔트리 id별 증가량
    """
    ids = np.atleast_2d(ids)
    similarities = np.atleast_2d(similarities)
    deltas: Dict[int, float] = {}
    for row_ids, row_sims in zip(ids, similarities):
        valid = row_ids >= 0
        if not valid.any():
            continue
        row_ids = row_ids[valid]
        entropies = np.array([bank.get(int(i)).entropy for i in row_ids])
        shares = momentum_shares(row_sims[valid], entropies, lambda_div, tau)
        for entry_id, share in zip(row_ids, shares):
            deltas[int(entry_id)] = deltas.get(int(entry_id), 0.0) + float(share)
    if apply:
        bank.add_momentum(deltas)
    return deltas


def update_bank(bank: MemoryBank, fresh: np.ndarray, epoch: int,
                blend_threshold: Optional[float] = None) -> Dict[str, int]:
    """
    새 인코딩 벡터를 뱅크에 반영합니다.

    각 벡터는 갱신 이전부터 있던 엔트리 중 가장 가까운 것과 비교하여,
    exp(s)가 임계값 이상이면 그 엔트리에 블렌딩하고 아니면 새 엔트리로 삽입합니다.
    마지막에 용량을 강제합니다.

    Raises:
        ShapeError: 벡터 차원이 뱅크와 다를 때
    """
    fresh = np.asarray(fresh, dtype=np.float32)
    if fresh.ndim != 2 or fresh.shape[1] != bank.dim:
        raise ShapeError(f"{bank.dimension} 뱅크 갱신 벡터 차원이 다릅니다", fresh.shape, (bank.dim,))
    threshold = bank.config.blend_threshold if blend_threshold is None else blend_threshold
    existing_ids, existing = bank.ids().copy(), bank.vectors().astype(np.float64)
    blended = inserted = 0
    for row in fresh:
        if len(existing_ids):
            diff = existing - row.astype(np.float64)
            sims = -np.sum(diff * diff, axis=1)
            best = int(np.lexsort((existing_ids, -sims))[0])
            if np.exp(sims[best]) >= threshold:
                bank.blend(int(existing_ids[best]), row, blend_rate(sims[best]), epoch)
                existing[best] = bank.get(int(existing_ids[best])).vector
                blended += 1
                continue
        bank.insert(row, epoch)
        inserted += 1
    evicted = enforce_capacity(bank)
    logger.info(f"{bank.dimension} 뱅크 갱신: blended={blended}, inserted={inserted}, evicted={len(evicted)}")
    return {"blended": blended, "inserted": inserted, "evicted": len(evicted)}


def enforce_capacity(bank: MemoryBank) -> List[int]:
    """모멘텀이 낮은 순(동률이면 높은 id 먼저)으로 용량 초과분을 제거합니다."""
    excess = len(bank) - bank.capacity
    if excess <= 0:
        return []
    ids = bank.ids()
    order = np.lexsort((-ids, bank.momenta()))
    victims = [int(i) for i in ids[order[:excess]]]
    bank.remove(victims)
    return victims


def prune_and_decay(bank: MemoryBank, current_epoch: int,
                    recent_queries: Optional[np.ndarray] = None) -> EvictionReport:
    """
    오래된 엔트리, 최근 질의와 무관한 엔트리, 용량 초과분을 순서대로 제거합니다.

    유사도 정리는 최근 질의가 있을 때만 수행하며, 이번 에폭에 기록된 엔트리는 제외합니다.
    """
    config = bank.config
    evicted: List[EvictionRecord] = []

    stale = [int(i) for i, entry in bank.entries() if current_epoch - entry.epoch_stamp > config.decay_epochs]
    bank.remove(stale)
    evicted.extend({"id": i, "reason": EVICT_DECAY} for i in stale)

    if recent_queries is not None and len(recent_queries) and len(bank):
        candidates = [(i, e) for i, e in bank.entries() if e.epoch_stamp != current_epoch]
        if candidates:
            vectors = np.stack([e.vector for _, e in candidates])
            best = approx_similarity(vectors, recent_queries).max(axis=1)
            irrelevant = [int(i) for (i, _), s in zip(candidates, best) if np.exp(s) < config.prune_similarity]
            bank.remove(irrelevant)
            evicted.extend({"id": i, "reason": EVICT_SIMILARITY} for i in irrelevant)

    evicted.extend({"id": i, "reason": EVICT_CAPACITY} for i in enforce_capacity(bank))
    if evicted:
        logger.info(f"{bank.dimension} 뱅크 정리: evicted={len(evicted)}, remaining={len(bank)}")
    return {"dimension": bank.dimension, "evicted": evicted, "remaining": len(bank)}


def flat_topk(bank: MemoryBank, queries: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """캐시와 인덱스를 거치지 않는 정확한 top-k (벤치마크 기준값)"""
    ids, vectors = bank._arrays()
    return flat_search(IndexState(INDEX_FLAT, bank.generation, ids, vectors), queries, k)


__all__ = [
    "PatternEntry", "MemoryBank", "SearchResult",
    "entropy", "blend_rate", "blend_entry", "momentum_shares",
    "update_momentum", "update_bank", "enforce_capacity", "prune_and_decay",
    "flat_topk", "pairwise_similarity",
]
