"""
메모리 뱅크 인덱스 모듈

Flat(전수 탐색)과 IVF(k-means 역파일) 두 종류의 인덱스를 제공합니다.
유사도는 음의 제곱 L2 거리 s(q, v) = -‖q - v‖² 이며, 모든 정렬에서
유사도가 같으면 낮은 엔트리 id가 우선합니다.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from sklearn.cluster import KMeans

from src.entities import INDEX_FLAT, INDEX_IVF
from src.errors import ShapeError

logger = logging.getLogger(__name__)

# 한 번에 계산하는 (질의 × 엔트리 × 차원) 원소 수 상한
_CHUNK_ELEMENTS = 1 << 22


@dataclass
class IndexState:
    """
    뱅크 인덱스 상태

    IVF의 lists[i]는 centroids[i]에 가장 가까운 엔트리 id들이며,
    모든 id는 정확히 한 리스트에 속합니다.
    """

    kind: str
    generation: int
    ids: np.ndarray
    vectors: np.ndarray
    centroids: Optional[np.ndarray] = None
    lists: List[np.ndarray] = field(default_factory=list)
    list_vectors: List[np.ndarray] = field(default_factory=list)
    downgraded: bool = False

    @property
    def n_list(self) -> int:
        return len(self.lists)

    def __len__(self) -> int:
        return len(self.ids)


def similarity(q: np.ndarray, v: np.ndarray) -> float:
    """
    음의 제곱 L2 거리

    Raises:
        ShapeError: 길이가 다를 때
    """
    q = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if q.shape != v.shape:
        raise ShapeError("similarity 벡터 길이가 다릅니다", q.shape, v.shape)
    diff = q - v
    return -float(np.sum(diff * diff))


def pairwise_similarity(queries: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """(R, D) × (M, D) → (R, M) 유사도, 차이 벡터를 직접 제곱합니다."""
    queries = np.asarray(queries, dtype=np.float64)
    vectors = np.asarray(vectors, dtype=np.float64)
    if queries.shape[-1] != vectors.shape[-1]:
        raise ShapeError("질의와 엔트리의 차원이 다릅니다", queries.shape, vectors.shape)
    out = np.empty((queries.shape[0], vectors.shape[0]))
    step = max(1, _CHUNK_ELEMENTS // max(1, vectors.size))
    for start in range(0, queries.shape[0], step):
        diff = queries[start:start + step, None, :] - vectors[None, :, :]
        out[start:start + step] = -np.sum(diff * diff, axis=-1)
    return out


def approx_similarity(queries: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """전개식 -(‖q‖² - 2q·v + ‖v‖²) 로 계산한 유사도 (정렬 정확성이 필요 없는 곳에서 사용)"""
    queries = np.asarray(queries, dtype=np.float64)
    vectors = np.asarray(vectors, dtype=np.float64)
    qq = np.einsum("ij,ij->i", queries, queries)[:, None]
    vv = np.einsum("ij,ij->i", vectors, vectors)[None, :]
    return np.minimum(-(qq - 2.0 * queries @ vectors.T + vv), 0.0)


def select_topk(ids: np.ndarray, sims: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """유사도 내림차순, 동률은 낮은 id 우선으로 상위 k개를 고릅니다."""
    if sims.size > k:
        kth = np.partition(sims, sims.size - k)[sims.size - k]
        keep = np.flatnonzero(sims >= kth)
        ids, sims = ids[keep], sims[keep]
    order = np.lexsort((ids, -sims))[:k]
    return ids[order], sims[order]


def build_index(
    ids: np.ndarray,
    vectors: np.ndarray,
    kind: str,
    n_list: int,
    seed: int,
    iters: int = 20,
    generation: int = 0,
) -> IndexState:
    """
    엔트리로 인덱스를 구성합니다.

    IVF는 고정 반복 k-means로 분할한 뒤 각 벡터를 가장 가까운 중심에 배정합니다.
    리스트 수가 엔트리 수보다 많으면 Flat으로 낮추고 경고를 남깁니다.

    Args:
        ids: (M,) 엔트리 id (오름차순)
        vectors: (M, D) 엔트리 벡터
        kind: "flat" 또는 "ivf"
        n_list: IVF 리스트 수
        seed: k-means 시드
    """
    if n_list < 1:
        raise ValueError(f"n_list는 1 이상이어야 합니다: {n_list}")
    ids = np.asarray(ids, dtype=np.int64)
    vectors = np.asarray(vectors)
    if kind == INDEX_FLAT:
        return IndexState(INDEX_FLAT, generation, ids, vectors)
    if kind != INDEX_IVF:
        raise ValueError(f"알 수 없는 인덱스 종류입니다: {kind}")
    if n_list > len(ids):
        logger.warning(f"IVF 리스트 수({n_list})가 엔트리 수({len(ids)})보다 많아 Flat 인덱스로 대체합니다")
        return IndexState(INDEX_FLAT, generation, ids, vectors, downgraded=True)

    data = vectors.astype(np.float64)
    with warnings.catch_warnings():
        # 중복 벡터가 많으면 수렴 경고가 발생하지만 배정은 아래에서 다시 계산합니다
        warnings.simplefilter("ignore")
        kmeans = KMeans(n_clusters=n_list, n_init=1, max_iter=iters, random_state=seed)
        kmeans.fit(data)
    centroids = kmeans.cluster_centers_
    assignment = np.argmax(pairwise_similarity(data, centroids), axis=1)

    kept_centroids, lists, list_vectors = [], [], []
    for c in range(n_list):
        members = np.flatnonzero(assignment == c)
        if members.size == 0:
            continue
        kept_centroids.append(centroids[c])
        lists.append(ids[members])
        list_vectors.append(np.ascontiguousarray(vectors[members]))
    logger.debug(f"IVF 인덱스 구성: entries={len(ids)}, lists={len(lists)}")
    return IndexState(
        INDEX_IVF, generation, ids, vectors,
        centroids=np.asarray(kept_centroids), lists=lists, list_vectors=list_vectors,
    )


def flat_search(state: IndexState, queries: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    전수 탐색

    Returns:
        (ids, sims): 각 (R, k'), k' = min(k, M)
    """
    count = min(k, len(state))
    out_ids = np.empty((len(queries), count), dtype=np.int64)
    out_sims = np.empty((len(queries), count))
    if count == 0:
        return out_ids, out_sims
    sims = pairwise_similarity(queries, state.vectors)
    for r in range(len(queries)):
        out_ids[r], out_sims[r] = select_topk(state.ids, sims[r], count)
    return out_ids, out_sims


def ivf_search(state: IndexState, queries: np.ndarray, k: int, n_probe: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    n_probe개의 가장 가까운 리스트만 탐색합니다.

    탐색한 리스트의 엔트리가 k보다 적으면 남는 자리는 id -1, 유사도 -inf로 채웁니다.
    """
    if state.kind != INDEX_IVF:
        return flat_search(state, queries, k)
    count = min(k, len(state))
    n_probe = max(1, min(n_probe, state.n_list))
    out_ids = np.full((len(queries), count), -1, dtype=np.int64)
    out_sims = np.full((len(queries), count), -np.inf)
    centroid_sims = pairwise_similarity(queries, state.centroids)
    list_order = np.arange(state.n_list)
    for r, query in enumerate(np.asarray(queries, dtype=np.float64)):
        probe, _ = select_topk(list_order, centroid_sims[r], n_probe)
        cand_ids = np.concatenate([state.lists[p] for p in probe])
        cand_vecs = np.concatenate([state.list_vectors[p] for p in probe])
        diff = cand_vecs.astype(np.float64) - query
        found_ids, found_sims = select_topk(cand_ids, -np.sum(diff * diff, axis=1), count)
        out_ids[r, :len(found_ids)] = found_ids
        out_sims[r, :len(found_sims)] = found_sims
    return out_ids, out_sims
