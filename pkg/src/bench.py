"""
저장소 검색 벤치마크 모듈

가우시안 혼합 데이터로 Flat/IVF 인덱스의 평균 질의 지연과
Flat 대비 IVF recall@k를 메모리 크기별로 측정합니다.
"""

import logging
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.config import RunConfig
from src.entities import INDEX_FLAT, INDEX_IVF, BenchRow
from src.store.index import IndexState, build_index, flat_search, ivf_search

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ["size", "k", "flat_ms", "ivf_ms", "ratio", "recall"]


def gaussian_mixture(size: int, dim: int, clusters: int, rng: np.random.Generator,
                     spread: float = 4.0, scale: float = 1.0) -> np.ndarray:
    """중심이 N(0, spread²)인 clusters개 등방 가우시안에서 size개 벡터를 뽑습니다."""
    centers = rng.normal(0.0, spread, size=(clusters, dim))
    labels = rng.integers(0, clusters, size=size)
    return (centers[labels] + rng.normal(0.0, scale, size=(size, dim))).astype(np.float32)


def recall_at_k(reference: np.ndarray, found: np.ndarray) -> float:
    """행별로 reference id 중 found에 포함된 비율의 평균 (-1 패딩 제외)"""
    hits, total = 0, 0
    for ref, got in zip(reference, found):
        ref = ref[ref >= 0]
        hits += len(np.intersect1d(ref, got[got >= 0]))
        total += len(ref)
    return hits / total if total else 1.0


def _timed(search, queries: np.ndarray) -> Tuple[np.ndarray, float]:
    """질의를 하나씩 실행하고 (결과 ids, 평균 지연 ms)를 반환합니다."""
    rows = []
    start = time.perf_counter()
    for query in queries:
        ids, _ = search(query[None, :])
        rows.append(ids[0])
    elapsed = (time.perf_counter() - start) * 1000.0 / max(len(queries), 1)
    return np.stack(rows) if rows else np.zeros((0, 0), dtype=np.int64), elapsed


def bench_size(size: int, config: RunConfig, k: int = 5, dim: int = 32, clusters: int = 10,
               num_queries: int = 100, seed: int = 0) -> BenchRow:
    rng = np.random.default_rng(seed + size)
    vectors = gaussian_mixture(size + num_queries, dim, clusters, rng)
    vectors, queries = vectors[:size], vectors[size:]
    ids = np.arange(size, dtype=np.int64)

    flat: IndexState = build_index(ids, vectors, INDEX_FLAT, 1, seed)
    n_list = config.resolved_n_list(size)
    ivf = build_index(ids, vectors, INDEX_IVF, n_list, seed, config.ivf_iters)
    n_probe = config.resolved_n_probe(max(ivf.n_list, 1))

    flat_ids, flat_ms = _timed(lambda q: flat_search(flat, q, k), queries)
    ivf_ids, ivf_ms = _timed(lambda q: ivf_search(ivf, q, k, n_probe), queries)
    row: BenchRow = {
        "size": size,
        "k": k,
        "flat_ms": flat_ms,
        "ivf_ms": ivf_ms,
        "ratio": ivf_ms / flat_ms if flat_ms > 0 else float("nan"),
        "recall": recall_at_k(flat_ids, ivf_ids),
    }
    logger.info(
        f"bench M={size}: flat={flat_ms:.4f}ms, ivf={ivf_ms:.4f}ms (n_list={ivf.n_list}, n_probe={n_probe}), "
        f"recall@{k}={row['recall']:.3f}"
    )
    return row


def ratio_decreasing(rows: Sequence[BenchRow]) -> bool:
    """크기 순으로 IVF/Flat 지연 비율이 엄격히 감소하는지 여부"""
    ordered = sorted(rows, key=lambda r: r["size"])
    return all(b["ratio"] < a["ratio"] for a, b in zip(ordered, ordered[1:]))


def bench_store(sizes: Sequence[int], config: Optional[RunConfig] = None, k: int = 5, dim: int = 32,
                clusters: int = 10, num_queries: int = 100, seed: int = 0,
                out_csv: Optional[Union[str, Path]] = None) -> List[BenchRow]:
    """
    메모리 크기별로 Flat/IVF 검색을 측정합니다.

    Args:
        sizes: 측정할 메모리 크기 M 목록
        out_csv: 지정하면 결과를 CSV로 저장
    """
    config = config or RunConfig()
    rows = [bench_size(size, config, k, dim, clusters, num_queries, seed) for size in sizes]
    if len(rows) > 1 and not ratio_decreasing(rows):
        logger.warning("IVF/Flat 지연 비율이 메모리 크기에 따라 감소하지 않았습니다")
    if out_csv is not None:
        to_frame(rows).to_csv(out_csv, index=False)
        logger.info(f"벤치마크 결과 저장: {out_csv}")
    return rows


def to_frame(rows: Sequence[BenchRow]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=BENCH_COLUMNS)
