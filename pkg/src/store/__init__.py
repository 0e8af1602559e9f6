"""검색 저장소 패키지 (메모리 뱅크, 인덱스, 캐시, 스냅샷)"""

from src.store.bank import (
    MemoryBank, PatternEntry, SearchResult,
    blend_entry, blend_rate, entropy, momentum_shares,
    prune_and_decay, update_bank, update_momentum,
)
from src.store.cache import LRUCache
from src.store.index import IndexState, build_index, similarity
from src.store.snapshot import snapshot_load, snapshot_save
from src.store.store import Reservoir, RetrievalStore

__all__ = [
    "MemoryBank", "PatternEntry", "SearchResult",
    "blend_entry", "blend_rate", "entropy", "momentum_shares",
    "prune_and_decay", "update_bank", "update_momentum",
    "LRUCache", "IndexState", "build_index", "similarity",
    "snapshot_load", "snapshot_save",
    "Reservoir", "RetrievalStore",
]
