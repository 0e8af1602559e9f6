"""
세대(generation) 기반 무효화를 지원하는 LRU 캐시
"""

import hashlib
import logging
from collections import OrderedDict
from threading import Lock
from typing import Generic, Hashable, Optional, Tuple, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

V = TypeVar("V")


def query_key(query: np.ndarray, k: int, n_probe: Optional[int], generation: int) -> Tuple[str, int, int, int]:
    """질의 벡터 해시와 검색 조건, 인덱스 세대로 캐시 키를 만듭니다."""
    digest = hashlib.md5(np.ascontiguousarray(query).tobytes()).hexdigest()
    return digest, int(k), int(n_probe or 0), int(generation)


class LRUCache(Generic[V]):
    """
    OrderedDict 기반 LRU 캐시

    키에 세대 번호가 포함되고, 세대가 바뀌면 clear()가 호출되므로
    이전 세대의 결과는 절대 반환되지 않습니다. capacity가 0이면 비활성화됩니다.
    검색은 여러 스레드에서 동시에 호출되므로 모든 접근은 잠금 안에서 이루어집니다.
    """

    def __init__(self, capacity: int = 1024):
        if capacity < 0:
            raise ValueError("capacity는 0 이상이어야 합니다")
        self.capacity = capacity
        self._data: "OrderedDict[Hashable, V]" = OrderedDict()
        self._lock = Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable) -> Optional[V]:
        with self._lock:
            value = self._data.get(key)
            if value is None:
                self.misses += 1
                return None
            self._data.move_to_end(key)
            self.hits += 1
            return value

    def put(self, key: Hashable, value: V) -> None:
        if self.capacity == 0:
            return
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
            self._data[key] = value
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()

    def __contains__(self, key: Hashable) -> bool:
        with self._lock:
            return key in self._data

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)
