"""
메모리 뱅크 스냅샷 모듈

바이너리 형식 (리틀 엔디안):
  magic "RASTBANK" | version u16 | dimension u8 | D_r u32 | count u32
  엔트리마다: v float32×D_r | ω f64 | epoch_stamp u32 | insert_count u32
  trailer: 앞선 모든 바이트의 CRC32 u32

엔트리는 id 순서로 기록되고 로드 시 0부터 다시 번호가 매겨집니다.
"""

import logging
import os
import struct
import tempfile
import zlib
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.config import RunConfig
from src.entities import DIMENSION_SPATIAL, DIMENSION_TEMPORAL
from src.errors import DataFormatError
from src.store.bank import MemoryBank, PatternEntry

logger = logging.getLogger(__name__)

MAGIC = b"RASTBANK"
VERSION = 1
_HEADER = struct.Struct("<8sHBII")
_ENTRY_META = struct.Struct("<dII")
_CRC = struct.Struct("<I")

_DIMENSION_TAGS = {DIMENSION_SPATIAL: 0, DIMENSION_TEMPORAL: 1}
_TAG_DIMENSIONS = {tag: name for name, tag in _DIMENSION_TAGS.items()}


def encode_bank(bank: MemoryBank) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, _DIMENSION_TAGS[bank.dimension], bank.dim, len(bank))]
    for _, entry in bank.entries():
        parts.append(np.asarray(entry.vector, dtype="<f4").tobytes())
        parts.append(_ENTRY_META.pack(entry.momentum, entry.epoch_stamp, entry.insert_count))
    payload = b"".join(parts)
    return payload + _CRC.pack(zlib.crc32(payload) & 0xFFFFFFFF)


def snapshot_save(bank: MemoryBank, path: Union[str, Path]) -> Path:
    """임시 파일에 쓴 뒤 교체하여 원자적으로 저장합니다."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    data = encode_bank(bank)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug(f"스냅샷 저장: {target} ({len(bank)}개 엔트리, {len(data)} bytes)")
    return target


def decode_bank(data: bytes, config: Optional[RunConfig] = None) -> MemoryBank:
    """
    바이트열을 뱅크로 복원합니다. 실패하면 부분 뱅크 없이 예외를 던집니다.

    Raises:
        DataFormatError: magic/버전 불일치, 잘림, CRC 불일치
    """
    if len(data) < _HEADER.size + _CRC.size:
        raise DataFormatError("스냅샷이 헤더보다 짧습니다", offset=len(data))
    magic, version, tag, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DataFormatError(f"스냅샷 magic이 올바르지 않습니다: {magic!r}", offset=0)
    if version != VERSION:
        raise DataFormatError(f"지원하지 않는 스냅샷 버전입니다: {version}", offset=8)
    if tag not in _TAG_DIMENSIONS:
        raise DataFormatError(f"알 수 없는 차원 태그입니다: {tag}", offset=10)
    if dim < 1:
        raise DataFormatError(f"뱅크 차원이 올바르지 않습니다: {dim}", offset=11)

    entry_size = 4 * dim + _ENTRY_META.size
    expected = _HEADER.size + count * entry_size + _CRC.size
    if len(data) < expected:
        truncated_at = _HEADER.size + ((len(data) - _HEADER.size) // entry_size) * entry_size
        raise DataFormatError(f"스냅샷이 잘렸습니다: {len(data)} < {expected} bytes", offset=truncated_at)
    if len(data) > expected:
        raise DataFormatError(f"스냅샷 끝에 여분의 데이터가 있습니다: {len(data)} > {expected} bytes", offset=expected)

    body_end = expected - _CRC.size
    (stored_crc,) = _CRC.unpack_from(data, body_end)
    actual_crc = zlib.crc32(data[:body_end]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise DataFormatError(f"CRC 불일치: stored={stored_crc:#010x}, actual={actual_crc:#010x}", offset=body_end)

    entries = []
    offset = _HEADER.size
    for _ in range(count):
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float32)
        offset += 4 * dim
        momentum, stamp, inserts = _ENTRY_META.unpack_from(data, offset)
        offset += _ENTRY_META.size
        if not np.all(np.isfinite(vector)) or not np.isfinite(momentum) or momentum < 0:
            raise DataFormatError("스냅샷 엔트리에 유효하지 않은 값이 있습니다", offset=offset - entry_size)
        entry = PatternEntry(vector, momentum, stamp, inserts)
        entry.refresh_stats()
        entries.append(entry)

    bank = MemoryBank(_TAG_DIMENSIONS[tag], dim, config)
    for entry in entries:
        bank.restore(entry)
    return bank


def snapshot_load(path: Union[str, Path], config: Optional[RunConfig] = None) -> MemoryBank:
    """스냅샷을 읽고 인덱스를 다시 구성합니다."""
    source = Path(path)
    if not source.exists():
        raise DataFormatError(f"스냅샷 파일이 없습니다: {source}")
    bank = decode_bank(source.read_bytes(), config)
    bank.build_index()
    logger.debug(f"스냅샷 로드: {source} ({len(bank)}개 엔트리)")
    return bank
