import json
from typing import Any, Dict, Tuple
from urllib.parse import parse_qsl

import numpy as np

SYNTHETIC_PREFIX = "synthetic:"


def to_jsonable(value: Any) -> Any:
    """numpy 스칼라/배열이 섞인 값을 JSON 직렬화 가능한 값으로 변환합니다."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        # JSON 표준에 없는 값은 null로 기록
        return None
    return value


def dumps(value: Any) -> str:
    """정렬된 키로 직렬화합니다 (해시 계산과 파일 저장 공용)"""
    return json.dumps(to_jsonable(value), ensure_ascii=False, sort_keys=True, indent=2)


def is_synthetic_spec(source: str) -> bool:
    return str(source).startswith(SYNTHETIC_PREFIX)


def parse_data_spec(source: str) -> Tuple[str, Dict[str, Any]]:
    """
    합성 데이터 지정 문자열을 해석합니다.

    예: "synthetic:sine?N=4&T=1000&seed=0" → ("sine", {"N": 4, "T": 1000, "seed": 0})
    """
    if not is_synthetic_spec(source):
        raise ValueError(f"합성 데이터 지정이 아닙니다: {source}")
    body = source[len(SYNTHETIC_PREFIX):]
    kind, _, query = body.partition("?")
    params: Dict[str, Any] = {}
    for key, raw in parse_qsl(query, keep_blank_values=False, strict_parsing=bool(query)):
        try:
            params[key] = int(raw)
        except ValueError:
            try:
                params[key] = float(raw)
            except ValueError:
                params[key] = raw
    return kind.strip(), params
