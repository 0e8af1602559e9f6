"""
체크포인트 관리 모듈

이 모듈은 학습 실행 디렉토리의 저장과 로드를 담당합니다:
1. 설정(config.json)과 실행 정보(run.json)
2. 모델 파라미터(params.npz)와 정규화 통계(normalizer.json)
3. 메모리 뱅크 스냅샷(store/*.bank)
4. 학습 기록(history.json), 이벤트(events.json), 평가 지표(metrics.json)

파일마다 마지막으로 기록한 내용의 해시를 기억해 두고,
변경이 없으면 파일 쓰기를 건너뜁니다.
"""

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from src.config import RunConfig, build_config
from src.data import Normalizer
from src.errors import CheckpointError, ConfigError
from src.layers import Module
from src.store.store import RetrievalStore
from src.utils.convert import dumps
from src.utils.paths import get_run_paths

logger = logging.getLogger(__name__)


def _calculate_hash(payload: bytes) -> str:
    """
    저장할 내용의 해시값을 계산합니다.

    이 해시값은 내용이 변경되었는지 확인하는 데 사용되며,
    변경이 없는 경우 파일 쓰기 작업을 건너뜁니다.
    """
    return hashlib.md5(payload).hexdigest()


def _params_payload(state: Dict[str, np.ndarray]) -> bytes:
    digest = hashlib.md5()
    for name in sorted(state):
        value = np.ascontiguousarray(state[name])
        digest.update(name.encode("utf-8"))
        digest.update(str(value.dtype).encode("utf-8"))
        digest.update(value.tobytes())
    return digest.digest()


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


@dataclass
class LoadedCheckpoint:
    """load로 읽어 들인 체크포인트 구성 요소"""
    config: RunConfig
    run_info: Dict[str, Any]
    params: Dict[str, np.ndarray]
    normalizer: Optional[Normalizer]
    store: Optional[RetrievalStore]


class CheckpointManager:
    """
    실행 디렉토리 하나의 저장/로드를 관리합니다.

    같은 관리자 인스턴스로 반복 저장할 때 내용이 그대로면 쓰기를 건너뜁니다.
    """

    def __init__(self, run_dir: Union[str, Path]):
        self.paths = get_run_paths(run_dir)
        self.run_dir = self.paths["run_dir"]
        self._hashes: Dict[str, str] = {}

    # === 공통 ===
    def _write_if_changed(self, key: str, path: Path, data: bytes, digest: Optional[str] = None) -> bool:
        """
        내용이 바뀐 경우에만 파일을 씁니다.

        Returns:
            bool: 실제로 파일을 썼는지 여부
        """
        current_hash = digest or _calculate_hash(data)
        if self._hashes.get(key) == current_hash and path.exists():
            logger.debug(f"{path.name}이(가) 변경되지 않았습니다. 파일 쓰기를 건너뜁니다.")
            return False
        _atomic_write(path, data)
        self._hashes[key] = current_hash
        logger.debug(f"파일을 저장했습니다: {path}")
        return True

    def save_json(self, key: str, payload: Any) -> bool:
        path = self.paths[f"{key}_file"]
        return self._write_if_changed(key, path, dumps(payload).encode("utf-8"))

    def load_json(self, key: str, default: Any = None) -> Any:
        path = self.paths[f"{key}_file"]
        if not path.exists():
            return default
        try:
            with open(path, "r", encoding="utf-8") as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise CheckpointError(f"{path.name} 파싱 중 오류 발생: {e}") from e

    # === 저장 ===
    def save_config(self, config: RunConfig) -> bool:
        return self.save_json("config", config.model_dump())

    def save_params(self, model: Module) -> bool:
        state = model.state_dict()
        path = self.paths["params_file"]
        digest = _params_payload(state).hex()
        if self._hashes.get("params") == digest and path.exists():
            logger.debug("파라미터가 변경되지 않았습니다. 파일 쓰기를 건너뜁니다.")
            return False
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".params.", suffix=".npz")
        os.close(fd)
        try:
            np.savez(tmp_name, **state)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
        self._hashes["params"] = digest
        return True

    def save_normalizer(self, normalizer: Normalizer) -> bool:
        return self.save_json("normalizer", normalizer.to_dict())

    def save_store(self, store: RetrievalStore) -> None:
        store.save(self.paths["store_dir"])

    def save_best(self, model: Module, store: Optional[RetrievalStore], run_info: Dict[str, Any]) -> None:
        """검증 성능이 개선된 시점의 파라미터, 뱅크, 실행 정보를 저장합니다."""
        self.save_params(model)
        if store is not None:
            self.save_store(store)
        self.save_json("run", run_info)
        logger.info(f"최고 체크포인트 저장: {self.run_dir} (epoch={run_info.get('best_epoch')})")

    # === 로드 ===
    def load_config(self, **overrides: Any) -> RunConfig:
        path = self.paths["config_file"]
        if not path.exists():
            raise CheckpointError(f"체크포인트 설정 파일이 없습니다: {path}")
        try:
            return build_config(self.load_json("config"), **overrides)
        except ConfigError as e:
            raise CheckpointError(f"체크포인트 설정이 올바르지 않습니다: {e}") from e

    def load_params(self) -> Dict[str, np.ndarray]:
        path = self.paths["params_file"]
        if not path.exists():
            raise CheckpointError(f"파라미터 파일이 없습니다: {path}")
        try:
            with np.load(path) as data:
                return {name: data[name] for name in data.files}
        except (OSError, ValueError) as e:
            raise CheckpointError(f"파라미터 파일을 읽을 수 없습니다: {e}") from e

    def load(self, **overrides: Any) -> LoadedCheckpoint:
        """
        체크포인트 디렉토리 전체를 읽습니다.

        Raises:
            CheckpointError: 필수 파일이 없거나 손상되었을 때
        """
        config = self.load_config(**overrides)
        normalizer_payload = self.load_json("normalizer")
        normalizer = Normalizer.from_dict(normalizer_payload) if normalizer_payload else None
        store = None
        if config.uses_retrieval:
            store = RetrievalStore.load(self.paths["store_dir"], config)
        return LoadedCheckpoint(
            config=config,
            run_info=self.load_json("run", {}),
            params=self.load_params(),
            normalizer=normalizer,
            store=store,
        )

    def load_history(self) -> List[Dict[str, Any]]:
        return self.load_json("history", [])

    def load_events(self) -> List[Dict[str, Any]]:
        return self.load_json("events", [])


def is_checkpoint(path: Union[str, Path]) -> bool:
    paths = get_run_paths(path)
    return paths["config_file"].exists() and paths["params_file"].exists()
