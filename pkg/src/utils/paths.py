"""
프로젝트/실행 디렉토리 경로 유틸리티 모듈
"""
import logging
from pathlib import Path
from typing import Dict, Union

logger = logging.getLogger(__name__)


def get_project_paths() -> Dict[str, Path]:
    """
    프로젝트의 주요 경로들을 반환합니다.
    resources 폴더는 필수적으로 존재해야 합니다.
    """
    # 현재 스크립트 위치 기준으로 경로 찾기
    current_file = Path(__file__)
    utils_dir = current_file.parent
    src_dir = utils_dir.parent
    project_root = src_dir.parent

    # 리소스 디렉토리 (예제 설정 포함)
    resources_dir = project_root / "resources"
    if not resources_dir.exists():
        raise FileNotFoundError(f"필수 리소스 디렉토리가 없습니다: {resources_dir}. 'resources' 폴더를 프로젝트 루트에 생성해주세요.")

    return {
        "utils_dir": utils_dir,
        "src_dir": src_dir,
        "project_root": project_root,
        "resources_dir": resources_dir,
        "configs_dir": resources_dir / "configs",
        "runs_dir": project_root / "runs",
    }


def get_run_paths(run_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    체크포인트(실행) 디렉토리 안의 파일 경로들을 반환합니다.

    Args:
        run_dir: 실행 디렉토리
    """
    run_dir = Path(run_dir)
    store_dir = run_dir / "store"
    return {
        "run_dir": run_dir,
        "config_file": run_dir / "config.json",
        "run_file": run_dir / "run.json",
        "params_file": run_dir / "params.npz",
        "normalizer_file": run_dir / "normalizer.json",
        "store_dir": store_dir,
        "spatial_bank": store_dir / "spatial.bank",
        "temporal_bank": store_dir / "temporal.bank",
        "history_file": run_dir / "history.json",
        "events_file": run_dir / "events.json",
        "metrics_file": run_dir / "metrics.json",
    }
