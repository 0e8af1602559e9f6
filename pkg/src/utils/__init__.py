"""
유틸리티 모듈 패키지

이 패키지는 프로젝트 전체에서 사용되는 다양한 유틸리티 함수들을 제공합니다.
"""

# JSON 변환 및 데이터 지정 문자열 관련 함수들
from src.utils.convert import (
    dumps,
    to_jsonable,
    parse_data_spec
)

# 경로 관련 함수들
from src.utils.paths import (
    get_project_paths,
    get_run_paths
)

# 데코레이터 유틸리티
from src.utils.decorator import node

__all__ = [
    # JSON 변환 관련 함수들
    "dumps",
    "to_jsonable",
    "parse_data_spec",

    # 경로 관련 함수들
    "get_project_paths",
    "get_run_paths",

    # 데코레이터 유틸리티
    "node"
]
