"""
예외 정의 모듈

패키지 전반에서 사용하는 예외 계층을 정의합니다.
CLI는 예외 종류에 따라 종료 코드를 결정합니다.
"""

from typing import Optional, Sequence


class RastError(Exception):
    """패키지 공통 최상위 예외"""


class ShapeError(RastError, ValueError):
    """텐서/벡터 모양이 연산 계약과 맞지 않을 때 발생"""

    def __init__(self, message: str, *shapes: Sequence[int]):
        if shapes:
            rendered = ", ".join(str(tuple(s)) for s in shapes)
            message = f"{message} (shapes: {rendered})"
        super().__init__(message)
        self.shapes = tuple(tuple(s) for s in shapes)


class ContractError(RastError):
    """호출 계약 위반 (예: 스칼라가 아닌 텐서에 backward 호출)"""


class ConfigError(RastError, ValueError):
    """설정 값이 유효하지 않을 때 발생"""


class NumericError(RastError, ArithmeticError):
    """유한하지 않은 값이 입력으로 들어왔을 때 발생"""


class DataFormatError(RastError, ValueError):
    """데이터/스냅샷 파일 형식 오류. offset은 문제가 된 위치입니다."""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)
        self.offset = offset


class CheckpointError(RastError):
    """체크포인트 로드/저장 실패"""


class DivergenceError(RastError):
    """학습 손실이 연속으로 유한하지 않아 학습을 중단할 때 발생"""
