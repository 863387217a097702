# services/errors.py
"""
⚠️ quadlab 예외 계층

모든 예외는 QuadlabError 를 상속하고, 진단용 details(dict)를 가진다.
CLI 라우터는 QuadlabError 를 잡아 종료 코드로 변환한다.
"""

from typing import Any, Dict, Optional


class QuadlabError(Exception):
    """기본 예외"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details: Dict[str, Any] = dict(details or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.details:
            return base
        extras = ", ".join(f"{k}={v}" for k, v in self.details.items())
        return f"{base} ({extras})"


class BudgetExceededError(QuadlabError):
    """샘플러 예산 초과 (어느 컴포넌트에서 초과했는지 포함)"""

    def __init__(self, component: str, field: str, reached: Any, limit: Any):
        super().__init__(
            f"budget exceeded in {component}",
            {"component": component, "field": field, "reached": reached, "limit": limit},
        )
        self.component = component


class RejectionLimitError(QuadlabError):
    """rejection sampling 최대 시도 횟수 초과"""

    def __init__(self, law: str, attempts: int, accepted: int):
        rate = accepted / attempts if attempts else 0.0
        super().__init__(
            f"rejection limit reached for {law}",
            {"law": law, "attempts": attempts, "accepted": accepted, "acceptance_rate": rate},
        )
        self.acceptance_rate = rate


class InvalidLawError(QuadlabError):
    """정의되지 않는 법칙 (예: w(0) = 0 인 RhoPlus(0))"""


class DomainError(QuadlabError):
    """닫힌 공식의 정의역 밖 호출"""


class RootLabelMismatchError(QuadlabError):
    """spine 부분트리 루트 라벨 불일치"""

    def __init__(self, side: str, index: int, expected: int, found: int):
        super().__init__(
            f"root label mismatch in {side}[{index}]",
            {"side": side, "index": index, "expected": expected, "found": found},
        )
        self.index = index
        self.side = side


class IndeterminateError(QuadlabError):
    """잘린(truncated) 창 밖 정보가 필요함 - horizon 을 늘려야 함"""


class ConvergenceError(QuadlabError):
    """수치 오라클이 창 크기 한도 안에서 수렴하지 않음"""


class EnumerationTooLargeError(QuadlabError):
    """열거 한도 초과"""

    def __init__(self, max_edges: int, limit: int, estimate: int):
        super().__init__(
            f"enumeration up to {max_edges} edges refused",
            {"max_edges": max_edges, "limit": limit, "estimated_count": estimate},
        )
        self.estimate = estimate


class FormatError(QuadlabError):
    """텍스트 포맷 파싱 실패 (줄/열 진단 포함)"""

    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(message, {"line": line, "column": column})
        self.line = line
        self.column = column


class IndexRangeError(QuadlabError):
    """경계 geodesic 인덱스 범위 불일치"""


class InvariantViolationError(QuadlabError):
    """구성상 성립해야 하는 성질이 깨짐 (구현 버그)"""
