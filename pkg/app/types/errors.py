from typing import List, Optional


class CollectorError(Exception):
    """패키지 공통 예외"""


class ScenarioParseError(CollectorError):
    """시나리오 파일을 읽거나 파싱할 수 없음"""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"cannot parse scenario file '{path}': {reason}")


class ScenarioValidationError(CollectorError, ValueError):
    """시나리오 불변식 위반 (위반 항목 이름 포함)"""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        self.detail = detail
        message = f"scenario violates '{invariant}'"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class InfeasibleScheduleError(CollectorError):
    """(P2) 실행 불가능 - 데이터 요구량을 채울 수 없는 센서 목록 포함"""

    def __init__(self, sensors: List[int], detail: str = ""):
        self.sensors = list(sensors)
        names = ", ".join(f"u_{k + 1}" for k in self.sensors) or "unknown"
        message = f"data demand cannot be met for sensor(s) {names}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class SolverFailureError(CollectorError):
    """수치 솔버 실패"""

    def __init__(self, solver: str, detail: str = "", residual: Optional[float] = None):
        self.solver = solver
        self.residual = residual
        message = f"{solver} failed"
        if detail:
            message += f": {detail}"
        if residual is not None:
            message += f" (residual={residual:.3e})"
        super().__init__(message)


class MarcumConvergenceError(CollectorError):
    """Marcum-Q 급수가 허용 항 수 안에 수렴하지 않음"""

    def __init__(self, a: float, b: float, terms: int):
        self.a = a
        self.b = b
        super().__init__(f"Marcum Q1({a!r}, {b!r}) series did not converge within {terms} terms")


class BundleError(CollectorError):
    """결과 번들이 없거나 손상됨"""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"invalid solution bundle '{path}': {reason}")
