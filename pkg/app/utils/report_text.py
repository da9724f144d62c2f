from typing import Iterable, List

from app.types.reports import ComparisonRow, VerifyReport
from app.types.solution import Solution

# 기법 한국어 라벨
SCHEME_LABELS = {
    "optimized": "제안 (궤적+스케줄 최적화)",
    "straight": "직선 비행",
    "static": "고정 수집기",
}


def solve_summary_text(solution: Solution) -> str:
    """solve 결과 콘솔 요약"""
    trace = solution.trace
    lines = [
        f"θ (최대 센서 에너지) = {solution.theta!r} J",
        f"외부 반복 {trace.outer_iterations}회, SCA 총 {sum(item.iterations for item in trace.sca)}회"
        + (" (반복 상한 도달)" if trace.hit_cap else ""),
    ]
    for relaxed, rounded in zip(solution.evaluation, solution.block_evaluation):
        lines.append(
            f"  u_{relaxed.sensor + 1}: 에너지 {relaxed.energy_j:.6g} J, 충족 비율 {relaxed.ratio:.6f} "
            f"(라운딩 후 {rounded.ratio:.6f})"
        )
    return "\n".join(lines)


def comparison_text(rows: Iterable[ComparisonRow]) -> str:
    lines: List[str] = []
    for row in rows:
        label = SCHEME_LABELS.get(row.scheme, row.scheme)
        point = "" if row.value is None else f"{row.sweep_variable}={row.value!r} "
        if row.feasible:
            gain = "" if row.gain_ratio is None else f", 이득 비율 {row.gain_ratio:.4f}"
            lines.append(f"{point}{label}: θ = {row.theta!r} J{gain}")
        else:
            lines.append(f"{point}{label}: 실행 불가능 ({row.detail})")
    return "\n".join(lines)


def verify_text(report: VerifyReport) -> str:
    verdict = "통과" if report.passed else "실패"
    lines = [f"검증 {verdict} (ε={report.outage_eps!r}, 반복 {report.n_reps}회, seed={report.seed})"]
    for item in report.sensors:
        mark = "OK" if item.passed else "FAIL"
        lines.append(
            f"  [{mark}] u_{item.sensor + 1}: 아웃티지 {item.empirical_outage:.5f} "
            f"[{item.ci_low:.5f}, {item.ci_high:.5f}] / 한계 {item.outage_limit:.5f}, "
            f"전달 {item.delivered_bits:.6g} bit (하한 {item.delivered_floor:.6g})"
        )
        for reason in item.reasons:
            lines.append(f"      - {reason}")
    return "\n".join(lines)
