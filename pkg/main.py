import sys
import json
import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from app.nodes.colored_log_handler import ColoredLogHandler, set_log_level
logging.basicConfig(level=logging.INFO, handlers=[ColoredLogHandler()])
logger = logging.getLogger(__name__)

from app.config import validate_env
from app.types.errors import (
    BundleError,
    CollectorError,
    InfeasibleScheduleError,
    ScenarioParseError,
    ScenarioValidationError,
    SolverFailureError,
)

# 종료 코드
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_INFEASIBLE = 4
EXIT_SOLVER = 5
EXIT_VERIFY_FAILED = 6


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1 (got {value})")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0 (got {value})")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="UAV 데이터 수집 - 웨이크업 스케줄과 비행 궤적 공동 최적화 (최대 센서 에너지 최소화)"
    )
    parser.add_argument("--log-level", type=str, default=None, help="로그 레벨 (DEBUG, INFO, WARNING, ...)")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="시나리오 하나를 풀고 해 번들을 저장")
    solve.add_argument("scenario", type=str, help="시나리오 TOML 경로")
    solve.add_argument("--out", type=str, default="runs/latest", help="출력 디렉터리 (기본값: runs/latest)")
    solve.add_argument("--kappa", type=_positive_float, default=None, help="종료 허용오차 κ (inf 면 1회 반복)")
    solve.add_argument("--seed", type=int, default=None, help="기록용 시드 (verify 기본 시드로 사용)")
    solve.add_argument("--max-outer", type=_positive_int, default=None, help="BCD 외부 반복 상한")
    solve.add_argument("--max-sca", type=_positive_int, default=None, help="SCA 반복 상한")
    solve.add_argument("--dump-lp", action="store_true", help="반복마다 (P2) 를 LP 텍스트로 저장")
    solve.add_argument("--dump-sca", action="store_true", help="SCA 반복마다 궤적 CSV 저장")

    compare = sub.add_parser("compare", help="제안 기법과 직선 비행/고정 수집기 비교 (스윕 지원)")
    compare.add_argument("scenario", type=str, help="시나리오 TOML 경로")
    compare.add_argument("--sweep", type=str, default=None, help="예: S=2e6:2e6:2e7 또는 eps=1e-4,1e-3,1e-2")
    compare.add_argument("--out", type=str, default="runs/compare", help="출력 디렉터리")
    compare.add_argument("--kappa", type=_positive_float, default=None)
    compare.add_argument("--max-outer", type=_positive_int, default=None)
    compare.add_argument("--max-sca", type=_positive_int, default=None)
    compare.add_argument("--workers", type=_positive_int, default=None, help="병렬 워커 수")
    compare.add_argument("--no-warm-start", action="store_true", help="S/eps 스윕에서 이웃 궤적 재시작 끄기")

    verify = sub.add_parser("verify", help="해 번들을 몬테카를로로 검증")
    verify.add_argument("run_dir", type=str, help="solve 출력 디렉터리")
    verify.add_argument("--seed", type=int, default=None, help="난수 시드 (기본값: 번들 기록값 또는 0)")
    verify.add_argument("--n-reps", type=int, default=1, help="반복 횟수 (>= 1)")
    verify.add_argument("--out", type=str, default=None, help="보고서 JSON 경로 (기본값: <run_dir>/verify.json)")
    return parser


def _load(path: str, kappa: Optional[float], max_outer: Optional[int], max_sca: Optional[int], seed: Optional[int] = None):
    from app.utils.scenario_io import load_scenario

    s = load_scenario(path)
    return s.with_overrides(kappa=kappa, max_outer=max_outer, max_sca=max_sca, seed=seed)


def cmd_solve(args) -> int:
    from app.graph.solver_graph import run_pipeline
    from app.utils.bundle import write_bundle
    from app.utils.report_text import solve_summary_text

    s = _load(args.scenario, args.kappa, args.max_outer, args.max_sca, args.seed)
    out = Path(args.out)
    solution = run_pipeline(
        s,
        lp_dump_dir=str(out / "lp") if args.dump_lp else None,
        sca_dump_dir=str(out / "sca") if args.dump_sca else None,
    )
    settings: Dict[str, Any] = {
        "kappa": s.tol_kappa,
        "seed": s.solver.seed,
        "max_outer": s.solver.max_outer,
        "max_sca": s.solver.max_sca,
        "overrides": {
            key: value
            for key, value in (
                ("kappa", args.kappa),
                ("seed", args.seed),
                ("max_outer", args.max_outer),
                ("max_sca", args.max_sca),
            )
            if value is not None
        },
    }
    write_bundle(solution, s, out, settings)
    print(solve_summary_text(solution))
    return EXIT_OK


def cmd_compare(args) -> int:
    from app.baselines import compare
    from app.utils.report_text import comparison_text

    s = _load(args.scenario, args.kappa, args.max_outer, args.max_sca)
    out = Path(args.out)
    try:
        rows = compare(s, sweep=args.sweep, workers=args.workers, out_dir=str(out), warm_start=not args.no_warm_start)
    except ValueError as exc:
        logger.error(f"잘못된 스윕 지정: {exc}")
        return EXIT_USAGE
    out.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([row.model_dump() for row in rows])
    frame.to_csv(out / "comparison.csv", index=False)
    print(comparison_text(rows))

    optimized: List = [row for row in rows if row.scheme == "optimized"]
    if optimized and not any(row.feasible for row in optimized):
        logger.error("모든 스윕 지점이 실행 불가능")
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_verify(args) -> int:
    from app.utils.bundle import write_json
    from app.utils.report_text import verify_text
    from app.verify import verify_bundle

    run = Path(args.run_dir)
    seed = args.seed
    if seed is None:
        summary_path = run / "summary.json"
        recorded = None
        if summary_path.is_file():
            try:
                recorded = json.loads(summary_path.read_text(encoding="utf-8")).get("settings", {}).get("seed")
            except json.JSONDecodeError as exc:
                raise BundleError(str(run), f"summary.json: {exc}") from exc
        seed = int(recorded) if recorded is not None else 0
    report = verify_bundle(run, seed, args.n_reps)
    write_json(report.to_dict(), args.out or run / "verify.json")
    print(verify_text(report))
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        set_log_level(args.log_level)
    if args.command == "verify" and args.n_reps < 1:
        parser.error(f"--n-reps must be >= 1 (got {args.n_reps})")

    try:
        validate_env()
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "compare":
            return cmd_compare(args)
        return cmd_verify(args)
    except (ScenarioParseError, BundleError) as exc:
        logger.error(str(exc))
        return EXIT_PARSE
    except ScenarioValidationError as exc:
        logger.error(str(exc))
        return EXIT_PARSE
    except InfeasibleScheduleError as exc:
        logger.error(str(exc))
        return EXIT_INFEASIBLE
    except (SolverFailureError, CollectorError) as exc:
        logger.error(str(exc))
        return EXIT_SOLVER
    except ValueError as exc:
        # 환경변수 설정 오류
        logger.error(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
