# routers/common.py
"""
🔧 CLI 라우터 공용 헬퍼

- 전역 옵션 (seed / threads / out / format) 을 담는 CliContext
- ExperimentReport 출력과 종료 코드 변환
- QuadlabError → 종료 코드 2
"""

from pathlib import Path
from typing import NoReturn, Optional

import typer
from pydantic import BaseModel, Field

from config import QUADLAB_SEED, QUADLAB_THREADS
from logging_config import get_logger
from model.schemas import ExperimentReport
from services.errors import QuadlabError
from services.format_service import format_service

logger = get_logger(__name__)

EXIT_REFERENCE_FAILED = 1
EXIT_QUADLAB_ERROR = 2


class CliContext(BaseModel):
    """전역 플래그 (명령별 --seed 가 있으면 그쪽이 우선)"""
    seed: int = Field(QUADLAB_SEED, ge=0, description="master seed (u64)")
    threads: int = Field(QUADLAB_THREADS, ge=1)
    out: Optional[Path] = None
    format: Optional[str] = None


def cli_context(ctx: typer.Context) -> CliContext:
    obj = ctx.find_root().obj
    return obj if isinstance(obj, CliContext) else CliContext()


def resolve_seed(ctx: typer.Context, seed: Optional[int]) -> int:
    return cli_context(ctx).seed if seed is None else seed


def write_bytes(ctx: typer.Context, payload: bytes, name: str) -> None:
    """--out 디렉터리가 있으면 파일로, 없으면 stdout 으로"""
    out = cli_context(ctx).out
    if out is None:
        typer.echo(payload.decode("utf-8"), nl=not payload.endswith(b"\n"))
        return
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_bytes(payload)
    logger.info("✅ 저장 완료", extra={"path": str(path), "bytes": len(payload)})


def emit_report(ctx: typer.Context, report: ExperimentReport) -> None:
    """보고서 JSON 출력 후 reference 통계 실패면 종료 코드 1"""
    name = report.experiment_id.replace(":", "_") + ".json"
    write_bytes(ctx, format_service.report_to_json(report), name)
    if report.exit_code() != 0:
        raise typer.Exit(code=EXIT_REFERENCE_FAILED)


def fail(error: QuadlabError) -> NoReturn:
    logger.error(f"❌ {type(error).__name__}: {error}", exc_info=True)
    typer.echo(f"error: {error}", err=True)
    raise typer.Exit(code=EXIT_QUADLAB_ERROR)
