# routers/verify_router.py
"""
✅ verify 명령 - 법칙 / Green / CVS / 커널 / scaling 검증 묶음

종료 코드: 0 = reference 통계 모두 통과, 1 = 하나라도 실패, 2 = 예산/정의역 오류
"""

from enum import Enum
from typing import Optional

import typer

from logging_config import get_logger
from routers.common import cli_context, emit_report, fail, resolve_seed
from services.errors import QuadlabError
from services.experiment_service import experiment_service

logger = get_logger(__name__)

router = typer.Typer()


class Suite(str, Enum):
    laws = "laws"
    green = "green"
    cvs = "cvs"
    kernel = "kernel"
    scaling = "scaling"
    all = "all"


@router.command("verify")
def verify(
    ctx: typer.Context,
    suite: Suite = typer.Argument(Suite.all),
    seed: Optional[int] = typer.Option(None, "--seed"),
    samples: int = typer.Option(20_000, "--samples", min=1, help="Monte Carlo 표본 수"),
    scaling_n: int = typer.Option(10_000, "--scaling-n", min=1),
    submap_samples: Optional[int] = typer.Option(
        None, "--submap-samples", min=1, help="cvs: 내장 부분맵 법칙 비교 표본 수 (기본 min(samples, 2000))"
    ),
):
    master = resolve_seed(ctx, seed)
    try:
        report = experiment_service.verify(
            suite.value, master, samples=samples, out_dir=cli_context(ctx).out, scaling_n=scaling_n,
            threads=cli_context(ctx).threads, submap_samples=submap_samples,
        )
    except QuadlabError as e:
        fail(e)
    emit_report(ctx, report)
