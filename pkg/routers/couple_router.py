# routers/couple_router.py
"""
🔗 couple 명령 - Θ_n 과 Θ̄⁽¹⁾ / Θ̄⁽²⁾ 의 공유 스트림 결합 빈도
"""

from typing import List, Optional

import typer

from config import QUADLAB_BETA_GRID
from routers.common import cli_context, emit_report, fail, resolve_seed
from services.errors import QuadlabError
from services.experiment_service import experiment_service

router = typer.Typer()


@router.command("couple")
def couple(
    ctx: typer.Context,
    n: int = typer.Option(30, "--n", min=1),
    beta: Optional[List[float]] = typer.Option(
        None, "--beta", help=f"반복 가능, 기본 {QUADLAB_BETA_GRID}"
    ),
    replicates: int = typer.Option(1_000, "--replicates", min=1),
    seed: Optional[int] = typer.Option(None, "--seed"),
    epsilon_tail: float = typer.Option(1e-3, "--epsilon-tail"),
    ball_radius: int = typer.Option(2, "--ball-radius", min=0),
):
    master = resolve_seed(ctx, seed)
    try:
        report = experiment_service.couple(
            n, replicates, master,
            betas=beta or None,
            threads=cli_context(ctx).threads,
            epsilon_tail=epsilon_tail,
            ball_radius=ball_radius,
        )
    except QuadlabError as e:
        fail(e)
    emit_report(ctx, report)
