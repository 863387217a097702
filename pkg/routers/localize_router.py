# routers/localize_router.py
"""
📍 localize 명령 - 붙인 반평면 맵의 공이 A ∪ Â 안에 들어가는 빈도
"""

from typing import List, Optional

import typer

from config import QUADLAB_ALPHA_GRID
from routers.common import cli_context, emit_report, fail, resolve_seed
from services.errors import QuadlabError
from services.experiment_service import experiment_service

router = typer.Typer()


@router.command("localize")
def localize(
    ctx: typer.Context,
    n: int = typer.Option(30, "--n", min=1),
    alpha: Optional[List[float]] = typer.Option(
        None, "--alpha", help=f"반복 가능, 기본 {QUADLAB_ALPHA_GRID}"
    ),
    beta: float = typer.Option(0.5, "--beta", min=0.0),
    replicates: int = typer.Option(1_000, "--replicates", min=1),
    seed: Optional[int] = typer.Option(None, "--seed"),
    epsilon_tail: float = typer.Option(1e-3, "--epsilon-tail"),
):
    master = resolve_seed(ctx, seed)
    try:
        report = experiment_service.localize(
            n, replicates, master,
            beta=beta,
            alphas=alpha or None,
            threads=cli_context(ctx).threads,
            epsilon_tail=epsilon_tail,
        )
    except QuadlabError as e:
        fail(e)
    emit_report(ctx, report)
