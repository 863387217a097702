# routers/stats_router.py
"""
📊 stats 명령 - min_label / scaling / last_hit / yj_histogram
"""

from enum import Enum
from typing import Optional

import typer

from routers.common import cli_context, emit_report, fail, resolve_seed
from services.errors import QuadlabError
from services.experiment_service import experiment_service

router = typer.Typer()


class Statistic(str, Enum):
    min_label = "min_label"
    scaling = "scaling"
    last_hit = "last_hit"
    yj_histogram = "yj_histogram"


class ScalingMode(str, Enum):
    exact = "exact"
    mc = "mc"


@router.command("stats")
def stats(
    ctx: typer.Context,
    which: Statistic = typer.Argument(...),
    n: int = typer.Option(5, "--n", min=1),
    k: int = typer.Option(3, "--k", min=1, help="min_label 의 k"),
    samples: int = typer.Option(10_000, "--samples", min=1),
    mode: ScalingMode = typer.Option(ScalingMode.exact, "--mode"),
    bins: int = typer.Option(40, "--bins", min=1),
    seed: Optional[int] = typer.Option(None, "--seed"),
):
    master = resolve_seed(ctx, seed)
    try:
        report = experiment_service.stats(
            which.value, master, n=n, k=k, samples=samples, mode=mode.value,
            out_dir=cli_context(ctx).out, bins=bins,
        )
    except QuadlabError as e:
        fail(e)
    emit_report(ctx, report)
