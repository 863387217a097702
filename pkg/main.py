# main.py
"""
quadlab CLI 진입점

quadlab [--seed N] [--threads N] [--out DIR] [--format NAME] [--log-level L]
        <sample|verify|couple|localize|stats|export> ...
"""

import os
import sys
from pathlib import Path
from typing import Optional

import typer

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import ENV, LOG_LEVEL, QUADLAB_SEED, QUADLAB_THREADS
from logging_config import get_logger, setup_logging
from routers import (
    couple_router,
    export_router,
    localize_router,
    sample_router,
    stats_router,
    verify_router,
)
from routers.common import CliContext

logger = get_logger(__name__)

app = typer.Typer(
    name="quadlab",
    help="Labeled trees, CVS quadrangulations and local-limit experiments",
    no_args_is_help=True,
    add_completion=False,
)


@app.callback()
def main(
    ctx: typer.Context,
    seed: int = typer.Option(QUADLAB_SEED, "--seed", min=0, help="master seed (u64)"),
    threads: int = typer.Option(QUADLAB_THREADS, "--threads", min=1),
    out: Optional[Path] = typer.Option(None, "--out", help="산출물 디렉터리 (없으면 stdout)"),
    fmt: Optional[str] = typer.Option(None, "--format", help="출력 포맷 이름"),
    log_level: str = typer.Option(LOG_LEVEL, "--log-level"),
):
    setup_logging(log_level)
    ctx.obj = CliContext(seed=seed, threads=threads, out=out, format=fmt)
    logger.info(
        "🔧 quadlab 시작",
        extra={"env": ENV, "seed": seed, "threads": threads, "command": ctx.invoked_subcommand},
    )


# ==========================================
# 명령 등록
# ==========================================
app.add_typer(sample_router.router)
app.add_typer(verify_router.router)
app.add_typer(couple_router.router)
app.add_typer(localize_router.router)
app.add_typer(stats_router.router)
app.add_typer(export_router.router)


if __name__ == "__main__":
    app()
