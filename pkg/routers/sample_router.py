# routers/sample_router.py
"""
🎲 sample 명령

quadlab sample <law> [--x/--n/--k/--horizon] [--count] [--seed]

- 기본 출력: 트리 한 줄 포맷 (spine 트리는 펼친 유한 트리)
- --format edge_list: CVS 로 만든 맵 (맵 사이에 빈 줄)
- 요약 (크기 중앙값, 최소 라벨) 은 stderr 로
"""

from enum import Enum
from typing import List, Optional

import numpy as np
import typer

from config import get_default_budget
from logging_config import get_logger
from model.schemas import SamplerBudget
from model.trees import LabeledTree, MarkedTree, SpineTree
from routers.common import cli_context, fail, resolve_seed, write_bytes
from services.cvs_service import cvs_service
from services.errors import InvalidLawError, QuadlabError
from services.format_service import format_service
from services.sampler_service import sampler_service, stream_rng
from services.tree_service import tree_service

logger = get_logger(__name__)

router = typer.Typer()


class LawName(str, Enum):
    rho = "rho"
    rho_plus = "rho_plus"
    rho_minus = "rho_minus"
    theta_n = "theta_n"
    T_k = "T_k"
    theta_inf = "theta_inf"
    theta_bar1 = "theta_bar1"
    theta_bar2 = "theta_bar2"
    theta_inf_rerooted = "theta_inf_rerooted"


_SPINE_VARIANT = {
    LawName.theta_inf: "S_minus",
    LawName.theta_bar1: "S1",
    LawName.theta_bar2: "S2",
}

SAMPLE_FORMATS = ("tree", "edge_list")


def build_budget(budget_edges: Optional[int], epsilon_tail: Optional[float],
                 horizon: Optional[int]) -> SamplerBudget:
    """환경 기본값 위에 CLI 플래그를 덮어쓴 예산 (검증 포함)"""
    fields = get_default_budget().model_dump()
    if budget_edges is not None:
        fields["max_tree_edges"] = budget_edges
    if epsilon_tail is not None:
        fields["epsilon_tail"] = epsilon_tail
    if horizon is not None:
        fields["horizon"] = horizon
    return SamplerBudget(**fields)


def draw_one(law: LawName, rng, budget: SamplerBudget, x: int, n: int, k: int, horizon: int):
    if law is LawName.rho:
        return sampler_service.sample_rho(x, rng, budget)
    if law is LawName.rho_plus:
        return sampler_service.sample_rho_plus(x, rng, budget)
    if law is LawName.rho_minus:
        return sampler_service.sample_rho_minus(x, rng, budget)
    if law is LawName.theta_n:
        return sampler_service.sample_theta_n(n, rng, budget)
    if law is LawName.T_k:
        return sampler_service.sample_T_k(k, rng, budget)
    if law is LawName.theta_inf:
        return sampler_service.sample_theta_infinity(horizon, rng, budget)
    if law is LawName.theta_bar1:
        return sampler_service.sample_theta_bar(1, horizon, rng, budget)
    if law is LawName.theta_bar2:
        return sampler_service.sample_theta_bar(2, horizon, rng, budget)
    return sampler_service.sample_theta_infinity_rerooted(n, rng, budget)


def as_finite_tree(sample) -> LabeledTree:
    if isinstance(sample, MarkedTree):
        return sample.tree
    if isinstance(sample, SpineTree):
        return tree_service.spine_layout(sample).tree
    return sample


def render(law: LawName, sample, fmt: str) -> str:
    if fmt == "tree":
        return format_service.tree_to_text(as_finite_tree(sample)) + "\n"
    if isinstance(sample, SpineTree):
        image = cvs_service.cvs_infinite(sample, _SPINE_VARIANT[law])
    else:
        tree = as_finite_tree(sample)
        image = cvs_service.cvs_finite(tree.shift(-tree.root_label))
    return format_service.map_to_text(image.quad)


def summary_line(trees: List[LabeledTree], law: LawName, n: int) -> str:
    edges = np.array([t.edge_count for t in trees], dtype=np.int64)
    mins = np.array([t.min_label for t in trees], dtype=np.int64)
    parts = [
        f"count={len(trees)}",
        f"median_edges={float(np.median(edges)):g}",
        f"mean_edges={float(edges.mean()):.4f}",
        f"min_label={int(mins.min())}",
    ]
    if law is LawName.theta_n:
        # 최소 라벨 꼬리: 관측 빈도 / 정확한 값
        for k in range(1, 4):
            exact = sampler_service.min_label_tail(n, k)
            parts.append(f"P(min<-{k})={float((mins < -k).mean()):.4f}~{exact}")
    return "# " + " ".join(parts)


@router.command("sample")
def sample(
    ctx: typer.Context,
    law: LawName = typer.Argument(..., help="샘플링할 법칙"),
    x: int = typer.Option(0, "--x", help="루트 라벨 (rho / rho_plus / rho_minus)"),
    n: int = typer.Option(1, "--n", help="theta_n / theta_inf_rerooted 의 n"),
    k: int = typer.Option(1, "--k", help="T_k 의 k"),
    horizon: Optional[int] = typer.Option(None, "--horizon", help="spine 절단 깊이"),
    count: int = typer.Option(1, "--count", min=1),
    seed: Optional[int] = typer.Option(None, "--seed", help="전역 --seed 대신 쓸 seed"),
    budget_edges: Optional[int] = typer.Option(None, "--budget-edges"),
    epsilon_tail: Optional[float] = typer.Option(None, "--epsilon-tail"),
):
    """트리 / 맵 샘플 count 개 출력 (i 번째 샘플은 stream_rng(seed, i))"""
    fmt = cli_context(ctx).format or "tree"
    if fmt not in SAMPLE_FORMATS:
        fail(InvalidLawError("unknown sample format", {"format": fmt, "allowed": SAMPLE_FORMATS}))
    master = resolve_seed(ctx, seed)
    try:
        budget = build_budget(budget_edges, epsilon_tail, horizon)
        depth = budget.horizon
        chunks: List[str] = []
        trees: List[LabeledTree] = []
        for i in range(count):
            drawn = draw_one(law, stream_rng(master, i), budget, x, n, k, depth)
            trees.append(as_finite_tree(drawn))
            chunks.append(render(law, drawn, fmt))
    except QuadlabError as e:
        fail(e)
    except ValueError as e:
        fail(InvalidLawError(str(e)))

    separator = "\n" if fmt == "edge_list" else ""
    write_bytes(ctx, separator.join(chunks).encode("utf-8"), f"sample_{law.value}.{fmt}")
    line = summary_line(trees, law, n)
    logger.info(f"📊 {line}", extra={"law": law.value, "seed": master})
    typer.echo(line, err=True)
