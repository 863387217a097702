# routers/export_router.py
"""
📤 export 명령 - 저장된 산출물 변환

입력 종류는 첫 토큰으로 판단한다 ("tree" 줄 / "quad" 맵 / JSON 보고서).
--format:
- tree          트리 한 줄 포맷으로 다시 쓰기
- edge_list     맵 포맷 (트리 입력이면 CVS 적용)
- csv_processes contour / 라벨 프로세스 CSV (트리마다 2|θ| + 1 행)
- json_report   보고서 JSON 검증 후 정규화
- schema        ExperimentReport JSON schema (입력 불필요)
"""

import sys
from enum import Enum
from pathlib import Path
from typing import List, Optional

import pandas as pd
import typer

from logging_config import get_logger
from routers.common import cli_context, fail, write_bytes
from services.cvs_service import cvs_service
from services.errors import FormatError, QuadlabError
from services.format_service import format_service

logger = get_logger(__name__)

router = typer.Typer()


class ExportFormat(str, Enum):
    tree = "tree"
    edge_list = "edge_list"
    csv_processes = "csv_processes"
    json_report = "json_report"
    schema = "schema"


def read_input(source: Optional[Path]) -> str:
    if source is None or str(source) == "-":
        return sys.stdin.read()
    return source.read_text(encoding="utf-8")


def split_maps(text: str) -> List[str]:
    """빈 줄로 구분된 맵 여러 개"""
    blocks: List[str] = []
    current: List[str] = []
    for line in text.splitlines():
        if line.strip():
            current.append(line)
        elif current:
            blocks.append("\n".join(current) + "\n")
            current = []
    if current:
        blocks.append("\n".join(current) + "\n")
    return blocks


def export_text(text: str, fmt: ExportFormat) -> bytes:
    if fmt is ExportFormat.schema:
        return format_service.report_schema()
    if fmt is ExportFormat.json_report:
        report = format_service.report_from_json(text.encode("utf-8"))
        return format_service.report_to_json(report)

    first = text.lstrip().split(maxsplit=1)[0] if text.strip() else ""
    if first == "quad":
        if fmt is not ExportFormat.edge_list:
            raise FormatError(f"map input cannot be exported as {fmt.value}", 1, 0)
        maps = [format_service.map_from_text(block) for block in split_maps(text)]
        return "\n".join(
            format_service.map_to_text(quad, center, radius) for quad, center, radius in maps
        ).encode("utf-8")
    if first != "tree":
        raise FormatError("input is neither tree lines nor a quad map", 1, 0)

    trees = list(format_service.read_trees(text.splitlines()))
    if fmt is ExportFormat.tree:
        return "".join(format_service.tree_to_text(t) + "\n" for t in trees).encode("utf-8")
    if fmt is ExportFormat.edge_list:
        return "\n".join(
            format_service.map_to_text(cvs_service.cvs_finite(t.shift(-t.root_label)).quad)
            for t in trees
        ).encode("utf-8")
    frames = [format_service.contour_frame(t).assign(tree=i) for i, t in enumerate(trees)]
    frame = pd.concat(frames, ignore_index=True)[["tree", "contour", "label"]]
    return frame.to_csv(index=False).encode("utf-8")


_SUFFIX = {
    ExportFormat.tree: "trees.txt",
    ExportFormat.edge_list: "maps.txt",
    ExportFormat.csv_processes: "processes.csv",
    ExportFormat.json_report: "report.json",
    ExportFormat.schema: "experiment_report.schema.json",
}


@router.command("export")
def export(
    ctx: typer.Context,
    source: Optional[Path] = typer.Argument(None, help="입력 파일 (생략하거나 '-' 이면 stdin)"),
    fmt: Optional[ExportFormat] = typer.Option(None, "--to", help="전역 --format 대신 쓸 출력 포맷"),
):
    try:
        chosen = fmt or ExportFormat(cli_context(ctx).format or ExportFormat.edge_list.value)
        text = "" if chosen is ExportFormat.schema else read_input(source)
        payload = export_text(text, chosen)
    except QuadlabError as e:
        fail(e)
    except (OSError, ValueError) as e:
        fail(FormatError(str(e), 0, 0))
    logger.info("📤 export 완료", extra={"format": chosen.value, "bytes": len(payload)})
    write_bytes(ctx, payload, _SUFFIX[chosen])
