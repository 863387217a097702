# services/format_service.py
"""
📄 입출력 포맷 서비스

트리 한 줄 포맷:
    tree <root_label> <edge_count> (<자식 목록>)
    자식 = 라벨 증분 문자 ('+', '0', '-') 뒤에 선택적으로 "(<자식 목록>)"
    예) tree 0 3 (+(0)-)

맵 포맷:
    quad <V> <E> root <u> <v> [dart <d>] [marked <w>] [center <c> radius <r>]
    <u> <v>                        (간선 E 줄, 간선 e 의 dart 2e 가 u 에서 출발)
    labels: <v>:<ℓ> ...
    rotation: <v>:<d>,<d>,... ...
    incomplete: <v> ...            (잘린 패치일 때만)

dart 토큰은 root 의 (u, v) 를 가진 가장 작은 dart 가 아닐 때만 쓴다.
"""

from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import orjson
import pandas as pd

from logging_config import get_logger
from model.maps import BallView, Quadrangulation
from model.schemas import ExperimentReport, GreenRow
from model.trees import LabeledTree, PlanarTree
from services.errors import FormatError
from services.tree_service import tree_service

logger = get_logger(__name__)

_STEP_CHAR = {1: "+", 0: "0", -1: "-"}
_CHAR_STEP = {v: k for k, v in _STEP_CHAR.items()}


class FormatService:
    """트리 / 맵 텍스트 포맷, CSV / JSON 내보내기"""

    # ==========================================
    # 트리
    # ==========================================
    def tree_to_text(self, tree: LabeledTree) -> str:
        labels = tree.labels
        children = tree.children
        parts: List[str] = [f"tree {tree.root_label} {tree.edge_count} ("]
        # (정점, 다음 자식 위치) 스택으로 재귀 없이 출력
        stack: List[List[int]] = [[0, 0]]
        while stack:
            top = stack[-1]
            v, i = top
            if i < len(children[v]):
                top[1] += 1
                c = children[v][i]
                parts.append(_STEP_CHAR[labels[c] - labels[v]])
                if children[c]:
                    parts.append("(")
                    stack.append([c, 0])
                continue
            stack.pop()
            parts.append(")")
        return "".join(parts)

    def tree_from_text(self, text: str, line_no: int = 1) -> LabeledTree:
        tokens = text.strip().split(" ", 3)
        if len(tokens) != 4 or tokens[0] != "tree":
            raise FormatError("expected 'tree <root_label> <edge_count> (...)'", line_no, 0)
        try:
            root_label = int(tokens[1])
            edge_count = int(tokens[2])
        except ValueError as e:
            raise FormatError(f"bad integer in header: {e}", line_no, len(tokens[0]) + 1) from e
        body = tokens[3]
        offset = len(tokens[0]) + len(tokens[1]) + len(tokens[2]) + 3
        if not body.startswith("("):
            raise FormatError("child list must start with '('", line_no, offset)

        parent = [-1]
        labels = [root_label]
        stack = [0]
        last = 0
        for pos, ch in enumerate(body[1:], start=offset + 1):
            if not stack:
                raise FormatError("trailing characters after tree body", line_no, pos)
            if ch in _CHAR_STEP:
                p = stack[-1]
                parent.append(p)
                labels.append(labels[p] + _CHAR_STEP[ch])
                last = len(parent) - 1
            elif ch == "(":
                if last == stack[-1] or parent[last] != stack[-1]:
                    raise FormatError("'(' must follow a child step", line_no, pos)
                stack.append(last)
            elif ch == ")":
                stack.pop()
                last = stack[-1] if stack else 0
            else:
                raise FormatError(f"unexpected character {ch!r}", line_no, pos)
        if stack:
            raise FormatError("unbalanced parentheses", line_no, offset + len(body))
        if len(parent) - 1 != edge_count:
            raise FormatError(
                f"edge count mismatch: header {edge_count}, body {len(parent) - 1}", line_no, 0
            )
        return self._preorder(parent, labels)

    @staticmethod
    def _preorder(parent: List[int], labels: List[int]) -> LabeledTree:
        # 파싱 순서가 이미 preorder 이므로 그대로 쓴다
        return LabeledTree(PlanarTree(tuple(parent)), tuple(labels))

    def read_trees(self, lines: Iterable[str]) -> Iterator[LabeledTree]:
        for no, line in enumerate(lines, start=1):
            if line.strip() and not line.startswith("#"):
                yield self.tree_from_text(line, no)

    # ==========================================
    # 맵
    # ==========================================
    def map_to_text(self, quad: Quadrangulation, center: Optional[int] = None,
                    radius: Optional[int] = None) -> str:
        header = [f"quad {quad.n_vertices} {quad.edge_count}"]
        if quad.root is not None:
            u, v = quad.tails[quad.root], quad.head(quad.root)
            header.append(f"root {u} {v}")
            if self._default_root(quad.tails, u, v) != quad.root:
                header.append(f"dart {quad.root}")
        if quad.marked is not None:
            header.append(f"marked {quad.marked}")
        if center is not None:
            header.append(f"center {center} radius {radius if radius is not None else 0}")
        lines = [" ".join(header)]
        lines.extend(f"{a} {b}" for a, b in quad.edges())
        lines.append("labels: " + " ".join(
            f"{v}:{'?' if lab is None else lab}" for v, lab in enumerate(quad.labels)
        ))
        lines.append("rotation: " + " ".join(
            f"{v}:{','.join(str(d) for d in darts)}" for v, darts in enumerate(quad.rotation)
        ))
        missing = [v for v in range(quad.n_vertices) if not quad.is_complete(v)]
        if missing:
            lines.append("incomplete: " + " ".join(str(v) for v in missing))
        return "\n".join(lines) + "\n"

    def ball_to_text(self, view: BallView) -> str:
        """공 내보내기 (center = 공 안에서의 중심 id 0)"""
        return self.map_to_text(view.quad, center=0, radius=view.radius)

    @staticmethod
    def _default_root(tails: Sequence[int], u: int, v: int) -> Optional[int]:
        for d in range(len(tails)):
            if tails[d] == u and tails[d ^ 1] == v:
                return d
        return None

    @staticmethod
    def _int(token: str, line: int, column: int) -> int:
        try:
            return int(token)
        except ValueError as e:
            raise FormatError(f"expected integer, got {token!r}", line, column) from e

    def map_from_text(self, text: str) -> Tuple[Quadrangulation, Optional[int], Optional[int]]:
        """맵 텍스트 → (맵, center, radius)"""
        lines = text.splitlines()
        if not lines:
            raise FormatError("empty map text", 1, 0)
        head = lines[0].split()
        if len(head) < 3 or head[0] != "quad":
            raise FormatError("expected 'quad <V> <E> ...'", 1, 0)
        V = self._int(head[1], 1, 5)
        E = self._int(head[2], 1, 6 + len(head[1]))
        opts = {}
        k = 3
        arity = {"root": 2, "dart": 1, "marked": 1, "center": 1, "radius": 1}
        while k < len(head):
            key = head[k]
            n = arity.get(key)
            if n is None:
                raise FormatError(f"unknown header field {key!r}", 1, k)
            values = head[k + 1:k + 1 + n]
            if len(values) != n:
                raise FormatError(f"header field {key!r} needs {n} values", 1, k)
            opts[key] = [self._int(t, 1, k + 1 + j) for j, t in enumerate(values)]
            k += 1 + n

        if len(lines) < 1 + E:
            raise FormatError("fewer edge lines than declared", len(lines) + 1, 0)
        tails: List[int] = []
        for i in range(1, 1 + E):
            parts = lines[i].split()
            if len(parts) != 2:
                raise FormatError("edge line needs two vertices", i + 1, 0)
            a = self._int(parts[0], i + 1, 0)
            b = self._int(parts[1], i + 1, len(parts[0]) + 1)
            for col, x in ((0, a), (len(parts[0]) + 1, b)):
                if not (0 <= x < V):
                    raise FormatError(f"vertex {x} out of range", i + 1, col)
            tails.extend((a, b))

        labels: List[Optional[int]] = [None] * V
        rotation: List[Tuple[int, ...]] = [()] * V
        incomplete: set = set()
        for i in range(1 + E, len(lines)):
            line = lines[i]
            if not line.strip():
                continue
            key, _, rest = line.partition(":")
            col = len(key) + 2
            items = rest.split()
            if key == "labels":
                for item in items:
                    v, _, lab = item.partition(":")
                    labels[self._int(v, i + 1, col)] = None if lab == "?" else self._int(lab, i + 1, col)
                    col += len(item) + 1
            elif key == "rotation":
                for item in items:
                    v, _, darts = item.partition(":")
                    rotation[self._int(v, i + 1, col)] = tuple(
                        self._int(d, i + 1, col) for d in darts.split(",") if d
                    )
                    col += len(item) + 1
            elif key == "incomplete":
                incomplete.update(self._int(t, i + 1, col) for t in items)
            else:
                raise FormatError(f"unknown block {key!r}", i + 1, 0)

        root = None
        if "root" in opts:
            u, v = opts["root"]
            root = opts["dart"][0] if "dart" in opts else self._default_root(tails, u, v)
            if root is None or not (0 <= root < len(tails)) or tails[root] != u or tails[root ^ 1] != v:
                raise FormatError("root edge not present in edge list", 1, 0)
        for d, v in enumerate(tails):
            if d not in rotation[v]:
                raise FormatError(f"dart {d} missing from rotation of vertex {v}", len(lines), 0)
        quad = Quadrangulation(
            n_vertices=V,
            tails=tuple(tails),
            rotation=tuple(rotation),
            root=root,
            labels=tuple(labels),
            marked=opts["marked"][0] if "marked" in opts else None,
            complete=tuple(v not in incomplete for v in range(V)) if incomplete else (),
            kind="parsed",
        )
        center = opts["center"][0] if "center" in opts else None
        radius = opts["radius"][0] if "radius" in opts else None
        return quad, center, radius

    # ==========================================
    # CSV / JSON
    # ==========================================
    def contour_frame(self, tree: LabeledTree) -> pd.DataFrame:
        """contour / 라벨 프로세스 (2|θ| + 1 행)"""
        contour, label = tree_service.contour_label_processes(tree)
        return pd.DataFrame({"contour": contour, "label": label})

    def write_contour_csv(self, tree: LabeledTree, path: Path) -> Path:
        self.contour_frame(tree).to_csv(path, index=False)
        return path

    def write_green_csv(self, rows: Sequence[GreenRow], path: Path) -> Path:
        pd.DataFrame([r.model_dump() for r in rows]).to_csv(path, index=False)
        logger.info("📊 Green 테이블 저장", extra={"path": str(path), "rows": len(rows)})
        return path

    def write_histogram_csv(self, values: Sequence[float], bins: int, path: Path) -> Path:
        counts = pd.cut(pd.Series(values, dtype=float), bins=bins).value_counts(sort=False)
        frame = pd.DataFrame({
            "left": [iv.left for iv in counts.index],
            "right": [iv.right for iv in counts.index],
            "count": counts.to_numpy(),
        })
        frame.to_csv(path, index=False)
        return path

    def report_to_json(self, report: ExperimentReport) -> bytes:
        payload = report.model_dump(mode="json")
        payload["passed"] = report.passed
        payload["fingerprint"] = report.fingerprint()
        return orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)

    def report_from_json(self, raw: bytes) -> ExperimentReport:
        try:
            payload = orjson.loads(raw)
        except orjson.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e.msg}", e.lineno, e.colno) from e
        payload.pop("passed", None)
        payload.pop("fingerprint", None)
        return ExperimentReport.model_validate(payload)

    def report_schema(self) -> bytes:
        return orjson.dumps(ExperimentReport.model_json_schema(), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)


format_service = FormatService()
