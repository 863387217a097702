# services/tree_service.py
"""
🌳 라벨 트리 전담 서비스

역할:
- 유효성 검사 (Ulam-Harris 조건 + 라벨 조건)
- 코너 시퀀스 / 코너 구간 / contour·label 프로세스
- 코너 기준 re-root, 라벨 shift, canonical code
- spine 트리 절단의 조립(compose) / 분해(decompose) / 양방향 코너
- 정확한 법칙 질량 law_mass (ρ, ρ⁺, ρ⁻)

모든 연산은 순수 함수다 (입력 불변).
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from logging_config import get_logger
from model.schemas import ValidityReport
from model.trees import CornerSequence, LabeledTree, PlanarTree, SpineTree
from services.chain_service import chain_model
from services.errors import DomainError, InvalidLawError, RootLabelMismatchError

logger = get_logger(__name__)


# ==========================================
# 법칙 지정자
# ==========================================
class LawKind(str, Enum):
    RHO = "rho"
    RHO_PLUS = "rho_plus"
    RHO_MINUS = "rho_minus"


@dataclass(frozen=True)
class Law:
    kind: LawKind
    x: int

    @classmethod
    def rho(cls, x: int) -> "Law":
        return cls(LawKind.RHO, x)

    @classmethod
    def rho_plus(cls, x: int) -> "Law":
        return cls(LawKind.RHO_PLUS, x)

    @classmethod
    def rho_minus(cls, x: int) -> "Law":
        return cls(LawKind.RHO_MINUS, x)

    def __str__(self) -> str:
        return f"{self.kind.value}({self.x})"


@dataclass(frozen=True)
class SpineLayout:
    """
    SpineTree 절단을 유한 트리로 펼친 결과

    tree: S(0)..S(H) 와 모든 L_n / R_n 을 담은 유한 트리 (S(H) 의 자식 = L_H 다음 R_H)
    corners: 양방향 코너 시퀀스 (i ≥ 0 왼쪽 탐색, i < 0 오른쪽 탐색)
    spine_ids: S(n) 의 정점 id
    owner: 정점별 소속 spine 인덱스 n
    side: 정점별 "S" / "L" / "R"
    top_left / top_right: S(H) 에서 갈라진 코너 (p_L = 왼쪽 끝, p_R = 오른쪽 끝)
    """

    tree: LabeledTree
    corners: CornerSequence
    spine_ids: Tuple[int, ...]
    owner: Tuple[int, ...]
    side: Tuple[str, ...]
    top_left: int
    top_right: int
    left_counts: Tuple[int, ...]


class TreeAssembler:
    """preorder 순서대로 정점을 추가해 LabeledTree 를 만드는 빌더"""

    def __init__(self, root_label: int):
        self.parent: List[int] = [-1]
        self.labels: List[int] = [root_label]

    def add_vertex(self, parent: int, label: int) -> int:
        self.parent.append(parent)
        self.labels.append(label)
        return len(self.parent) - 1

    def splice_forest(self, at: int, forest: LabeledTree) -> int:
        """forest 루트의 자식들을 정점 at 의 (다음) 자식들로 붙인다. 붙인 정점 수 반환"""
        n = forest.edge_count
        if n == 0:
            return 0
        base = len(self.parent)
        fp = forest.parent
        fl = forest.labels
        for j in range(1, n + 1):
            p = fp[j]
            self.parent.append(at if p == 0 else base + p - 1)
            self.labels.append(fl[j])
        return n

    def attach_child(self, at: int, subtree: LabeledTree) -> int:
        """subtree 전체를 at 의 자식으로 붙이고 subtree 루트의 새 id 반환"""
        root_id = self.add_vertex(at, subtree.root_label)
        self.splice_forest(root_id, subtree)
        return root_id

    def build(self) -> LabeledTree:
        return LabeledTree(PlanarTree(tuple(self.parent)), tuple(self.labels))


class TreeService:
    """라벨 트리 변환 서비스"""

    # ==========================================
    # 유효성 검사
    # ==========================================
    def validate(self, tree: LabeledTree) -> ValidityReport:
        """
        preorder parent 배열 트리 검사 (첫 위반만 보고, 예외 없음)

        검사 순서: 루트 → parent 순서 → preorder 연속성 → 라벨 개수 → 라벨 차이
        """
        parent = tree.parent
        labels = tree.labels
        if not parent or parent[0] != -1:
            return ValidityReport(valid=False, violation="root_missing", vertex=0)

        ancestors: List[int] = [0]
        for v in range(1, len(parent)):
            p = parent[v]
            if not (0 <= p < v):
                return ValidityReport(valid=False, violation="parent_order", vertex=v)
            while ancestors and ancestors[-1] != p:
                ancestors.pop()
            if not ancestors:
                return ValidityReport(
                    valid=False, violation="prefix_closure", vertex=v,
                    detail="parent is not on the current ancestral line (not preorder)",
                )
            ancestors.append(v)

        if len(labels) != len(parent):
            return ValidityReport(
                valid=False, violation="label_count", vertex=None,
                detail=f"{len(labels)} labels for {len(parent)} vertices",
            )
        for v in range(1, len(parent)):
            if abs(labels[v] - labels[parent[v]]) > 1:
                return ValidityReport(valid=False, violation="label_step", vertex=v)
        return ValidityReport(valid=True)

    def validate_addresses(self, labelled: Mapping[Tuple[int, ...], int]) -> ValidityReport:
        """Ulam-Harris 주소 → 라벨 형태의 입력 검사 (조건 1-3 + 라벨 조건)"""
        if () not in labelled:
            return ValidityReport(valid=False, violation="root_missing", vertex=())
        for u in sorted(labelled, key=lambda a: (len(a), a)):
            if not u:
                continue
            if any(j < 1 for j in u):
                return ValidityReport(valid=False, violation="address", vertex=u)
            parent = u[:-1]
            if parent not in labelled:
                return ValidityReport(valid=False, violation="parent_missing", vertex=u)
            if u[-1] > 1 and parent + (u[-1] - 1,) not in labelled:
                return ValidityReport(valid=False, violation="prefix_closure", vertex=u)
            if abs(labelled[u] - labelled[parent]) > 1:
                return ValidityReport(valid=False, violation="label_step", vertex=u)
        return ValidityReport(valid=True)

    def from_addresses(self, labelled: Mapping[Tuple[int, ...], int]) -> LabeledTree:
        report = self.validate_addresses(labelled)
        if not report.valid:
            raise DomainError(
                "invalid Ulam-Harris tree",
                {"violation": report.violation, "vertex": report.vertex},
            )
        order = sorted(labelled)  # 사전식 = preorder
        index = {u: i for i, u in enumerate(order)}
        parent = tuple(-1 if not u else index[u[:-1]] for u in order)
        return LabeledTree(PlanarTree(parent), tuple(labelled[u] for u in order))

    def to_addresses(self, tree: LabeledTree) -> Dict[Tuple[int, ...], int]:
        return dict(zip(tree.tree.addresses(), tree.labels))

    # ==========================================
    # 코너 / 구간 / 프로세스
    # ==========================================
    def corner_sequence(self, tree: LabeledTree) -> CornerSequence:
        """
        contour 순서 코너 시퀀스 (c_0 = 루트의 첫 자식 왼쪽 코너)

        sector 번호: 루트는 0..k-1 (sector j 는 자식 j 와 j+1 사이),
        비루트는 0 (부모에서 도착) .. k (자식 k 에서 복귀).
        """
        labels = tree.labels
        if tree.edge_count == 0:
            return CornerSequence((0,), (0,), (labels[0],))

        children = tree.children
        verts: List[int] = [0]
        sectors: List[int] = [0]
        root_degree = len(children[0])
        stack: List[List[int]] = [[0, 0]]
        while stack:
            top = stack[-1]
            v, i = top
            kids = children[v]
            if i < len(kids):
                top[1] = i + 1
                c = kids[i]
                verts.append(c)
                sectors.append(0)
                stack.append([c, 0])
                continue
            stack.pop()
            if not stack:
                break
            p, j = stack[-1]
            if p == 0 and j == root_degree:
                continue
            verts.append(p)
            sectors.append(j)

        return CornerSequence(
            tuple(verts), tuple(sectors), tuple(labels[v] for v in verts)
        )

    def corner_index(self, cs: CornerSequence) -> Dict[Tuple[int, int], int]:
        """(정점, sector) → 코너 인덱스"""
        return {(v, s): i for i, v, s in zip(cs.indices(), cs.vertices, cs.sectors)}

    def corner_interval(self, cs: CornerSequence, i: int, j: int) -> List[int]:
        """c_i 에서 c_j 까지 시계방향 (contour 순) 순환 구간"""
        if cs.cyclic:
            n = len(cs)
            i %= n
            j %= n
            length = (j - i) % n + 1
            return [(i + t) % n for t in range(length)]
        if i > j:
            raise DomainError("non-cyclic corner interval needs i <= j", {"i": i, "j": j})
        return list(range(i, j + 1))

    def vertex_interval(self, cs: CornerSequence, u: int, v: int) -> List[int]:
        """
        정점 구간 [u, v]: u 의 모든 코너 c, v 의 모든 코너 c' 에 대해
        [c, c'] 가 방문하는 정점 집합들의 교집합
        """
        cu = [i for i, w in zip(cs.indices(), cs.vertices) if w == u]
        cv = [i for i, w in zip(cs.indices(), cs.vertices) if w == v]
        result: Optional[set] = None
        for a in cu:
            for b in cv:
                if not cs.cyclic and a > b:
                    continue
                visited = {cs.vertex(t) for t in self.corner_interval(cs, a, b)}
                result = visited if result is None else result & visited
        return sorted(result or ())

    def contour_label_processes(self, tree: LabeledTree) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        """닫힌 contour (길이 2|t|+1, 양 끝 루트) 와 라벨 프로세스"""
        if tree.edge_count == 0:
            return (0,), (tree.root_label,)
        cs = self.corner_sequence(tree)
        depth = tree.tree.depth
        visit = cs.vertices + (0,)
        return tuple(depth[v] for v in visit), tuple(tree.labels[v] for v in visit)

    # ==========================================
    # shift / re-root / canonical code
    # ==========================================
    def shift(self, tree: LabeledTree, k: int) -> LabeledTree:
        return tree.shift(k)

    def reroot(self, tree: LabeledTree, corner: int) -> Tuple[LabeledTree, Tuple[int, ...]]:
        """
        코너 corner 를 새 루트 코너로 하는 re-root

        Returns:
            (새 트리, 옛 코너 인덱스 → 새 코너 인덱스 매핑)
        """
        cs = self.corner_sequence(tree)
        if tree.edge_count == 0:
            return tree, (0,)

        parent = tree.parent
        children = tree.children
        nbrs = [([parent[v]] if v else []) + list(children[v]) for v in range(len(parent))]

        def next_neighbor(v: int, s: int) -> int:
            off = 1 if v else 0
            return nbrs[v][(s + off) % len(nbrs[v])]

        r = cs.vertex(corner)
        first = next_neighbor(r, cs.sector(corner))
        start = nbrs[r].index(first)
        new_children: Dict[int, List[int]] = {r: nbrs[r][start:] + nbrs[r][:start]}
        new_parent: Dict[int, int] = {r: -1}
        order: List[int] = []
        stack = [r]
        while stack:
            u = stack.pop()
            order.append(u)
            for c in reversed(new_children[u]):
                lst = nbrs[c]
                at = lst.index(u)
                new_children[c] = lst[at + 1:] + lst[:at]
                new_parent[c] = u
                stack.append(c)

        new_id = {u: i for i, u in enumerate(order)}
        rerooted = LabeledTree(
            PlanarTree(tuple(-1 if u == r else new_id[new_parent[u]] for u in order)),
            tuple(tree.labels[u] for u in order),
        )
        new_cs = self.corner_sequence(rerooted)
        lookup = self.corner_index(new_cs)

        mapping: List[int] = []
        for i in cs.indices():
            u = cs.vertex(i)
            nb = next_neighbor(u, cs.sector(i))
            kids = new_children[u]
            if u != r and nb == new_parent[u]:
                sector = len(kids)
            else:
                sector = kids.index(nb)
            mapping.append(lookup[(new_id[u], sector)])
        return rerooted, tuple(mapping)

    def tree_code(self, tree: LabeledTree, marks: Sequence[int] = ()) -> bytes:
        """루트 라벨 + preorder 자식 수 + 라벨 증분 (+ 표시 코너) 의 바이트 코드"""
        parent = tree.parent
        labels = tree.labels
        deltas = [labels[v] - labels[parent[v]] for v in range(1, len(parent))]
        arr = np.asarray(
            [tree.root_label, tree.edge_count, len(marks), *marks,
             *tree.tree.child_counts(), *deltas],
            dtype=np.int64,
        )
        return arr.tobytes()

    # ==========================================
    # spine 트리 조립 / 분해
    # ==========================================
    def spine_compose(
        self,
        spine_labels: Sequence[int],
        left: Sequence[LabeledTree],
        right: Sequence[LabeledTree],
        variant: str = "theta_inf",
    ) -> SpineTree:
        """구성요소 → SpineTree (루트 라벨 불일치 시 인덱스와 함께 거절)"""
        if not (len(spine_labels) == len(left) == len(right)) or not spine_labels:
            raise DomainError(
                "spine components have inconsistent lengths",
                {"spine": len(spine_labels), "left": len(left), "right": len(right)},
            )
        for n, lab in enumerate(spine_labels):
            if left[n].root_label != lab:
                raise RootLabelMismatchError("left", n, lab, left[n].root_label)
            if right[n].root_label != lab:
                raise RootLabelMismatchError("right", n, lab, right[n].root_label)
            if n and abs(lab - spine_labels[n - 1]) > 1:
                raise DomainError("spine label step exceeds 1", {"index": n})
        return SpineTree(tuple(spine_labels), tuple(left), tuple(right), variant)

    def spine_layout(self, st: SpineTree) -> SpineLayout:
        """
        SpineTree 를 유한 트리로 펼치고 양방향 코너 시퀀스를 만든다

        S(H) 의 L_H 와 R_H 사이에 가상 자식(S(H+1) 자리)을 넣어 코너를 계산한 뒤
        가상 정점은 제거한다. 그 결과 p_L / p_R 가 서로 다른 코너로 남는다.
        """
        H = st.horizon
        asm = TreeAssembler(st.spine_labels[0])
        spine_ids = [0]
        left_counts = []
        for n in range(H + 1):
            s = spine_ids[n]
            left_counts.append(len(st.left[n].children[0]) if st.left[n].edge_count else 0)
            asm.splice_forest(s, st.left[n])
            if n < H:
                spine_ids.append(asm.add_vertex(s, st.spine_labels[n + 1]))
        phantom = asm.add_vertex(spine_ids[H], st.spine_labels[H])
        asm.splice_forest(spine_ids[H], st.right[H])
        for n in range(H - 1, -1, -1):
            asm.splice_forest(spine_ids[n], st.right[n])
        with_phantom = asm.build()

        cs = self.corner_sequence(with_phantom)
        total = len(cs)
        ph_pos = cs.vertices.index(phantom)
        p_left = ph_pos - 1
        p_right = ph_pos + 1

        def renum(v: int) -> int:
            return v - 1 if v > phantom else v

        order = list(range(p_right, total)) + list(range(0, p_left + 1))
        vertices = tuple(renum(cs.vertices[q]) for q in order)
        sectors = tuple(cs.sectors[q] for q in order)
        labels = tuple(cs.labels[q] for q in order)
        start = p_right - total

        parent = [renum(p) if p >= 0 else -1 for i, p in enumerate(with_phantom.parent) if i != phantom]
        tree_labels = [lab for i, lab in enumerate(with_phantom.labels) if i != phantom]
        tree = LabeledTree(PlanarTree(tuple(parent)), tuple(tree_labels))

        top = spine_ids[H]
        incomplete = frozenset(
            i for i, v in zip(range(start, start + len(vertices)), vertices) if v == top
        )
        corners = CornerSequence(vertices, sectors, labels, start=start, cyclic=False,
                                 incomplete=incomplete)

        owner = [0] * tree.tree.vertex_count
        side = ["L"] * tree.tree.vertex_count
        spine_set = {sid: n for n, sid in enumerate(spine_ids)}
        for v in range(tree.tree.vertex_count):
            if v in spine_set:
                owner[v] = spine_set[v]
                side[v] = "S"
                continue
            p = tree.parent[v]
            if p in spine_set:
                owner[v] = spine_set[p]
                n = owner[v]
                rank = tree.children[p].index(v)
                side[v] = "L" if rank < left_counts[n] else "R"
            else:
                owner[v] = owner[p]
                side[v] = side[p]

        return SpineLayout(
            tree=tree,
            corners=corners,
            spine_ids=tuple(spine_ids),
            owner=tuple(owner),
            side=tuple(side),
            top_left=start + len(vertices) - 1,
            top_right=start,
            left_counts=tuple(left_counts),
        )

    def spine_decompose(self, st: SpineTree) -> Tuple[Tuple[int, ...], Tuple[LabeledTree, ...], Tuple[LabeledTree, ...]]:
        """펼친 유한 트리에서 spine 라벨과 (L_n), (R_n) 을 다시 잘라낸다"""
        layout = self.spine_layout(st)
        tree = layout.tree
        sizes = self._subtree_sizes(tree)
        spine_labels = tuple(tree.labels[s] for s in layout.spine_ids)
        spine_set = set(layout.spine_ids)
        lefts: List[LabeledTree] = []
        rights: List[LabeledTree] = []
        for n, s in enumerate(layout.spine_ids):
            kids = [c for c in tree.children[s] if c not in spine_set]
            a = layout.left_counts[n]
            lefts.append(self._extract(tree, s, kids[:a], sizes))
            rights.append(self._extract(tree, s, kids[a:], sizes))
        return spine_labels, tuple(lefts), tuple(rights)

    @staticmethod
    def _subtree_sizes(tree: LabeledTree) -> List[int]:
        sizes = [1] * tree.tree.vertex_count
        for v in range(len(sizes) - 1, 0, -1):
            sizes[tree.parent[v]] += sizes[v]
        return sizes

    @staticmethod
    def _extract(tree: LabeledTree, root: int, kids: Sequence[int], sizes: Sequence[int]) -> LabeledTree:
        parent = [-1]
        labels = [tree.labels[root]]
        for c in kids:
            base = len(parent)
            for v in range(c, c + sizes[c]):
                p = tree.parent[v]
                parent.append(0 if v == c else base + (p - c))
                labels.append(tree.labels[v])
        return LabeledTree(PlanarTree(tuple(parent)), tuple(labels))

    # ==========================================
    # 법칙 질량
    # ==========================================
    def law_mass(self, tree: LabeledTree, law: Law) -> Fraction:
        """
        정확한 확률 질량

        ρ_x({θ}) = 1/(2·12^|θ|); ρ⁺ 는 w(x) 로, ρ⁻ 는 1 - w(x) 로 나눈다.
        지지집합 밖이면 0 을 반환한다.
        """
        if law.kind is LawKind.RHO_PLUS and law.x <= 0:
            raise InvalidLawError("RhoPlus needs x >= 1 (w(0) = 0)", {"x": law.x})
        if tree.root_label != law.x:
            logger.debug("⚠️ 루트 라벨이 법칙과 다름 → 질량 0", extra={"law": str(law)})
            return Fraction(0)

        base = Fraction(1, 2 * 12 ** tree.edge_count)
        if law.kind is LawKind.RHO:
            return base

        w = chain_model.w(law.x) if law.x > 0 else Fraction(0)
        positive = tree.min_label >= 1
        if law.kind is LawKind.RHO_PLUS:
            return base / w if positive else Fraction(0)
        if positive:
            return Fraction(0)
        return base / (1 - w)


tree_service = TreeService()
