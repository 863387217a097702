# model/trees.py
"""
🌳 라벨 트리 도메인 타입

- PlanarTree: preorder parent 배열 (parent[0] = -1). 형제 순서 = 인덱스 순서.
- LabeledTree: PlanarTree + 정점별 정수 라벨.
- CornerSequence: 코너 목록 (유한: 순환 / spine 절단: 양방향 인덱스).
- SpineTree: 무한 one-spine 트리의 절단 (spine 라벨 + L_n / R_n).
- MarkedTree: 코너 표시가 붙은 라벨 트리.

모든 타입은 생성 후 불변이다.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, Optional, Tuple


@dataclass(frozen=True)
class PlanarTree:
    """preorder parent 배열로 저장한 평면 뿌리 트리"""

    parent: Tuple[int, ...] = (-1,)

    @property
    def vertex_count(self) -> int:
        return len(self.parent)

    @property
    def edge_count(self) -> int:
        return len(self.parent) - 1

    @cached_property
    def children(self) -> Tuple[Tuple[int, ...], ...]:
        kids: list[list[int]] = [[] for _ in self.parent]
        for v in range(1, len(self.parent)):
            kids[self.parent[v]].append(v)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def depth(self) -> Tuple[int, ...]:
        d = [0] * len(self.parent)
        for v in range(1, len(self.parent)):
            d[v] = d[self.parent[v]] + 1
        return tuple(d)

    def child_counts(self) -> Tuple[int, ...]:
        """k_u(t) per vertex (preorder)"""
        return tuple(len(c) for c in self.children)

    def address(self, v: int) -> Tuple[int, ...]:
        """Ulam-Harris 주소 복원 (루트 = ())"""
        path = []
        while v != 0:
            p = self.parent[v]
            path.append(self.children[p].index(v) + 1)
            v = p
        return tuple(reversed(path))

    def addresses(self) -> Tuple[Tuple[int, ...], ...]:
        out: list[Tuple[int, ...]] = [()] * len(self.parent)
        for p, kids in enumerate(self.children):
            for pos, c in enumerate(kids, start=1):
                out[c] = out[p] + (pos,)
        return tuple(out)


@dataclass(frozen=True)
class LabeledTree:
    """(t, ℓ) - 라벨 차이는 간선마다 |Δℓ| ≤ 1 이어야 한다 (validate 로 검사)"""

    tree: PlanarTree
    labels: Tuple[int, ...]

    @classmethod
    def single(cls, label: int) -> "LabeledTree":
        return cls(PlanarTree((-1,)), (label,))

    @classmethod
    def from_arrays(cls, parent, labels) -> "LabeledTree":
        return cls(PlanarTree(tuple(int(p) for p in parent)), tuple(int(x) for x in labels))

    @property
    def root_label(self) -> int:
        return self.labels[0]

    @property
    def edge_count(self) -> int:
        return self.tree.edge_count

    @property
    def parent(self) -> Tuple[int, ...]:
        return self.tree.parent

    @property
    def children(self) -> Tuple[Tuple[int, ...], ...]:
        return self.tree.children

    @cached_property
    def min_label(self) -> int:
        return min(self.labels)

    def shift(self, k: int) -> "LabeledTree":
        """θ + k"""
        if k == 0:
            return self
        return LabeledTree(self.tree, tuple(x + k for x in self.labels))


@dataclass(frozen=True)
class CornerSequence:
    """
    코너 시퀀스

    유한 트리: 인덱스 0..N-1, 순환(cyclic=True).
    spine 절단: 인덱스 start..start+N-1 (start < 0 이면 오른쪽 탐색 부분 포함),
    순환 아님. incomplete 는 창 경계 때문에 정보가 잘린 코너 인덱스 집합.
    """

    vertices: Tuple[int, ...]
    sectors: Tuple[int, ...]
    labels: Tuple[int, ...]
    start: int = 0
    cyclic: bool = True
    incomplete: frozenset = field(default_factory=frozenset)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def stop(self) -> int:
        """마지막 인덱스 + 1"""
        return self.start + len(self.vertices)

    def indices(self) -> range:
        return range(self.start, self.stop)

    def __contains__(self, i: int) -> bool:
        return self.start <= i < self.stop

    def position(self, i: int) -> int:
        if self.cyclic:
            return (i - self.start) % len(self.vertices)
        if not (self.start <= i < self.stop):
            raise IndexError(f"corner {i} outside window [{self.start}, {self.stop})")
        return i - self.start

    def label(self, i: int) -> int:
        return self.labels[self.position(i)]

    def vertex(self, i: int) -> int:
        return self.vertices[self.position(i)]

    def sector(self, i: int) -> int:
        return self.sectors[self.position(i)]

    def __iter__(self) -> Iterator[Tuple[int, int, int]]:
        for i in self.indices():
            p = i - self.start
            yield i, self.vertices[p], self.labels[p]


@dataclass(frozen=True)
class SpineTree:
    """
    무한 one-spine 트리의 절단

    left[n] / right[n] 은 spine 정점 S(n) 을 루트로 하는 트리이고,
    그 루트의 자식들이 각각 spine 의 왼쪽 / 오른쪽에 매달린다.
    """

    spine_labels: Tuple[int, ...]
    left: Tuple[LabeledTree, ...]
    right: Tuple[LabeledTree, ...]
    variant: str = "theta_inf"

    @property
    def horizon(self) -> int:
        return len(self.spine_labels) - 1

    def vertex_count(self) -> int:
        return (
            len(self.spine_labels)
            + sum(t.edge_count for t in self.left)
            + sum(t.edge_count for t in self.right)
        )


@dataclass(frozen=True)
class MarkedTree:
    """
    코너가 표시된 라벨 트리

    marks: 이름 → 코너 인덱스 (예: {"tau": 3, "tau_hat": 0})
    construction: 생성 경로 ("tri_path", "last_hit_spine", "reroot", "rejection", ...)
    meta: 부가 정보 (J, Y_J, horizon 등 - 실험/검증용)
    """

    tree: LabeledTree
    marks: Dict[str, int] = field(default_factory=dict)
    construction: str = ""
    meta: Dict[str, object] = field(default_factory=dict)

    def mark(self, name: str) -> int:
        return self.marks[name]

    def get_mark(self, name: str) -> Optional[int]:
        return self.marks.get(name)
