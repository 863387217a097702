# model/maps.py
"""
🗺️ 평면 맵 도메인 타입 (rotation system 기반)

간선 e 는 두 개의 dart 2e, 2e+1 을 가진다. tails[d] 는 dart d 의 출발 정점,
dart d 의 반대 방향은 d ^ 1. rotation[v] 는 v 에서 나가는 dart 들의 반시계(CCW) 순서.
면(face)은 d ↦ rot_next(d ^ 1) 의 궤도다.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

from model.trees import CornerSequence


@dataclass(frozen=True)
class Quadrangulation:
    n_vertices: int
    tails: Tuple[int, ...]
    rotation: Tuple[Tuple[int, ...], ...]
    root: Optional[int]
    labels: Tuple[Optional[int], ...]
    marked: Optional[int] = None
    complete: Tuple[bool, ...] = ()
    kind: str = "finite"
    # 정점 출처: ("tree", i) / ("star",) / ("lambda", m) / ("seam", n) ...
    origin: Tuple[tuple, ...] = ()

    @property
    def edge_count(self) -> int:
        return len(self.tails) // 2

    @property
    def dart_count(self) -> int:
        return len(self.tails)

    def head(self, d: int) -> int:
        return self.tails[d ^ 1]

    def edges(self) -> List[Tuple[int, int]]:
        return [(self.tails[2 * e], self.tails[2 * e + 1]) for e in range(self.edge_count)]

    @cached_property
    def _rot_pos(self) -> Dict[int, Tuple[int, int]]:
        pos: Dict[int, Tuple[int, int]] = {}
        for v, darts in enumerate(self.rotation):
            for i, d in enumerate(darts):
                pos[d] = (v, i)
        return pos

    def rot_next(self, d: int) -> int:
        v, i = self._rot_pos[d]
        darts = self.rotation[v]
        return darts[(i + 1) % len(darts)]

    def rot_index(self, d: int) -> int:
        return self._rot_pos[d][1]

    def has_dart(self, d: int) -> bool:
        return d in self._rot_pos

    @cached_property
    def adjacency(self) -> Tuple[Tuple[int, ...], ...]:
        """정점별 이웃 목록 (rotation 순서, 중복 간선 포함)"""
        return tuple(tuple(self.tails[d ^ 1] for d in darts) for darts in self.rotation)

    def is_complete(self, v: int) -> bool:
        if not self.complete:
            return True
        return self.complete[v]

    def faces(self) -> List[List[int]]:
        """모든 면을 dart 궤도로 반환"""
        seen = set()
        out: List[List[int]] = []
        for d in self._rot_pos:
            if d in seen:
                continue
            orbit = []
            cur = d
            while cur not in seen:
                seen.add(cur)
                orbit.append(cur)
                nxt = cur ^ 1
                if nxt not in self._rot_pos:
                    break
                cur = self.rot_next(nxt)
            out.append(orbit)
        return out


@dataclass(frozen=True)
class GeodesicBoundaryQuad:
    """두 경계 geodesic γ (successor 경로) 와 γ̃ (추가 정점 선) 을 가진 사각분할"""

    quad: Quadrangulation
    gamma: Tuple[int, ...]
    gamma_tilde: Tuple[int, ...]
    delta: int


@dataclass(frozen=True)
class BallView:
    """
    중심 v, 반지름 r 의 공 (rotation 을 제한한 부분 맵)

    status: "complete" 이면 quad 가 확정된 공, "unknown" 이면 잘림 때문에 판정 불가.
    """

    center: int
    radius: int
    status: str
    quad: Optional[Quadrangulation] = None
    distances: Dict[int, int] = field(default_factory=dict)


# ==========================================
# successor / CVS 결과 타입
# ==========================================
@dataclass(frozen=True)
class Sink:
    """코너가 아닌 successor: 'star' (v★), 'lambda' (λ_level), 'indeterminate' (창 밖)"""

    kind: str
    level: Optional[int] = None


STAR = Sink("star")
INDETERMINATE = Sink("indeterminate")


@dataclass(frozen=True)
class SuccessorMap:
    """코너 인덱스 → 코너 인덱스 | Sink (인덱스는 start 부터)"""

    start: int
    targets: Tuple[object, ...]

    def __getitem__(self, i: int):
        return self.targets[i - self.start]

    def __len__(self) -> int:
        return len(self.targets)

    def items(self):
        return ((self.start + k, t) for k, t in enumerate(self.targets))


@dataclass(frozen=True)
class CvsImage:
    """
    CVS 결과 - 맵과 트리 사이의 대응

    arc_of_corner: 코너 인덱스 → 그 코너에서 나가는 간선 id (dart 2e 가 코너 쪽)
    lambdas: λ 레벨 → 정점 id
    """

    quad: Quadrangulation
    successors: SuccessorMap
    arc_of_corner: Dict[int, int]
    corners: Optional[CornerSequence] = None
    star: Optional[int] = None
    lambdas: Dict[int, int] = field(default_factory=dict)

    @property
    def vertex_map(self) -> Dict[int, int]:
        """트리 정점 → 맵 정점 (항등)"""
        return {v: v for v, o in enumerate(self.quad.origin) if o and o[0] == "tree"}


@dataclass(frozen=True)
class GluedPatch:
    """Θ̄⁽¹⁾ / Θ̄⁽²⁾ 반평면 패치를 붙인 결과 (seam: 레벨 n → 정점)"""

    quad: Quadrangulation
    seam: Dict[int, int]
    second_offset: int


@dataclass(frozen=True)
class EmbeddedSubmap:
    """주변 패치 안의 geodesic-boundary 부분맵 (ambient: 부분맵 정점 → 패치 정점)"""

    boundary_quad: GeodesicBoundaryQuad
    ambient: Tuple[int, ...]
    sigma: int


@dataclass(frozen=True)
class FaceAudit:
    vertices: int
    edges: int
    faces: int
    degrees: Dict[int, int]
    incomplete_faces: int
    euler: Optional[int]
    bipartite: bool

    @property
    def all_quadrangles(self) -> bool:
        return set(self.degrees) <= {4}
