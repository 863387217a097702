# services/metric_service.py
"""
📏 사각분할 거리 / 공 / 정준 코드 서비스

- level 단위 BFS 거리
- 반지름 r 공 (잘린 패치에서는 "unknown" 상태)
- 뿌리 맵 정준 코드 (면 순회 재번호 매기기) 와 맵 동치
- 국소 거리 D(m, m') = 1 / (1 + 처음 달라지는 반지름)
- geodesic 검증
"""

from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import networkx as nx
import numpy as np

from logging_config import get_logger
from model.maps import BallView, Quadrangulation
from model.schemas import GeodesicReport
from services.errors import DomainError

logger = get_logger(__name__)


class Verdict(str, Enum):
    """잘린 맵에서의 3값 비교 결과"""
    EQUAL = "equal"
    DIFFERENT = "different"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class LocalDistance:
    """D 값. upper_bound=True 이면 value 는 상한일 뿐이다 (cap 도달 / 판정 불가)"""

    value: Fraction
    upper_bound: bool = False
    radius: Optional[int] = None


class MetricService:
    """그래프 거리와 국소 위상 비교"""

    # ==========================================
    # BFS
    # ==========================================
    def bfs_distances(self, quad: Quadrangulation, source: int,
                      cutoff: Optional[int] = None) -> Dict[int, int]:
        """source 에서 도달 가능한 정점까지의 거리 (level 동기 BFS)"""
        if not (0 <= source < quad.n_vertices):
            raise DomainError("source vertex outside the map", {"source": source})
        adjacency = quad.adjacency
        seen: Dict[int, int] = {}
        level = 0
        nextlevel = {source}
        while nextlevel:
            thislevel = nextlevel
            nextlevel = set()
            for v in thislevel:
                if v not in seen:
                    seen[v] = level
                    nextlevel.update(u for u in adjacency[v] if u not in seen)
            if cutoff is not None and cutoff <= level:
                break
            level += 1
        return seen

    def to_networkx(self, quad: Quadrangulation) -> nx.MultiGraph:
        """검증용 networkx 그래프 (중복 간선 유지)"""
        g = nx.MultiGraph()
        g.add_nodes_from(range(quad.n_vertices))
        g.add_edges_from(quad.edges())
        return g

    # ==========================================
    # 공
    # ==========================================
    def ball(self, quad: Quadrangulation, center: int, radius: int,
             root: Optional[int] = None) -> BallView:
        """
        반지름 radius 공: 거리 ≤ r 인 정점, 거리 < r 인 정점에 닿은 간선.
        거리 < r 인 정점이 모두 완전할 때만 status="complete".
        """
        if radius < 0:
            raise DomainError("ball radius must be non-negative", {"radius": radius})
        dist = self.bfs_distances(quad, center, cutoff=radius)
        inner = [v for v, d in dist.items() if d < radius]
        status = "complete" if all(quad.is_complete(v) for v in inner) else "unknown"

        order = sorted(dist, key=lambda v: (dist[v], v))
        new_id = {v: k for k, v in enumerate(order)}
        kept_edges = [
            e for e in range(quad.edge_count)
            if quad.tails[2 * e] in dist and quad.tails[2 * e + 1] in dist
            and min(dist[quad.tails[2 * e]], dist[quad.tails[2 * e + 1]]) < radius
        ]
        edge_id = {e: k for k, e in enumerate(kept_edges)}

        def dart(d: int) -> int:
            return 2 * edge_id[d // 2] + (d & 1)

        tails: List[int] = []
        for e in kept_edges:
            tails.extend((new_id[quad.tails[2 * e]], new_id[quad.tails[2 * e + 1]]))
        rotation = tuple(
            tuple(dart(d) for d in quad.rotation[v] if d // 2 in edge_id) for v in order
        )
        if root is None and quad.root is not None and quad.tails[quad.root] == center:
            root = quad.root
        if root is not None and root // 2 in edge_id:
            ball_root = dart(root)
        else:
            ball_root = rotation[0][0] if rotation[0] else None

        sub = Quadrangulation(
            n_vertices=len(order),
            tails=tuple(tails),
            rotation=rotation,
            root=ball_root,
            labels=tuple(quad.labels[v] for v in order),
            kind="ball",
            origin=tuple(("map", v) for v in order),
        )
        return BallView(center=center, radius=radius, status=status, quad=sub, distances=dist)

    # ==========================================
    # 정준 코드
    # ==========================================
    def canonical_code(self, quad: Quadrangulation, root: Optional[int] = None,
                       include_marked: bool = True) -> bytes:
        """
        뿌리 dart 에서 시작해 면을 차례로 돌며 dart 를 (2i, 2i+1) 로 다시 번호 매긴다.
        코드 = [dart 수, 면 수, 면 차수들, 면 순회 dart 들, 표시 정점]
        """
        if root is None:
            root = quad.root
        if root is None or quad.dart_count == 0:
            return np.asarray([quad.n_vertices, 0], dtype=np.int64).tobytes()

        def fp(d: int) -> int:
            return quad.rot_next(d ^ 1)

        fc: List[int] = []
        fd: List[int] = []
        rel: Dict[int, int] = {root: 0}
        c = 2
        wait = deque([root ^ 1])
        fc.append(0)
        i = fp(root)
        d = 1
        while i != root:
            if i not in rel:
                j = i ^ 1
                if j in rel:
                    rel[i] = rel[j] + 1
                else:
                    rel[i] = c
                    c += 2
                    wait.append(j)
            fc.append(rel[i])
            d += 1
            i = fp(i)
        fd.append(d)

        while wait:
            i0 = wait.popleft()
            if i0 in rel:
                continue
            rel[i0] = rel[i0 ^ 1] + 1
            fc.append(rel[i0])
            i = fp(i0)
            d = 1
            while i != i0:
                if i not in rel:
                    j = i ^ 1
                    if j in rel:
                        rel[i] = rel[j] + 1
                    else:
                        rel[i] = c
                        c += 2
                        wait.append(j)
                fc.append(rel[i])
                d += 1
                i = fp(i)
            fd.append(d)

        marked = -1
        if include_marked and quad.marked is not None:
            out = [rel[x] for x in quad.rotation[quad.marked] if x in rel]
            marked = min(out) if out else -2
        arr = np.asarray([len(rel), len(fd), *fd, *fc, marked], dtype=np.int64)
        return arr.tobytes()

    def maps_equal(self, a: Quadrangulation, b: Quadrangulation) -> bool:
        return self.canonical_code(a) == self.canonical_code(b)

    def renumber(self, quad: Quadrangulation, vertex_perm: Sequence[int],
                 edge_perm: Optional[Sequence[int]] = None) -> Quadrangulation:
        """정점 / 간선 id 를 바꾼 같은 맵"""
        V, E = quad.n_vertices, quad.edge_count
        if sorted(vertex_perm) != list(range(V)):
            raise DomainError("vertex_perm is not a permutation", {"n_vertices": V})
        if edge_perm is None:
            edge_perm = range(E)
        elif sorted(edge_perm) != list(range(E)):
            raise DomainError("edge_perm is not a permutation", {"edges": E})

        def dart(d: int) -> int:
            return 2 * edge_perm[d // 2] + (d & 1)

        tails = [0] * quad.dart_count
        for d, v in enumerate(quad.tails):
            tails[dart(d)] = vertex_perm[v]
        rotation: List[tuple] = [()] * V
        labels: List[Optional[int]] = [None] * V
        complete: List[bool] = [True] * V
        origin: List[tuple] = [()] * V
        for v in range(V):
            w = vertex_perm[v]
            rotation[w] = tuple(dart(d) for d in quad.rotation[v])
            labels[w] = quad.labels[v]
            complete[w] = quad.is_complete(v)
            if quad.origin:
                origin[w] = quad.origin[v]
        return Quadrangulation(
            n_vertices=V,
            tails=tuple(tails),
            rotation=tuple(rotation),
            root=None if quad.root is None else dart(quad.root),
            labels=tuple(labels),
            marked=None if quad.marked is None else vertex_perm[quad.marked],
            complete=tuple(complete) if quad.complete else (),
            kind=quad.kind,
            origin=tuple(origin) if quad.origin else (),
        )

    # ==========================================
    # 공 비교 / 국소 거리
    # ==========================================
    @staticmethod
    def _root_vertex(quad: Quadrangulation) -> int:
        return quad.tails[quad.root] if quad.root is not None else 0

    @staticmethod
    def _exhausted(quad: Quadrangulation) -> bool:
        return all(quad.is_complete(v) for v in range(quad.n_vertices))

    def ball_equal(self, a: Quadrangulation, b: Quadrangulation, radius: int) -> Verdict:
        """뿌리 정점 중심 반지름 radius 공 비교 (잘림이 공에 닿으면 UNKNOWN)"""
        ba = self.ball(a, self._root_vertex(a), radius)
        bb = self.ball(b, self._root_vertex(b), radius)
        if ba.status != "complete" or bb.status != "complete":
            return Verdict.UNKNOWN
        same = self.canonical_code(ba.quad, include_marked=False) == self.canonical_code(bb.quad, include_marked=False)
        return Verdict.EQUAL if same else Verdict.DIFFERENT

    def local_distance(self, a: Quadrangulation, b: Quadrangulation, max_radius: int = 32) -> LocalDistance:
        """
        처음으로 공이 달라지는 반지름 r 에 대해 1 / (1 + r).
        두 맵이 모두 소진된 채 같으면 0, cap 까지 같으면 1/(max_radius + 2) 상한.
        """
        ra, rb = self._root_vertex(a), self._root_vertex(b)
        far_a = max(self.bfs_distances(a, ra).values())
        far_b = max(self.bfs_distances(b, rb).values())
        for r in range(max_radius + 1):
            verdict = self.ball_equal(a, b, r)
            if verdict is Verdict.DIFFERENT:
                return LocalDistance(Fraction(1, 1 + r), radius=r)
            if verdict is Verdict.UNKNOWN:
                logger.debug("⚠️ 국소 거리 판정 불가", extra={"radius": r})
                return LocalDistance(Fraction(1, 1 + r), upper_bound=True, radius=r)
            if r > far_a and r > far_b and self._exhausted(a) and self._exhausted(b):
                return LocalDistance(Fraction(0), radius=r)
        return LocalDistance(Fraction(1, max_radius + 2), upper_bound=True, radius=max_radius)

    # ==========================================
    # geodesic 검증
    # ==========================================
    def verify_geodesic(self, quad: Quadrangulation, path: Sequence[int],
                        pairwise: bool = False) -> GeodesicReport:
        """연속 인접성 + d(p_0, p_end) = 길이 (pairwise=True 면 모든 쌍)"""
        length = len(path) - 1
        if any(not (0 <= v < quad.n_vertices) for v in path):
            return GeodesicReport(is_geodesic=False, length=length, failure="missing_vertex")
        if len(set(path)) != len(path):
            return GeodesicReport(is_geodesic=False, length=length, failure="repeated_vertex")
        if length <= 0:
            return GeodesicReport(is_geodesic=True, length=max(length, 0), endpoint_distance=0)
        adjacency = quad.adjacency
        for u, v in zip(path, path[1:]):
            if v not in adjacency[u]:
                return GeodesicReport(is_geodesic=False, length=length, failure="not_adjacent")
        dist = self.bfs_distances(quad, path[0])
        end = dist.get(path[-1])
        if end != length:
            return GeodesicReport(is_geodesic=False, length=length, endpoint_distance=end,
                                  failure="endpoint_distance")
        if pairwise:
            for i, u in enumerate(path):
                du = self.bfs_distances(quad, u)
                if any(du.get(w) != abs(j - i) for j, w in enumerate(path)):
                    return GeodesicReport(is_geodesic=False, length=length, endpoint_distance=end,
                                          failure="pairwise", pairwise_checked=True)
        return GeodesicReport(is_geodesic=True, length=length, endpoint_distance=end,
                              pairwise_checked=pairwise)


metric_service = MetricService()
