# services/cvs_service.py
"""
🧩 CVS 전단사 전담 서비스

역할:
- successor 규칙 (유한: 순환 탐색 + v★, 무한 절단: 창 안 탐색 + λ / indeterminate)
- 유한 트리 → 점 찍힌 사각분할 (rotation system 포함)
- 절단된 spine 트리 → 평면 / 반평면 패치 (완전성 플래그)
- geodesic-boundary 사각분할, geodesic 추출
- Θ̄⁽¹⁾ / Θ̄⁽²⁾ 반평면 패치 붙이기, 내장 부분맵 제한
- 면 감사 (Euler, 면 차수, 이분성)

코너 c 에서 나가는 호(arc)의 dart 2e 는 코너 쪽, 2e+1 은 successor 쪽이다.
"""

from collections import Counter, defaultdict
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from logging_config import get_logger
from model.maps import (
    INDETERMINATE,
    STAR,
    CvsImage,
    EmbeddedSubmap,
    FaceAudit,
    GeodesicBoundaryQuad,
    GluedPatch,
    Quadrangulation,
    Sink,
    SuccessorMap,
)
from model.trees import CornerSequence, LabeledTree, SpineTree
from services.chain_service import chain_model
from services.errors import DomainError, IndeterminateError, IndexRangeError, InvariantViolationError
from services.tree_service import SpineLayout, TreeAssembler, tree_service

logger = get_logger(__name__)

VARIANTS = ("S_minus", "S1", "S2")

# S2 에서 c_0 오른쪽(양의 인덱스)의 모든 라벨은 이 값 이상
_S2_TAIL_FLOOR = 2


class CvsService:
    """Cori-Vauquelin-Schaeffer 전단사와 그 변형들"""

    # ==========================================
    # successor
    # ==========================================
    def _tail_rule(self, label: int, variant: Optional[str]):
        if variant is None:
            return STAR
        if variant == "S2" and label - 1 < _S2_TAIL_FLOOR:
            return Sink("lambda", label - 1)
        return INDETERMINATE

    def successor(self, cs: CornerSequence, i: int, variant: Optional[str] = None):
        """코너 i 의 successor (코너 인덱스 또는 Sink)"""
        if i not in cs:
            raise DomainError("corner index outside the sequence", {"i": i})
        target = cs.label(i) - 1
        if cs.cyclic:
            n = len(cs)
            for step in range(1, n):
                j = (i + step) % n
                if cs.labels[j] == target:
                    return j
            return STAR
        for j in range(i + 1, cs.stop):
            if cs.label(j) == target:
                return j
        return self._tail_rule(cs.label(i), variant)

    def successor_map(self, cs: CornerSequence, variant: Optional[str] = None) -> SuccessorMap:
        """모든 코너의 successor - 오른쪽→왼쪽 한 번 훑기 (순환이면 두 바퀴)"""
        labels = cs.labels
        n = len(cs)
        out: List[object] = [None] * n
        last: Dict[int, int] = {}
        if cs.cyclic:
            for t in range(2 * n - 1, -1, -1):
                p = t % n
                if t < n:
                    j = last.get(labels[p] - 1)
                    out[p] = STAR if j is None else j % n
                last[labels[p]] = t
            return SuccessorMap(0, tuple(out))
        for p in range(n - 1, -1, -1):
            j = last.get(labels[p] - 1)
            out[p] = self._tail_rule(labels[p], variant) if j is None else cs.start + j
            last[labels[p]] = p
        return SuccessorMap(cs.start, tuple(out))

    # ==========================================
    # rotation 조립
    # ==========================================
    @staticmethod
    def _rotations(
        cs: CornerSequence,
        succ: SuccessorMap,
        arc: Dict[int, int],
        n_vertices: int,
        key: Callable[[int, int], int],
        kept: Optional[Dict[int, int]] = None,
    ) -> List[Tuple[int, ...]]:
        """
        정점 rotation = 섹터 순서대로 [들어오는 dart (가까운 출발 코너 먼저), 나가는 dart, 유지된 트리 dart]
        """
        incoming: Dict[int, List[int]] = defaultdict(list)
        for i, t in succ.items():
            if isinstance(t, int) and i in arc:
                incoming[t].append(i)
        by_vertex: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
        for i in cs.indices():
            by_vertex[cs.vertex(i)].append((cs.sector(i), i))

        rot: List[Tuple[int, ...]] = [()] * n_vertices
        for v, corners in by_vertex.items():
            darts: List[int] = []
            for _, j in sorted(corners):
                darts.extend(2 * arc[i] + 1 for i in sorted(incoming[j], key=lambda i: key(j, i)))
                if j in arc:
                    darts.append(2 * arc[j])
                if kept and j in kept:
                    darts.append(kept[j])
            rot[v] = tuple(darts)
        return rot

    # ==========================================
    # 유한 CVS
    # ==========================================
    def cvs_finite(self, tree: LabeledTree) -> CvsImage:
        """
        루트 라벨 0 인 유한 트리 → 점 찍힌 사각분할

        코너마다 호 하나, v★ 의 라벨은 min ℓ - 1, 루트 = c_0 에서 나가는 호.
        """
        if tree.root_label != 0:
            raise DomainError("cvs_finite needs root label 0", {"root_label": tree.root_label})
        V = tree.tree.vertex_count
        star = V
        star_label = tree.min_label - 1
        origin = tuple(("tree", v) for v in range(V)) + (("star",),)

        if tree.edge_count == 0:
            quad = Quadrangulation(
                n_vertices=2, tails=(0, 1), rotation=((0,), (1,)), root=0,
                labels=(0, -1), marked=1, kind="finite", origin=origin,
            )
            return CvsImage(quad, SuccessorMap(0, (STAR,)), {0: 0}, star=star,
                            corners=tree_service.corner_sequence(tree))

        cs = tree_service.corner_sequence(tree)
        N = len(cs)
        succ = self.successor_map(cs)
        arc = {i: i for i in range(N)}
        tails: List[int] = []
        for i in range(N):
            t = succ[i]
            tails.extend((cs.vertices[i], star if t is STAR else cs.vertices[t]))

        rot = self._rotations(cs, succ, arc, V, key=lambda j, i: (j - i) % N)
        star_rot = tuple(2 * i + 1 for i in range(N - 1, -1, -1) if succ[i] is STAR)
        quad = Quadrangulation(
            n_vertices=V + 1,
            tails=tuple(tails),
            rotation=tuple(rot) + (star_rot,),
            root=0,
            labels=tuple(tree.labels) + (star_label,),
            marked=star,
            kind="finite",
            origin=origin,
        )
        return CvsImage(quad, succ, arc, star=star, corners=cs)

    # ==========================================
    # 무한 변형 (절단)
    # ==========================================
    def cvs_infinite(self, st: SpineTree, variant: str) -> CvsImage:
        """절단된 spine 트리 → 평면(S_minus) / 반평면(S1, S2) 패치"""
        return self._cvs_on_layout(tree_service.spine_layout(st), variant)

    def _cvs_on_layout(self, layout: SpineLayout, variant: str) -> CvsImage:
        if variant not in VARIANTS:
            raise DomainError("unknown CVS variant", {"variant": variant})
        cs = layout.corners
        tree = layout.tree
        V = tree.tree.vertex_count
        succ = self.successor_map(cs, variant)

        lam_levels = sorted({t.level for _, t in succ.items() if isinstance(t, Sink) and t.kind == "lambda"})
        lambdas: Dict[int, int] = {}
        if lam_levels:
            for k, m in enumerate(range(lam_levels[0], lam_levels[-1] + 1)):
                lambdas[m] = V + k

        tails: List[int] = []
        arc: Dict[int, int] = {}
        lam_sources: Dict[int, List[int]] = defaultdict(list)
        for i, t in succ.items():
            if isinstance(t, int):
                head = cs.vertex(t)
            elif t.kind == "lambda":
                head = lambdas[t.level]
                lam_sources[t.level].append(i)
            else:
                continue
            arc[i] = len(tails) // 2
            tails.extend((cs.vertex(i), head))

        up_dart: Dict[int, int] = {}
        down_dart: Dict[int, int] = {}
        levels = list(lambdas)
        for m in levels[1:]:
            e = len(tails) // 2
            tails.extend((lambdas[m], lambdas[m - 1]))
            down_dart[m] = 2 * e
            up_dart[m - 1] = 2 * e + 1

        rot = self._rotations(cs, succ, arc, V, key=lambda j, i: j - i)
        for m in levels:
            darts = [up_dart[m]] if m in up_dart else []
            darts.extend(2 * arc[i] + 1 for i in sorted(lam_sources[m], reverse=True))
            if m in down_dart:
                darts.append(down_dart[m])
            rot.append(tuple(darts))

        first_pos: Dict[int, int] = {}
        for i in cs.indices():
            first_pos.setdefault(cs.label(i), i)
        determinate = {i for i, t in succ.items() if t is not INDETERMINATE}
        top = layout.spine_ids[-1]
        ok = [v != top for v in range(V)]
        for i in cs.indices():
            v = cs.vertex(i)
            if not ok[v]:
                continue
            if i not in determinate or first_pos[cs.label(i)] >= i:
                ok[v] = False
        for m in levels:
            ok.append(
                m <= 0
                and first_pos.get(m, 1) <= 0
                and (m - 1) in lambdas
                and (m + 1) in lambdas
            )
        if not any(ok):
            logger.error("❌ 창이 너무 작음: 완전한 정점 없음", extra={"variant": variant, "corners": len(cs)})
            raise IndeterminateError("window too small to determine any complete vertex",
                                     {"variant": variant, "horizon": len(layout.spine_ids) - 1})

        quad = Quadrangulation(
            n_vertices=V + len(levels),
            tails=tuple(tails),
            rotation=tuple(rot),
            root=2 * arc[0] if 0 in arc else None,
            labels=tuple(tree.labels) + tuple(levels),
            complete=tuple(ok),
            kind=variant,
            origin=tuple(("tree", v) for v in range(V)) + tuple(("lambda", m) for m in levels),
        )
        logger.debug("✅ 무한 CVS 패치", extra={"variant": variant, "vertices": quad.n_vertices,
                                                "complete": sum(ok)})
        return CvsImage(quad, succ, arc, lambdas=lambdas, corners=cs)

    # ==========================================
    # geodesic-boundary 사각분할
    # ==========================================
    def build_geodesic_boundary_quad(self, tree: LabeledTree) -> GeodesicBoundaryQuad:
        """
        루트의 마지막 자식으로 ṽ_1, 그 아래로 ṽ_2 .. ṽ_δ (= v★) 사슬을 붙인 θ̃ 에서
        θ 의 코너만 호를 내고 사슬 트리 간선은 유지한다.
        """
        if tree.root_label != 0:
            raise DomainError("geodesic boundary quad needs root label 0", {"root_label": tree.root_label})
        V = tree.tree.vertex_count
        delta = 1 - tree.min_label
        k = len(tree.children[0])

        asm = TreeAssembler(0)
        asm.splice_forest(0, tree)
        prev = 0
        for i in range(1, delta + 1):
            prev = asm.add_vertex(prev, -i)
        tt = asm.build()
        star = V + delta - 1

        cs = tree_service.corner_sequence(tt)
        N = len(cs)
        succ = self.successor_map(cs)
        parent = tt.parent
        children = tt.children

        def next_neighbor(v: int, s: int) -> int:
            if v == 0:
                return children[0][s]
            nbrs = (parent[v],) + children[v]
            return nbrs[(s + 1) % len(nbrs)]

        def is_source(i: int) -> bool:
            v = cs.vertices[i]
            if v >= V:
                return False
            return not (v == 0 and k >= 1 and cs.sectors[i] == k)

        tails: List[int] = []
        arc: Dict[int, int] = {}
        for i in range(N):
            if is_source(i):
                arc[i] = len(tails) // 2
                tails.extend((cs.vertices[i], cs.vertices[succ[i]]))

        tree_dart: Dict[Tuple[int, int], int] = {}
        chain = [0] + list(range(V, V + delta))
        for a, b in zip(chain, chain[1:]):
            e = len(tails) // 2
            tails.extend((a, b))
            tree_dart[(a, b)] = 2 * e
            tree_dart[(b, a)] = 2 * e + 1
        kept: Dict[int, int] = {}
        for i in range(N):
            v = cs.vertices[i]
            nb = next_neighbor(v, cs.sectors[i])
            if (v, nb) in tree_dart:
                kept[i] = tree_dart[(v, nb)]

        rot = self._rotations(cs, succ, arc, V + delta, key=lambda j, i: (j - i) % N, kept=kept)
        quad = Quadrangulation(
            n_vertices=V + delta,
            tails=tuple(tails),
            rotation=tuple(rot),
            root=2 * arc[0],
            labels=tuple(tt.labels),
            marked=star,
            kind="geodesic_boundary",
            origin=tuple(("tree", v) for v in range(V)) + tuple(("chain", i) for i in range(1, delta + 1)),
        )

        gamma = [0]
        c = 0
        while cs.vertices[c] != star:
            c = succ[c]
            gamma.append(cs.vertices[c])
        return GeodesicBoundaryQuad(quad=quad, gamma=tuple(gamma), gamma_tilde=tuple(chain), delta=delta)

    # ==========================================
    # geodesic 추출
    # ==========================================
    def extract_geodesics(self, image: CvsImage, which: str) -> Tuple[int, ...]:
        """
        tau: 루트 이후 시계방향으로 라벨이 하나씩 작은 첫 코너들
        tau_hat: 반시계방향 유사물
        lambda: λ 사슬 (레벨 내림차순)

        절단된 패치에서는 창이 끝나는 곳까지의 부분 경로를 돌려준다.
        """
        if which == "lambda":
            if not image.lambdas:
                raise DomainError("image has no lambda chain")
            return tuple(image.lambdas[m] for m in sorted(image.lambdas, reverse=True))
        if which not in ("tau", "tau_hat"):
            raise DomainError("which must be tau, tau_hat or lambda", {"which": which})
        cs = image.corners
        if cs is None:
            raise DomainError("image carries no corner sequence")
        if len(cs) == 0:
            return (0, image.star) if image.star is not None else (0,)

        if cs.cyclic:
            n = len(cs)
            order = range(n) if which == "tau" else [0] + list(range(n - 1, 0, -1))
        else:
            order = range(0, cs.stop) if which == "tau" else range(0, cs.start - 1, -1)
        first: Dict[int, int] = {}
        for i in order:
            first.setdefault(cs.label(i), i)

        path: List[int] = []
        level = cs.label(0)
        while level in first:
            path.append(cs.vertex(first[level]))
            level -= 1
        if image.star is not None and image.quad.labels[image.star] == level:
            path.append(image.star)
        elif not cs.cyclic:
            logger.debug("⚠️ 창 안에서 geodesic 이 끊김", extra={"which": which, "length": len(path) - 1})
        return tuple(path)

    # ==========================================
    # 반평면 붙이기
    # ==========================================
    @staticmethod
    def tau_bar_corners(cs: CornerSequence) -> Dict[int, int]:
        """
        τ̄(n): n ≤ 0 이면 c_0 부터 시계방향 첫 라벨 n 코너,
        n ≥ 1 이면 반시계방향 마지막(가장 음의 인덱스) 라벨 n 코너
        """
        out: Dict[int, int] = {}
        for i in range(0, cs.stop):
            lab = cs.label(i)
            if lab <= 0:
                out.setdefault(lab, i)
        for i in range(cs.start, 0):
            lab = cs.label(i)
            if lab >= 1:
                out.setdefault(lab, i)
        return out

    def glue_half_planes(self, patch1: CvsImage, patch2: CvsImage) -> GluedPatch:
        """
        τ̄⁽¹⁾(n) 와 λ_n 을 같은 정점으로, 경계 호 e_n = (τ̄(n) → τ̄(n-1)) 과
        사슬 간선 (λ_n, λ_{n-1}) 을 같은 간선으로 본다. 루트 = Θ̄⁽¹⁾ 의 c_0 호.
        """
        q1, q2 = patch1.quad, patch2.quad
        tau = self.tau_bar_corners(patch1.corners)
        common = {n for n in tau if n in patch2.lambdas}
        if 0 not in common:
            logger.error("❌ 붙일 공통 레벨 범위 없음",
                         extra={"tau_levels": sorted(tau), "lambda_levels": sorted(patch2.lambdas)})
            raise IndexRangeError("boundary index ranges do not overlap at level 0",
                                  {"tau": sorted(tau), "lambda": sorted(patch2.lambdas)})
        lo = hi = 0
        while lo - 1 in common and tau[lo] in patch1.arc_of_corner:
            lo -= 1
        while hi + 1 in common and tau[hi + 1] in patch1.arc_of_corner:
            hi += 1
        run = range(lo, hi + 1)

        seam_vertex = {n: patch1.corners.vertex(tau[n]) for n in run}
        boundary_edge = {n: patch1.arc_of_corner[tau[n]] for n in run if n - 1 in seam_vertex}
        for n, e in boundary_edge.items():
            if q1.head(2 * e) != seam_vertex[n - 1]:
                raise IndexRangeError("boundary arc does not follow the geodesic", {"level": n})

        lam_vertex = {patch2.lambdas[n]: n for n in run}
        offset = q1.n_vertices
        vmap2: Dict[int, int] = {}
        fresh = offset
        for v in range(q2.n_vertices):
            if v in lam_vertex:
                vmap2[v] = seam_vertex[lam_vertex[v]]
            else:
                vmap2[v] = fresh
                fresh += 1

        E1 = q1.edge_count
        dmap2: Dict[int, int] = {}
        identified = set()
        tails = list(q1.tails)
        rank = 0
        for e in range(q2.edge_count):
            a, b = q2.tails[2 * e], q2.tails[2 * e + 1]
            if a in lam_vertex and b in lam_vertex:
                m, m2 = lam_vertex[a], lam_vertex[b]
                top = max(m, m2)
                if abs(m - m2) == 1 and top in boundary_edge:
                    e1 = boundary_edge[top]
                    down = 2 * e if m > m2 else 2 * e + 1
                    dmap2[down] = 2 * e1
                    dmap2[down ^ 1] = 2 * e1 + 1
                    identified.update((2 * e, 2 * e + 1))
                    continue
            new = E1 + rank
            rank += 1
            dmap2[2 * e] = 2 * new
            dmap2[2 * e + 1] = 2 * new + 1
            tails.extend((vmap2[a], vmap2[b]))

        rotation: List[Tuple[int, ...]] = list(q1.rotation) + [()] * (fresh - offset)
        complete = [q1.is_complete(v) for v in range(q1.n_vertices)] + [True] * (fresh - offset)
        for v in range(q2.n_vertices):
            if v in lam_vertex:
                continue
            rotation[vmap2[v]] = tuple(dmap2[d] for d in q2.rotation[v])
            complete[vmap2[v]] = q2.is_complete(v)
        for n in run:
            u = seam_vertex[n]
            rot1 = q1.rotation[u]
            d_down = 2 * boundary_edge[n] if n in boundary_edge else None
            d_up = 2 * boundary_edge[n + 1] + 1 if n + 1 in boundary_edge else None
            if d_down is not None and d_up is not None:
                i0 = rot1.index(d_down)
                turned = rot1[i0:] + rot1[:i0]
                part1 = turned[: turned.index(d_up) + 1]
                whole = True
            else:
                part1 = rot1
                whole = False
            lam = patch2.lambdas[n]
            part2 = tuple(dmap2[d] for d in q2.rotation[lam] if d not in identified)
            rotation[u] = tuple(part1) + part2
            complete[u] = whole and q1.is_complete(u) and q2.is_complete(lam)

        labels = list(q1.labels) + [None] * (fresh - offset)
        origin = [("p1",) + tuple(o) for o in q1.origin] + [()] * (fresh - offset)
        for v in range(q2.n_vertices):
            if v not in lam_vertex:
                labels[vmap2[v]] = q2.labels[v]
                origin[vmap2[v]] = ("p2",) + tuple(q2.origin[v])

        quad = Quadrangulation(
            n_vertices=fresh,
            tails=tuple(tails),
            rotation=tuple(rotation),
            root=q1.root,
            labels=tuple(labels),
            complete=tuple(complete),
            kind="glued",
            origin=tuple(origin),
        )
        logger.debug("✅ 반평면 붙이기", extra={"seam": [lo, hi], "vertices": fresh})
        return GluedPatch(quad=quad, seam=seam_vertex, second_offset=offset)

    # ==========================================
    # 내장 부분맵
    # ==========================================
    @staticmethod
    def boundary_leaks(quad: Quadrangulation, kept: Sequence[int], boundary: Set[int]) -> List[int]:
        """kept 안에서 바깥 정점과 이웃하지만 boundary 에 없는 정점"""
        inside = set(kept)
        leaks = set()
        for e in range(quad.edge_count):
            a, b = quad.tails[2 * e], quad.tails[2 * e + 1]
            if (a in inside) != (b in inside):
                inner = a if a in inside else b
                if inner not in boundary:
                    leaks.add(inner)
        return sorted(leaks)

    def restrict_to_embedded_submap(self, st: SpineTree, n: int, epsilon_tail: float = 1e-6,
                                    image: Optional[CvsImage] = None) -> EmbeddedSubmap:
        """
        Θ̄⁽¹⁾ 절단 안의 A_n (spine 의 마지막 n 방문까지 + 양쪽 숲) 과
        경계 사슬 γ⁽ʳ⁾ 로 이루어진 부분맵. 라벨은 -n 만큼 옮긴다.
        """
        if n < 1:
            raise DomainError("embedded submap needs n >= 1", {"n": n})
        layout = tree_service.spine_layout(st)
        if image is None:
            image = self._cvs_on_layout(layout, "S1")
        cs = layout.corners
        spine = st.spine_labels
        visits = [i for i, x in enumerate(spine) if x == n]
        if not visits or visits[-1] >= st.horizon:
            raise IndeterminateError("spine does not leave level n inside the horizon", {"n": n})
        sigma = visits[-1]
        if chain_model.h(n) > epsilon_tail * chain_model.h(spine[-1]):
            raise IndeterminateError("insufficient horizon to certify the last visit",
                                     {"n": n, "top_label": spine[-1]})

        lookup = {(cs.vertex(i), cs.sector(i)): i for i in cs.indices()}
        s_vertex = layout.spine_ids[sigma]
        p_left = lookup[(s_vertex, layout.left_counts[sigma])]
        right_sector = layout.left_counts[sigma] + 1
        if s_vertex == 0:
            right_sector %= len(layout.tree.children[0])
        p_right = lookup[(s_vertex, right_sector)]

        inside = [v for v in range(layout.tree.tree.vertex_count) if layout.owner[v] <= sigma]
        min_a = min(layout.tree.labels[v] for v in inside)
        delta = n - min_a + 1

        chain_corners = [p_left]
        j = p_left
        for i in range(1, delta + 1):
            while j < cs.stop and cs.label(j) != n - i:
                j += 1
            if j >= cs.stop:
                raise IndeterminateError("boundary chain leaves the window", {"n": n, "level": n - i})
            chain_corners.append(j)

        sources = list(range(p_right, p_left + 1)) + chain_corners[1:-1]
        missing = [c for c in sources if c not in image.arc_of_corner]
        if missing:
            raise IndeterminateError("submap arc not determinate", {"corners": missing[:5]})

        amb = image.quad
        chain_vertices = [cs.vertex(c) for c in chain_corners]
        keep_vertices = sorted(inside) + chain_vertices[1:]
        new_id = {v: k for k, v in enumerate(keep_vertices)}
        dmap: Dict[int, int] = {}
        tails: List[int] = []
        for k, c in enumerate(sources):
            e = image.arc_of_corner[c]
            dmap[2 * e] = 2 * k
            dmap[2 * e + 1] = 2 * k + 1
            tails.extend((new_id[amb.tails[2 * e]], new_id[amb.tails[2 * e + 1]]))
        rotation = tuple(tuple(dmap[d] for d in amb.rotation[v] if d in dmap) for v in keep_vertices)

        gamma_left = [s_vertex]
        c = p_right
        while cs.label(c) > n - delta:
            c = image.successors[c]
            if not isinstance(c, int):
                raise IndeterminateError("left boundary geodesic leaves the window", {"n": n})
            gamma_left.append(cs.vertex(c))

        boundary = set(gamma_left) | set(chain_vertices)
        leaks = self.boundary_leaks(amb, keep_vertices, boundary)
        if leaks:
            logger.error("❌ 부분맵 경계 성질 위반", extra={"n": n, "sigma": sigma, "leaks": leaks[:5]})
            raise InvariantViolationError(
                "submap vertex off the boundary has a neighbour outside", {"n": n, "vertices": leaks[:5]}
            )

        quad = Quadrangulation(
            n_vertices=len(keep_vertices),
            tails=tuple(tails),
            rotation=rotation,
            root=dmap[2 * image.arc_of_corner[p_right]],
            labels=tuple(amb.labels[v] - n for v in keep_vertices),
            marked=new_id[chain_vertices[-1]],
            kind="embedded_submap",
            origin=tuple(("ambient", v) for v in keep_vertices),
        )
        gbq = GeodesicBoundaryQuad(
            quad=quad,
            gamma=tuple(new_id[v] for v in gamma_left),
            gamma_tilde=tuple(new_id[v] for v in chain_vertices),
            delta=delta,
        )
        return EmbeddedSubmap(boundary_quad=gbq, ambient=tuple(keep_vertices), sigma=sigma)

    # ==========================================
    # 감사
    # ==========================================
    def face_audit(self, quad: Quadrangulation) -> FaceAudit:
        """면 차수 분포, Euler 표수 (모든 면이 완전할 때), 라벨 이분성"""
        degrees: Counter = Counter()
        incomplete = 0
        for orbit in quad.faces():
            if all(quad.is_complete(quad.tails[d]) for d in orbit):
                degrees[len(orbit)] += 1
            else:
                incomplete += 1
        faces = sum(degrees.values())
        euler = quad.n_vertices - quad.edge_count + faces if incomplete == 0 else None
        bipartite = all(
            quad.labels[u] is not None and quad.labels[v] is not None
            and abs(quad.labels[u] - quad.labels[v]) == 1
            for u, v in quad.edges()
        )
        return FaceAudit(
            vertices=quad.n_vertices,
            edges=quad.edge_count,
            faces=faces,
            degrees=dict(degrees),
            incomplete_faces=incomplete,
            euler=euler,
            bipartite=bipartite,
        )

    def check_label_distances(self, image: CvsImage) -> List[int]:
        """d(u, v★) ≠ ℓ_u - ℓ★ 인 정점 목록 (비어 있어야 정상)"""
        from services.metric_service import metric_service

        if image.star is None:
            raise DomainError("label distance check needs a pointed map")
        dist = metric_service.bfs_distances(image.quad, image.star)
        star_label = image.quad.labels[image.star]
        return [
            v for v in range(image.quad.n_vertices)
            if dist.get(v) != image.quad.labels[v] - star_label
        ]


cvs_service = CvsService()
