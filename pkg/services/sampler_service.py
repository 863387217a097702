# services/sampler_service.py
"""
🎲 랜덤 트리 샘플러 전담 서비스

역할:
- 임계 Geom(1/2) Galton-Watson 라벨 트리 ρ(x) 와 조건부 ρ⁺ / ρ⁻ (rejection)
- 체인 X 의 last-hit 경로 (certified horizon: h(k)/h(L) ≤ epsilon_tail)
- Θ_n: Y 체인 + J + 두 X 체인 + 여섯 숲을 붙인 tri-path 트리 (rejection 없음)
- T_k: spine = last-hit X 경로, 왼쪽 ρ / 오른쪽 ρ⁺
- Θ∞, Θ̄⁽¹⁾, Θ̄⁽²⁾ 절단, τ∞(n) 에서 re-root 한 Θ∞
- 열거 오라클 (enumerate_labeled_trees / law_table)

샘플러는 명시적 난수 상태(numpy Generator)의 순수 함수다.
"""

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import comb
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import QUADLAB_ENUM_MAX_EDGES, QUADLAB_RNG_CHUNK, get_default_budget
from logging_config import get_logger
from model.schemas import SamplerBudget
from model.trees import LabeledTree, MarkedTree, PlanarTree, SpineTree
from services.chain_service import chain_model
from services.errors import (
    BudgetExceededError,
    EnumerationTooLargeError,
    InvalidLawError,
    RejectionLimitError,
)
from services.tree_service import Law, LawKind, TreeAssembler, tree_service

logger = get_logger(__name__)


# ==========================================
# 난수 스트림
# ==========================================
def stream_rng(master_seed: int, replicate: int = 0) -> np.random.Generator:
    """(master seed, replicate index) → 독립 스트림"""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(replicate,)))


class RandomStream:
    """numpy Generator 위의 버퍼링된 순차 추출기"""

    def __init__(self, rng: np.random.Generator, chunk: int = QUADLAB_RNG_CHUNK):
        self.rng = rng
        self.chunk = chunk
        self._offspring: List[int] = []
        self._incr: List[int] = []
        self._unif: List[float] = []

    def offspring(self) -> int:
        """Geom(1/2) on {0, 1, 2, ...}"""
        if not self._offspring:
            self._offspring = (self.rng.geometric(0.5, size=self.chunk) - 1).tolist()[::-1]
        return self._offspring.pop()

    def increment(self) -> int:
        """{-1, 0, +1} 균등"""
        if not self._incr:
            self._incr = self.rng.integers(-1, 2, size=self.chunk).tolist()[::-1]
        return self._incr.pop()

    def uniform(self) -> float:
        if not self._unif:
            self._unif = self.rng.random(self.chunk).tolist()[::-1]
        return self._unif.pop()


def as_stream(rng) -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    return RandomStream(rng)


# ==========================================
# 내부 제어 신호
# ==========================================
class _Oversize(Exception):
    """출력 트리가 truncate_above 를 넘음"""


class _Guard:
    """한 구성 전체의 간선 수 감시"""

    def __init__(self, cap_total: Optional[int] = None):
        self.cap_total = cap_total
        self.used = 0

    def room(self) -> Optional[int]:
        return None if self.cap_total is None else self.cap_total - self.used

    def commit(self, edges: int) -> None:
        self.used += edges
        if self.cap_total is not None and self.used > self.cap_total:
            raise _Oversize()


# ==========================================
# 결과 타입
# ==========================================
@dataclass(frozen=True)
class LastHit:
    """X 체인 경로: path = 0 .. 마지막 k 방문, full = 인증 레벨 L 까지 시뮬레이션한 전체"""
    k: int
    path: Tuple[int, ...]
    full: Tuple[int, ...]
    level: int


@dataclass
class TriPathDraw:
    """Θ_n tri-path 구성요소 (결합 실험에서 Θ̄ 와 공유)"""
    n: int
    y: Tuple[int, ...]
    J: int
    x_chain: LastHit
    xh_chain: LastHit
    y_left: List[LabeledTree] = field(default_factory=list)
    y_right: List[LabeledTree] = field(default_factory=list)
    x_plus: List[Optional[LabeledTree]] = field(default_factory=list)
    x_free: List[LabeledTree] = field(default_factory=list)
    xh_plus: List[Optional[LabeledTree]] = field(default_factory=list)
    xh_free: List[LabeledTree] = field(default_factory=list)
    a_left: Optional[LabeledTree] = None
    a_mid: Optional[LabeledTree] = None
    a_right: Optional[LabeledTree] = None

    @property
    def y_j(self) -> int:
        return self.y[self.J]

    @property
    def m(self) -> int:
        return len(self.x_chain.path) - 1

    @property
    def m_hat(self) -> int:
        return len(self.xh_chain.path) - 1


@dataclass(frozen=True)
class ThetaBarPrefix:
    """Θ̄ 절단의 앞부분 (결합 실험용, 최종 좌표계 라벨)"""
    spine: Tuple[int, ...]
    left: Tuple[LabeledTree, ...]
    right: Tuple[LabeledTree, ...]


def catalan(e: int) -> int:
    return comb(2 * e, e) // (e + 1)


def labeled_tree_count(edges: int) -> int:
    """간선 수 edges 인 라벨 트리 개수 = Catalan(e)·3^e"""
    return catalan(edges) * 3 ** edges


class SamplerService:
    """랜덤 트리 샘플러"""

    # ==========================================
    # Galton-Watson 성장
    # ==========================================
    def _grow(
        self,
        stream: RandomStream,
        root_label: int,
        budget: SamplerBudget,
        reject_below: Optional[int] = None,
        guard: Optional[_Guard] = None,
        component: str = "rho",
    ) -> Optional[LabeledTree]:
        """
        preorder 순서로 GW 트리 생성

        reject_below: 이 값보다 작은 라벨이 나오면 즉시 None (rejection 조기 종료)
        """
        parent = [-1]
        labels = [root_label]
        limit = budget.max_tree_edges
        room = guard.room() if guard is not None else None
        over = False
        stack = [[0, stream.offspring()]]
        while stack:
            top = stack[-1]
            if top[1] == 0:
                stack.pop()
                continue
            top[1] -= 1
            p = top[0]
            lab = labels[p] + stream.increment()
            if reject_below is not None and lab < reject_below:
                return None
            v = len(parent)
            if v > limit:
                raise BudgetExceededError(component, "max_tree_edges", v, limit)
            if room is not None and v > room:
                # rejection 시도는 수락이 확정될 때까지 계속 생성
                if reject_below is None:
                    raise _Oversize()
                over = True
            parent.append(p)
            labels.append(lab)
            stack.append([v, stream.offspring()])
        if over:
            raise _Oversize()
        if guard is not None:
            guard.commit(len(parent) - 1)
        return LabeledTree(PlanarTree(tuple(parent)), tuple(labels))

    def _reaches_below(self, stream: RandomStream, root_label: int, floor: int) -> bool:
        """ρ_{root} 트리를 (라벨, 남은 자식 수) 스택만으로 생성, floor 미만 라벨이 나오면 True"""
        if root_label < floor:
            return True
        stack = [[root_label, stream.offspring()]]
        while stack:
            top = stack[-1]
            if top[1] == 0:
                stack.pop()
                continue
            top[1] -= 1
            lab = top[0] + stream.increment()
            if lab < floor:
                return True
            stack.append([lab, stream.offspring()])
        return False

    def _conditioned(
        self,
        stream: RandomStream,
        root_label: int,
        at_least: int,
        budget: SamplerBudget,
        guard: Optional[_Guard] = None,
        component: str = "rho_plus",
    ) -> LabeledTree:
        """ρ_{root} 조건부 (모든 라벨 ≥ at_least), rejection"""
        for _ in range(budget.max_rejections):
            tree = self._grow(stream, root_label, budget, reject_below=at_least,
                              guard=guard, component=component)
            if tree is not None:
                return tree
        raise RejectionLimitError(component, budget.max_rejections, 0)

    def _with_policy(self, budget: SamplerBudget, fn: Callable[[], object], component: str):
        """예산 초과 시 설정에 따라 재샘플 또는 실패"""
        retries = 0
        while True:
            try:
                return fn()
            except BudgetExceededError as e:
                if not budget.resample_oversized or retries >= budget.max_rejections:
                    logger.error(f"❌ 예산 초과: {e}", extra={"component": component})
                    raise
                retries += 1
                logger.warning("⚠️ 예산 초과 → 재샘플", extra={"component": component, "retry": retries})

    # ==========================================
    # ρ / ρ⁺ / ρ⁻
    # ==========================================
    def sample_rho(self, x: int, rng, budget: Optional[SamplerBudget] = None) -> LabeledTree:
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        return self._with_policy(budget, lambda: self._grow(stream, x, budget), "rho")

    def sample_conditioned(self, law: Law, rng, budget: Optional[SamplerBudget] = None
                           ) -> Tuple[LabeledTree, int]:
        """
        rejection sampler - (트리, 시도 횟수) 반환

        기대 시도 횟수는 ρ⁺ 에서 1/w(x), ρ⁻ 에서 1/(1-w(x)).
        """
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        if law.kind is LawKind.RHO:
            return self.sample_rho(law.x, stream, budget), 1
        if law.x < 1:
            if law.kind is LawKind.RHO_PLUS:
                raise InvalidLawError("RhoPlus needs x >= 1 (w(0) = 0)", {"x": law.x})
            return self.sample_rho(law.x, stream, budget), 1

        attempts = 0
        while attempts < budget.max_rejections:
            attempts += 1
            if law.kind is LawKind.RHO_PLUS:
                tree = self._with_policy(
                    budget, lambda: self._grow(stream, law.x, budget, reject_below=1), "rho_plus"
                )
                if tree is not None:
                    return tree, attempts
            else:
                tree = self._with_policy(budget, lambda: self._grow(stream, law.x, budget), "rho_minus")
                if tree.min_label <= 0:
                    return tree, attempts
        logger.error("❌ rejection 한도 초과", extra={"law": str(law), "attempts": attempts})
        raise RejectionLimitError(str(law), attempts, 0)

    def sample_rho_plus(self, x: int, rng, budget: Optional[SamplerBudget] = None) -> LabeledTree:
        return self.sample_conditioned(Law.rho_plus(x), rng, budget)[0]

    def sample_rho_minus(self, x: int, rng, budget: Optional[SamplerBudget] = None) -> LabeledTree:
        return self.sample_conditioned(Law.rho_minus(x), rng, budget)[0]

    def acceptance_rate(self, law: Law, attempts: int, rng, budget: Optional[SamplerBudget] = None) -> float:
        """rejection 사건의 경험적 수락률 (attempts 번 독립 시도)"""
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        if law.kind is LawKind.RHO_PLUS and law.x < 1:
            raise InvalidLawError("RhoPlus needs x >= 1 (w(0) = 0)", {"x": law.x})
        accepted = 0
        for _ in range(attempts):
            if law.kind is LawKind.RHO_PLUS:
                ok = self._grow(stream, law.x, budget, reject_below=1) is not None
            elif law.kind is LawKind.RHO_MINUS:
                ok = self._grow(stream, law.x, budget).min_label <= 0
            else:
                ok = True
            accepted += ok
        return accepted / attempts

    def sample_rho_minus_truncated(self, x: int, rng, truncate_above: int,
                                   budget: Optional[SamplerBudget] = None) -> Optional[LabeledTree]:
        """
        ρ⁻(x) rejection 의 절단 버전: 출력이 truncate_above 간선을 넘으면 None

        라벨 ≤ 0 을 이미 본 큰 시도는 수락(=큰 출력)으로 확정하고 생성을 멈춘다.
        """
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        for _ in range(budget.max_rejections):
            parent = [-1]
            labels = [x]
            seen_low = x <= 0
            stack = [[0, stream.offspring()]]
            big = False
            while stack:
                top = stack[-1]
                if top[1] == 0:
                    stack.pop()
                    continue
                top[1] -= 1
                lab = labels[top[0]] + stream.increment()
                v = len(parent)
                if v > budget.max_tree_edges:
                    raise BudgetExceededError("rho_minus", "max_tree_edges", v, budget.max_tree_edges)
                parent.append(top[0])
                labels.append(lab)
                seen_low = seen_low or lab <= 0
                if v > truncate_above:
                    big = True
                    if seen_low:
                        return None
                stack.append([v, stream.offspring()])
            if seen_low:
                return None if big else LabeledTree(PlanarTree(tuple(parent)), tuple(labels))
        raise RejectionLimitError(f"rho_minus({x})", budget.max_rejections, 0)

    # ==========================================
    # 체인 경로
    # ==========================================
    def sample_x_path(self, steps: int, rng, start: int = 0) -> Tuple[int, ...]:
        """X 체인 steps 걸음"""
        stream = as_stream(rng)
        path = [start]
        x = start
        up, stay, _ = chain_model._x_rows(start + steps + 2)
        for _ in range(steps):
            u = stream.uniform()
            if u < up[x]:
                x += 1
            elif u >= up[x] + stay[x]:
                x -= 1
            path.append(x)
        return tuple(path)

    def sample_last_hit(self, k: int, rng, budget: Optional[SamplerBudget] = None) -> LastHit:
        """
        0 에서 출발한 X 의 k 마지막 방문까지의 경로

        레벨 L (h(k)/h(L) ≤ epsilon_tail) 에 닿을 때까지 시뮬레이션하고
        그 안의 마지막 k 방문에서 자른다.
        """
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        if k == 0:
            return LastHit(0, (0,), (0,), 0)
        L = chain_model.certified_level(k, budget.epsilon_tail)
        up_arr, stay_arr, _ = chain_model._x_rows(L + 1)
        up = up_arr.tolist()
        stay = stay_arr.tolist()
        cap = 200 * L * L + 10_000
        path = [0]
        x = 0
        while x < L:
            u = stream.uniform()
            if u < up[x]:
                x += 1
            elif u >= up[x] + stay[x]:
                x -= 1
            path.append(x)
            if len(path) > cap:
                raise BudgetExceededError("x_chain", "steps", len(path), cap)
        last = len(path) - 1
        while path[last] != k:
            last -= 1
        return LastHit(k, tuple(path[: last + 1]), tuple(path), L)

    def sample_y_until_j(self, k: int, rng) -> Tuple[Tuple[int, ...], int]:
        """Y 체인 (k 에서 출발) 과 순차 정지 J"""
        stream = as_stream(rng)
        y = [k]
        while True:
            cur = y[-1]
            if stream.uniform() >= float(chain_model.w(cur - 1)):
                return tuple(y), len(y) - 1
            q_up, q_stay, _ = chain_model.y_step(cur)
            u = stream.uniform()
            if u < float(q_up):
                y.append(cur + 1)
            elif u < float(q_up + q_stay):
                y.append(cur)
            else:
                y.append(cur - 1)

    @staticmethod
    def min_label_tail(n: int, k: int) -> Fraction:
        """P(min ℓ(Θ_n) < -k) = (n+1)(n+2)/((n+k+1)(n+k+2))"""
        return Fraction((n + 1) * (n + 2), (n + k + 1) * (n + k + 2))

    # ==========================================
    # Θ_n (tri-path, rejection 없음)
    # ==========================================
    def draw_tri_path(self, n: int, rng, budget: Optional[SamplerBudget] = None,
                      guard: Optional[_Guard] = None) -> TriPathDraw:
        """Θ_n 구성요소 추출 (Y, J, X, X̂ 와 숲들)"""
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        y, J = self.sample_y_until_j(n, stream)
        y_j = y[J]
        x_chain = self.sample_last_hit(y_j, stream, budget)
        xh_raw = self.sample_last_hit(y_j - 1, stream, budget)
        xh_chain = LastHit(
            xh_raw.k + 1,
            tuple(v + 1 for v in xh_raw.path),
            tuple(v + 1 for v in xh_raw.full),
            xh_raw.level + 1,
        )
        draw = TriPathDraw(n=n, y=y, J=J, x_chain=x_chain, xh_chain=xh_chain)
        if guard is not None:
            guard.commit(J + draw.m + draw.m_hat)

        def free(label: int, name: str) -> LabeledTree:
            return self._grow(stream, label, budget, guard=guard, component=name)

        def plus(label: int, at_least: int, name: str) -> LabeledTree:
            return self._conditioned(stream, label, at_least, budget, guard=guard, component=name)

        for i in range(J):
            draw.y_left.append(plus(y[i], 1, "y_left"))
            draw.y_right.append(plus(y[i], 2, "y_right"))

        xs = x_chain.path
        draw.x_plus.append(None)
        draw.x_free.append(free(0, "x_free"))
        for i in range(1, draw.m):
            draw.x_plus.append(plus(xs[i], 1, "x_plus"))
            draw.x_free.append(free(xs[i], "x_free"))

        draw.a_left = plus(y_j, 1, "a_left")
        draw.a_mid = free(y_j, "a_mid")

        xh = xh_chain.path
        if draw.m_hat >= 1:
            draw.xh_plus.append(None)
            draw.xh_free.append(free(1, "xh_free"))
            for i in range(1, draw.m_hat):
                draw.xh_free.append(free(xh[i], "xh_free"))
                draw.xh_plus.append(plus(xh[i], 2, "xh_plus"))
            draw.a_right = plus(y_j, 2, "a_right")
        return draw

    def assemble_tri_path(self, draw: TriPathDraw) -> MarkedTree:
        """구성요소 → Θ_n 트리 (표시 코너 tau, tau_hat)"""
        y = draw.y
        asm = TreeAssembler(y[0])
        u = 0
        deferred: List[Tuple[int, LabeledTree]] = []
        for i in range(draw.J):
            asm.splice_forest(u, draw.y_left[i])
            child = asm.add_vertex(u, y[i + 1])
            deferred.append((u, draw.y_right[i]))
            u = child
        a = u

        asm.splice_forest(a, draw.a_left)
        xs = draw.x_chain.path
        path_deferred: List[Tuple[int, LabeledTree]] = []
        parent = a
        for i in range(draw.m - 1, 0, -1):
            vtx = asm.add_vertex(parent, xs[i])
            asm.splice_forest(vtx, draw.x_plus[i])
            path_deferred.append((vtx, draw.x_free[i]))
            parent = vtx
        v = asm.add_vertex(parent, 0)
        asm.splice_forest(v, draw.x_free[0])
        for vtx, forest in reversed(path_deferred):
            asm.splice_forest(vtx, forest)

        asm.splice_forest(a, draw.a_mid)
        if draw.m_hat >= 1:
            xh = draw.xh_chain.path
            path_deferred = []
            parent = a
            for i in range(draw.m_hat - 1, 0, -1):
                vtx = asm.add_vertex(parent, xh[i])
                asm.splice_forest(vtx, draw.xh_free[i])
                path_deferred.append((vtx, draw.xh_plus[i]))
                parent = vtx
            vh = asm.add_vertex(parent, 1)
            asm.splice_forest(vh, draw.xh_free[0])
            for vtx, forest in reversed(path_deferred):
                asm.splice_forest(vtx, forest)
            asm.splice_forest(a, draw.a_right)

        for vtx, forest in reversed(deferred):
            asm.splice_forest(vtx, forest)

        tree = asm.build()
        cs = tree_service.corner_sequence(tree)
        tau = next(i for i in cs.indices() if cs.labels[i] == 0)
        scan = [0] + list(range(len(cs) - 1, 0, -1))
        tau_hat = next(i for i in scan if cs.labels[i] == 1)
        return MarkedTree(
            tree=tree,
            marks={"tau": tau, "tau_hat": tau_hat},
            construction="tri_path",
            meta={"J": draw.J, "Y_J": draw.y_j, "m": draw.m, "m_hat": draw.m_hat},
        )

    def sample_theta_n(self, n: int, rng, budget: Optional[SamplerBudget] = None,
                       truncate_above: Optional[int] = None) -> Optional[MarkedTree]:
        """
        Θ_n ~ ρ⁻(n) 을 rejection 없이 샘플링

        truncate_above 가 주어지면 그보다 큰 출력은 생성을 멈추고 None 반환.
        """
        if n < 1:
            raise InvalidLawError("theta_n needs n >= 1", {"n": n})
        budget = budget or get_default_budget()
        stream = as_stream(rng)

        def attempt():
            guard = _Guard(cap_total=truncate_above)
            try:
                return self.assemble_tri_path(self.draw_tri_path(n, stream, budget, guard))
            except _Oversize:
                return None

        return self._with_policy(budget, attempt, "theta_n")

    def draw_tri_path_truncated(self, n: int, rng, truncate_above: int,
                                budget: Optional[SamplerBudget] = None) -> Optional[TriPathDraw]:
        """결합 실험용: 구성요소 합이 truncate_above 간선을 넘으면 None (절단 = censored)"""
        budget = budget or get_default_budget()
        try:
            return self.draw_tri_path(n, rng, budget, _Guard(cap_total=truncate_above))
        except _Oversize:
            return None

    def sample_min_label_event(self, n: int, k: int, rng, budget: Optional[SamplerBudget] = None) -> bool:
        """
        {min ℓ(Θ_n) < -k} 를 트리 생성 없이 판정

        spine 라벨은 모두 ≥ 0, ρ⁺ 숲 라벨은 ≥ 1 이므로 자유 ρ 숲만 라벨 스택으로 흉내 낸다.
        """
        if n < 1 or k < 0:
            raise InvalidLawError("min label event needs n >= 1 and k >= 0", {"n": n, "k": k})
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        floor = -k

        def attempt():
            y, J = self.sample_y_until_j(n, stream)
            y_j = y[J]
            xs = self.sample_last_hit(y_j, stream, budget).path
            xh = self.sample_last_hit(y_j - 1, stream, budget).path
            roots = [0, *xs[1:-1], y_j]
            if len(xh) > 1:
                roots += [v + 1 for v in xh[:-1]]
            return any(self._reaches_below(stream, label, floor) for label in roots)

        return self._with_policy(budget, attempt, "theta_n_min_label")

    # ==========================================
    # T_k (spine = last-hit X 경로)
    # ==========================================
    def sample_T_k(self, k: int, rng, budget: Optional[SamplerBudget] = None,
                   truncate_above: Optional[int] = None) -> Optional[MarkedTree]:
        if k < 1:
            raise InvalidLawError("T_k needs k >= 1", {"k": k})
        budget = budget or get_default_budget()
        stream = as_stream(rng)

        def attempt():
            guard = _Guard(cap_total=truncate_above)
            try:
                chain = self.sample_last_hit(k, stream, budget)
                spine = chain.path
                S = len(spine) - 1
                guard.commit(S)
                left = [self._grow(stream, spine[i], budget, guard=guard, component="T_left")
                        for i in range(S + 1)]
                right = [LabeledTree.single(0)] + [
                    self._conditioned(stream, spine[i], 1, budget, guard=guard, component="T_right")
                    for i in range(1, S + 1)
                ]
            except _Oversize:
                return None

            asm = TreeAssembler(0)
            ids = [0]
            for i in range(S + 1):
                asm.splice_forest(ids[i], left[i])
                if i < S:
                    ids.append(asm.add_vertex(ids[i], spine[i + 1]))
            top = ids[S]
            top_left = len(left[S].children[0])
            for i in range(S, -1, -1):
                asm.splice_forest(ids[i], right[i])
            tree = asm.build()
            lookup = tree_service.corner_index(tree_service.corner_sequence(tree))
            marked = lookup[(top, top_left)]
            return MarkedTree(tree=tree, marks={"top": marked}, construction="last_hit_spine",
                              meta={"S": S, "level": chain.level})

        return self._with_policy(budget, attempt, "T_k")

    def reroot_at_mark(self, mt: MarkedTree, mark: str, keep_as: str = "old_root") -> MarkedTree:
        """표시 코너에서 re-root, 옛 루트 코너를 keep_as 로 표시"""
        tree, mapping = tree_service.reroot(mt.tree, mt.mark(mark))
        return MarkedTree(tree=tree, marks={keep_as: mapping[0]}, construction="reroot",
                          meta=dict(mt.meta))

    # ==========================================
    # spine 트리 (Θ∞, Θ̄⁽¹⁾, Θ̄⁽²⁾)
    # ==========================================
    def sample_theta_infinity(self, horizon: int, rng, budget: Optional[SamplerBudget] = None) -> SpineTree:
        if horizon < 0:
            raise InvalidLawError("horizon must be >= 0", {"horizon": horizon})
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        spine = [0]
        for _ in range(horizon):
            spine.append(spine[-1] + stream.increment())
        left = []
        right = []
        for lab in spine:
            left.append(self._with_policy(budget, lambda: self._grow(stream, lab, budget, component="L"), "L"))
            right.append(self._with_policy(budget, lambda: self._grow(stream, lab, budget, component="R"), "R"))
        return tree_service.spine_compose(spine, left, right, "theta_inf")

    def sample_theta_bar(self, variant: int, horizon: int, rng,
                         budget: Optional[SamplerBudget] = None,
                         prefix: Optional[ThetaBarPrefix] = None) -> SpineTree:
        """
        variant 1: spine = X (0 에서), L_n ~ ρ, R_n ~ ρ⁺ (R_0 은 빈 트리)
        variant 2: 독립 variant-1 추출 + 1, 왼쪽/오른쪽 역할 교환

        prefix 가 주어지면 그 spine / 숲을 그대로 쓰고 나머지만 새로 뽑는다.
        """
        if variant not in (1, 2):
            raise InvalidLawError("theta_bar variant must be 1 or 2", {"variant": variant})
        if horizon < 0:
            raise InvalidLawError("horizon must be >= 0", {"horizon": horizon})
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        off = variant - 1

        spine = list(prefix.spine[: horizon + 1]) if prefix else [off]
        if len(spine) < horizon + 1:
            tail = self.sample_x_path(horizon + 1 - len(spine), stream, start=spine[-1] - off)
            spine.extend(v + off for v in tail[1:])

        left: List[LabeledTree] = list(prefix.left[: horizon + 1]) if prefix else []
        right: List[LabeledTree] = list(prefix.right[: horizon + 1]) if prefix else []
        for i in range(len(left), horizon + 1):
            base = spine[i] - off
            free = self._with_policy(budget, lambda: self._grow(stream, base, budget, component="bar_free"), "bar_free")
            if i == 0:
                plus = LabeledTree.single(0)
            else:
                plus = self._with_policy(
                    budget, lambda: self._conditioned(stream, base, 1, budget, component="bar_plus"), "bar_plus"
                )
            if variant == 1:
                left.append(free)
                right.append(plus)
            else:
                left.append(plus.shift(1))
                right.append(free.shift(1))
        return tree_service.spine_compose(spine, left[: horizon + 1], right[: horizon + 1],
                                          f"theta_bar{variant}")

    def theta_bar_prefixes(self, draw: TriPathDraw) -> Tuple[ThetaBarPrefix, ThetaBarPrefix]:
        """Θ_n 구성요소와 공유하는 Θ̄⁽¹⁾ / Θ̄⁽²⁾ 앞부분"""
        m = draw.m
        left1 = tuple(draw.x_free[:m])
        right1 = (LabeledTree.single(0),) + tuple(draw.x_plus[1:m])
        p1 = ThetaBarPrefix(draw.x_chain.full, left1, right1)
        mh = draw.m_hat
        if mh >= 1:
            left2 = (LabeledTree.single(1),) + tuple(draw.xh_plus[1:mh])
            right2 = tuple(draw.xh_free[:mh])
        else:
            left2, right2 = (), ()
        p2 = ThetaBarPrefix(draw.xh_chain.full, left2, right2)
        return p1, p2

    def sample_theta_infinity_rerooted(self, n: int, rng, budget: Optional[SamplerBudget] = None) -> MarkedTree:
        """
        Θ∞ 를 spine 방향으로 늘려가며 라벨 -n 의 첫 코너 τ∞(n) 을 찾고,
        라벨 +n shift 후 그 코너에서 re-root 한다 (유한 절단).
        """
        if n < 1:
            raise InvalidLawError("rerooted theta_inf needs n >= 1", {"n": n})
        budget = budget or get_default_budget()
        stream = as_stream(rng)
        max_spine = max(budget.horizon, 16 * n * n)

        spine = [0]
        left: List[LabeledTree] = []
        right: List[LabeledTree] = []
        found = False
        while True:
            lab = spine[-1]
            left.append(self._with_policy(budget, lambda: self._grow(stream, lab, budget, component="L"), "L"))
            right.append(self._with_policy(budget, lambda: self._grow(stream, lab, budget, component="R"), "R"))
            if found:
                break
            if lab == -n or left[-1].min_label <= -n:
                found = True
            spine.append(lab + stream.increment())
            if len(spine) > max_spine:
                logger.error("❌ τ∞(n) 탐색 실패", extra={"n": n, "depth": len(spine)})
                raise BudgetExceededError("theta_inf_rerooted", "horizon", len(spine), max_spine)

        st = tree_service.spine_compose(spine, left, right, "theta_inf")
        layout = tree_service.spine_layout(st)
        tau = next(i for i in range(0, layout.top_left + 1) if layout.corners.label(i) == -n)
        rerooted, mapping = tree_service.reroot(layout.tree, tau)
        new_cs = tree_service.corner_sequence(rerooted)
        top = layout.spine_ids[-1]
        top_corner = next(i for i in range(0, layout.top_left + 1) if layout.corners.vertex(i) == top)
        return MarkedTree(
            tree=rerooted.shift(n),
            marks={"old_root": mapping[0]},
            construction="theta_inf_rerooted",
            meta={"spine_depth": len(spine) - 1,
                  "infinite_vertex": new_cs.vertex(mapping[top_corner])},
        )

    # ==========================================
    # 열거 오라클
    # ==========================================
    @staticmethod
    def _shapes(edges: int) -> Iterator[Tuple[int, ...]]:
        """간선 수 edges 인 평면 트리의 preorder 자식 수 열 (Łukasiewicz 단어)"""
        total = edges + 1

        def rec(prefix: List[int], need: int) -> Iterator[Tuple[int, ...]]:
            left = total - len(prefix)
            if need == 0:
                if left == 0:
                    yield tuple(prefix)
                return
            if need > left:
                return
            for k in range(0, left - need + 1):
                prefix.append(k)
                yield from rec(prefix, need - 1 + k)
                prefix.pop()

        yield from rec([], 1)

    @staticmethod
    def _parents_from_counts(counts: Sequence[int]) -> Tuple[int, ...]:
        parent = [-1]
        stack = [[0, counts[0]]]
        for v in range(1, len(counts)):
            while stack[-1][1] == 0:
                stack.pop()
            stack[-1][1] -= 1
            parent.append(stack[-1][0])
            stack.append([v, counts[v]])
        return tuple(parent)

    def enumerate_labeled_trees(self, max_edges: int, root_label: int = 0,
                                exact: bool = False) -> Iterator[LabeledTree]:
        """
        간선 수 ≤ max_edges (exact=True 면 정확히 max_edges) 인 모든 라벨 트리

        max_edges 가 열거 한도를 넘으면 예상 개수와 함께 거절.
        """
        if max_edges > QUADLAB_ENUM_MAX_EDGES:
            estimate = sum(labeled_tree_count(e) for e in range(max_edges + 1))
            raise EnumerationTooLargeError(max_edges, QUADLAB_ENUM_MAX_EDGES, estimate)
        sizes = [max_edges] if exact else range(max_edges + 1)
        for e in sizes:
            for counts in self._shapes(e):
                parent = self._parents_from_counts(counts)
                tree = PlanarTree(parent)
                for deltas in product((-1, 0, 1), repeat=e):
                    labels = [root_label]
                    for v in range(1, e + 1):
                        labels.append(labels[parent[v]] + deltas[v - 1])
                    yield LabeledTree(tree, tuple(labels))

    def law_table(self, law: Law, max_edges: int) -> Dict[bytes, Fraction]:
        """canonical 트리 코드 → 정확한 질량 (지지집합 안의 트리만)"""
        table: Dict[bytes, Fraction] = {}
        for tree in self.enumerate_labeled_trees(max_edges, law.x):
            mass = tree_service.law_mass(tree, law)
            if mass:
                table[tree_service.tree_code(tree)] = mass
        return table

    @staticmethod
    def truncated_tv(observed: Sequence[Optional[bytes]], reference: Mapping[bytes, float]) -> float:
        """
        작은 출력들 + "기타" 로 접은 분포 사이의 TV 거리

        observed 의 None 은 절단된(큰) 출력이다.
        """
        total = len(observed)
        counts = Counter(observed)
        large = counts.pop(None, 0) / total
        ref_small = sum(float(p) for p in reference.values())
        diff = sum(abs(counts.get(key, 0) / total - float(p)) for key, p in reference.items())
        diff += sum(c / total for key, c in counts.items() if key not in reference)
        diff += abs(large - (1.0 - ref_small))
        return diff / 2.0


sampler_service = SamplerService()
