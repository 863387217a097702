# services/chain_service.py
"""
🔗 Markov 체인 X / Y 전담 서비스

역할:
- 스칼라 함수 w, f, h, g, C, A 의 정확한 유리수 계산
- 전이확률 x_step / y_step, 도달확률, Green 함수 H / H* 닫힌 공식
- H* 점화식 잔차 (닫힌 공식의 정확성 검증)
- Green 함수 수치 오라클 (절단 창 + 꼬리 상한)
- 커널 𝓗 와 그 k-합, 밀도 공식, Lamperti 2차 모멘트

정확한 값은 fractions.Fraction, 수치 오라클/몬테카를로는 float64.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded

from config import QUADLAB_GREEN_MAX_WINDOW, QUADLAB_GREEN_TOL
from logging_config import get_logger
from model.schemas import GreenRow
from services.errors import ConvergenceError, DomainError

logger = get_logger(__name__)


# ==========================================
# 결과 타입
# ==========================================
@dataclass(frozen=True)
class ModelConstants:
    w: Fraction
    f: int
    h: int
    g: int
    C: Fraction


@dataclass(frozen=True)
class GreenEstimate:
    """수치 오라클 결과 (H_bound 는 인증된 꼬리 상한, Hstar_bound 는 창 두 배 변화량 추정치)"""
    H: float
    Hstar: float
    H_bound: float
    Hstar_bound: float
    window: int


@dataclass(frozen=True)
class KernelSum:
    total: float
    k_ge_n: float
    k_lt_n: float
    tail_estimate: float
    k_max: int
    certified: bool
    warning: Optional[str] = None


@dataclass(frozen=True)
class DensityResult:
    value: Fraction
    reason: Optional[str] = None


@dataclass(frozen=True)
class MomentResult:
    n: int
    mode: str
    second_moment: float
    ratio: float
    mass_lost: float


class ChainModel:
    """체인 X (식 6) / Y (식 12) 의 정확한 유리수 모델 - 불변, 순수 함수"""

    # ==========================================
    # 스칼라 함수
    # ==========================================
    @staticmethod
    def w(x: int) -> Fraction:
        if x < 0:
            raise DomainError("w(x) needs x >= 0", {"x": x})
        return Fraction(x * (x + 3), (x + 1) * (x + 2))

    @staticmethod
    def f(x: int) -> int:
        return x * (x + 3) * (2 * x + 3)

    @staticmethod
    def h(x: int) -> int:
        return x * (x + 1) * (x + 2) * (x + 3) * (2 * x + 3)

    @staticmethod
    def g(n: int) -> int:
        return n * (n + 4) * (5 * n * n + 20 * n + 17)

    @staticmethod
    def C(x: int) -> Fraction:
        return Fraction(3, 14) * ((x + 1) * (x + 2) - 6)

    @staticmethod
    def A(x: int, k: int) -> Fraction:
        """A_{x,k} = (k+2) + (x-k-1)(x+k+4)/2"""
        return (k + 2) + Fraction((x - k - 1) * (x + k + 4), 2)

    def certified_level(self, k: int, epsilon_tail: float) -> int:
        """h(k)/h(L) ≤ epsilon_tail 인 최소 L > k (L 에서 k 로 돌아올 확률 상한)"""
        hk = self.h(k)
        L = k + 1
        while hk > epsilon_tail * self.h(L):
            L += 1
        return L

    def constants(self, x: int) -> ModelConstants:
        if x < 0:
            raise DomainError("model constants need x >= 0", {"x": x})
        return ModelConstants(self.w(x), self.f(x), self.h(x), self.g(x), self.C(x))

    # ==========================================
    # 전이확률
    # ==========================================
    def x_step(self, x: int) -> Tuple[Fraction, Fraction, Fraction]:
        """(p(x,x+1), p(x,x), p(x,x-1)); p(0,1) = 1"""
        if x < 0:
            raise DomainError("X lives on x >= 0", {"x": x})
        if x == 0:
            return Fraction(1), Fraction(0), Fraction(0)
        w = self.w(x)
        fx = self.f(x)
        return (
            w * self.f(x + 1) / (3 * fx),
            w / 3,
            w * self.f(x - 1) / (3 * fx),
        )

    def y_step(self, x: int) -> Optional[Tuple[Fraction, Fraction, Fraction]]:
        """(q(x,x+1), q(x,x), q(x,x-1)); 흡수 상태 0 이면 None"""
        if x < 0:
            raise DomainError("Y lives on x >= 0", {"x": x})
        if x == 0:
            return None
        w = self.w(x)
        return (
            w * Fraction(x + 1, 3 * (x + 3)),
            w / 3,
            w * Fraction(x + 2, 3 * x),
        )

    def j_law(self, y_path: Sequence[int]) -> List[Fraction]:
        """
        순차 정지 규칙의 J 분포: P(J = j | y) = (1 - w(y_j - 1)) ∏_{i<j} w(y_i - 1)

        y_path 가 짧으면 마지막 원소 이후의 잔여 질량은 반환 목록에 포함하지 않는다.
        """
        out: List[Fraction] = []
        survive = Fraction(1)
        for y in y_path:
            if y < 1:
                break
            wy = self.w(y - 1)
            out.append(survive * (1 - wy))
            survive *= wy
        return out

    def j_stop_probability(self, y_prefix: Sequence[int]) -> Fraction:
        """y_prefix 의 마지막 위치에서 정확히 멈출 확률 (Y 경로 조건부)"""
        law = self.j_law(y_prefix)
        if len(law) != len(y_prefix):
            raise DomainError("Y prefix must stay >= 1", {"y_prefix": list(y_prefix)})
        return law[-1]

    # ==========================================
    # 도달확률 / Green 함수 (닫힌 공식)
    # ==========================================
    def hitting_probability(self, x: int, k: int) -> Fraction:
        """P_x(H_k < ∞) (x = k 이면 복귀확률)"""
        if k < 1:
            raise DomainError("hitting probability needs k >= 1", {"x": x, "k": k})
        if x < k:
            logger.warning(
                "⚠️ x < k: 닫힌 공식 없음, 최근접 이동 체인은 위로 지나가므로 1 반환",
                extra={"x": x, "k": k, "provenance": "skip_free_upward"},
            )
            return Fraction(1)
        if x == k:
            return Fraction(6 * k - 1, 3 * (2 * k + 3))
        return Fraction(self.h(k), self.h(x))

    @staticmethod
    def _check_green_domain(x: int, k: int) -> None:
        if k < 2 or x < 1:
            raise DomainError("closed-form Green functions are stated for k >= 2, x >= 1",
                              {"x": x, "k": k})

    def green_H(self, x: int, k: int) -> Fraction:
        self._check_green_domain(x, k)
        base = Fraction(3 * (2 * k + 3), 10)
        if x <= k:
            return base
        return base * Fraction(self.h(k), self.h(x))

    def _hstar_top(self, k: int) -> Fraction:
        """H*_1(k) = 3f(k)/(f(1)w(k))"""
        return Fraction(3 * self.f(k), self.f(1)) / self.w(k)

    def green_Hstar(self, x: int, k: int) -> Fraction:
        self._check_green_domain(x, k)
        if x <= k:
            return self._hstar_top(k) - Fraction(3 * (2 * k + 3), 10) * self.C(x)
        at_k = self._hstar_top(k) - Fraction(3 * (2 * k + 3), 10) * self.C(k)
        return Fraction(self.h(k), self.h(x)) * (
            at_k + Fraction(3 * (2 * k + 3), 10) * self.A(x, k)
        )

    def hstar_recurrence_residual(self, x: int, k: int) -> Fraction:
        """
        H*_{x+1} - ((1-r_x)H*_x - q_x H*_{x-1} - H_x - 1_{x=k}) / p_x

        닫힌 공식이 맞다면 정확히 0 이다.
        """
        if x < 1 or k < 2:
            raise DomainError("recurrence residual needs x >= 1, k >= 2", {"x": x, "k": k})
        up, stay, down = self.x_step(x)
        below = self.green_Hstar(x - 1, k) if x >= 2 else Fraction(0)
        rhs = (
            (1 - stay) * self.green_Hstar(x, k)
            - down * below
            - self.green_H(x, k)
            - (1 if x == k else 0)
        ) / up
        return self.green_Hstar(x + 1, k) - rhs

    # ==========================================
    # Green 수치 오라클
    # ==========================================
    @staticmethod
    def _x_rows(size: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """상태 0..size-1 의 (up, stay, down) float 벡터"""
        s = np.arange(size, dtype=np.float64)
        up = (s + 4) * (2 * s + 5) / (3 * (s + 2) * (2 * s + 3))
        stay = s * (s + 3) / (3 * (s + 1) * (s + 2))
        down = (s - 1) * (2 * s + 1) / (3 * (s + 1) * (2 * s + 3))
        up[0], stay[0], down[0] = 1.0, 0.0, 0.0
        return up, stay, down

    def transition_matrix(self, size: int) -> sparse.csr_matrix:
        """상태 0..size-1 로 절단한 X 의 전이행렬 (맨 위에서 나가는 질량은 버림)"""
        up, stay, down = self._x_rows(size)
        return sparse.diags([down[1:], stay, up[:-1]], offsets=[-1, 0, 1], format="csr")

    def _killed_green(self, k: int, L: int) -> Tuple[np.ndarray, np.ndarray]:
        """[0, L) 에서 L 도달 시 죽는 체인의 (G, G*) - 삼중대각 시스템"""
        up, stay, down = self._x_rows(L)
        ab = np.zeros((3, L))
        ab[0, 1:] = -up[:-1]
        ab[1, :] = 1.0 - stay
        ab[2, :-1] = -down[1:]
        rhs = np.zeros(L)
        rhs[k] = 1.0
        G = solve_banded((1, 1), ab, rhs)
        G_star = solve_banded((1, 1), ab, rhs + G)
        return G, G_star

    def green_bruteforce(self, x: int, k: int, tol: float = QUADLAB_GREEN_TOL) -> GreenEstimate:
        """
        H_x(k), H*_x(k) 수치 계산

        창 [0, L] 밖으로 나간 뒤 k 로 돌아오는 기여는 h(k)/h(L) 로 상한.
        H 꼬리: ρ G_L(k)/(1-ρ) (인증된 상한).
        H* 오차: 창을 두 배로 했을 때의 변화량. 상한이 아닌 휴리스틱 추정치이며 수렴 판정에만 쓴다.
        """
        if tol <= 0:
            raise DomainError("tol must be positive", {"tol": tol})
        if x < 0 or k < 0:
            raise DomainError("states are non-negative", {"x": x, "k": k})

        L = max(32, 2 * (max(x, k) + 2))
        G_prev, Gs_prev = self._killed_green(k, L)
        while True:
            L2 = 2 * L
            if L2 > QUADLAB_GREEN_MAX_WINDOW:
                logger.error("❌ Green 오라클 수렴 실패", extra={"x": x, "k": k, "window": L})
                raise ConvergenceError(
                    "green_bruteforce window cap reached",
                    {"x": x, "k": k, "window": L, "cap": QUADLAB_GREEN_MAX_WINDOW},
                )
            G, Gs = self._killed_green(k, L2)
            rho = self.h(k) / self.h(L2) if k > 0 else 0.0
            H_bound = rho * G[k] / (1.0 - rho)
            Hs_bound = abs(Gs[x] - Gs_prev[x]) + abs(G[x] - G_prev[x])
            if H_bound < tol and Hs_bound < tol:
                logger.debug("✅ Green 오라클 수렴", extra={"x": x, "k": k, "window": L2})
                return GreenEstimate(float(G[x]), float(Gs[x]), float(H_bound), float(Hs_bound), L2)
            L, G_prev, Gs_prev = L2, G, Gs

    # ==========================================
    # 커널 𝓗
    # ==========================================
    def G(self, k: int, n: int) -> Fraction:
        if k < 0 or n < 0:
            raise DomainError("G(k, n) needs k, n >= 0", {"k": k, "n": n})
        if k <= n:
            return Fraction(3 * self.g(k), 35 * (n + 1) * (n + 2) * (n + 3))
        return Fraction(3 * self.g(n), 35 * (k + 1) * (k + 2) * (k + 3))

    def kernel_H(self, x: int, y: int, k: int, n: int, beta: float = 0.0) -> float:
        """𝓗_{x,y,k}(n) (k = 1 은 수치 오라클 값을 사용)"""
        if n < 2:
            raise DomainError("kernel needs n >= 2", {"n": n})
        if k < 1:
            raise DomainError("kernel needs k >= 1", {"k": k})
        Hx1, Hsx1 = green_pair_float(x, k + 1)
        Hy, Hsy = green_pair_float(y, k)
        f1 = self.f(1)
        pref = float(
            Fraction(f1, 3 * self.f(k + 1)) * self.w(k + 1)
            * Fraction(f1, 3 * self.f(k)) * self.w(k)
            * self.G(k, n - 1)
        )
        coeff = 2.0 * beta * n * n - 5.0
        return pref * (Hsx1 * Hy + Hx1 * Hsy + coeff * Hx1 * Hy)

    def kernel_split(self, x: int, y: int, n: int, k_max: Optional[int] = None,
                     beta: float = 0.0, tol: float = 1e-6) -> KernelSum:
        """k ≥ n 블록과 k < n 블록을 나눠 더하고 k⁻⁵ 꼬리를 추정"""
        k_max = k_max or 20 * n
        ge = 0.0
        lt = 0.0
        last = 0.0
        for k in range(1, k_max + 1):
            term = self.kernel_H(x, y, k, n, beta)
            if k >= n:
                ge += term
            else:
                lt += term
            last = term
        tail = abs(k_max * last / 4.0)
        certified = tail < tol
        warning = None
        if not certified:
            warning = f"tail estimate {tail:.3e} above tolerance {tol:.1e}; raise k_max"
            logger.warning(f"⚠️ 커널 꼬리 미인증: {warning}", extra={"n": n, "k_max": k_max})
        return KernelSum(ge + lt, ge, lt, tail, k_max, certified, warning)

    def kernel_sum(self, x: int, y: int, n: int, k_max: Optional[int] = None,
                   beta: float = 0.0) -> KernelSum:
        return self.kernel_split(x, y, n, k_max, beta)

    # ==========================================
    # H∞⁽ⁿ⁾ 밀도
    # ==========================================
    def theta_infty_n_density(
        self,
        a: int,
        b: int,
        c: int,
        x_path: Sequence[int],
        y_path: Sequence[int],
        z_path: Sequence[int],
        n: Optional[int] = None,
    ) -> DensityResult:
        """(a+b+1)/3^{a+b+c} ∏ w(x_i) ∏ w(y_i - 1) ∏ w(z_i) w(z_i - 1)"""
        if min(a, b, c) < 1:
            return DensityResult(Fraction(0), "a, b, c must be >= 1")
        if (len(x_path), len(y_path), len(z_path)) != (a + 1, b + 1, c + 1):
            return DensityResult(Fraction(0), "path lengths do not match (a, b, c)")
        for name, path in (("x", x_path), ("y", y_path), ("z", z_path)):
            if any(abs(p - q) > 1 for p, q in zip(path, path[1:])):
                return DensityResult(Fraction(0), f"{name}-path step exceeds 1")
        k = x_path[-1]
        if x_path[0] != 0 or y_path[0] != 1:
            return DensityResult(Fraction(0), "x must start at 0 and y at 1")
        if y_path[-1] != k or z_path[0] != k:
            return DensityResult(Fraction(0), "paths do not share the endpoint k")
        if n is not None and z_path[-1] != n:
            return DensityResult(Fraction(0), "z-path does not end at n")
        if any(v <= 0 for v in x_path[1:]):
            return DensityResult(Fraction(0), "x-path must stay > 0")
        if any(v <= 1 for v in y_path[1:]) or any(v <= 1 for v in z_path[1:]):
            return DensityResult(Fraction(0), "y- and z-paths must stay > 1")

        value = Fraction(a + b + 1, 3 ** (a + b + c))
        for v in x_path[1:]:
            value *= self.w(v)
        for v in y_path[1:]:
            value *= self.w(v - 1)
        for v in z_path[1:]:
            value *= self.w(v) * self.w(v - 1)
        return DensityResult(value)

    # ==========================================
    # Lamperti 스케일링 (E[X_n^2]/n → 14/3)
    # ==========================================
    def scaling_second_moment(
        self,
        n: int,
        mode: str = "exact",
        rng: Optional[np.random.Generator] = None,
        samples: int = 10_000,
        window: Optional[int] = None,
        tol: float = 1e-12,
    ) -> MomentResult:
        if n < 1:
            raise DomainError("n must be >= 1", {"n": n})
        if mode == "exact":
            size = (window or n) + 1
            up, stay, down = self._x_rows(size)
            dist = np.zeros(size)
            dist[0] = 1.0
            lost = 0.0
            for _ in range(n):
                nxt = dist * stay
                nxt[1:] += dist[:-1] * up[:-1]
                nxt[:-1] += dist[1:] * down[1:]
                lost += dist[-1] * up[-1]
                dist = nxt
            if lost > tol:
                raise DomainError("window overflow in distribution pushing",
                                  {"n": n, "window": size - 1, "mass_lost": lost})
            states = np.arange(size, dtype=np.float64)
            m2 = float(np.dot(dist, states * states))
            return MomentResult(n, mode, m2, m2 / n, float(lost))
        if mode == "mc":
            if rng is None:
                raise DomainError("mc mode needs an rng")
            pos = np.zeros(samples, dtype=np.int64)
            up, stay, _ = self._x_rows(n + 2)
            for _ in range(n):
                u = rng.random(samples)
                p_up = up[pos]
                p_stay = stay[pos]
                pos = pos + (u < p_up) - (u >= p_up + p_stay)
            m2 = float(np.mean(pos.astype(np.float64) ** 2))
            return MomentResult(n, mode, m2, m2 / n, 0.0)
        raise DomainError("mode must be 'exact' or 'mc'", {"mode": mode})

    def green_table(self, x_range: Sequence[int], k_range: Sequence[int],
                    tol: float = QUADLAB_GREEN_TOL) -> List[GreenRow]:
        """닫힌 공식 vs 수치 오라클 감사 테이블 (CSV 덤프용)"""
        rows: List[GreenRow] = []
        for k in k_range:
            for x in x_range:
                est = self.green_bruteforce(x, k, tol)
                if k >= 2 and x >= 1:
                    H = self.green_H(x, k)
                    Hs = self.green_Hstar(x, k)
                    rows.append(GreenRow(
                        x=x, k=k,
                        H_closed=str(H), H_oracle=est.H,
                        Hstar_closed=str(Hs), Hstar_oracle=est.Hstar,
                        residual=str(self.hstar_recurrence_residual(x, k)),
                        H_rel_error=abs(est.H - float(H)) / float(H),
                        Hstar_rel_error=abs(est.Hstar - float(Hs)) / float(Hs),
                        H_tail_bound=est.H_bound, Hstar_window_change=est.Hstar_bound,
                    ))
                else:
                    rows.append(GreenRow(x=x, k=k, H_oracle=est.H, Hstar_oracle=est.Hstar,
                                         H_tail_bound=est.H_bound, Hstar_window_change=est.Hstar_bound))
        logger.info("📊 Green 테이블 생성", extra={"rows": len(rows)})
        return rows


chain_model = ChainModel()


@lru_cache(maxsize=4096)
def green_pair_float(x: int, k: int) -> Tuple[float, float]:
    """커널용 (H, H*) float 값, (x, k) 키로 캐시 (k = 1 은 수치 오라클)"""
    if k >= 2 and x >= 1:
        return float(chain_model.green_H(x, k)), float(chain_model.green_Hstar(x, k))
    est = chain_model.green_bruteforce(x, k, 1e-10)
    return est.H, est.Hstar
