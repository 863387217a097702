# services/experiment_service.py
"""
🧪 실험 / 검증 전담 서비스

역할:
- verify: laws / green / cvs / kernel / scaling (모두 합치면 all)
- couple: Θ_n 과 Θ̄⁽¹⁾ / Θ̄⁽²⁾ 를 같은 난수 스트림으로 만들고 A_{βn} 인코딩 일치 빈도 측정
- localize: 붙인 반평면 맵의 공 B(γ̄∞(0), αn) 이 A_{βn} ∪ Â_{βn} 에 들어가는 빈도
- stats: min_label / scaling / last_hit / yj_histogram

replicate r 은 stream_rng(seed, r) 하나만 쓰고, 결과는 replicate 순서로 합친다.
"""

import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor, sqrt
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import norm
from tqdm import tqdm

from config import (
    QUADLAB_ALPHA_GRID,
    QUADLAB_BETA_GRID,
    QUADLAB_EXPERIMENT_MAX_TREE_EDGES,
    QUADLAB_GREEN_TOL,
    QUADLAB_THREADS,
    get_default_budget,
)
from logging_config import generate_run_id, get_logger
from model.maps import Quadrangulation
from model.schemas import ExperimentReport, SamplerBudget, StatisticRecord
from model.trees import LabeledTree, SpineTree
from services.chain_service import chain_model
from services.cvs_service import cvs_service
from services.errors import IndeterminateError, QuadlabError
from services.format_service import format_service
from services.metric_service import Verdict, metric_service
from services.sampler_service import (
    RandomStream,
    ThetaBarPrefix,
    as_stream,
    sampler_service,
    stream_rng,
)
from services.tree_service import Law, tree_service

logger = get_logger(__name__)

SUITES = ("laws", "green", "cvs", "kernel", "scaling")

# 3σ 단측 꼬리확률
_ONE_SIDED_3SIGMA = float(norm.sf(3.0))

# 절단 법칙 TV 상한, 잡음 항 없이 비교하는 표본 수
LAW_TV_LIMIT = 0.01
LAW_TV_FULL_SAMPLES = 1_000_000

# 내장 부분맵 법칙 비교
SUBMAP_MAX_EDGES = 6
SUBMAP_HORIZONS = (80, 160, 320, 640)
SUBMAP_TV_LIMIT = 0.02
SUBMAP_TV_FULL_SAMPLES = 100_000
SUBMAP_MAX_UNDECIDED = 0.01
SUBMAP_EPSILON_TAIL = 1e-3
SUBMAP_STREAM = 1 << 20
SUBMAP_REFERENCE = 1 << 19


# ==========================================
# 통계 기록 헬퍼
# ==========================================
def binomial_record(name: str, hits: int, total: int, p: Fraction, sigmas: float = 3.0,
                    note: Optional[str] = None) -> StatisticRecord:
    """빈도 vs 정확한 확률 (이항 σ 밴드)"""
    ref = float(p)
    value = hits / total if total else float("nan")
    tol = sigmas * sqrt(ref * (1.0 - ref) / total) if total else float("inf")
    return StatisticRecord(
        name=name, value=value, reference=ref, reference_exact=str(p),
        provenance="reference", tolerance=tol, passed=abs(value - ref) <= tol,
        samples=total, note=note,
    )


def relative_record(name: str, value: float, reference: Fraction, rel_tol: float,
                    note: Optional[str] = None) -> StatisticRecord:
    ref = float(reference)
    return StatisticRecord(
        name=name, value=value, reference=ref, reference_exact=str(reference),
        provenance="reference", tolerance=rel_tol,
        passed=abs(value - ref) <= rel_tol * abs(ref), note=note,
    )


def bound_record(name: str, value: float, limit: float, note: Optional[str] = None) -> StatisticRecord:
    """value ≤ limit 이면 통과 (reference = 0)"""
    return StatisticRecord(
        name=name, value=value, reference=0.0, provenance="reference",
        tolerance=limit, passed=value <= limit, note=note,
    )


def trend_record(name: str, grid: Sequence[float], hits: Sequence[int], totals: Sequence[int]) -> StatisticRecord:
    """
    grid 가 커질수록 빈도가 줄어드는지 (Bonferroni 보정 단측 밴드).
    value = 밴드를 벗어난 인접 쌍 수. 종료 코드에는 반영하지 않는다.
    """
    pairs = max(len(grid) - 1, 1)
    z = float(norm.isf(_ONE_SIDED_3SIGMA / pairs))
    violations = 0
    for i in range(len(grid) - 1):
        n1, n2 = totals[i], totals[i + 1]
        if not n1 or not n2:
            continue
        f1, f2 = hits[i] / n1, hits[i + 1] / n2
        se = sqrt(f1 * (1 - f1) / n1 + f2 * (1 - f2) / n2)
        if f2 - f1 > z * se:
            violations += 1
    return StatisticRecord(
        name=name, value=float(violations), provenance="trend",
        passed=violations == 0, samples=int(sum(totals)),
        note="frequencies non-increasing along " + ",".join(f"{g:g}" for g in grid),
    )


def free_record(name: str, value: float, samples: Optional[int] = None,
                note: Optional[str] = None) -> StatisticRecord:
    return StatisticRecord(name=name, value=value, provenance="reference_free",
                           samples=samples, note=note)


# ==========================================
# replicate 결과 타입
# ==========================================
@dataclass
class CoupleOutcome:
    censored: bool = False
    y_j: int = 0
    equal: Dict[float, bool] = field(default_factory=dict)
    overlap: Dict[float, bool] = field(default_factory=dict)
    ball: Optional[str] = None


@dataclass
class LocalizeOutcome:
    contained: Dict[float, Optional[bool]] = field(default_factory=dict)
    witness: Optional[dict] = None


class ExperimentService:
    """실험 본문 (라우터는 인자만 넘긴다)"""

    # ==========================================
    # 공통
    # ==========================================
    @staticmethod
    def _run(fn: Callable, replicates: int, seed: int, threads: int, desc: str, *args) -> list:
        """replicate 병렬 실행 - joblib 은 입력 순서대로 돌려준다"""
        show = replicates >= 50
        if threads <= 1:
            return [fn(seed, r, *args) for r in tqdm(range(replicates), desc=desc, disable=not show, file=sys.stderr)]
        jobs = Parallel(n_jobs=threads, return_as="generator")(
            delayed(fn)(seed, r, *args) for r in range(replicates)
        )
        return list(tqdm(jobs, total=replicates, desc=desc, disable=not show, file=sys.stderr))

    @staticmethod
    def _report(experiment_id: str, seed: int, parameters: dict, statistics: List[StatisticRecord],
                started: float, replicates: int = 0, censored: int = 0,
                artifacts: Optional[dict] = None) -> ExperimentReport:
        report = ExperimentReport(
            experiment_id=experiment_id,
            run_id=generate_run_id(),
            master_seed=seed,
            parameters=parameters,
            statistics=statistics,
            wall_clock_seconds=time.perf_counter() - started,
            replicates=replicates,
            censored=censored,
            artifacts=artifacts or {},
        )
        log = get_logger(__name__, run_id=report.run_id, seed=seed).bind(experiment=experiment_id)
        if report.passed:
            log.info(f"✅ {experiment_id} 통과", extra={"statistics": len(statistics)})
        else:
            failed = [s.name for s in statistics if s.provenance == "reference" and s.passed is False]
            log.warning(f"❌ {experiment_id} 실패", extra={"failed": failed})
        return report

    @staticmethod
    def _experiment_budget(epsilon_tail: Optional[float] = None) -> SamplerBudget:
        base = get_default_budget()
        update = {"max_tree_edges": min(base.max_tree_edges, QUADLAB_EXPERIMENT_MAX_TREE_EDGES)}
        if epsilon_tail is not None:
            update["epsilon_tail"] = epsilon_tail
        return SamplerBudget(**{**base.model_dump(), **update})

    # ==========================================
    # verify
    # ==========================================
    def verify(self, suite: str, seed: int, samples: int = 20_000, out_dir: Optional[Path] = None,
               scaling_n: int = 10_000, threads: int = QUADLAB_THREADS,
               submap_samples: Optional[int] = None) -> ExperimentReport:
        started = time.perf_counter()
        suites = SUITES if suite == "all" else (suite,)
        stats: List[StatisticRecord] = []
        artifacts: dict = {}
        for name in suites:
            if name not in SUITES:
                raise QuadlabError("unknown verify suite", {"suite": name, "known": list(SUITES) + ["all"]})
            logger.info(f"🔧 verify {name} 시작", extra={"seed": seed})
            try:
                if name == "laws":
                    stats += self._verify_laws(seed, samples)
                elif name == "green":
                    stats += self._verify_green(out_dir, artifacts)
                elif name == "cvs":
                    stats += self._verify_cvs(seed, min(samples, 2_000))
                    stats += self._verify_submap_law(seed, submap_samples or min(samples, 2_000), threads)
                elif name == "kernel":
                    stats += self._verify_kernel()
                else:
                    stats += self._verify_scaling(scaling_n)
            except QuadlabError:
                logger.error(f"❌ verify {name} 중단", exc_info=True)
                raise
        params = {"suite": suite, "samples": samples, "submap_samples": submap_samples}
        return self._report(f"verify:{suite}", seed, params,
                            stats, started, artifacts=artifacts)

    def law_tv_tolerance(self, cells: int, samples: int) -> float:
        """절단 TV 허용치: N ≥ 10⁶ 이면 0.01, 그보다 작으면 0.01 + 표본 잡음 1.5·√(cells/N)"""
        if samples >= LAW_TV_FULL_SAMPLES:
            return LAW_TV_LIMIT
        return LAW_TV_LIMIT + 1.5 * sqrt(cells / samples)

    @staticmethod
    def law_tv_note(samples: int, extra: Optional[str] = None) -> Optional[str]:
        parts = [extra] if extra else []
        if samples < LAW_TV_FULL_SAMPLES:
            parts.append(f"N={samples} < {LAW_TV_FULL_SAMPLES}: tolerance includes sampling noise")
        return "; ".join(parts) or None

    def rerooted_theta_table(self, k: int, max_edges: int) -> Dict[bytes, Fraction]:
        """Θ_k 를 τ 에서 re-root 하고 옛 루트를 표시한 법칙 (간선 ≤ max_edges)"""
        law = Law.rho_minus(k)
        table: Dict[bytes, Fraction] = {}
        for tree in sampler_service.enumerate_labeled_trees(max_edges, root_label=k):
            mass = tree_service.law_mass(tree, law)
            if not mass:
                continue
            cs = tree_service.corner_sequence(tree)
            tau = next(i for i in cs.indices() if cs.label(i) == 0)
            rerooted, mapping = tree_service.reroot(tree, tau)
            key = tree_service.tree_code(rerooted, marks=(mapping[0],))
            table[key] = table.get(key, Fraction(0)) + mass
        return table

    def _verify_laws(self, seed: int, samples: int) -> List[StatisticRecord]:
        budget = self._experiment_budget()
        out: List[StatisticRecord] = []

        ref = sampler_service.law_table(Law.rho_minus(1), 2)
        tol = self.law_tv_tolerance(len(ref) + 1, samples)
        stream = as_stream(stream_rng(seed, 0))
        observed = []
        for _ in range(samples):
            mt = sampler_service.sample_theta_n(1, stream, budget, truncate_above=2)
            observed.append(None if mt is None else tree_service.tree_code(mt.tree))
        out.append(bound_record("tv_theta1_vs_rho_minus_table", sampler_service.truncated_tv(observed, ref), tol,
                                note=self.law_tv_note(samples, "trees with at most 2 edges, larger outputs pooled")))

        stream = as_stream(stream_rng(seed, 1))
        observed = []
        for _ in range(samples):
            t = sampler_service.sample_rho_minus_truncated(1, stream, 2, budget)
            observed.append(None if t is None else tree_service.tree_code(t))
        out.append(bound_record("tv_rho_minus_rejection_vs_table", sampler_service.truncated_tv(observed, ref), tol,
                                note=self.law_tv_note(samples)))

        ref_t = self.rerooted_theta_table(1, 2)
        stream = as_stream(stream_rng(seed, 2))
        observed = []
        for _ in range(samples):
            mt = sampler_service.sample_T_k(1, stream, budget, truncate_above=2)
            observed.append(None if mt is None else tree_service.tree_code(mt.tree, marks=(mt.mark("top"),)))
        out.append(bound_record("tv_T1_vs_rerooted_theta1", sampler_service.truncated_tv(observed, ref_t),
                                self.law_tv_tolerance(len(ref_t) + 1, samples),
                                note=self.law_tv_note(samples)))

        for j, x in enumerate((1, 2, 3)):
            rate = sampler_service.acceptance_rate(Law.rho_plus(x), samples, as_stream(stream_rng(seed, 3 + j)), budget)
            out.append(binomial_record(f"all_positive_rate_x{x}", round(rate * samples), samples, chain_model.w(x)))

        stream = as_stream(stream_rng(seed, 10))
        hits = sum(self.hits_level(stream, 2, 1, 1e-7) for _ in range(samples))
        out.append(binomial_record("hit_1_from_2", hits, samples, chain_model.hitting_probability(2, 1)))
        return out

    @staticmethod
    def hits_level(stream: RandomStream, x: int, k: int, epsilon_tail: float) -> bool:
        """X 를 x 에서 출발시켜 k 에 닿는지 (인증 레벨 L 에 닿으면 실패로 본다)"""
        L = chain_model.certified_level(k, epsilon_tail)
        up, stay, _ = chain_model._x_rows(L + 2)
        while True:
            if x == k:
                return True
            if x >= L:
                return False
            u = stream.uniform()
            if u < up[x]:
                x += 1
            elif u >= up[x] + stay[x]:
                x -= 1

    def _verify_green(self, out_dir: Optional[Path], artifacts: dict) -> List[StatisticRecord]:
        rows = chain_model.green_table(range(1, 9), range(2, 9), QUADLAB_GREEN_TOL)
        worst_h = max(r.H_rel_error for r in rows if r.H_rel_error is not None)
        worst_hs = max(r.Hstar_rel_error for r in rows if r.Hstar_rel_error is not None)
        if out_dir is not None:
            path = format_service.write_green_csv(rows, Path(out_dir) / "green_table.csv")
            artifacts["green_table"] = str(path)
        nonzero = sum(
            1 for x in range(1, 31) for k in range(2, 11)
            if chain_model.hstar_recurrence_residual(x, k) != 0
        )
        a_diag = sum(1 for k in range(2, 11) if chain_model.A(k, k) != 0)
        a_next = sum(1 for k in range(2, 11) if chain_model.A(k + 1, k) != k + 2)
        return [
            bound_record("green_H_max_rel_error", worst_h, 1e-6, note="1<=x<=8, 2<=k<=8"),
            bound_record("green_Hstar_max_rel_error", worst_hs, 1e-6),
            bound_record("hstar_residual_nonzero", float(nonzero), 0.0, note="1<=x<=30, 2<=k<=10, exact"),
            bound_record("A_boundary_violations", float(a_diag + a_next), 0.0),
            relative_record("H_1_2", float(chain_model.green_H(1, 2)), Fraction(21, 10), 1e-12),
            relative_record("G_1_2", float(chain_model.G(1, 2)), Fraction(3, 10), 1e-12),
        ]

    def _verify_cvs(self, seed: int, samples: int) -> List[StatisticRecord]:
        trees = list(sampler_service.enumerate_labeled_trees(3, 0, exact=True))
        codes = set()
        bad_shape = 0
        eq2 = 0
        bad_geo = 0
        for tree in trees:
            image = cvs_service.cvs_finite(tree)
            codes.add(metric_service.canonical_code(image.quad))
            audit = cvs_service.face_audit(image.quad)
            if (audit.vertices, audit.edges, audit.faces) != (5, 6, 3) or not audit.all_quadrangles \
                    or audit.euler != 2 or not audit.bipartite:
                bad_shape += 1
            eq2 += len(cvs_service.check_label_distances(image))
            path = cvs_service.extract_geodesics(image, "tau")
            if not metric_service.verify_geodesic(image.quad, path, pairwise=True).is_geodesic:
                bad_geo += 1

        rng = stream_rng(seed, 20)
        stream = as_stream(rng)
        budget = self._experiment_budget()
        eq3 = 0
        pairs = 0
        for _ in range(samples):
            tree = sampler_service.sample_rho(0, stream, budget)
            if tree.edge_count > 200:
                continue
            quad = cvs_service.cvs_finite(tree).quad
            us = rng.integers(0, quad.n_vertices, size=8)
            for u in us.tolist():
                dist = metric_service.bfs_distances(quad, u)
                for v in rng.integers(0, quad.n_vertices, size=4).tolist():
                    pairs += 1
                    if dist[v] < abs(quad.labels[u] - quad.labels[v]):
                        eq3 += 1
        return [
            relative_record("cvs_injective_3_edges", float(len(codes)), Fraction(len(trees)), 0.0,
                            note=f"{len(trees)} trees"),
            bound_record("cvs_shape_failures_3_edges", float(bad_shape), 0.0),
            bound_record("label_distance_mismatches", float(eq2), 0.0),
            bound_record("tau_geodesic_failures", float(bad_geo), 0.0),
            bound_record("label_gap_bound_failures", float(eq3), 0.0, note=f"{pairs} sampled pairs"),
        ]

    # ==========================================
    # 내장 부분맵 법칙 (n = 1)
    # ==========================================
    @staticmethod
    def small_map_code(quad: Quadrangulation) -> Optional[bytes]:
        """SUBMAP_MAX_EDGES 이하 맵의 canonical code, 큰 맵은 None (한 칸으로 접음)"""
        if quad.edge_count > SUBMAP_MAX_EDGES:
            return None
        return metric_service.canonical_code(quad)

    def _submap_one(self, seed: int, replicate: int) -> Tuple[bool, Optional[bytes]]:
        """Θ̄⁽¹⁾ 에서 A_1 부분맵 코드. horizon 을 두 배씩 늘려도 판정이 안 되면 (False, None)"""
        budget = self._experiment_budget(SUBMAP_EPSILON_TAIL)
        stream = as_stream(stream_rng(seed, SUBMAP_STREAM + replicate))
        st: Optional[SpineTree] = None
        for horizon in SUBMAP_HORIZONS:
            prefix = None if st is None else ThetaBarPrefix(st.spine_labels, st.left, st.right)
            st = sampler_service.sample_theta_bar(1, horizon, stream, budget, prefix=prefix)
            try:
                sub = cvs_service.restrict_to_embedded_submap(st, 1, epsilon_tail=budget.epsilon_tail)
            except IndeterminateError:
                continue
            return True, self.small_map_code(sub.boundary_quad.quad)
        return False, None

    def _boundary_quad_one(self, seed: int, replicate: int) -> Optional[bytes]:
        """Θ_1 (라벨 -1 shift) 의 geodesic-boundary 맵 코드"""
        budget = self._experiment_budget()
        stream = as_stream(stream_rng(seed, SUBMAP_STREAM + SUBMAP_REFERENCE + replicate))
        mt = sampler_service.sample_theta_n(1, stream, budget, truncate_above=SUBMAP_MAX_EDGES)
        if mt is None:
            return None
        gbq = cvs_service.build_geodesic_boundary_quad(mt.tree.shift(-1))
        return self.small_map_code(gbq.quad)

    @staticmethod
    def two_sample_tv(a: Sequence[Optional[bytes]], b: Sequence[Optional[bytes]]) -> float:
        """두 경험 분포의 TV (None = 접힌 큰 출력)"""
        if not a or not b:
            return float("nan")
        ca, cb = Counter(a), Counter(b)
        return 0.5 * sum(abs(ca[k] / len(a) - cb[k] / len(b)) for k in set(ca) | set(cb))

    def _verify_submap_law(self, seed: int, samples: int, threads: int) -> List[StatisticRecord]:
        results = self._run(self._submap_one, samples, seed, threads, "submap")
        submaps = [code for ok, code in results if ok]
        censored = samples - len(submaps)
        reference = self._run(self._boundary_quad_one, samples, seed, threads, "boundary_quad")
        cells = len(set(submaps) | set(reference))
        if samples >= SUBMAP_TV_FULL_SAMPLES:
            tol = SUBMAP_TV_LIMIT
            note = None
        else:
            tol = SUBMAP_TV_LIMIT + 1.5 * sqrt(2 * cells / max(len(submaps), 1))
            note = f"N={samples} < {SUBMAP_TV_FULL_SAMPLES}: tolerance includes sampling noise"
        tv = self.two_sample_tv(submaps, reference)
        detail = f"maps with at most {SUBMAP_MAX_EDGES} edges, larger pooled; {censored} undecided"
        return [
            StatisticRecord(
                name="tv_embedded_submap_vs_boundary_quad", value=tv, reference=0.0, provenance="reference",
                tolerance=tol, passed=tv <= tol, samples=len(submaps),
                note="; ".join(p for p in (detail, note) if p),
            ),
            bound_record("embedded_submap_undecided_share", censored / samples, SUBMAP_MAX_UNDECIDED,
                         note=f"horizons {', '.join(map(str, SUBMAP_HORIZONS))}"),
        ]

    def _verify_kernel(self) -> List[StatisticRecord]:
        ks = chain_model.kernel_sum(5, 5, 500)
        shares = []
        for n in (200, 500, 1000):
            split = chain_model.kernel_split(5, 5, n)
            shares.append(split.k_ge_n / split.total)
        out = [
            StatisticRecord(name="kernel_sum_5_5_500", value=ks.total, reference=1.0, tolerance=0.1,
                            provenance="reference", passed=0.9 <= ks.total <= 1.1),
        ]
        toward = all(abs(b - 3 / 7) <= abs(a - 3 / 7) + 1e-9 for a, b in zip(shares, shares[1:]))
        out.append(StatisticRecord(name="kernel_k_ge_n_share", value=shares[-1], reference=3 / 7,
                                   reference_exact="3/7", provenance="trend", passed=toward,
                                   note="n = 200, 500, 1000: " + ", ".join(f"{s:.4f}" for s in shares)))
        return out

    def _verify_scaling(self, n: int) -> List[StatisticRecord]:
        res = chain_model.scaling_second_moment(n, "exact")
        return [relative_record(f"lamperti_ratio_n{n}", res.ratio, Fraction(14, 3), 0.05)]

    # ==========================================
    # couple
    # ==========================================
    @staticmethod
    def last_visit(spine: Sequence[int], level: int) -> Optional[int]:
        for i in range(len(spine) - 1, -1, -1):
            if spine[i] == level:
                return i
        return None

    @staticmethod
    def a_set_code(spine: Sequence[int], left: Sequence[LabeledTree], right: Sequence[LabeledTree],
                   sigma: Optional[int]) -> Optional[bytes]:
        """A_k 인코딩: spine[0..σ] 와 그 숲들의 트리 코드"""
        if sigma is None:
            return None
        parts = [np.asarray(spine[: sigma + 1], dtype=np.int64).tobytes()]
        for i in range(sigma + 1):
            parts.append(tree_service.tree_code(left[i]))
            parts.append(tree_service.tree_code(right[i]))
        return b"|".join(parts)

    def _couple_one(self, seed: int, replicate: int, n: int, betas: Sequence[float],
                    epsilon_tail: float, ball_radius: int) -> CoupleOutcome:
        budget = self._experiment_budget(epsilon_tail)
        stream = as_stream(stream_rng(seed, replicate))
        draw = sampler_service.draw_tri_path_truncated(n, stream, QUADLAB_EXPERIMENT_MAX_TREE_EDGES, budget)
        if draw is None:
            return CoupleOutcome(censored=True)
        p1, p2 = sampler_service.theta_bar_prefixes(draw)
        out = CoupleOutcome(y_j=draw.y_j)
        for beta in betas:
            level = floor(beta * n)
            out.overlap[beta] = draw.y_j > beta * n
            out.equal[beta] = (
                self.prefix_match(draw.x_chain.path, p1, draw.m, level)
                and self.prefix_match(draw.xh_chain.path, p2, draw.m_hat, level)
            )

        if ball_radius > 0 and all(out.equal.values()):
            out.ball = self._coupled_ball_verdict(draw, p1, p2, stream, budget, ball_radius).value
        return out

    def prefix_match(self, path: Sequence[int], prefix: ThetaBarPrefix, shared: int, level: int) -> bool:
        """
        Θ_n 쪽 X 경로 (마지막 Y_J 방문에서 끝남) 와 Θ̄ 쪽 인증 경로에서
        level 의 마지막 방문이 같고 공유 구간(< shared) 안이면 A_level 인코딩을 비교한다.
        """
        s_short = self.last_visit(path, level)
        s_full = self.last_visit(prefix.spine, level)
        if s_short is None or s_full is None:
            return s_short is None and s_full is None
        if s_short != s_full or s_full >= shared:
            return False
        return (self.a_set_code(path, prefix.left, prefix.right, s_short)
                == self.a_set_code(prefix.spine, prefix.left, prefix.right, s_full))

    def _coupled_ball_verdict(self, draw, p1: ThetaBarPrefix, p2: ThetaBarPrefix, stream: RandomStream,
                              budget: SamplerBudget, radius: int) -> Verdict:
        """Θ_n (τ 에서 re-root) 의 CVS 공 vs 붙인 Θ̄ 패치의 공"""
        mt = sampler_service.assemble_tri_path(draw)
        tree, _ = tree_service.reroot(mt.tree, mt.mark("tau"))
        finite = cvs_service.cvs_finite(tree).quad
        try:
            glued = self.glued_patch(p1, p2, stream, budget)
        except QuadlabError:
            return Verdict.UNKNOWN
        return metric_service.ball_equal(finite, glued.quad, radius)

    def glued_patch(self, p1: ThetaBarPrefix, p2: ThetaBarPrefix, stream: RandomStream, budget: SamplerBudget):
        st1 = sampler_service.sample_theta_bar(1, len(p1.spine) - 1, stream, budget, prefix=p1)
        st2 = sampler_service.sample_theta_bar(2, len(p2.spine) - 1, stream, budget, prefix=p2)
        return cvs_service.glue_half_planes(cvs_service.cvs_infinite(st1, "S1"),
                                            cvs_service.cvs_infinite(st2, "S2"))

    def couple(self, n: int, replicates: int, seed: int, betas: Optional[Sequence[float]] = None,
               threads: int = QUADLAB_THREADS, epsilon_tail: float = 1e-3,
               ball_radius: int = 2) -> ExperimentReport:
        started = time.perf_counter()
        betas = sorted(betas or QUADLAB_BETA_GRID)
        logger.info("🔧 couple 시작", extra={"n": n, "replicates": replicates, "betas": betas})
        results: List[CoupleOutcome] = self._run(
            self._couple_one, replicates, seed, threads, "couple", n, betas, epsilon_tail, ball_radius
        )
        kept = [r for r in results if not r.censored]
        censored = len(results) - len(kept)
        stats: List[StatisticRecord] = []
        eq_hits = [sum(r.equal[b] for r in kept) for b in betas]
        ov_hits = [sum(r.overlap[b] for r in kept) for b in betas]
        total = len(kept)
        for b, e, o in zip(betas, eq_hits, ov_hits):
            stats.append(free_record(f"encoding_equal_beta{b:g}", e / total if total else float("nan"), total))
            stats.append(free_record(f"overlap_beta{b:g}", o / total if total else float("nan"), total))
        stats.append(trend_record("encoding_equal_monotone_in_beta", betas, eq_hits, [total] * len(betas)))
        balls = [r.ball for r in kept if r.ball is not None]
        decided = [b for b in balls if b != Verdict.UNKNOWN.value]
        if balls:
            eq = sum(b == Verdict.EQUAL.value for b in decided)
            stats.append(free_record(
                f"ball{ball_radius}_equal_on_coupled_event",
                eq / len(decided) if decided else float("nan"), len(decided),
                note=f"{len(balls) - len(decided)} undecided balls",
            ))
        stats.append(free_record("mean_Y_J_over_n", float(np.mean([r.y_j for r in kept]) / n) if kept else float("nan"), total))
        return self._report("couple", seed,
                            {"n": n, "betas": betas, "epsilon_tail": epsilon_tail, "ball_radius": ball_radius},
                            stats, started, replicates=replicates, censored=censored)

    # ==========================================
    # localize
    # ==========================================
    def _spine_prefix(self, stream: RandomStream, level: int, budget: SamplerBudget, shift: int) -> ThetaBarPrefix:
        chain = sampler_service.sample_last_hit(level, stream, budget)
        return ThetaBarPrefix(tuple(v + shift for v in chain.full), (), ())

    def _localize_one(self, seed: int, replicate: int, n: int, alphas: Sequence[float], beta: float,
                      epsilon_tail: float) -> LocalizeOutcome:
        budget = self._experiment_budget(epsilon_tail)
        stream = as_stream(stream_rng(seed, replicate))
        level = floor(beta * n)
        out = LocalizeOutcome()
        try:
            p1 = self._spine_prefix(stream, level + 1, budget, 0)
            p2 = self._spine_prefix(stream, level + 1, budget, 1)
            st1 = sampler_service.sample_theta_bar(1, len(p1.spine) - 1, stream, budget, prefix=p1)
            st2 = sampler_service.sample_theta_bar(2, len(p2.spine) - 1, stream, budget, prefix=p2)
            glued = cvs_service.glue_half_planes(cvs_service.cvs_infinite(st1, "S1"),
                                                 cvs_service.cvs_infinite(st2, "S2"))
        except QuadlabError as e:
            logger.debug("⚠️ localize replicate 판정 불가", extra={"replicate": replicate, "error": str(e)})
            return LocalizeOutcome(contained={a: None for a in alphas})

        union = self._a_vertices(st1, level, glued.quad, "p1") | self._a_vertices(st2, level, glued.quad, "p2")
        for alpha in alphas:
            r = floor(alpha * n)
            if r == 0:
                out.contained[alpha] = True
                continue
            view = metric_service.ball(glued.quad, 0, r)
            if view.status != "complete":
                out.contained[alpha] = None
                continue
            outside = sorted(v for v in view.distances if v not in union)
            out.contained[alpha] = not outside
            if outside and out.witness is None:
                w = outside[0]
                out.witness = {"replicate": replicate, "alpha": alpha, "vertex": w,
                               "geodesic": self._geodesic_to(glued.quad, view.distances, w)}
        return out

    @staticmethod
    def _a_vertices(st: SpineTree, level: int, glued: Quadrangulation, side: str) -> set:
        """A_level 의 트리 정점 → 붙인 맵 정점 id (spine 라벨은 최종 좌표)"""
        spine = st.spine_labels
        sigma = None
        for i in range(len(spine) - 1, -1, -1):
            if spine[i] == level:
                sigma = i
                break
        if sigma is None:
            return set()
        layout = tree_service.spine_layout(st)
        inside = {v for v in range(layout.tree.tree.vertex_count) if layout.owner[v] <= sigma}
        return {
            gv for gv, origin in enumerate(glued.origin)
            if origin and origin[0] == side and origin[1] == "tree" and origin[2] in inside
        }

    @staticmethod
    def _geodesic_to(quad: Quadrangulation, dist: Dict[int, int], target: int) -> List[int]:
        path = [target]
        v = target
        while dist[v] > 0:
            v = next(u for u in quad.adjacency[v] if dist.get(u) == dist[v] - 1)
            path.append(v)
        return path[::-1]

    def localize(self, n: int, replicates: int, seed: int, beta: float = 0.5,
                 alphas: Optional[Sequence[float]] = None, threads: int = QUADLAB_THREADS,
                 epsilon_tail: float = 1e-3) -> ExperimentReport:
        started = time.perf_counter()
        alphas = sorted(alphas or QUADLAB_ALPHA_GRID)
        logger.info("🔧 localize 시작", extra={"n": n, "beta": beta, "alphas": alphas})
        results: List[LocalizeOutcome] = self._run(
            self._localize_one, replicates, seed, threads, "localize", n, alphas, beta, epsilon_tail
        )
        stats: List[StatisticRecord] = []
        hits, totals = [], []
        censored = 0
        for a in alphas:
            decided = [r.contained[a] for r in results if r.contained.get(a) is not None]
            censored = max(censored, len(results) - len(decided))
            hits.append(sum(decided))
            totals.append(len(decided))
            stats.append(free_record(f"contained_alpha{a:g}", hits[-1] / totals[-1] if totals[-1] else float("nan"),
                                     totals[-1]))
        stats.append(trend_record("containment_monotone_in_alpha", alphas, hits, totals))
        witnesses = [r.witness for r in results if r.witness is not None]
        return self._report("localize", seed,
                            {"n": n, "beta": beta, "alphas": alphas, "epsilon_tail": epsilon_tail},
                            stats, started, replicates=replicates, censored=censored,
                            artifacts={"witnesses": witnesses[:20]})

    # ==========================================
    # stats
    # ==========================================
    def stats(self, which: str, seed: int, n: int = 5, k: int = 3, samples: int = 10_000,
              mode: str = "exact", out_dir: Optional[Path] = None, bins: int = 40) -> ExperimentReport:
        started = time.perf_counter()
        stream = as_stream(stream_rng(seed, 0))
        budget = self._experiment_budget()
        artifacts: dict = {}
        params = {"which": which, "n": n, "samples": samples}
        if which == "min_label":
            params["k"] = k
            hits = sum(sampler_service.sample_min_label_event(n, k, stream, budget) for _ in range(samples))
            stats = [binomial_record(f"min_label_below_minus{k}_theta{n}", hits, samples,
                                     sampler_service.min_label_tail(n, k))]
        elif which == "scaling":
            params["mode"] = mode
            res = chain_model.scaling_second_moment(n, mode, rng=stream_rng(seed, 0), samples=samples)
            tol = 0.05 if mode == "exact" else max(0.05, 3 * sqrt(2.0 / samples))
            stats = [relative_record(f"lamperti_ratio_n{n}", res.ratio, Fraction(14, 3), tol)]
        elif which == "last_hit":
            values = [(len(sampler_service.sample_last_hit(n, stream, budget).path) - 1) / n ** 2
                      for _ in range(samples)]
            stats = [free_record("last_hit_over_n2_mean", float(np.mean(values)), samples),
                     free_record("last_hit_over_n2_median", float(np.median(values)), samples)]
            if out_dir is not None:
                path = format_service.write_histogram_csv(values, bins, Path(out_dir) / f"last_hit_n{n}.csv")
                artifacts["histogram"] = str(path)
            artifacts["quantiles"] = [float(q) for q in np.quantile(values, [0.1, 0.25, 0.5, 0.75, 0.9])]
        elif which == "yj_histogram":
            values = [sampler_service.sample_y_until_j(n, stream)[0][-1] / n for _ in range(samples)]
            stats = [free_record("y_j_over_n_mean", float(np.mean(values)), samples)]
            if out_dir is not None:
                path = format_service.write_histogram_csv(values, bins, Path(out_dir) / f"yj_n{n}.csv")
                artifacts["histogram"] = str(path)
        else:
            raise QuadlabError("unknown statistic", {"which": which})
        return self._report(f"stats:{which}", seed, params, stats, started, replicates=samples,
                            artifacts=artifacts)


experiment_service = ExperimentService()
