from pydantic import BaseModel, Field, field_validator
from typing import List, Optional, Dict, Any
import hashlib

import orjson


class SamplerBudget(BaseModel):
    """샘플러 예산 (트리 크기 상한, rejection 상한, spine horizon, 꼬리 오차)"""
    max_tree_edges: int = Field(1_000_000, gt=0, description="트리 하나의 간선 수 상한")
    max_rejections: int = Field(1_000_000, gt=0, description="rejection sampling 최대 시도 횟수")
    horizon: int = Field(64, gt=0, description="spine 트리 절단 깊이 기본값")
    epsilon_tail: float = Field(1e-6, description="last-hit 절단의 TV 오차 상한 h(k)/h(L)")
    resample_oversized: bool = Field(False, description="트리 크기 상한 초과 시 실패 대신 재샘플 (크기 조건부 편향)")

    @field_validator("epsilon_tail")
    @classmethod
    def _epsilon_in_unit_interval(cls, v: float) -> float:
        if not (0.0 < v < 1.0):
            raise ValueError("epsilon_tail must lie in (0, 1)")
        return v

    model_config = {"frozen": True}


class ValidityReport(BaseModel):
    """validate() 결과 - 첫 번째 위반만 보고"""
    valid: bool
    violation: Optional[str] = Field(
        default=None,
        description="위반 종류 (root_missing, prefix_closure, parent_order, label_step, root_label)"
    )
    vertex: Optional[Any] = Field(default=None, description="위반 정점 (인덱스 또는 Ulam-Harris 주소)")
    detail: Optional[str] = None


class GeodesicReport(BaseModel):
    """verify_geodesic() 결과"""
    is_geodesic: bool
    length: int
    endpoint_distance: Optional[int] = None
    failure: Optional[str] = Field(
        default=None,
        description="repeated_vertex / not_adjacent / endpoint_distance / pairwise / missing_vertex"
    )
    pairwise_checked: bool = False


class StatisticRecord(BaseModel):
    """통계 하나 (값, 기준값, 출처 태그, 허용오차, 통과 여부)"""
    name: str
    value: float
    reference: Optional[float] = None
    reference_exact: Optional[str] = Field(default=None, description="기준값의 정확한 유리수 표기")
    provenance: str = Field(
        ...,
        description="reference (종료 코드 반영) / trend / reference_free (종료 코드 미반영)"
    )
    tolerance: Optional[float] = None
    passed: Optional[bool] = None
    samples: Optional[int] = None
    note: Optional[str] = None


class ExperimentReport(BaseModel):
    """seed 로 재현 가능한 실험/검증 기록"""
    experiment_id: str
    run_id: str
    master_seed: int
    parameters: Dict[str, Any] = Field(default_factory=dict)
    statistics: List[StatisticRecord] = Field(default_factory=list)
    wall_clock_seconds: float = 0.0
    replicates: int = 0
    censored: int = Field(0, description="절단으로 판정 불가한 replicate 수 (통과율에 포함하지 않음)")
    artifacts: Dict[str, Any] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """reference 태그 통계가 모두 통과했는지"""
        return all(
            s.passed is not False
            for s in self.statistics
            if s.provenance == "reference"
        )

    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def fingerprint(self) -> str:
        """wall-clock / run_id 를 제외한 재현성 해시"""
        payload = {
            "experiment_id": self.experiment_id,
            "master_seed": self.master_seed,
            "parameters": self.parameters,
            "statistics": [s.model_dump() for s in self.statistics],
            "replicates": self.replicates,
            "censored": self.censored,
        }
        raw = orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)
        return hashlib.sha256(raw).hexdigest()


class GreenRow(BaseModel):
    """Green 함수 감사 테이블 한 줄 (CSV 덤프용)"""
    x: int
    k: int
    H_closed: Optional[str] = None
    H_oracle: float
    Hstar_closed: Optional[str] = None
    Hstar_oracle: float
    residual: Optional[str] = None
    H_rel_error: Optional[float] = None
    Hstar_rel_error: Optional[float] = None
    H_tail_bound: Optional[float] = Field(None, description="창 밖 기여 상한 (h(k)/h(L) 로 인증)")
    Hstar_window_change: Optional[float] = Field(None, description="창 두 배 시 변화량 (인증되지 않은 추정치)")
    note: str = "H tail bound certified by h(k)/h(L); H* error is the change under window doubling, not a certified bound"
