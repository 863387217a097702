import os
from dotenv import load_dotenv

load_dotenv()

# ==========================================
# 환경 설정
# ==========================================
ENV = os.getenv("ENV", "development")
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
IS_PRODUCTION = ENV == "production"

# ==========================================
# 재현성 (seed / 병렬)
# ==========================================
QUADLAB_SEED = int(os.getenv("QUADLAB_SEED", "20240601"))
QUADLAB_THREADS = int(os.getenv("QUADLAB_THREADS", "1"))

# ==========================================
# 샘플러 예산 (SamplerBudget 기본값)
# ==========================================
QUADLAB_MAX_TREE_EDGES = int(os.getenv("QUADLAB_MAX_TREE_EDGES", "1000000"))
QUADLAB_MAX_REJECTIONS = int(os.getenv("QUADLAB_MAX_REJECTIONS", "1000000"))
QUADLAB_HORIZON = int(os.getenv("QUADLAB_HORIZON", "64"))
QUADLAB_EPSILON_TAIL = float(os.getenv("QUADLAB_EPSILON_TAIL", "1e-6"))

# numpy 난수 버퍼 크기 (geometric / integers 를 한 번에 뽑는 단위)
QUADLAB_RNG_CHUNK = int(os.getenv("QUADLAB_RNG_CHUNK", "4096"))

# ==========================================
# Green 함수 오라클
# ==========================================
QUADLAB_GREEN_TOL = float(os.getenv("QUADLAB_GREEN_TOL", "1e-9"))
QUADLAB_GREEN_MAX_WINDOW = int(os.getenv("QUADLAB_GREEN_MAX_WINDOW", str(2 ** 20)))

# ==========================================
# 열거 오라클
# ==========================================
QUADLAB_ENUM_MAX_EDGES = int(os.getenv("QUADLAB_ENUM_MAX_EDGES", "6"))

# ==========================================
# 실험 (couple / localize)
# ==========================================
QUADLAB_EXPERIMENT_MAX_TREE_EDGES = int(
    os.getenv("QUADLAB_EXPERIMENT_MAX_TREE_EDGES", "200000")
)


def _parse_grid(raw: str) -> list[float]:
    return [float(v) for v in raw.split(",") if v.strip()]


QUADLAB_BETA_GRID = _parse_grid(os.getenv("QUADLAB_BETA_GRID", "0.05,0.1,0.2,0.3,0.5"))
QUADLAB_ALPHA_GRID = _parse_grid(os.getenv("QUADLAB_ALPHA_GRID", "0.05,0.1,0.2,0.3,0.5"))


def get_default_budget():
    """환경 변수 기반 기본 SamplerBudget 반환"""
    from model.schemas import SamplerBudget

    return SamplerBudget(
        max_tree_edges=QUADLAB_MAX_TREE_EDGES,
        max_rejections=QUADLAB_MAX_REJECTIONS,
        horizon=QUADLAB_HORIZON,
        epsilon_tail=QUADLAB_EPSILON_TAIL,
    )
