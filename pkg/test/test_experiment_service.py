from fractions import Fraction
from math import isnan

import pandas as pd
import pytest

from services.errors import QuadlabError
from services.experiment_service import (
    binomial_record,
    bound_record,
    experiment_service,
    trend_record,
)


def _stat(report, name):
    return next(s for s in report.statistics if s.name == name)


# ==========================================
# 기록 헬퍼
# ==========================================
def test_binomial_record_band():
    rec = binomial_record("p", 50, 100, Fraction(1, 2))
    assert rec.passed and rec.value == 0.5
    assert rec.reference_exact == "1/2"
    assert rec.tolerance == pytest.approx(0.15)
    assert not binomial_record("p", 90, 100, Fraction(1, 2)).passed


def test_bound_record():
    assert bound_record("b", 0.0, 0.0).passed
    assert not bound_record("b", 1.0, 0.5).passed


def test_trend_record_flags_increasing_frequencies():
    ok = trend_record("t", [0.1, 0.2, 0.3], [900, 500, 100], [1000] * 3)
    assert ok.passed and ok.value == 0.0 and ok.provenance == "trend"
    bad = trend_record("t", [0.1, 0.2], [100, 900], [1000, 1000])
    assert not bad.passed and bad.value == 1.0


def test_trend_failures_do_not_change_exit_code():
    report = experiment_service._report(
        "x", 0, {}, [trend_record("t", [0.1, 0.2], [100, 900], [1000, 1000])], 0.0
    )
    assert report.passed and report.exit_code() == 0


# ==========================================
# verify
# ==========================================
def test_verify_green_passes_and_writes_table(tmp_path):
    report = experiment_service.verify("green", seed=1, out_dir=tmp_path)
    assert report.experiment_id == "verify:green"
    assert report.exit_code() == 0
    assert _stat(report, "hstar_residual_nonzero").value == 0.0
    assert _stat(report, "G_1_2").reference_exact == "3/10"
    table = pd.read_csv(report.artifacts["green_table"])
    assert len(table) == 8 * 7


def test_verify_rejects_unknown_suite():
    with pytest.raises(QuadlabError):
        experiment_service.verify("everything", seed=1)


@pytest.mark.slow
def test_verify_cvs_suite():
    report = experiment_service.verify("cvs", seed=3, samples=200)
    assert report.passed
    assert _stat(report, "cvs_injective_3_edges").value == 135
    assert _stat(report, "tv_embedded_submap_vs_boundary_quad").samples > 0


@pytest.mark.slow
def test_embedded_submap_law_matches_boundary_quad_law():
    records = experiment_service._verify_submap_law(seed=9, samples=20_000, threads=4)
    tv = records[0]
    assert tv.passed, tv.note
    assert records[1].passed


@pytest.mark.slow
def test_verify_laws_at_full_sample_size():
    report = experiment_service.verify("laws", seed=11, samples=1_000_000)
    for name in ("tv_theta1_vs_rho_minus_table", "tv_rho_minus_rejection_vs_table", "tv_T1_vs_rerooted_theta1"):
        rec = _stat(report, name)
        assert rec.tolerance == 0.01
        assert rec.passed, rec.value


# ==========================================
# couple / localize
# ==========================================
def test_couple_is_reproducible():
    kw = dict(n=5, replicates=6, seed=17, betas=[0.0, 0.5], threads=1, ball_radius=0)
    a = experiment_service.couple(**kw)
    b = experiment_service.couple(**kw)
    assert a.fingerprint() == b.fingerprint()
    assert a.run_id != b.run_id
    eq = _stat(a, "encoding_equal_beta0")
    assert eq.provenance == "reference_free"
    assert eq.samples == a.replicates - a.censored
    assert isnan(eq.value) or 0.0 <= eq.value <= 1.0
    assert _stat(a, "encoding_equal_monotone_in_beta").provenance == "trend"


def test_localize_radius_zero_is_always_contained():
    report = experiment_service.localize(n=4, replicates=4, seed=5, beta=0.5, alphas=[0.0, 0.5], threads=1)
    rec = _stat(report, "contained_alpha0")
    assert rec.samples == 0 or rec.value == 1.0
    assert report.parameters["alphas"] == [0.0, 0.5]
    assert isinstance(report.artifacts["witnesses"], list)


# ==========================================
# stats
# ==========================================
def test_stats_min_label_reference():
    report = experiment_service.stats("min_label", seed=2, n=5, k=3, samples=200)
    rec = _stat(report, "min_label_below_minus3_theta5")
    assert rec.reference_exact == "7/15"
    assert rec.samples == 200
    assert 0.0 <= rec.value <= 1.0


def test_stats_last_hit_histogram(tmp_path):
    report = experiment_service.stats("last_hit", seed=2, n=3, samples=100, out_dir=tmp_path, bins=10)
    frame = pd.read_csv(report.artifacts["histogram"])
    assert len(frame) == 10
    assert frame["count"].sum() == 100
    assert len(report.artifacts["quantiles"]) == 5


def test_stats_scaling_exact_mode():
    report = experiment_service.stats("scaling", seed=0, n=1000, mode="exact")
    assert _stat(report, "lamperti_ratio_n1000").reference_exact == "14/3"


def test_stats_unknown_statistic():
    with pytest.raises(QuadlabError):
        experiment_service.stats("variance", seed=0)


# ==========================================
# 허용치 / 부분맵 법칙
# ==========================================
def test_law_tolerance_is_exact_at_full_sample_size():
    assert experiment_service.law_tv_tolerance(5, 1_000_000) == 0.01
    assert experiment_service.law_tv_tolerance(5, 100_000) > 0.01
    assert experiment_service.law_tv_note(1_000_000) is None
    assert "sampling noise" in experiment_service.law_tv_note(20_000, "pooled")


def test_two_sample_tv():
    a = [b"x", b"x", None, b"y"]
    assert experiment_service.two_sample_tv(a, list(reversed(a))) == 0.0
    assert experiment_service.two_sample_tv([b"x"], [b"y"]) == 1.0
    assert experiment_service.two_sample_tv([b"x", None], [b"x", b"x"]) == pytest.approx(0.5)
    assert isnan(experiment_service.two_sample_tv([], [b"x"]))


def test_boundary_quad_codes_are_small_or_pooled():
    codes = [experiment_service._boundary_quad_one(4, r) for r in range(30)]
    assert any(c is not None for c in codes)
    assert all(c is None or isinstance(c, bytes) for c in codes)


def test_submap_codes_come_from_the_same_cells():
    decided = [experiment_service._submap_one(4, r) for r in range(4)]
    assert any(ok for ok, _ in decided)
    assert all(code is None or isinstance(code, bytes) for ok, code in decided if ok)
