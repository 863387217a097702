from fractions import Fraction
from math import sqrt

import pytest

from model.schemas import SamplerBudget
from services.chain_service import chain_model
from services.errors import BudgetExceededError, EnumerationTooLargeError, InvalidLawError
from services.sampler_service import as_stream, labeled_tree_count, sampler_service, stream_rng
from services.tree_service import Law, tree_service


# ==========================================
# 재현성 / 기본 성질
# ==========================================
def test_same_seed_same_tree(small_budget):
    a = sampler_service.sample_rho(0, stream_rng(7, 3), small_budget)
    b = sampler_service.sample_rho(0, stream_rng(7, 3), small_budget)
    assert a == b


def test_replicate_streams_differ():
    a = stream_rng(7, 0).integers(0, 2 ** 62, size=4)
    b = stream_rng(7, 1).integers(0, 2 ** 62, size=4)
    assert a.tolist() != b.tolist()


@pytest.mark.parametrize("x", [-2, 0, 3])
def test_rho_has_requested_root_label(x, rng, small_budget):
    stream = as_stream(rng)
    for _ in range(20):
        tree = sampler_service.sample_rho(x, stream, small_budget)
        assert tree.root_label == x
        assert tree_service.validate(tree).valid


def test_conditioned_laws_respect_support(rng, small_budget):
    stream = as_stream(rng)
    for _ in range(30):
        assert sampler_service.sample_rho_plus(1, stream, small_budget).min_label >= 1
        assert sampler_service.sample_rho_minus(2, stream, small_budget).min_label <= 0


def test_rho_plus_at_zero_is_invalid(rng):
    with pytest.raises(InvalidLawError):
        sampler_service.sample_rho_plus(0, rng)


def test_tiny_budget_raises():
    budget = SamplerBudget(max_tree_edges=1, max_rejections=10)
    with pytest.raises(BudgetExceededError):
        for seed in range(200):
            sampler_service.sample_rho(0, stream_rng(seed), budget)


def test_rho_plus_acceptance_rate_matches_w():
    attempts = 3000
    budget = SamplerBudget(max_tree_edges=1_000_000)
    rate = sampler_service.acceptance_rate(Law.rho_plus(1), attempts, stream_rng(11), budget)
    p = float(chain_model.w(1))
    assert abs(rate - p) <= 3 * sqrt(p * (1 - p) / attempts)


# ==========================================
# 체인 경로
# ==========================================
def test_last_hit_path_ends_at_final_visit(rng, small_budget):
    stream = as_stream(rng)
    for k in (1, 2, 5):
        hit = sampler_service.sample_last_hit(k, stream, small_budget)
        assert hit.path[0] == 0 and hit.path[-1] == k
        assert hit.full[: len(hit.path)] == hit.path
        assert k not in hit.full[len(hit.path):]
        assert hit.full[-1] == hit.level
        assert all(abs(a - b) <= 1 for a, b in zip(hit.full, hit.full[1:]))


def test_y_chain_stops_before_absorption(rng):
    stream = as_stream(rng)
    for _ in range(50):
        y, J = sampler_service.sample_y_until_j(4, stream)
        assert y[0] == 4
        assert J == len(y) - 1
        assert min(y) >= 1


# ==========================================
# Θ_n / T_k / spine 트리
# ==========================================
def test_theta_n_marks_first_zero_corner(small_budget):
    for seed in range(10):
        mt = sampler_service.sample_theta_n(3, stream_rng(seed), small_budget)
        tree = mt.tree
        assert tree.root_label == 3
        assert tree.min_label <= 0
        assert tree_service.validate(tree).valid
        cs = tree_service.corner_sequence(tree)
        tau = mt.mark("tau")
        assert cs.label(tau) == 0
        assert all(cs.label(i) != 0 for i in range(tau))


def test_theta_n_truncation_returns_none_for_large_outputs():
    results = [
        sampler_service.sample_theta_n(2, stream_rng(seed), truncate_above=0) for seed in range(5)
    ]
    assert all(r is None for r in results)


def test_min_label_tail_pinned_value():
    assert sampler_service.min_label_tail(5, 3) == Fraction(7, 15)


def test_min_label_event_small_case():
    # P(min < -1) under Θ_1 = 1/2
    samples = 2_000
    stream = as_stream(stream_rng(11))
    hits = sum(sampler_service.sample_min_label_event(1, 1, stream) for _ in range(samples))
    assert abs(hits / samples - 0.5) <= 4 * sqrt(0.25 / samples)


def test_min_label_event_needs_no_tree_budget():
    tiny = SamplerBudget(max_tree_edges=10)
    stream = as_stream(stream_rng(3))
    results = [sampler_service.sample_min_label_event(5, 3, stream, tiny) for _ in range(200)]
    assert any(results) and not all(results)


def test_min_label_event_rejects_bad_parameters():
    with pytest.raises(InvalidLawError):
        sampler_service.sample_min_label_event(0, 3, stream_rng(0))


@pytest.mark.slow
def test_min_label_event_frequency():
    samples = 100_000
    stream = as_stream(stream_rng(5))
    hits = sum(sampler_service.sample_min_label_event(5, 3, stream) for _ in range(samples))
    p = 7 / 15
    assert abs(hits / samples - p) <= 3 * sqrt(p * (1 - p) / samples)


def test_T_k_top_corner_is_on_the_last_visit(small_budget):
    for seed in range(5):
        mt = sampler_service.sample_T_k(2, stream_rng(seed), small_budget)
        cs = tree_service.corner_sequence(mt.tree)
        assert mt.tree.root_label == 0
        assert cs.label(mt.mark("top")) == 2
        assert mt.meta["S"] >= 2


def test_theta_bar_spines(small_budget):
    st1 = sampler_service.sample_theta_bar(1, 12, stream_rng(3), small_budget)
    assert st1.spine_labels[0] == 0
    assert min(st1.spine_labels) >= 0
    assert st1.right[0].edge_count == 0
    assert all(t.min_label >= 1 for t in st1.right[1:])

    st2 = sampler_service.sample_theta_bar(2, 12, stream_rng(3), small_budget)
    assert st2.spine_labels[0] == 1
    assert min(st2.spine_labels) >= 1
    assert all(t.min_label >= 2 for t in st2.left[1:])


def test_theta_bar_rejects_unknown_variant(rng):
    with pytest.raises(InvalidLawError):
        sampler_service.sample_theta_bar(3, 4, rng)


def test_theta_inf_spine_is_a_lazy_walk(small_budget):
    st = sampler_service.sample_theta_infinity(20, stream_rng(9), small_budget)
    assert st.horizon == 20
    assert st.spine_labels[0] == 0
    assert all(abs(a - b) <= 1 for a, b in zip(st.spine_labels, st.spine_labels[1:]))


def test_rerooted_theta_inf_root_label():
    budget = SamplerBudget(max_tree_edges=200_000, horizon=5_000, resample_oversized=True)
    mt = sampler_service.sample_theta_infinity_rerooted(2, stream_rng(4), budget)
    assert mt.tree.root_label == 0
    assert "old_root" in mt.marks


# ==========================================
# 열거 오라클
# ==========================================
def test_enumeration_counts(trees_3_edges, trees_upto_3):
    assert len(trees_3_edges) == 135 == labeled_tree_count(3)
    assert len(trees_upto_3) == sum(labeled_tree_count(e) for e in range(4))


def test_enumeration_refuses_large_sizes():
    with pytest.raises(EnumerationTooLargeError):
        next(sampler_service.enumerate_labeled_trees(40))


def test_law_table_masses_are_exact():
    table = sampler_service.law_table(Law.rho(0), 1)
    assert sorted(table.values()) == [Fraction(1, 24)] * 3 + [Fraction(1, 2)]


def test_truncated_tv():
    ref = {b"a": 0.5, b"b": 0.5}
    assert sampler_service.truncated_tv([b"a", b"b"], ref) == 0.0
    assert sampler_service.truncated_tv([None, None], {b"a": 0.5}) == 0.5
