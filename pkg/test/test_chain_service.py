from fractions import Fraction

import numpy as np
import pytest

from services.chain_service import ChainModel, chain_model, green_pair_float
from services.errors import DomainError


def test_scalar_functions_pinned_values():
    assert chain_model.w(0) == 0
    assert chain_model.w(1) == Fraction(2, 3)
    assert chain_model.w(2) == Fraction(5, 6)
    assert chain_model.f(1) == 20
    assert chain_model.h(1) == 120


def test_w_rejects_negative_state():
    with pytest.raises(DomainError):
        chain_model.w(-1)


@pytest.mark.parametrize("x", range(0, 40))
def test_x_step_is_a_probability_vector(x):
    up, stay, down = chain_model.x_step(x)
    assert up + stay + down == 1
    assert min(up, stay, down) >= 0


@pytest.mark.parametrize("x", range(1, 40))
def test_y_step_is_a_probability_vector(x):
    assert sum(chain_model.y_step(x)) == 1


def test_y_absorbs_at_zero():
    assert chain_model.y_step(0) is None


def test_j_law_and_survival_add_up():
    path = [4, 5, 4, 3, 3, 2, 1]
    law = chain_model.j_law(path)
    survive = Fraction(1)
    for y in path:
        survive *= chain_model.w(y - 1)
    assert sum(law) + survive == 1
    # w(0) = 0 이므로 1 에서는 반드시 멈춘다
    assert survive == 0


def test_hitting_probabilities():
    assert chain_model.hitting_probability(2, 1) == Fraction(1, 7)
    assert chain_model.hitting_probability(3, 3) == Fraction(17, 27)
    assert chain_model.hitting_probability(1, 4) == 1


def test_green_closed_forms_pinned_values():
    assert chain_model.green_H(1, 2) == Fraction(21, 10)
    assert chain_model.G(1, 2) == Fraction(3, 10)
    assert chain_model.G(3, 3) == Fraction(3 * chain_model.g(3), 35 * 4 * 5 * 6)


def test_green_outside_domain_raises():
    with pytest.raises(DomainError):
        chain_model.green_H(1, 1)
    with pytest.raises(DomainError):
        chain_model.green_Hstar(0, 3)


@pytest.mark.parametrize("k", range(2, 11))
def test_hstar_recurrence_is_exact(k):
    assert all(chain_model.hstar_recurrence_residual(x, k) == 0 for x in range(1, 31))


@pytest.mark.parametrize("k", range(2, 8))
def test_A_boundary_values(k):
    assert chain_model.A(k, k) == 0
    assert chain_model.A(k + 1, k) == k + 2


@pytest.mark.parametrize("x, k", [(1, 2), (2, 2), (5, 3), (7, 4)])
def test_green_oracle_matches_closed_form(x, k):
    est = chain_model.green_bruteforce(x, k)
    assert abs(est.H - float(chain_model.green_H(x, k))) <= 1e-6 * float(chain_model.green_H(x, k))
    assert abs(est.Hstar - float(chain_model.green_Hstar(x, k))) <= 1e-6 * float(chain_model.green_Hstar(x, k))


def test_certified_level_is_minimal():
    L = chain_model.certified_level(3, 1e-4)
    assert chain_model.h(3) <= 1e-4 * chain_model.h(L)
    assert chain_model.h(3) > 1e-4 * chain_model.h(L - 1)


def test_transition_matrix_rows_are_stochastic_below_the_top():
    P = chain_model.transition_matrix(20)
    rows = np.asarray(P.sum(axis=1)).ravel()
    assert np.allclose(rows[:-1], 1.0)
    assert rows[-1] < 1.0


def test_lamperti_ratio_is_in_range():
    res = chain_model.scaling_second_moment(1000, "exact")
    assert res.mass_lost == 0.0
    assert 3.5 < res.ratio < 6.0


@pytest.mark.slow
def test_lamperti_ratio_close_to_limit():
    res = chain_model.scaling_second_moment(10_000, "exact")
    assert abs(res.ratio - 14 / 3) <= 0.05 * 14 / 3


def test_scaling_rejects_unknown_mode():
    with pytest.raises(DomainError):
        chain_model.scaling_second_moment(10, "fast")


def test_density_support_checks():
    assert chain_model.theta_infty_n_density(0, 1, 1, [0], [1, 2], [2, 3]).value == 0
    bad = chain_model.theta_infty_n_density(2, 1, 1, [0, 1, 2], [1, 3], [2, 3])
    assert bad.value == 0 and bad.reason is not None
    ok = chain_model.theta_infty_n_density(2, 1, 1, [0, 1, 2], [1, 2], [2, 3], n=3)
    assert ok.value > 0 and ok.reason is None


@pytest.mark.slow
def test_kernel_sums_to_one():
    ks = chain_model.kernel_sum(5, 5, 500)
    assert 0.9 <= ks.total <= 1.1


def test_constants_bundle():
    c = chain_model.constants(1)
    assert (c.w, c.f, c.h) == (Fraction(2, 3), 20, 120)
    with pytest.raises(DomainError):
        chain_model.constants(-1)


def test_j_stop_probability():
    assert chain_model.j_stop_probability([3]) == Fraction(1, 6)
    assert chain_model.j_stop_probability([3, 2]) == Fraction(5, 6) * Fraction(1, 3)
    with pytest.raises(DomainError):
        chain_model.j_stop_probability([2, 0])


@pytest.mark.parametrize("k, n", [(2, 5), (3, 3), (0, 4)])
def test_G_is_symmetric(k, n):
    assert chain_model.G(k, n) == chain_model.G(n, k)


def test_kernel_domain_and_split():
    with pytest.raises(DomainError):
        chain_model.kernel_H(1, 1, 1, 1)
    with pytest.raises(DomainError):
        chain_model.kernel_H(1, 1, 0, 5)
    split = chain_model.kernel_split(2, 3, 10, k_max=40)
    assert split.total == pytest.approx(split.k_ge_n + split.k_lt_n)
    assert split.total > 0


def test_kernel_green_values_are_cached_per_state():
    green_pair_float.cache_clear()
    chain_model.kernel_H(2, 3, 2, 10)
    assert green_pair_float.cache_info().currsize == 2
    assert green_pair_float(3, 2) == (float(chain_model.green_H(3, 2)), float(chain_model.green_Hstar(3, 2)))
    assert not hasattr(ChainModel, "_green_pair_float")


def test_green_table_reports_both_error_kinds():
    rows = chain_model.green_table([1, 2], [2], 1e-8)
    for row in rows:
        assert 0.0 <= row.H_tail_bound < 1e-8
        assert row.Hstar_window_change is not None
        assert "not a certified bound" in row.note
