import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import naive_measured_cost
from tempered_ot.errors import DomainError
from tempered_ot.measures import from_density, independence_table, random_coupling, sample_problem
from tempered_ot.objectives import (CostMatrix, ball_membership, divergence_inner_form,
                                    divergence_to_independence, effective_cost, expected_cost,
                                    m_t_matrix, measured_cost, power_convex_mix,
                                    regularized_objective)
from tempered_ot.tempered_math import exp_t


def _random_plan(p, t, rng, spread=1.0):
    return from_density(random_coupling(p.r, p.c, rng, spread=spread), t)


def test_cost_examples(rng):
    p = sample_problem(5, 0, 0.5)
    P = _random_plan(p, 0.5, rng)
    assert expected_cost(P, np.zeros((5, 5)), 0.5) == 0.0
    P1 = _random_plan(p, 1.0, rng)
    assert expected_cost(P1, p.M, 1.0) == pytest.approx(measured_cost(P1, p.M), rel=1e-14)
    u = from_density(np.full(5, 0.2), 0.5)
    assert expected_cost(independence_table(u, u), p.M, 0.5) == pytest.approx(p.M.sum() / 25, rel=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.3, 0.7, 1.0])
def test_measured_dominates_expected(t, rng):
    p = sample_problem(6, 4, t)
    for _ in range(20):
        P = _random_plan(p, t, rng)
        assert measured_cost(P, p.M) >= expected_cost(P, p.M, t) - 1e-14


def test_measured_cost_naive_loop(rng):
    t = 0.4
    p = sample_problem(5, 8, t)
    Pd = random_coupling(p.r, p.c, rng)
    assert measured_cost(from_density(Pd, t), p.M) == pytest.approx(
        naive_measured_cost(Pd, p.M, 1 / (2 - t)), rel=1e-12)


def test_metric_check(rng):
    pts = rng.uniform(size=(6, 2))
    M = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    assert CostMatrix(M, metric=True).check_metric()
    M[0, 1] = M[1, 0] = 10.0
    assert not CostMatrix(M, metric=True).check_metric()
    with pytest.raises(DomainError):
        CostMatrix(-np.ones((2, 2)), metric=True)


def test_m_t_matrix():
    p = sample_problem(4, 1, 0.0)
    np.testing.assert_allclose(m_t_matrix(p.r_tilde, p.c_tilde, 0.0), np.outer(p.r_tilde, p.c_tilde))
    with pytest.raises(DomainError):
        m_t_matrix(p.r_tilde, p.c_tilde, 1.0)
    t = 0.5
    u = from_density(np.full(4, 0.25), t)
    np.testing.assert_allclose(m_t_matrix(u, u, t), (1 / 16) ** ((1 - t) / (2 - t)), rtol=1e-14)
    q = sample_problem(4, 1, t)
    assert np.sum(independence_table(q.r_tilde, q.c_tilde) * m_t_matrix(q.r_tilde, q.c_tilde, t)) \
        == pytest.approx(1.0, rel=1e-13)


@given(st.integers(2, 7), st.sampled_from([0.0, 0.25, 0.5, 0.9, 1.5]), st.integers(0, 10**6),
       st.floats(0.2, 3.0))
def test_divergence_inner_form(n, t, seed, spread):
    p = sample_problem(n, seed, t)
    P = _random_plan(p, t, np.random.default_rng(seed), spread)
    d = divergence_to_independence(P, p.r_tilde, p.c_tilde, t)
    assert abs(d - divergence_inner_form(P, p.r_tilde, p.c_tilde, t)) <= 1e-10


def test_effective_cost_signs():
    t = 0.5
    p = sample_problem(6, 2, t)
    big = effective_cost(p.M, p.r_tilde, p.c_tilde, 1e6, t).entries
    assert np.all(big[p.M > 0] > 0)
    small = effective_cost(p.M, p.r_tilde, p.c_tilde, 1e-9, t).entries
    assert np.all(small < 0)
    with pytest.raises(DomainError):
        effective_cost(p.M, p.r_tilde, p.c_tilde, 1.0, 1.0)
    with pytest.raises(DomainError):
        effective_cost(p.M, p.r_tilde, p.c_tilde, 0.0, 0.5)


@given(st.sampled_from([0.0, 0.3, 0.6, 0.9]), st.floats(0.01, 20), st.integers(0, 10**6))
def test_regularized_measured_affine_identity(t, lam, seed):
    p = sample_problem(5, seed, t)
    P = _random_plan(p, t, np.random.default_rng(seed))
    lhs = lam * regularized_objective(P, p.M, p.r_tilde, p.c_tilde, lam, t, "measured")
    Mp = effective_cost(p.M, p.r_tilde, p.c_tilde, lam, t).entries
    rhs = 1 / (1 - t) + np.sum(P * Mp)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_regularized_objective_limits(rng):
    t = 0.5
    p = sample_problem(5, 3, t)
    P = _random_plan(p, t, rng)
    assert regularized_objective(P, p.M, p.r_tilde, p.c_tilde, 1e12, t, "expected") == \
        pytest.approx(expected_cost(P, p.M, t), rel=1e-9)
    indep = independence_table(p.r_tilde, p.c_tilde)
    assert regularized_objective(indep, p.M, p.r_tilde, p.c_tilde, 2.0, t, "measured") == \
        pytest.approx(measured_cost(indep, p.M), abs=1e-12)
    with pytest.raises(DomainError):
        regularized_objective(P, p.M, p.r_tilde, p.c_tilde, 0.0, t)
    with pytest.raises(ValueError):
        regularized_objective(P, p.M, p.r_tilde, p.c_tilde, 1.0, t, "other")


def test_t1_objective_is_entropic_ot(rng):
    # <P,M> + KL(P||rc)/lam = <P,M> - H(P)/lam - <P, log rc>/lam  (both plans have mass 1)
    p = sample_problem(5, 6, 1.0)
    P = random_coupling(p.r, p.c, rng)
    lam = 3.0
    entropic = np.sum(P * p.M) + np.sum(P * np.log(P)) / lam
    offset = -np.sum(P * np.log(np.outer(p.r, p.c))) / lam
    assert regularized_objective(P, p.M, p.r, p.c, lam, 1.0) == pytest.approx(entropic + offset, rel=1e-12)


def test_ball_membership_examples(rng):
    t = 0.5
    p = sample_problem(5, 1, t)
    indep = independence_table(p.r_tilde, p.c_tilde)
    assert ball_membership(indep, p.r_tilde, p.c_tilde, 0.0, t).member
    P = _random_plan(p, t, rng)
    assert not ball_membership(P, p.r_tilde, p.c_tilde, 0.0, t).member
    with pytest.raises(DomainError):
        ball_membership(P, p.r_tilde, p.c_tilde, 2.0, t)
    with pytest.raises(DomainError):
        ball_membership(P, p.r_tilde, p.c_tilde, -0.1, t)
    assert ball_membership(P, p.r_tilde, p.c_tilde, 0.1, 1.0).inner_product_member is None


@pytest.mark.parametrize("t", [0.0, 0.5, 0.9])
def test_ball_tests_agree(t, rng):
    p = sample_problem(4, 9, t)
    cap = 1 / (1 - t)
    agree = 0
    for _ in range(1000):
        P = _random_plan(p, t, rng, spread=rng.uniform(0.1, 3))
        eps = rng.uniform(0, cap * 0.99)
        b = ball_membership(P, p.r_tilde, p.c_tilde, eps, t)
        if abs(b.slack) < 1e-10:
            agree += 1  # boundary: float noise may split the tests
            continue
        agree += b.member == b.inner_product_member
        # the threshold used is exp_t(-eps)^(1-t)
        assert exp_t(-eps, t) ** (1 - t) == pytest.approx(1 - (1 - t) * eps, abs=1e-12)
    assert agree == 1000


def test_power_convex_mix(rng):
    t = 0.5
    p = sample_problem(5, 5, t)
    P = _random_plan(p, t, rng)
    Q = _random_plan(p, t, rng)
    np.testing.assert_allclose(power_convex_mix(P, Q, 1.0, t), P, rtol=1e-13)
    np.testing.assert_allclose(power_convex_mix(P, P, 0.5, t), P, rtol=1e-13)
    with pytest.raises(DomainError):
        power_convex_mix(P, Q, 1.5, t)


def test_power_convex_mix_stays_in_ball(rng):
    t, eps = 0.5, 0.3
    p = sample_problem(4, 12, t)
    inside = []
    while len(inside) < 40:
        P = _random_plan(p, t, rng, spread=0.6)
        if divergence_to_independence(P, p.r_tilde, p.c_tilde, t) <= eps:
            inside.append(P)
    for _ in range(500):
        i, j = rng.integers(len(inside), size=2)
        mix = power_convex_mix(inside[i], inside[j], rng.uniform(), t)
        assert divergence_to_independence(mix, p.r_tilde, p.c_tilde, t) <= eps + 1e-12
