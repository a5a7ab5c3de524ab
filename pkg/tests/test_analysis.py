import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from oracles import brute_brualdi, brute_indecomposable, brute_projective_diameter
from tempered_ot.analysis import (SupportPattern, brualdi_feasible, check_sparsity_theorem,
                                  contraction_ratio, hilbert_distance, indecomposable,
                                  projective_diameter, support)
from tempered_ot.errors import DomainError
from tempered_ot.measures import sample_problem
from tempered_ot.objectives import effective_cost
from tempered_ot.seeds import build_seed


def test_support_pattern():
    P = np.array([[1.0, 1e-30], [0.0, 5e-26]])
    s = support(P)
    np.testing.assert_array_equal(s.S, [[True, False], [False, False]])
    assert support(P, 0.0).nnz == 3
    assert s.text_grid() == "#.\n.."
    back = SupportPattern.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.S, s.S)
    assert back.threshold == s.threshold
    with pytest.raises(DomainError):
        support(P, -1.0)


def test_diameter_examples():
    assert projective_diameter(np.array([[1.0, 2.0], [2.0, 1.0]])) == pytest.approx(math.log(4))
    assert projective_diameter(np.outer([1.0, 2.0, 3.0], [4.0, 5.0])) == pytest.approx(0.0, abs=1e-14)
    assert contraction_ratio(np.ones((3, 3))) == 0.0
    with pytest.raises(DomainError):
        projective_diameter(np.array([[1.0, 0.0], [1.0, 1.0]]))


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 10**6))
def test_diameter_matches_brute_force(n, m, seed):
    rng = np.random.default_rng(seed)
    K = rng.uniform(0.05, 3.0, (n, m))
    d = projective_diameter(K)
    assert d == pytest.approx(brute_projective_diameter(K), rel=1e-12, abs=1e-12)
    # invariant under positive diagonal scalings
    D = rng.uniform(0.1, 10, n)[:, None] * K * rng.uniform(0.1, 10, m)[None, :]
    assert projective_diameter(D) == pytest.approx(d, rel=1e-10, abs=1e-10)


def test_kl_seed_diameter_scales_with_lambda():
    p = sample_problem(6, 1, 1.0)
    M = p.M
    base = projective_diameter(np.exp(-M))
    for lam in (0.5, 2.0, 7.0):
        K = build_seed("expected", M, p.r_tilde, p.c_tilde, lam, 1.0).kernel()
        assert projective_diameter(K) == pytest.approx(lam * base, rel=1e-10)
        assert contraction_ratio(K) == pytest.approx(math.tanh(lam * base / 4), rel=1e-10)


def test_hilbert_distance():
    x = np.array([1.0, 2.0, 4.0])
    assert hilbert_distance(x, 3.0 * x) == pytest.approx(0.0, abs=1e-15)
    assert hilbert_distance(x, np.ones(3)) == pytest.approx(math.log(4))
    assert hilbert_distance(x, np.ones(3)) == pytest.approx(hilbert_distance(np.ones(3), x))


def _random_pattern(rng, n, m, p):
    S = rng.random((n, m)) < p
    S[np.arange(n), rng.integers(0, m, n)] = True
    S[rng.integers(0, n, m), np.arange(m)] = True
    return S


@given(st.integers(1, 7), st.integers(1, 7), st.floats(0.05, 0.7), st.integers(0, 10**6))
def test_indecomposable_matches_brute_force(n, m, p, seed):
    S = _random_pattern(np.random.default_rng(seed), n, m, p)
    assert indecomposable(S) == brute_indecomposable(S)


def test_indecomposable_examples():
    assert not indecomposable(np.eye(3, dtype=bool))
    assert indecomposable(np.ones((3, 3), dtype=bool))
    assert indecomposable(np.array([[1, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=bool))
    with pytest.raises(DomainError):
        indecomposable(np.array([[1, 0], [1, 0]], dtype=bool))


@given(st.integers(2, 7), st.floats(0.2, 0.7), st.integers(0, 10**6))
def test_brualdi_matches_brute_force(n, p, seed):
    rng = np.random.default_rng(seed)
    S = _random_pattern(rng, n, n, p)
    assume(indecomposable(S))
    r = rng.dirichlet(np.ones(n))
    c = rng.dirichlet(np.ones(n))
    v = brualdi_feasible(S, r, c)
    assert v.indecomposable
    assert v.brualdi_ok == brute_brualdi(S, r, c)
    assert v.feasible == (not v.violating_subsets)


def test_brualdi_examples():
    r = c = np.full(3, 1 / 3)
    full = brualdi_feasible(np.ones((3, 3)), r, c)
    assert full.feasible and full.violating_subsets == []
    diag = brualdi_feasible(np.eye(3), r, c)
    assert not diag.feasible and diag.brualdi_ok is None
    # upper triangular: row 2 reaches only column 2 which cannot absorb its mass
    tri = np.triu(np.ones((3, 3), dtype=bool))
    v = brualdi_feasible(tri, r, c)
    assert v.indecomposable and not v.brualdi_ok
    assert ([2], [2]) in [tuple(x) for x in v.violating_subsets]
    assert '"brualdi_ok": false' in v.to_json()


def test_sparsity_checker_flags_each_clause():
    t = 0.5
    Mp = np.array([[1.0, -1.0], [-1.0, 1.0]])
    # M'_01 < 0 but unsupported
    P = np.array([[0.5, 0.0], [0.5, 0.5]])
    assert {v.clause for v in check_sparsity_theorem(P, Mp, t)} >= {"negative-support"}
    # both positive cells of an alternating 2x2 supported
    P = np.full((2, 2), 0.25)
    clauses = [v.clause for v in check_sparsity_theorem(P, Mp, t)]
    assert "both-positive" in clauses and "negative-support" not in clauses
    # M'_kl < 0 forces a small transport there when S_ij = 1
    Mp = np.array([[1.0, -1.0], [-1.0, -0.01]])
    P = np.array([[0.3, 0.2], [0.2, 0.3]])
    bad = check_sparsity_theorem(P, Mp, t)
    assert [(v.clause, v.indices) for v in bad] == [("small-transport", (0, 0, 1, 1))]
    assert all(v.detail > 0 for v in bad)
    P = np.array([[0.3, 0.2], [0.2, 1e-8]])
    assert check_sparsity_theorem(P, Mp, t) == []
    with pytest.raises(DomainError):
        check_sparsity_theorem(P, Mp, 1.0)


def test_sparsity_checker_reads_temperature():
    t = 0.5
    p = sample_problem(4, 2, t)
    Mp = effective_cost(p.M, p.r_tilde, p.c_tilde, 2.0, t)
    P = np.where(Mp.entries < 0, 1.0, 0.0)
    assert check_sparsity_theorem(P, Mp) == check_sparsity_theorem(P, Mp.entries, t)
    with pytest.raises(DomainError):
        check_sparsity_theorem(P, Mp.entries)
