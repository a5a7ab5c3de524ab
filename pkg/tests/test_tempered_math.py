import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import ref_divergence, ref_exp_t, ref_log_t
from tempered_ot.errors import DomainError
from tempered_ot.tempered_math import (Temperature, exp_t, log_t, ominus_t, otimes_t, phi_t,
                                       tempered_divergence)

TS = [0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 1.5, 1.9]
temps = st.sampled_from(TS)


def test_temperature_validation():
    assert Temperature(0.0).t_star == 0.5
    assert Temperature(1.5).t_star == pytest.approx(2.0)
    assert Temperature(1.0).is_classical
    for bad in (-0.1, 2.0, 2.5, float("nan")):
        with pytest.raises(DomainError):
            Temperature(bad)


def test_exp_t_examples():
    for t in TS:
        assert exp_t(0.0, t) == 1.0
    assert exp_t(1.0, 0.0) == 2.0
    assert exp_t(-3.0, 0.5) == 0.0
    assert exp_t(3.0, 1.5) == math.inf
    assert exp_t(0.3, 1.0) == math.exp(0.3)


def test_log_t_examples():
    for t in TS:
        assert log_t(1.0, t) == 0.0
        assert log_t(exp_t(0.7, t), t) == pytest.approx(0.7, rel=1e-12)
    assert log_t(0.0, 0.0) == -1.0
    with pytest.raises(DomainError):
        log_t(-1.0, 0.5)
    with pytest.raises(DomainError):
        log_t(0.0, 1.0)
    with pytest.raises(DomainError):
        log_t(0.0, 1.5)


@given(st.floats(-50, 50), temps)
def test_exp_matches_scalar_reference(z, t):
    assert exp_t(z, t) == pytest.approx(ref_exp_t(z, t), rel=1e-12, abs=1e-300)


@given(st.floats(1e-6, 1e3), temps)
def test_log_matches_scalar_reference(z, t):
    assert log_t(z, t) == pytest.approx(ref_log_t(z, t), rel=1e-12, abs=1e-12)


@given(st.floats(-20, 20), temps)
def test_inverse_pair(z, t):
    e = exp_t(z, t)
    if 0 < e < math.inf:
        assert abs(log_t(e, t) - z) <= 1e-12 * (1 + abs(z))


@given(st.floats(-10, 10), st.floats(-10, 10), temps)
def test_exp_t_monotone(a, b, t):
    lo, hi = min(a, b), max(a, b)
    assert exp_t(lo, t) <= exp_t(hi, t)


def test_continuity_at_one():
    z = np.linspace(-5, 5, 101)
    for t in (1 - 1e-6, 1 + 1e-6):
        assert np.all(np.abs(exp_t(z, t) - np.exp(z)) <= 1e-4 * np.exp(z))


def test_vectorised_clamps():
    z = np.array([-10.0, 0.0, 10.0])
    np.testing.assert_array_equal(exp_t(z, 0.5), [0.0, 1.0, 36.0])
    out = exp_t(z, 1.5)
    assert out[2] == math.inf and out[1] == 1.0


def test_ominus_examples():
    for t in TS:
        assert ominus_t(2.5, 0.0, t) == 2.5
    assert ominus_t(5.0, 5.0, 0.5) == 0.0
    assert ominus_t(3.0, 1.0, 1.0) == 2.0
    with pytest.raises(DomainError):
        ominus_t(1.0, -2.0, 0.5)


@given(st.floats(-30, 30), st.floats(0, 1), st.sampled_from([0.0, 0.25, 0.5, 0.75, 0.9]))
def test_subtraction_identity(u, frac, t):
    # v ranges over [-1/(1-t), 1/(1-t)]; the pole itself is excluded
    v = -1.0 / (1.0 - t) + 2.0 * frac / (1.0 - t)
    if 1.0 + (1.0 - t) * v <= 1e-9:
        return
    lhs = exp_t(ominus_t(u, v, t), t)
    rhs = exp_t(u, t) / exp_t(v, t)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)


def test_otimes_examples():
    for t in TS:
        assert otimes_t(0.37, 1.0, t) == pytest.approx(0.37, rel=1e-14)
    assert otimes_t(0.5, 0.5, 0.0) == 0.0
    assert otimes_t(0.5, 0.25, 1.0) == 0.125
    with pytest.raises(DomainError):
        otimes_t(-1.0, 1.0, 0.5)


@given(st.floats(-20, 0), st.floats(-20, 0), st.sampled_from([0.0, 0.25, 0.5, 0.75, 0.9]))
def test_product_identity_nonpositive(u, v, t):
    lhs = exp_t(u + v, t)
    rhs = otimes_t(exp_t(u, t), exp_t(v, t), t)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)


@given(st.floats(1e-3, 5), st.floats(0.01, 5), st.sampled_from([0.0, 0.25, 0.5, 0.75, 0.9]))
def test_product_strict_on_complement(u, excess, t):
    v = -1.0 / (1.0 - t) - excess
    assert exp_t(u + v, t) < otimes_t(exp_t(u, t), exp_t(v, t), t)


def test_phi_examples():
    for t in TS:
        assert phi_t(1.0, t) == pytest.approx(0.0, abs=1e-15)
    z = np.linspace(0.01, 5, 20)
    np.testing.assert_allclose(phi_t(z, 1.0), z * np.log(z) - (z - 1), rtol=1e-13)
    h = 1e-6
    fd = (phi_t(0.8 + h, 0.5) - phi_t(0.8 - h, 0.5)) / (2 * h)
    assert abs(fd - log_t(0.8, 0.5)) < 1e-6


@pytest.mark.parametrize("t", TS)
def test_phi_convex(t):
    z = np.linspace(1e-3, 10, 4001)
    f = np.asarray(phi_t(z, t))
    assert np.all(f[2:] - 2 * f[1:-1] + f[:-2] >= -1e-8)


@pytest.mark.parametrize("t", [0.0, 0.25, 0.5, 0.75, 1.0, 1.5])
def test_divergence_nonnegative_and_identity(t, rng):
    for _ in range(1000):
        u = rng.uniform(0.01, 2.0, 5)
        v = rng.uniform(0.01, 2.0, 5)
        assert tempered_divergence(u, v, t) >= -1e-12
        assert abs(tempered_divergence(u, u, t)) <= 1e-12


@given(st.lists(st.floats(0, 3), min_size=1, max_size=6), st.data(),
       st.sampled_from([0.0, 0.5, 0.9, 1.0, 1.5]))
def test_divergence_matches_bregman_oracle(u, data, t):
    u = np.array(u)
    v = np.array(data.draw(st.lists(st.floats(1e-3, 3), min_size=len(u), max_size=len(u))))
    if t == 1.0 and np.any(u == 0):
        u = u + 1e-3
    assert tempered_divergence(u, v, t) == pytest.approx(ref_divergence(u, v, t), rel=1e-9, abs=1e-9)


def test_divergence_zero_only_at_equality(rng):
    # Bregman strict convexity: a perturbation of size 1e-4 already gives D > 0
    for t in (0.0, 0.5, 1.0, 1.5):
        u = rng.uniform(0.1, 1.0, 8)
        v = u.copy()
        v[3] += 1e-4
        assert tempered_divergence(u, v, t) > 0


def test_divergence_kl_branch():
    u = np.array([0.2, 0.5, 0.0])
    v = np.array([0.3, 0.4, 0.1])
    expected = 0.2 * np.log(0.2 / 0.3) + 0.5 * np.log(0.5 / 0.4) - u.sum() + v.sum()
    assert tempered_divergence(u, v, 1.0) == pytest.approx(expected, rel=1e-14)


def test_divergence_errors():
    with pytest.raises(DomainError):
        tempered_divergence([1.0, 2.0], [1.0], 0.5)
    with pytest.raises(DomainError):
        tempered_divergence([1.0], [0.0], 1.5)
    with pytest.raises(DomainError):
        tempered_divergence([-1.0], [1.0], 0.5)
