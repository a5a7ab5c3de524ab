"""Cost functionals over co-polytope plans.

Expected cost lives in density space (``<P, M>``), measured cost in tilde
space (``<P_tilde, M>``).  For ``t < 1`` the divergence to the independence
table collapses to an inner product with ``M_t = (r_tilde c_tilde^T)^(1-t)``,
which makes the regularized measured cost an unregularized one over the
effective cost ``M' = lam * M - M_t / (1 - t)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .measures import independence_table, to_density
from .tempered_math import TLike, Temperature, _tval, as_temperature, tempered_divergence

VARIANTS = ("expected", "measured")


@dataclass
class CostMatrix:
    entries: np.ndarray
    metric: bool = False

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.metric and np.any(self.entries < 0):
            raise DomainError("a metric cost matrix must be non-negative")

    def check_metric(self, atol: float = 1e-12) -> bool:
        """Symmetry, zero diagonal and the triangle inequality."""
        M = self.entries
        if not np.allclose(M, M.T, atol=atol) or np.any(np.abs(np.diag(M)) > atol):
            return False
        # M_ik <= M_ij + M_jk for all i, j, k
        return bool(np.all(M[:, None, :] <= M[:, :, None] + M[None, :, :] + atol))


@dataclass
class EffectiveCostMatrix:
    entries: np.ndarray
    lam: float
    temp: Temperature


def _arr(x):
    return np.asarray(getattr(x, "entries", x), dtype=float)


def expected_cost(P_tilde, M, t: TLike) -> float:
    """``<P_tilde^(2-t), M>``: the classical cost of the co-density plan."""
    return float(np.sum(to_density(_arr(P_tilde), t) * _arr(M)))


def measured_cost(P_tilde, M) -> float:
    """``<P_tilde, M>`` taken directly in tilde space."""
    return float(np.sum(_arr(P_tilde) * _arr(M)))


def m_t_matrix(r_tilde, c_tilde, t: TLike) -> np.ndarray:
    """Interaction matrix ``(r_tilde c_tilde^T)^(1 - t)``; undefined for ``t = 1``."""
    t = _tval(t)
    if t == 1.0:
        raise DomainError("M_t is not used at t = 1 (the KL branch has no such term)")
    return independence_table(r_tilde, c_tilde) ** (1.0 - t)


def effective_cost(M, r_tilde, c_tilde, lam: float, t: TLike) -> EffectiveCostMatrix:
    """``M' = lam * M - M_t / (1 - t)`` for ``t < 1``."""
    temp = as_temperature(t)
    if temp.t >= 1.0:
        raise DomainError("the effective cost matrix is only defined for t < 1")
    if lam <= 0:
        raise DomainError("lambda must be positive")
    Mp = lam * _arr(M) - m_t_matrix(r_tilde, c_tilde, temp) / (1.0 - temp.t)
    return EffectiveCostMatrix(Mp, float(lam), temp)


def divergence_to_independence(P_tilde, r_tilde, c_tilde, t: TLike) -> float:
    return tempered_divergence(_arr(P_tilde), independence_table(r_tilde, c_tilde), t)


def divergence_inner_form(P_tilde, r_tilde, c_tilde, t: TLike) -> float:
    """``(1 - <P_tilde, M_t>) / (1 - t)``, valid on the co-polytope for ``t != 1``."""
    t = _tval(t)
    return (1.0 - float(np.sum(_arr(P_tilde) * m_t_matrix(r_tilde, c_tilde, t)))) / (1.0 - t)


@dataclass
class BallMembership:
    member: bool
    slack: float
    divergence: float
    inner_product_member: bool | None = None

    def __bool__(self):
        return self.member


def ball_membership(P_tilde, r_tilde, c_tilde, epsilon: float, t: TLike) -> BallMembership:
    """Membership of ``P_tilde`` in the divergence ball of radius ``epsilon``.

    ``slack = epsilon - D_t``.  For ``t < 1`` the radius must stay below
    ``1/(1 - t)`` (larger balls contain the whole co-polytope) and the
    equivalent test ``<P_tilde, M_t> >= exp_t(-epsilon)^(1-t) = 1 - (1-t) epsilon``
    is evaluated as well.
    """
    t = _tval(t)
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    if t < 1.0 and epsilon >= 1.0 / (1.0 - t):
        raise DomainError(f"epsilon >= 1/(1-t) = {1.0 / (1.0 - t)} makes the ball vacuous")
    d = divergence_to_independence(P_tilde, r_tilde, c_tilde, t)
    inner = None
    if t < 1.0:
        ip = float(np.sum(_arr(P_tilde) * m_t_matrix(r_tilde, c_tilde, t)))
        inner = ip >= 1.0 - (1.0 - t) * epsilon
    return BallMembership(d <= epsilon, epsilon - d, d, inner)


def regularized_objective(P_tilde, M, r_tilde, c_tilde, lam: float, t: TLike,
                          variant: str = "expected") -> float:
    """Cost of ``variant`` plus ``D_t(P_tilde || r_tilde c_tilde^T) / lam``."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if variant == "expected":
        cost = expected_cost(P_tilde, M, t)
    elif variant == "measured":
        cost = measured_cost(P_tilde, M)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return cost + divergence_to_independence(P_tilde, r_tilde, c_tilde, t) / lam


def power_convex_mix(P_tilde, Q_tilde, beta: float, t: TLike) -> np.ndarray:
    """``(beta P^(1/t*) + (1 - beta) Q^(1/t*))^t*``: a convex mix of co-densities."""
    temp = as_temperature(t)
    if not 0.0 <= beta <= 1.0:
        raise DomainError("beta must lie in [0, 1]")
    mix = beta * to_density(_arr(P_tilde), temp) + (1.0 - beta) * to_density(_arr(Q_tilde), temp)
    return mix ** temp.t_star
