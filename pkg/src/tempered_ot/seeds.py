"""Expected and measured seed matrices and their zero patterns."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleSupportError
from .measures import independence_table
from .tempered_math import TLike, Temperature, as_temperature, exp_t, log_t


@dataclass
class SeedMatrix:
    entries: np.ndarray
    variant: str
    lam: float
    temp: Temperature
    zero_pattern: np.ndarray = field(init=False)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        self.zero_pattern = self.entries == 0.0
        if not np.all(np.isfinite(self.entries)):
            raise DomainError("seed entries must be finite")

    @property
    def nnz(self) -> int:
        return int((~self.zero_pattern).sum())

    def check_support(self):
        """Raise :class:`InfeasibleSupportError` on an all-zero row or column."""
        for axis, name in ((1, "row"), (0, "column")):
            empty = np.flatnonzero(self.zero_pattern.all(axis=axis))
            if empty.size:
                raise InfeasibleSupportError(
                    f"{self.variant} seed has an all-zero {name} {int(empty[0])}",
                    axis=name, index=int(empty[0]))

    @property
    def feasible_support(self) -> bool:
        return not (self.zero_pattern.all(axis=0).any() or self.zero_pattern.all(axis=1).any())

    def kernel(self) -> np.ndarray:
        """Density-space kernel ``K_tilde ** (1/t*)`` fed to Sinkhorn."""
        if self.temp.is_classical:
            return self.entries.copy()
        return self.entries ** (1.0 / self.temp.t_star)

    def to_dict(self) -> dict:
        return {"variant": self.variant, "lambda": self.lam, "t": self.temp.t,
                "n": self.entries.shape[0], "entries": self.entries.ravel().tolist()}


def _check(M, lam):
    M = np.asarray(M, dtype=float)
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    if np.any(M < 0):
        raise DomainError("seed construction assumes a non-negative cost matrix")
    return M


def expected_seed(M, lam: float, t: TLike) -> SeedMatrix:
    """``1 / exp_t(lam M / t*)``; exact zeros where ``exp_t`` blows up (``t > 1``)."""
    temp = as_temperature(t)
    M = _check(M, lam)
    with np.errstate(divide="ignore"):
        K = 1.0 / np.asarray(exp_t(lam * M / temp.t_star, temp))
    return SeedMatrix(K, "expected", float(lam), temp)


def measured_seed(M, r_tilde, c_tilde, lam: float, t: TLike) -> SeedMatrix:
    """``exp_t(log_t(r_tilde c_tilde^T) - lam M)``; zeros only possible for ``t < 1``."""
    temp = as_temperature(t)
    M = _check(M, lam)
    rc = independence_table(r_tilde, c_tilde)
    if np.any(rc <= 0):
        raise DomainError("measured seed needs strictly positive marginals")
    K = np.asarray(exp_t(log_t(rc, temp) - lam * M, temp))
    return SeedMatrix(K, "measured", float(lam), temp)


def build_seed(variant: str, M, r_tilde, c_tilde, lam: float, t: TLike) -> SeedMatrix:
    if variant == "expected":
        return expected_seed(M, lam, t)
    if variant == "measured":
        return measured_seed(M, r_tilde, c_tilde, lam, t)
    raise ValueError(f"unknown variant {variant!r}")


def zero_nesting_check(M, r_tilde, c_tilde, t: TLike, lambdas) -> bool:
    """True iff seed zero sets grow with lambda, for both variants."""
    lambdas = [float(x) for x in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise DomainError("lambda list must be strictly ascending")
    for variant in ("expected", "measured"):
        patterns = [build_seed(variant, M, r_tilde, c_tilde, lam, t).zero_pattern
                    for lam in lambdas]
        for small, large in zip(patterns, patterns[1:]):
            if np.any(small & ~large):
                return False
    return True
