"""Co-simplex vectors, co-polytope plans and random problem instances.

Tilde-space objects (``r_tilde``, ``P_tilde``) are the tempered measures; their
entrywise ``1/t* = 2 - t`` power is the co-density, which is what sums to one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .tempered_math import Temperature, TLike, as_temperature

CONSTRUCT_TOL = 1e-9
SOLVER_TOL = 1e-6


def to_density(x_tilde, t: TLike) -> np.ndarray:
    """Co-density ``x_tilde ** (2 - t)`` of a tilde-space array."""
    temp = as_temperature(t)
    x_tilde = np.asarray(getattr(x_tilde, "entries", x_tilde), dtype=float)
    if temp.is_classical:
        return x_tilde.copy()
    return x_tilde ** (1.0 / temp.t_star)


def from_density(p, t: TLike) -> np.ndarray:
    """Lift a density-space array to tilde space (entrywise power ``t*``)."""
    temp = as_temperature(t)
    p = np.asarray(getattr(p, "entries", p), dtype=float)
    if temp.is_classical:
        return p.copy()
    return p ** temp.t_star


@dataclass(frozen=True)
class DensityVector:
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 1 or np.any(e < 0) or abs(e.sum() - 1.0) > CONSTRUCT_TOL:
            raise DomainError("density vector must be non-negative and sum to 1")
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True)
class CoSimplexVector:
    """Non-negative vector whose co-density sums to one."""

    entries: np.ndarray
    temp: Temperature

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        temp = as_temperature(self.temp)
        if e.ndim != 1 or np.any(e < 0):
            raise DomainError("co-simplex vector must be a non-negative 1-d array")
        mass = to_density(e, temp).sum()
        if abs(mass - 1.0) > CONSTRUCT_TOL:
            raise DomainError(f"co-density sums to {mass!r}, expected 1")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "temp", temp)

    @classmethod
    def from_density(cls, p, t: TLike) -> "CoSimplexVector":
        return cls(from_density(p, t), as_temperature(t))

    def density(self) -> np.ndarray:
        return to_density(self.entries, self.temp)

    @property
    def total_mass(self) -> float:
        """Tilde-space mass; differs from 1 whenever ``t != 1``."""
        return float(self.entries.sum())

    def __len__(self):
        return len(self.entries)


@dataclass
class MembershipReport:
    row_residual: float
    col_residual: float
    min_entry: float
    tol: float

    @property
    def accepted(self) -> bool:
        return (self.row_residual <= self.tol and self.col_residual <= self.tol
                and self.min_entry >= 0)

    def __bool__(self):
        return self.accepted


def validate_coupling(P_tilde, r_tilde, c_tilde, t: TLike, tol: float = SOLVER_TOL) -> MembershipReport:
    """Check co-polytope membership of ``P_tilde`` for co-marginals ``r_tilde``, ``c_tilde``.

    Residuals are the max absolute deviation of the co-density row/column sums
    from the co-densities of the marginals.
    """
    P_tilde = np.asarray(P_tilde, dtype=float)
    r_tilde = np.asarray(getattr(r_tilde, "entries", r_tilde), dtype=float)
    c_tilde = np.asarray(getattr(c_tilde, "entries", c_tilde), dtype=float)
    n, m = P_tilde.shape
    if (n, m) != (len(r_tilde), len(c_tilde)):
        raise DomainError("plan shape does not match marginals")
    min_entry = float(P_tilde.min())
    P = to_density(np.clip(P_tilde, 0.0, None), t)
    row = float(np.max(np.abs(P.sum(axis=1) - to_density(r_tilde, t))))
    col = float(np.max(np.abs(P.sum(axis=0) - to_density(c_tilde, t))))
    return MembershipReport(row, col, min_entry, tol)


@dataclass
class CouplingPlan:
    """Tilde-space transport plan with its co-marginals."""

    entries: np.ndarray
    temp: Temperature
    row_marginal: CoSimplexVector
    col_marginal: CoSimplexVector

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        self.temp = as_temperature(self.temp)

    def density(self) -> np.ndarray:
        return to_density(self.entries, self.temp)

    def validate(self, tol: float = SOLVER_TOL) -> MembershipReport:
        return validate_coupling(self.entries, self.row_marginal, self.col_marginal,
                                 self.temp, tol)


def independence_table(r_tilde, c_tilde) -> np.ndarray:
    """Rank-one plan ``r_tilde c_tilde^T``, the centre of every divergence ball."""
    r = np.asarray(getattr(r_tilde, "entries", r_tilde), dtype=float)
    c = np.asarray(getattr(c_tilde, "entries", c_tilde), dtype=float)
    if len(r) != len(c):
        raise DomainError("marginals must have the same length")
    return np.outer(r, c)


def _positive_simplex(rng: np.random.Generator, n: int) -> np.ndarray:
    x = rng.uniform(0.0, 1.0, size=n)
    while np.any(x == 0.0):
        zero = x == 0.0
        x[zero] = rng.uniform(0.0, 1.0, size=int(zero.sum()))
    return x / x.sum()


@dataclass
class Problem:
    """Cost matrix plus density marginals for one random OT instance."""

    M: np.ndarray
    r: np.ndarray
    c: np.ndarray
    t: float
    seed: object = None

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def temp(self) -> Temperature:
        return Temperature(self.t)

    @property
    def r_tilde(self) -> np.ndarray:
        return from_density(self.r, self.t)

    @property
    def c_tilde(self) -> np.ndarray:
        return from_density(self.c, self.t)

    def with_t(self, t: float) -> "Problem":
        return Problem(self.M, self.r, self.c, float(t), self.seed)

    def to_json(self) -> str:
        seed = self.seed if isinstance(self.seed, (int, type(None))) else list(self.seed)
        return json.dumps({
            "n": self.n, "t": self.t, "seed": seed,
            "M": self.M.ravel().tolist(), "r": self.r.tolist(), "c": self.c.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "Problem":
        d = json.loads(text)
        n = int(d["n"])
        return cls(np.asarray(d["M"], dtype=float).reshape(n, n),
                   np.asarray(d["r"], dtype=float), np.asarray(d["c"], dtype=float),
                   float(d["t"]), d.get("seed"))


def sample_problem(n: int, seed, t: TLike = 1.0) -> Problem:
    """Uniform ``[0, 1)`` costs and uniform marginals normalised in density space.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`
    (an int, a sequence of ints such as ``(master_seed, trial)``, or a
    ``SeedSequence``).
    """
    if n < 2:
        raise DomainError("n must be at least 2")
    temp = as_temperature(t)
    rng = np.random.default_rng(seed)
    M = rng.uniform(0.0, 1.0, size=(n, n))
    r = _positive_simplex(rng, n)
    c = _positive_simplex(rng, n)
    return Problem(M, r, c, temp.t, seed)


def metric_cost(n: int, rng: np.random.Generator, dim: int = 2) -> np.ndarray:
    """Pairwise Euclidean distances of random points (a genuine metric)."""
    pts = rng.uniform(0.0, 1.0, size=(n, dim))
    return np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)


def random_coupling(r, c, rng: np.random.Generator, spread: float = 1.0, iters: int = 500) -> np.ndarray:
    """Random density-space plan with marginals ``r``, ``c``.

    A log-normal kernel with scale ``spread`` is balanced by matrix scaling;
    rows sum to ``r`` exactly, columns to within scaling precision.
    """
    n = len(r)
    K = np.exp(spread * rng.standard_normal((n, n)))
    xi = np.ones(n)
    for _ in range(iters):
        mu = r / (K @ xi)
        xi_new = c / (K.T @ mu)
        if np.max(np.abs(xi_new - xi)) <= 1e-15 * max(1.0, xi.max()):
            xi = xi_new
            break
        xi = xi_new
    mu = r / (K @ xi)
    return mu[:, None] * K * xi[None, :]
