"""Support patterns, sparsity clause checks, contraction and feasibility."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DomainError
from .tempered_math import TLike, _tval

DEFAULT_THRESHOLD = 1e-25
MAX_QUADRUPLE_N = 64
MAX_DIAMETER_N = 128
MAX_BRUALDI_N = 14
BRUALDI_MARGIN = 1e-12


@dataclass
class SupportPattern:
    S: np.ndarray
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=bool)

    @property
    def nnz(self) -> int:
        return int(self.S.sum())

    def text_grid(self, on: str = "#", off: str = ".") -> str:
        return "\n".join("".join(on if s else off for s in row) for row in self.S)

    def to_dict(self) -> dict:
        return {"n": int(self.S.shape[0]), "threshold": self.threshold, "nnz": self.nnz,
                "rows": ["".join("1" if s else "0" for s in row) for row in self.S]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SupportPattern":
        S = np.array([[ch == "1" for ch in row] for row in d["rows"]], dtype=bool)
        return cls(S, float(d["threshold"]))


def support(P_tilde, threshold: float = DEFAULT_THRESHOLD) -> SupportPattern:
    """Binarize a plan: ``S_ij = P_ij > threshold``."""
    if threshold < 0:
        raise DomainError("threshold must be non-negative")
    P = np.asarray(getattr(P_tilde, "entries", P_tilde), dtype=float)
    return SupportPattern(P > threshold, float(threshold))


# --------------------------------------------------------------------------
# sparsity clauses for optimal measured plans


@dataclass(frozen=True)
class ClauseViolation:
    clause: str          # "negative-support", "both-positive", "small-transport"
    indices: tuple       # (i, j) or (i, j, k, l)
    detail: float = 0.0  # amount by which the inequality fails, when relevant


def check_sparsity_theorem(P_tilde, Mp, t: Optional[TLike] = None,
                           threshold: float = 0.0, rtol: float = 1e-9) -> list:
    """Every clause of the optimal-support characterization violated by ``P_tilde``.

    ``Mp`` is the effective cost (array or :class:`EffectiveCostMatrix`).
    Clauses checked, with ``S`` the support of ``P_tilde``:

    * ``M'_ij < 0``  implies ``S_ij = 1``;
    * for ``i != k``, ``j != l`` with ``M'_ij > 0``, ``M'_il < 0``, ``M'_kj < 0``:
      if ``M'_kl > 0`` then not both ``S_ij`` and ``S_kl``; if ``M'_kl < 0`` and
      ``S_ij = 1`` then ``P_kl^(1-t) <= |M'_kl| / (|M'_ij| + |M'_il| + |M'_kj|)
      * max(P_ij, P_il, P_kj)^(1-t)``.
    """
    if t is None:
        t = getattr(Mp, "temp", None)
        if t is None:
            raise DomainError("temperature required when Mp carries none")
    t = _tval(t)
    if t >= 1.0:
        raise DomainError("the sparsity characterization needs t < 1")
    P = np.asarray(getattr(P_tilde, "entries", P_tilde), dtype=float)
    A = np.asarray(getattr(Mp, "entries", Mp), dtype=float)
    n, m = P.shape
    if max(n, m) > MAX_QUADRUPLE_N:
        raise DomainError(f"quadruple scan limited to n <= {MAX_QUADRUPLE_N}")
    S = P > threshold
    out = []
    for i, j in zip(*np.nonzero((A < 0) & ~S)):
        out.append(ClauseViolation("negative-support", (int(i), int(j))))

    pos, neg = A > 0, A < 0
    Q = P ** (1.0 - t)
    absA = np.abs(A)
    for i, k in itertools.permutations(range(n), 2):
        # cfg[j, l]: M'_ij > 0, M'_il < 0, M'_kj < 0, j != l
        cfg = pos[i][:, None] & neg[i][None, :] & neg[k][:, None]
        np.fill_diagonal(cfg, False)
        if not cfg.any():
            continue
        both = cfg & pos[k][None, :] & S[i][:, None] & S[k][None, :]
        for j, l in zip(*np.nonzero(both)):
            out.append(ClauseViolation("both-positive", (i, int(j), k, int(l))))
        small = cfg & neg[k][None, :] & S[i][:, None]
        for j, l in zip(*np.nonzero(small)):
            bound = absA[k, l] / (absA[i, j] + absA[i, l] + absA[k, j]) \
                * max(P[i, j], P[i, l], P[k, j]) ** (1.0 - t)
            excess = Q[k, l] - bound
            if excess > rtol * max(bound, 1e-300):
                out.append(ClauseViolation("small-transport", (i, int(j), k, int(l)), float(excess)))
    return out


# --------------------------------------------------------------------------
# contraction


def _log_positive(K) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if K.ndim != 2:
        raise DomainError("expected a matrix")
    if np.any(~(K > 0)) or not np.all(np.isfinite(K)):
        raise DomainError("projective diameter needs a strictly positive finite matrix")
    return np.log(K)


def projective_diameter(K) -> float:
    """``max log (K_il K_jk) / (K_jl K_ik)`` over all index quadruples.

    Evaluated as ``max_{i,j} [max_l (L_il - L_jl) - min_k (L_ik - L_jk)]`` with
    ``L = log K``, which is the same maximum in ``O(n^3)``.
    """
    L = _log_positive(K)
    if max(L.shape) > MAX_DIAMETER_N:
        raise DomainError(f"projective diameter limited to n <= {MAX_DIAMETER_N}")
    D = L[:, None, :] - L[None, :, :]
    return float(max(0.0, np.max(D.max(axis=2) - D.min(axis=2))))


def contraction_ratio(K) -> float:
    """Birkhoff contraction coefficient ``tanh(delta(K) / 4)``."""
    return float(np.tanh(projective_diameter(K) / 4.0))


def hilbert_distance(x, y) -> float:
    """Hilbert projective distance between positive vectors."""
    d = np.log(np.asarray(x, dtype=float)) - np.log(np.asarray(y, dtype=float))
    return float(d.max() - d.min())


# --------------------------------------------------------------------------
# feasibility


@dataclass
class FeasibilityVerdict:
    indecomposable: bool
    brualdi_ok: Optional[bool] = None
    violating_subsets: Optional[list] = field(default=None)

    @property
    def feasible(self) -> bool:
        return bool(self.indecomposable and self.brualdi_ok)

    def to_json(self) -> str:
        return json.dumps({"indecomposable": self.indecomposable, "brualdi_ok": self.brualdi_ok,
                           "violating_subsets": self.violating_subsets})


def _pattern(S) -> np.ndarray:
    S = np.asarray(getattr(S, "S", S), dtype=bool)
    if S.ndim != 2:
        raise DomainError("expected a 2-d pattern")
    if (~S.any(axis=1)).any() or (~S.any(axis=0)).any():
        raise DomainError("pattern has an all-zero row or column")
    return S


def indecomposable(S) -> bool:
    """True iff the row/column bipartite graph of ``S`` is connected.

    Equivalently no row and column permutation brings ``S`` to block-diagonal
    form.  Linear in the number of non-zeros.
    """
    S = _pattern(S)
    n, m = S.shape
    rows, cols = np.nonzero(S)
    adj = csr_matrix((np.ones(len(rows)), (rows, n + cols)), shape=(n + m, n + m))
    count, _ = connected_components(adj, directed=False)
    return count == 1


def brualdi_feasible(S, r, c) -> FeasibilityVerdict:
    """Exhaustive check of the marginal inequalities over row subsets.

    For each nonempty proper row set ``I`` with neighbourhood ``J`` short of
    all columns, requires ``sum c_J > sum r_I`` (by a ``1e-12`` margin).
    """
    S = _pattern(S)
    r = np.asarray(getattr(r, "entries", r), dtype=float)
    c = np.asarray(getattr(c, "entries", c), dtype=float)
    n, m = S.shape
    if n > MAX_BRUALDI_N:
        raise DomainError(f"subset enumeration limited to n <= {MAX_BRUALDI_N}")
    if np.any(r <= 0) or np.any(c <= 0):
        raise DomainError("marginals must be strictly positive")
    if not indecomposable(S):
        return FeasibilityVerdict(False, None, None)
    bad = []
    for mask in range(1, 2 ** n - 1):
        I = [i for i in range(n) if mask >> i & 1]
        J = np.flatnonzero(S[I].any(axis=0))
        if len(J) == m:
            continue
        if not c[J].sum() > r[I].sum() + BRUALDI_MARGIN:
            bad.append((I, [int(j) for j in J]))
    return FeasibilityVerdict(True, not bad, bad)
