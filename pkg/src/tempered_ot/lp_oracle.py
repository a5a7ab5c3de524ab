"""Exact unregularized transport: network simplex and small-n vertex enumeration.

The simplex works on the bipartite transportation graph with a spanning-tree
basis.  Degeneracy is removed by the classical perturbation of the supplies
(``r_i + eps`` for every row, ``c_last + n eps`` for the last column); flows are
kept as pairs ``(value, eps-coefficient)`` and compared lexicographically, so
every basic flow stays strictly positive and no pivot is degenerate.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateBaselineError, DomainError
from .tempered_math import TLike, as_temperature

MAX_N = 256
_LEX_TOL = 1e-12


@dataclass
class LpSolution:
    """Optimal vertex of the transport polytope.

    ``plan`` is in density space.  ``basis`` lists the ``n + m - 1`` tree
    cells (some may carry zero flow); ``u``, ``v`` are dual potentials with
    ``u_i + v_j <= M_ij`` and equality on the basis.
    """

    plan: np.ndarray
    objective: float
    basis_size: int
    basis: list
    u: np.ndarray
    v: np.ndarray
    pivots: int = 0

    def dual_gap(self, M) -> float:
        """Largest violation of ``u_i + v_j <= M_ij``; zero at optimality."""
        M = np.asarray(M, dtype=float)
        return float(max(0.0, np.max(self.u[:, None] + self.v[None, :] - M)))


def _lex_less(a1, b1, a2, b2) -> bool:
    if abs(a1 - a2) > _LEX_TOL * max(1.0, abs(a1), abs(a2)):
        return a1 < a2
    return b1 < b2


def _northwest_corner(r, c):
    n, m = len(r), len(c)
    sa = np.array(r, dtype=float)
    sb = np.ones(n)
    da = np.array(c, dtype=float)
    db = np.zeros(m)
    db[-1] = float(n)
    flow_a = {}
    flow_b = {}
    i = j = 0
    while i < n and j < m:
        if i == n - 1 and j == m - 1:
            take_row = False
            qa, qb = sa[i], sb[i]
        elif _lex_less(sa[i], sb[i], da[j], db[j]):
            take_row = True
            qa, qb = sa[i], sb[i]
        else:
            take_row = False
            qa, qb = da[j], db[j]
        flow_a[(i, j)] = qa
        flow_b[(i, j)] = qb
        sa[i] -= qa
        sb[i] -= qb
        da[j] -= qa
        db[j] -= qb
        if take_row:
            i += 1
        else:
            j += 1
            if j == m:
                break
    return flow_a, flow_b


def _potentials(basis, M, n, m):
    adj = [[] for _ in range(n + m)]
    for (i, j) in basis:
        adj[i].append(n + j)
        adj[n + j].append(i)
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    u[0] = 0.0
    queue = deque([0])
    seen = {0}
    while queue:
        node = queue.popleft()
        for nb in adj[node]:
            if nb in seen:
                continue
            seen.add(nb)
            if node < n:
                v[nb - n] = M[node, nb - n] - u[node]
            else:
                u[nb] = M[nb, node - n] - v[node - n]
            queue.append(nb)
    return u, v, adj


def _tree_path(adj, start, goal):
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in adj[node]:
            if nb not in prev:
                prev[nb] = node
                queue.append(nb)
    path = [goal]
    while path[-1] != start:
        path.append(prev[path[-1]])
    return path[::-1]


def solve_ot_exact(M, r, c, max_pivots: int | None = None) -> LpSolution:
    """Minimise ``<P, M>`` over plans with row sums ``r`` and column sums ``c``.

    Entering cell: most negative reduced cost, ties to the lowest row-major
    index.  Leaving cell: lexicographically smallest flow on the cycle's
    decreasing side, ties to the lowest index.
    """
    M = np.asarray(M, dtype=float)
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    n, m = M.shape
    if (n, m) != (len(r), len(c)):
        raise DomainError("cost matrix shape does not match marginals")
    if max(n, m) > MAX_N:
        raise DomainError(f"network simplex is limited to n <= {MAX_N}")
    if np.any(r <= 0) or np.any(c <= 0):
        raise DomainError("marginals must be strictly positive")
    if abs(r.sum() - c.sum()) > 1e-9:
        raise DomainError("marginals must have equal mass")
    if not np.all(np.isfinite(M)):
        raise DomainError("cost matrix must be finite")

    flow_a, flow_b = _northwest_corner(r, c)
    scale = max(1.0, float(np.max(np.abs(M))))
    max_pivots = max_pivots or 50 * (n + m) ** 2
    pivots = 0
    while True:
        basis = sorted(flow_a)
        u, v, adj = _potentials(basis, M, n, m)
        reduced = M - u[:, None] - v[None, :]
        k = int(np.argmin(reduced))
        if reduced.flat[k] >= -1e-12 * scale:
            break
        if pivots >= max_pivots:
            raise RuntimeError("network simplex exceeded its pivot budget")
        ei, ej = divmod(k, m)
        path = _tree_path(adj, ei, n + ej)
        edges = []
        for a_node, b_node in zip(path, path[1:]):
            edges.append((a_node, b_node - n) if a_node < n else (b_node, a_node - n))
        # the edge touching column ej decreases first, then signs alternate
        minus = edges[::-2]
        plus = edges[-2::-2]
        leave = None
        for cell in sorted(minus):
            if leave is None or _lex_less(flow_a[cell], flow_b[cell], flow_a[leave], flow_b[leave]):
                leave = cell
        ta, tb = flow_a[leave], flow_b[leave]
        for cell in minus:
            flow_a[cell] -= ta
            flow_b[cell] -= tb
        for cell in plus:
            flow_a[cell] += ta
            flow_b[cell] += tb
        del flow_a[leave], flow_b[leave]
        flow_a[(ei, ej)] = ta
        flow_b[(ei, ej)] = tb
        pivots += 1

    plan = np.zeros((n, m))
    for (i, j), a in flow_a.items():
        plan[i, j] = max(a, 0.0)
    plan[np.abs(plan) <= 1e-15] = 0.0
    return LpSolution(plan, float(np.sum(plan * M)), int(np.count_nonzero(plan)),
                      sorted(flow_a), u, v, pivots)


def relative_cost(value: float, baseline: LpSolution) -> float:
    """``(value - objective) / objective`` against an exact baseline."""
    obj = baseline.objective
    if obj == 0:
        raise DegenerateBaselineError("baseline objective is zero")
    return (float(value) - obj) / obj


# --------------------------------------------------------------------------
# vertex enumeration (n <= 4)


@lru_cache(maxsize=None)
def _spanning_trees(n: int, m: int):
    """Incidence matrices and pseudo-inverses of every spanning tree of K_{n,m}."""
    cells = [(i, j) for i in range(n) for j in range(m)]
    trees = []
    for subset in itertools.combinations(range(n * m), n + m - 1):
        B = np.zeros((n + m, n + m - 1))
        for col, k in enumerate(subset):
            i, j = cells[k]
            B[i, col] = 1.0
            B[n + j, col] = 1.0
        if np.linalg.matrix_rank(B) == n + m - 1:
            trees.append((subset, np.linalg.pinv(B)))
    return cells, trees


def enumerate_vertices(r, c, max_n: int = 4) -> np.ndarray:
    """All distinct vertices of the transport polytope, shape ``(k, n, m)``."""
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    n, m = len(r), len(c)
    if max(n, m) > max_n:
        raise DomainError(f"vertex enumeration is limited to n <= {max_n}")
    cells, trees = _spanning_trees(n, m)
    rhs = np.concatenate([r, c])
    verts = []
    for subset, pinv in trees:
        x = pinv @ rhs
        if np.any(x < -1e-12):
            continue
        P = np.zeros((n, m))
        for val, k in zip(x, subset):
            P[cells[k]] = max(val, 0.0)
        if (np.abs(P.sum(axis=1) - r).max() > 1e-9 or np.abs(P.sum(axis=0) - c).max() > 1e-9):
            continue
        verts.append(P)
    V = np.unique(np.round(np.array(verts), 14), axis=0)
    return V


@dataclass
class MeasuredDistance:
    """Minimum of ``<P_tilde, M>`` over the co-polytope.

    ``certified`` is true when every vertex was enumerated; otherwise the
    value is the best of a multi-start local search and only an upper bound.
    """

    value: float
    plan: np.ndarray
    certified: bool


def _concave_local_search(M, r, c, start_cost, t_star, max_rounds=50):
    sol = solve_ot_exact(start_cost, r, c)
    P = sol.plan
    best = float(np.sum(P ** t_star * M))
    for _ in range(max_rounds):
        # linearise sum M P^t* at P; zero entries get a large finite slope
        with np.errstate(divide="ignore"):
            grad = M * t_star * np.where(P > 0, P ** (t_star - 1.0), np.inf)
        finite = np.isfinite(grad)
        cap = 10.0 * float(grad[finite].max()) if finite.any() else 1.0
        grad = np.where(finite, grad, cap)
        P_new = solve_ot_exact(grad, r, c).plan
        val = float(np.sum(P_new ** t_star * M))
        if val >= best - 1e-15:
            break
        P, best = P_new, val
    return best, P


def exact_measured_distance(M, r_tilde, c_tilde, t: TLike, restarts: int = 8,
                            seed: int = 0) -> MeasuredDistance:
    """Unregularized measured cost ``min <P_tilde, M>`` for ``t <= 1``.

    In density space the objective is ``sum P_ij^t* M_ij``, concave for
    ``t <= 1``, so the minimum sits at a vertex.  Exhaustive for ``n <= 4``.
    """
    temp = as_temperature(t)
    if temp.t > 1.0:
        raise DomainError("the vertex argument needs a concave objective (t <= 1)")
    M = np.asarray(M, dtype=float)
    r = np.asarray(r_tilde, dtype=float) ** (1.0 / temp.t_star)
    c = np.asarray(c_tilde, dtype=float) ** (1.0 / temp.t_star)
    n = len(r)
    if n <= 4:
        V = enumerate_vertices(r, c)
        vals = np.sum(V ** temp.t_star * M[None], axis=(1, 2))
        k = int(np.argmin(vals))
        return MeasuredDistance(float(vals[k]), V[k] ** temp.t_star, True)
    rng = np.random.default_rng(seed)
    best, P = _concave_local_search(M, r, c, M, temp.t_star)
    for _ in range(restarts):
        val, Q = _concave_local_search(M, r, c, M * rng.uniform(0.5, 1.5, M.shape), temp.t_star)
        if val < best:
            best, P = val, Q
    return MeasuredDistance(best, P ** temp.t_star, False)


def exact_expected_distance(M, r_tilde, c_tilde, t: TLike) -> float:
    """``min <P_tilde^(1/t*), M>``: the classical LP on the co-densities."""
    temp = as_temperature(t)
    r = np.asarray(r_tilde, dtype=float) ** (1.0 / temp.t_star)
    c = np.asarray(c_tilde, dtype=float) ** (1.0 / temp.t_star)
    return solve_ot_exact(M, r, c).objective
