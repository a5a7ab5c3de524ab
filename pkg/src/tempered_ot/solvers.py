"""Sinkhorn balancing, the tempered reduction and exact dual solvers.

The approximate route balances the density-space kernel ``K_tilde^(1/t*)``
with ordinary Sinkhorn iterations and lifts the result back with the ``t*``
power.  The exact route solves for the row/column multipliers of the
closed-form optimal plans, by guarded Newton steps on a convex potential
whose gradient is the marginal residual (or by plain gradient descent on
the squared residual).
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, DomainError, InfeasibleSupportError
from .measures import independence_table, to_density, from_density, validate_coupling
from .objectives import expected_cost, measured_cost
from .seeds import SeedMatrix, build_seed
from .tempered_math import TLike, Temperature, as_temperature, exp_t, log_t, ominus_t, otimes_t

log = logging.getLogger(__name__)


@dataclass
class SolveConfig:
    tol: float = 1e-10
    max_iter: int = 100_000
    record_trace: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")


@dataclass
class SolveReport:
    """Outcome of a Sinkhorn run.

    ``plan`` is in tilde space (equal to ``density_plan`` at ``t = 1``);
    ``final_residual`` is the last scale-relative change of ``xi``.
    """

    plan: np.ndarray
    density_plan: np.ndarray
    iterations: int
    converged: bool
    final_residual: float
    mu: np.ndarray
    xi: np.ndarray
    temp: Temperature = field(default_factory=lambda: Temperature(1.0))
    trace: Optional[list] = None
    seed: Optional[SeedMatrix] = None

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.plan))

    def marginal_residual(self, r, c) -> float:
        P = self.density_plan
        return float(max(np.abs(P.sum(axis=1) - r).max(), np.abs(P.sum(axis=0) - c).max()))

    def to_dict(self, M=None) -> dict:
        d = {"iterations": self.iterations, "converged": self.converged,
             "residual": self.final_residual, "nnz": self.nnz}
        if M is not None:
            d["cost_expected"] = expected_cost(self.plan, M, self.temp)
            d["cost_measured"] = measured_cost(self.plan, M)
        return d

    def to_json(self, M=None) -> str:
        return json.dumps(self.to_dict(M))

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "residual"])
        for i, res in enumerate(self.trace or [], start=1):
            w.writerow([i, repr(float(res))])
        return buf.getvalue()


def sinkhorn(K, r, c, cfg: SolveConfig | None = None,
             callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None) -> SolveReport:
    """Alternate ``mu <- r / (K xi)`` and ``xi <- c / (K^T mu)`` from ``xi = 1``.

    Stops once ``max|xi_new - xi| <= tol * max(1, max xi_new)``.  A zero in
    ``K xi`` or ``K^T mu`` raises :class:`InfeasibleSupportError`; running out
    of iterations (or overflowing) returns ``converged=False``.
    """
    cfg = cfg or SolveConfig()
    K = np.asarray(K, dtype=float)
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(K < 0):
        raise DomainError("Sinkhorn needs a non-negative kernel")
    xi = np.ones(K.shape[1])
    mu = np.ones(K.shape[0])
    trace = [] if cfg.record_trace else None
    converged = False
    change = np.inf
    it = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for it in range(1, cfg.max_iter + 1):
            Kxi = K @ xi
            if np.any(Kxi == 0):
                i = int(np.flatnonzero(Kxi == 0)[0])
                raise InfeasibleSupportError(f"K xi vanishes at row {i}", axis="row", index=i)
            mu_new = r / Kxi
            KTmu = K.T @ mu_new
            if np.any(KTmu == 0):
                j = int(np.flatnonzero(KTmu == 0)[0])
                raise InfeasibleSupportError(f"K^T mu vanishes at column {j}", axis="column", index=j)
            xi_new = c / KTmu
            if not (np.all(np.isfinite(xi_new)) and np.all(np.isfinite(mu_new))
                    and np.all(xi_new > 0) and np.all(mu_new > 0)):
                # keep the last finite scalings so the returned plan stays usable
                log.debug("sinkhorn scalings overflowed at iteration %d", it)
                break
            mu = mu_new
            change = float(np.max(np.abs(xi_new - xi)) / max(1.0, float(np.max(xi_new))))
            xi = xi_new
            if trace is not None:
                trace.append(change)
            if callback is not None:
                callback(it, mu, xi)
            if change <= cfg.tol:
                converged = True
                break
        P = mu[:, None] * K * xi[None, :]
    return SolveReport(P, P, it, converged, change, mu, xi, trace=trace)


def tempered_ot(M, r_tilde, c_tilde, lam: float, t: TLike, variant: str = "expected",
                cfg: SolveConfig | None = None, callback=None) -> SolveReport:
    """Regularized OT over tempered measures by reduction to Sinkhorn.

    Builds the expected or measured seed, balances ``seed ** (1/t*)`` against
    the co-densities of ``r_tilde``/``c_tilde`` and returns the ``t*`` power
    of the balanced matrix as ``plan``.
    """
    temp = as_temperature(t)
    seed = build_seed(variant, M, r_tilde, c_tilde, lam, temp)
    seed.check_support()
    r = to_density(r_tilde, temp)
    c = to_density(c_tilde, temp)
    rep = sinkhorn(seed.kernel(), r, c, cfg, callback=callback)
    rep.plan = from_density(rep.density_plan, temp)
    rep.temp = temp
    rep.seed = seed
    return rep


def row_projection(P0_tilde, r_tilde, t: TLike) -> np.ndarray:
    """Closest plan (in ``D_t``) to ``P0_tilde`` whose co-density rows match ``r_tilde``."""
    temp = as_temperature(t)
    P0 = np.asarray(P0_tilde, dtype=float)
    mu = to_density(P0, temp).sum(axis=1)
    if np.any(mu == 0):
        i = int(np.flatnonzero(mu == 0)[0])
        raise InfeasibleSupportError(f"row {i} is identically zero", axis="row", index=i)
    scale = np.asarray(r_tilde, dtype=float) / mu ** temp.t_star
    return scale[:, None] * P0


def column_projection(P0_tilde, c_tilde, t: TLike) -> np.ndarray:
    """Column counterpart of :func:`row_projection`."""
    return row_projection(np.asarray(P0_tilde, dtype=float).T, c_tilde, t).T


# --------------------------------------------------------------------------
# exact dual solvers
#
# Both closed forms are gradients of a convex potential in the multipliers:
# with G' = -P entrywise, Phi(nu, gamma) = sum_ij G_ij + r.nu + c.gamma has
# gradient (r - P 1, c - P^T 1), so minimising Phi matches the marginals.
# Phi is +inf outside the pole-free domain, which is what the guard checks.


@dataclass
class DualConfig:
    """Settings of the exact dual solvers.

    ``method="newton"`` (default) minimises the convex potential with guarded
    Newton steps; ``method="gd"`` runs plain gradient descent with Armijo
    backtracking on the squared marginal residual.
    """

    target: float = 1e-10
    max_iter: int = 500
    method: str = "newton"
    gd_max_iter: int = 100_000


@dataclass
class DualSolution:
    nu: np.ndarray
    gamma: np.ndarray
    plan: np.ndarray
    marginal_residual: float
    converged: bool
    iterations: int
    temp: Temperature
    variant: str


def _expected_model(M, r_tilde, c_tilde, lam, temp):
    """Density plan, its z-derivative and the potential for the expected form."""
    t = temp.t
    rc = independence_table(to_density(r_tilde, temp), to_density(c_tilde, temp))
    lamM = lam * np.asarray(M, dtype=float)

    def model(nu, gamma):
        z = nu[:, None] + gamma[None, :] + lamM
        if t == 1.0:
            P = rc * np.exp(-z)
            return P, -P, float(P.sum())
        base = 1.0 + (1.0 - t) * z
        if t < 1.0 and np.any(base <= 0):
            return None
        pos = base > 0
        P = np.zeros_like(base)
        G = np.zeros_like(base)
        D = np.zeros_like(base)
        P[pos] = rc[pos] * base[pos] ** (-(2.0 - t) / (1.0 - t))
        G[pos] = rc[pos] * base[pos] ** (-1.0 / (1.0 - t))
        D[pos] = -(2.0 - t) * P[pos] / base[pos]
        return P, D, float(G.sum())

    return model


def _measured_model(M, r_tilde, c_tilde, lam, temp):
    """Same triple for the measured form; entries off the seed support stay 0."""
    t = temp.t
    a = log_t(independence_table(r_tilde, c_tilde), temp) - lam * np.asarray(M, dtype=float)
    if t == 1.0:
        def model(nu, gamma):
            P = np.exp(a - nu[:, None] - gamma[None, :])
            return P, -P, float(P.sum())
        return model

    A = 1.0 + (1.0 - t) * a
    support = A > 0
    Ae = np.zeros_like(A)
    Ae[support] = A[support] ** ((2.0 - t) / (1.0 - t))

    def model(nu, gamma):
        B = 1.0 + (1.0 - t) * (nu[:, None] + gamma[None, :])
        if np.any(B[support] <= 0):
            return None
        P = np.zeros_like(B)
        G = np.zeros_like(B)
        D = np.zeros_like(B)
        Bs = B[support]
        P[support] = Ae[support] * Bs ** (-(2.0 - t) / (1.0 - t))
        G[support] = Ae[support] * Bs ** (-1.0 / (1.0 - t))
        D[support] = -(2.0 - t) * P[support] / Bs
        return P, D, float(G.sum())

    return model


def _residual(P, r, c):
    return np.concatenate([P.sum(axis=1) - r, P.sum(axis=0) - c])


def _jacobian(D):
    n, m = D.shape
    J = np.zeros((n + m, n + m))
    J[np.arange(n), np.arange(n)] = D.sum(axis=1)
    J[:n, n:] = D
    J[n:, :n] = D.T
    J[n + np.arange(m), n + np.arange(m)] = D.sum(axis=0)
    return J


def _newton(model, r, c, cfg: DualConfig):
    n, m = len(r), len(c)
    x = np.zeros(n + m)
    rc = np.concatenate([r, c])
    P, D, G = model(x[:n], x[n:])
    phi = G + float(rc @ x)
    R = _residual(P, r, c)
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if np.max(np.abs(R)) <= cfg.target:
            break
        H = -_jacobian(D)
        grad = -R
        ridge = 1e-12 * max(1.0, float(np.trace(H)) / (n + m))
        try:
            step = -np.linalg.solve(H + ridge * np.eye(n + m), grad)
        except np.linalg.LinAlgError:
            step = -grad
        slope = float(grad @ step)
        if slope >= 0:
            step, slope = -grad, -float(grad @ grad)
        eta = 1.0
        accepted = False
        for _ in range(80):
            trial = model(x[:n] + eta * step[:n], x[n:] + eta * step[n:])
            if trial is not None:
                phi_new = trial[2] + float(rc @ (x + eta * step))
                R_new = _residual(trial[0], r, c)
                # near the optimum phi stalls at rounding level; fall back on
                # the residual itself
                if (phi_new <= phi + 1e-4 * eta * slope
                        or np.max(np.abs(R_new)) < 0.5 * np.max(np.abs(R))):
                    x = x + eta * step
                    P, D, _ = trial
                    phi, R = phi_new, R_new
                    accepted = True
                    break
            eta *= 0.5
        if not accepted:
            break
    return x, float(np.max(np.abs(R))), it


def _gradient_descent(model, r, c, cfg: DualConfig):
    n, m = len(r), len(c)
    x = np.zeros(n + m)
    P, D, _ = model(x[:n], x[n:])
    R = _residual(P, r, c)
    F = float(R @ R)
    step_size = 1.0
    it = 0
    for it in range(1, cfg.gd_max_iter + 1):
        if np.max(np.abs(R)) <= cfg.target:
            break
        grad = 2.0 * _jacobian(D).T @ R
        gg = float(grad @ grad)
        if gg == 0:
            break
        eta = step_size * 2.0
        accepted = False
        for _ in range(60):
            trial = model(x[:n] - eta * grad[:n], x[n:] - eta * grad[n:])
            if trial is not None:
                R_new = _residual(trial[0], r, c)
                F_new = float(R_new @ R_new)
                if F_new <= F - 1e-4 * eta * gg:
                    x = x - eta * grad
                    P, D, _ = trial
                    R, F = R_new, F_new
                    step_size = eta
                    accepted = True
                    break
            eta *= 0.5
        if not accepted:
            break
    return x, float(np.max(np.abs(R))), it


def _exact_dual(variant, M, r_tilde, c_tilde, lam, t, cfg):
    temp = as_temperature(t)
    cfg = cfg or DualConfig()
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    r_tilde = np.asarray(r_tilde, dtype=float)
    c_tilde = np.asarray(c_tilde, dtype=float)
    builder = _expected_model if variant == "expected" else _measured_model
    model = builder(M, r_tilde, c_tilde, lam, temp)
    r = to_density(r_tilde, temp)
    c = to_density(c_tilde, temp)
    if cfg.method == "newton":
        x, residual, it = _newton(model, r, c, cfg)
    elif cfg.method == "gd":
        x, residual, it = _gradient_descent(model, r, c, cfg)
    else:
        raise ValueError(f"unknown dual method {cfg.method!r}")
    n = len(r)
    nu, gamma = x[:n], x[n:]
    plan = from_density(model(nu, gamma)[0], temp)
    return DualSolution(nu, gamma, plan, residual, residual <= max(cfg.target, 1e-8), it,
                        temp, variant)


def closed_form_plan(variant, M, r_tilde, c_tilde, lam: float, t: TLike, nu, gamma) -> np.ndarray:
    """Evaluate the tilde-space closed form directly from the multipliers.

    Expected: ``r_i c_j / exp_t(nu_i + gamma_j + lam M_ij)``.  Measured:
    ``exp_t((log_t(r_i c_j) - lam M_ij) (-)_t (nu_i + gamma_j))``, zeroed
    outside the seed support where the non-negativity multiplier is active.
    """
    temp = as_temperature(t)
    M = np.asarray(M, dtype=float)
    nu = np.asarray(nu, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    rc = independence_table(r_tilde, c_tilde)
    if variant == "expected":
        with np.errstate(divide="ignore"):
            return rc / np.asarray(exp_t(nu[:, None] + gamma[None, :] + lam * M, temp))
    a = log_t(rc, temp) - lam * M
    P = np.asarray(exp_t(ominus_t(a, nu[:, None] + gamma[None, :], temp), temp))
    if temp.t < 1.0:
        P = np.where(1.0 + (1.0 - temp.t) * a > 0, P, 0.0)
    return P


def exact_dual_expected(M, r_tilde, c_tilde, lam: float, t: TLike,
                        cfg: DualConfig | None = None) -> DualSolution:
    """Multipliers for ``P_ij = r_i c_j / exp_t(nu_i + gamma_j + lam M_ij)`` (tilde space)."""
    return _exact_dual("expected", M, r_tilde, c_tilde, lam, t, cfg)


def exact_dual_measured(M, r_tilde, c_tilde, lam: float, t: TLike,
                        cfg: DualConfig | None = None) -> DualSolution:
    """Multipliers for ``P_ij = exp_t((log_t(r_i c_j) - lam M_ij) (-)_t (nu_i + gamma_j))``.

    The optimisation runs on the raw ``(nu, gamma)`` of this form, keeping
    ``1 + (1 - t)(nu_i + gamma_j) > 0`` on the seed support throughout.  When
    the seed support admits no plan with the requested marginals the
    solution comes back with ``converged=False``.
    """
    return _exact_dual("measured", M, r_tilde, c_tilde, lam, t, cfg)


def factored_measured_plan(M, r_tilde, c_tilde, lam: float, t: TLike, nu, gamma) -> np.ndarray:
    """Diagnostic ``exp_t(log_t(r c) - lam M) / (exp_t(nu_i) (x)_t exp_t(gamma_j))``.

    Coincides with the closed form of :func:`exact_dual_measured` only when the
    tempered product identity holds for every ``(nu_i, gamma_j)`` pair.
    """
    temp = as_temperature(t)
    num = np.asarray(exp_t(log_t(independence_table(r_tilde, c_tilde), temp)
                           - lam * np.asarray(M, dtype=float), temp))
    den = np.asarray(otimes_t(np.asarray(exp_t(np.asarray(nu), temp))[:, None],
                              np.asarray(exp_t(np.asarray(gamma), temp))[None, :], temp))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(num == 0, 0.0, num / den)


def approximation_gap(M, r_tilde, c_tilde, lam: float, t: TLike, variant: str = "expected",
                      cfg: SolveConfig | None = None, dual_cfg: DualConfig | None = None) -> float:
    """Relative expected-cost error of the Sinkhorn plan against the exact closed form."""
    temp = as_temperature(t)
    approx = tempered_ot(M, r_tilde, c_tilde, lam, temp, variant, cfg)
    if not approx.converged:
        raise ConvergenceError(f"Sinkhorn did not converge in {approx.iterations} iterations")
    solver = exact_dual_expected if variant == "expected" else exact_dual_measured
    exact = solver(M, r_tilde, c_tilde, lam, temp, dual_cfg)
    if not exact.converged:
        raise ConvergenceError(f"dual solver stalled at residual {exact.marginal_residual:.3e}")
    e_exact = expected_cost(exact.plan, M, temp)
    e_approx = expected_cost(approx.plan, M, temp)
    return abs(e_approx - e_exact) / e_exact
