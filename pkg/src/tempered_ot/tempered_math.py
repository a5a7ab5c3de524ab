"""Scalar tempered algebra.

``exp_t`` / ``log_t`` and the derived tempered subtraction and product, the
convex generator ``phi_t`` and the tempered relative entropy ``D_t``.

All functions are vectorised over numpy arrays.  A temperature can be passed
either as a :class:`Temperature` (validated, ``t`` in ``[0, 2)``) or as a bare
float; bare floats are not range-checked so that ``log_t(z, t - 1)`` can be
evaluated for the ``log_{t-1}`` terms of the generator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Temperature:
    """Deformation parameter ``t`` together with ``t* = 1 / (2 - t)``."""

    t: float
    t_star: float = field(init=False)

    def __post_init__(self):
        t = float(self.t)
        if not np.isfinite(t) or t < 0.0 or t >= 2.0:
            raise DomainError(f"temperature must lie in [0, 2), got {self.t!r}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "t_star", 1.0 / (2.0 - t))

    @property
    def is_classical(self) -> bool:
        return self.t == 1.0

    def __float__(self):
        return self.t


TLike = Union[Temperature, float]


def as_temperature(t: TLike) -> Temperature:
    return t if isinstance(t, Temperature) else Temperature(t)


def _tval(t: TLike) -> float:
    return t.t if isinstance(t, Temperature) else float(t)


def _scalar_or_array(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def clamped_power(base, t: float):
    """``[base]_+ ** (1 / (1 - t))`` with the clamp decided on ``base`` itself.

    ``base <= 0`` maps to 0 for ``t < 1`` and to ``+inf`` for ``t > 1``.
    """
    base = np.asarray(base, dtype=float)
    positive = base > 0
    out = np.empty_like(base)
    with np.errstate(divide="ignore", over="ignore"):
        out[positive] = base[positive] ** (1.0 / (1.0 - t))
    out[~positive] = 0.0 if t < 1.0 else np.inf
    return out


def exp_t(z, t: TLike):
    """Tempered exponential ``[1 + (1 - t) z]_+^{1/(1 - t)}``.

    For ``t > 1`` arguments with ``1 + (1 - t) z <= 0`` return ``+inf``.
    """
    t = _tval(t)
    z = np.asarray(z, dtype=float)
    if t == 1.0:
        with np.errstate(over="ignore"):
            return _scalar_or_array(np.exp(z))
    return _scalar_or_array(clamped_power(1.0 + (1.0 - t) * z, t))


def log_t(z, t: TLike):
    """Tempered logarithm ``(z^{1-t} - 1) / (1 - t)``; inverse of :func:`exp_t`."""
    t = _tval(t)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("log_t is undefined for negative arguments")
    if t >= 1.0 and np.any(z == 0):
        raise DomainError(f"log_t(0) diverges for t = {t} >= 1")
    if t == 1.0:
        return _scalar_or_array(np.log(z))
    with np.errstate(divide="ignore"):
        return _scalar_or_array((z ** (1.0 - t) - 1.0) / (1.0 - t))


def ominus_t(a, b, t: TLike):
    """Tempered subtraction ``(a - b) / (1 + (1 - t) b)``."""
    t = _tval(t)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if t == 1.0:
        return _scalar_or_array(a - b)
    denom = 1.0 + (1.0 - t) * b
    if np.any(denom == 0):
        raise DomainError("ominus_t: b = -1/(1-t) is excluded")
    return _scalar_or_array((a - b) / denom)


def otimes_t(a, b, t: TLike):
    """Tempered product ``[a^{1-t} + b^{1-t} - 1]_+^{1/(1-t)}``."""
    t = _tval(t)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("otimes_t requires non-negative arguments")
    if t == 1.0:
        return _scalar_or_array(a * b)
    with np.errstate(divide="ignore"):
        base = a ** (1.0 - t) + b ** (1.0 - t) - 1.0
    return _scalar_or_array(clamped_power(base, t))


def _xlog_t(z, t: float):
    # z * log_t(z) with the continuous extension 0 at z = 0
    z = np.asarray(z, dtype=float)
    if t == 1.0:
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = z[pos] * np.log(z[pos])
        return out
    return (z ** (2.0 - t) - z) / (1.0 - t)


def phi_t(z, t: TLike):
    """Convex generator ``z log_t z - log_{t-1} z`` (derivative ``log_t``)."""
    t = _tval(t)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("phi_t is defined on z >= 0")
    if t == 1.0:
        return _scalar_or_array(_xlog_t(z, 1.0) - (z - 1.0))
    return _scalar_or_array(_xlog_t(z, t) - log_t(z, t - 1.0))


def tempered_divergence(u, v, t: TLike) -> float:
    """Tempered relative entropy ``D_t(u || v)`` between non-negative arrays.

    Sums ``u (log_t u - log_t v) - log_{t-1} u + log_{t-1} v`` over all
    entries.  Zero entries of ``u`` use the continuous extension of
    ``u log_t u``; for ``t >= 1`` every ``v`` entry facing a positive ``u``
    entry must itself be positive.
    """
    t = _tval(t)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DomainError(f"shape mismatch {u.shape} vs {v.shape}")
    if np.any(u < 0) or np.any(v < 0):
        raise DomainError("tempered_divergence needs non-negative inputs")
    if t >= 1.0 and np.any((v == 0) & (u > 0)):
        raise DomainError("v must be positive wherever u > 0 when t >= 1")

    if t == 1.0:
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = u[pos] * (np.log(u[pos]) - np.log(v[pos]))
        return float(np.sum(out - u + v))
    # u log_t v, with 0 * log_t(0) := 0 for t >= 1 (v = 0 only where u = 0)
    cross = np.zeros_like(u)
    mask = u > 0
    cross[mask] = u[mask] * log_t(v[mask], t)
    terms = _xlog_t(u, t) - cross - log_t(u, t - 1.0) + log_t(v, t - 1.0)
    return float(np.sum(terms))
