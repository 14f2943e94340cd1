"""Bernstein polynomial algebra on ``[0, tau]``.

A polynomial of order ``n`` is stored through its Bernstein coefficients
``b_0, ..., b_n``; its value at ``t`` is ``sum_i b_i * phi_{i,n}(t / tau)``
with ``phi_{i,n}(x) = C(n, i) x^i (1 - x)^(n - i)``.  Most of the shape of
the polynomial can be read from the coefficients, which is what
:func:`shape_check` does.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DegenerateInputError, DomainError

__all__ = [
    "ShapeClass",
    "BernsteinPoly",
    "basis_eval",
    "basis_matrix",
    "poly_eval",
    "poly_derivative",
    "shape_check",
    "unimodal_indices",
    "bernstein_approx",
]


class ShapeClass(enum.Enum):
    MONOTONE = "monotone"
    UNIMODAL_CONCAVE = "concave"
    UNIMODAL_CONVEX = "convex"
    UNIMODAL = "unimodal"

    @classmethod
    def parse(cls, value: "ShapeClass | str") -> "ShapeClass":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown shape class {value!r}") from None


_MIN_LENGTH = {
    ShapeClass.MONOTONE: 2,
    ShapeClass.UNIMODAL_CONCAVE: 3,
    ShapeClass.UNIMODAL_CONVEX: 3,
    ShapeClass.UNIMODAL: 4,
}


@dataclass(frozen=True)
class BernsteinPoly:
    """Polynomial ``t -> sum_i coeffs[i] * phi_{i,n}(t / domain_end)``.

    ``coeffs`` is copied into a read-only float array, so instances can be
    shared freely.
    """

    coeffs: np.ndarray
    domain_end: float = 1.0
    order: int = field(init=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size == 0:
            raise DegenerateInputError("a Bernstein polynomial needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise DomainError("Bernstein coefficients must be finite")
        tau = float(self.domain_end)
        if not (tau > 0 and math.isfinite(tau)):
            raise DomainError(f"domain_end must be positive and finite, got {self.domain_end!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "domain_end", tau)
        object.__setattr__(self, "order", c.size - 1)

    def __call__(self, t):
        return poly_eval(self, t)

    def __eq__(self, other):
        if not isinstance(other, BernsteinPoly):
            return NotImplemented
        return self.domain_end == other.domain_end and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.domain_end, self.coeffs.tobytes()))

    def derivative(self) -> "BernsteinPoly":
        return poly_derivative(self)


@lru_cache(maxsize=None)
def _binomial_row(n: int) -> np.ndarray:
    # exact integer binomials; past ~1e300 they no longer fit a double
    row = [math.comb(n, i) for i in range(n + 1)]
    if max(row) < 1e300:
        out = np.array(row, dtype=float)
    else:
        out = np.full(n + 1, np.nan)
    out.setflags(write=False)
    return out


def _log_binomial_row(n: int) -> np.ndarray:
    i = np.arange(n + 1)
    return math.lgamma(n + 1) - np.array([math.lgamma(k + 1) + math.lgamma(n - k + 1) for k in i])


def basis_matrix(n: int, x) -> np.ndarray:
    """Evaluate all ``n + 1`` basis polynomials at points ``x`` in ``[0, 1]``.

    Returns an array of shape ``(len(x), n + 1)``.
    """
    if n < 0:
        raise DomainError(f"order must be non-negative, got {n}")
    x = np.asarray(x, dtype=float).reshape(-1)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise DomainError("basis arguments must lie in [0, 1]")
    i = np.arange(n + 1)
    binom = _binomial_row(n)
    if np.all(np.isfinite(binom)):
        with np.errstate(invalid="ignore"):
            return binom * x[:, None] ** i * (1.0 - x[:, None]) ** (n - i)
    # very large orders: assemble in log space
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = (
            _log_binomial_row(n)
            + i * np.log(x[:, None])
            + (n - i) * np.log1p(-x[:, None])
        )
    # 0 * log(0) terms are 0 * -inf = nan; those entries are the exact endpoint values
    logs = np.where(np.isnan(logs), 0.0, logs)
    return np.exp(logs)


def basis_eval(i: int, n: int, t: float) -> float:
    """Value of the Bernstein basis polynomial ``phi_{i,n}`` at ``t``."""
    if not (0 <= i <= n):
        raise DomainError(f"basis index {i} outside 0..{n}")
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"basis argument {t} outside [0, 1]")
    return float(basis_matrix(n, [t])[0, i])


def poly_eval(p: BernsteinPoly, t):
    """Evaluate ``p`` at ``t`` (scalar or array) in ``[0, p.domain_end]``."""
    arr = np.asarray(t, dtype=float)
    if np.any((arr < 0) | (arr > p.domain_end)) or np.any(np.isnan(arr)):
        raise DomainError(f"evaluation point outside [0, {p.domain_end}]")
    values = basis_matrix(p.order, arr.reshape(-1) / p.domain_end) @ p.coeffs
    if arr.ndim == 0:
        return float(values[0])
    return values.reshape(arr.shape)


def poly_derivative(p: BernsteinPoly) -> BernsteinPoly:
    """Derivative of ``p`` as an order ``n - 1`` Bernstein polynomial."""
    if p.order < 1:
        raise DegenerateInputError("cannot differentiate an order-0 Bernstein polynomial")
    coeffs = (p.order / p.domain_end) * np.diff(p.coeffs)
    return BernsteinPoly(coeffs, p.domain_end)


def unimodal_indices(coeffs) -> tuple[int, int, int] | None:
    """Witness ``(l1, l2, l3)`` of the flat / rise / fall / flat pattern.

    The coefficients must satisfy ``a_0 = ... = a_l1 < a_{l1+1} <= ... <= a_l2``
    and ``a_l2 >= ... >= a_l3 > a_{l3+1} = ... = a_n`` with ``l1 < l2 < l3``.
    A strict final drop is required, so ``l3 <= n - 1``.  ``l1`` and ``l3`` are
    forced by the plateaus at the ends; among admissible ``l2`` the largest is
    returned.  Returns ``None`` when no witness exists.
    """
    a = np.asarray(coeffs, dtype=float).reshape(-1)
    if a.size < _MIN_LENGTH[ShapeClass.UNIMODAL]:
        raise DegenerateInputError("unimodal check needs at least 4 coefficients")
    d = np.diff(a)
    nonzero = np.flatnonzero(d != 0)
    if nonzero.size == 0:
        return None
    l1 = int(nonzero[0])
    l3 = int(nonzero[-1])
    if d[l1] <= 0 or d[l3] >= 0:
        return None
    for l2 in range(l3 - 1, l1, -1):
        if np.all(d[l1:l2] >= 0) and np.all(d[l2:l3] <= 0):
            return l1, l2, l3
    return None


def shape_check(coeffs, shape: ShapeClass | str) -> bool:
    """Coefficient-level sufficient condition for the requested shape.

    Comparisons are exact; no tolerance is applied.
    """
    shape = ShapeClass.parse(shape)
    a = np.asarray(coeffs, dtype=float).reshape(-1)
    if a.size < _MIN_LENGTH[shape]:
        raise DegenerateInputError(
            f"{shape.value} check needs at least {_MIN_LENGTH[shape]} coefficients, got {a.size}"
        )
    if shape is ShapeClass.UNIMODAL:
        return unimodal_indices(a) is not None
    d = np.diff(a)
    if shape is ShapeClass.MONOTONE:
        return bool(np.all(d >= 0))
    second = np.diff(d)
    if shape is ShapeClass.UNIMODAL_CONCAVE:
        return bool(d[0] > 0 and d[-1] < 0 and np.all(second <= 0))
    return bool(d[0] < 0 and d[-1] > 0 and np.all(second >= 0))


def bernstein_approx(samples, tau: float = 1.0) -> BernsteinPoly:
    """The order ``n`` Bernstein polynomial of ``f`` from ``f(i tau / n)``, ``i = 0..n``."""
    s = np.asarray(samples, dtype=float).reshape(-1)
    if s.size < 2:
        raise DegenerateInputError("need samples at two or more nodes")
    return BernsteinPoly(s, tau)
