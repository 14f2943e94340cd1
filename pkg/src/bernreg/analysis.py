"""Posterior summaries and chain diagnostics."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bernstein import basis_matrix
from .errors import DegenerateInputError, DomainError
from .model import TestFunction, true_fn_eval
from .samplers import ChainTrace

__all__ = [
    "CurveEstimate",
    "ErrorMetrics",
    "Diagnostics",
    "default_grid",
    "posterior_mean_curve",
    "trace_curves",
    "error_metrics",
    "order_posterior",
    "autocorrelation",
    "effective_sample_size",
    "l1_norm_series",
    "diagnostics",
    "write_metrics",
    "write_acf",
]


def default_grid(size: int = 1001, tau: float = 1.0) -> np.ndarray:
    return np.linspace(0.0, tau, size)


@dataclass(frozen=True)
class CurveEstimate:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise DomainError("grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DomainError("curve values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ErrorMetrics:
    l1: float
    sup: float
    mse: float

    def to_dict(self) -> dict[str, float]:
        return {"l1": self.l1, "sup": self.sup, "mse": self.mse}


@dataclass(frozen=True)
class Diagnostics:
    acf: tuple[float, ...]
    ess: float
    acceptance_rate: float
    order_pmf_hat: dict[int, float] = field(default_factory=dict)


def _grouped_by_order(trace: ChainTrace):
    for n in np.unique(trace.orders):
        rows = np.flatnonzero(trace.orders == n)
        yield int(n), rows, trace.coeffs[rows, : n + 1]


def trace_curves(trace: ChainTrace, grid) -> np.ndarray:
    """Every retained curve on ``grid``: an array of shape ``(len(trace), len(grid))``."""
    grid = np.asarray(grid, dtype=float)
    out = np.empty((len(trace), grid.size))
    for n, rows, coeffs in _grouped_by_order(trace):
        out[rows] = coeffs @ basis_matrix(n, grid / trace.domain_end).T
    return out


def posterior_mean_curve(trace: ChainTrace, grid=None) -> CurveEstimate:
    """Pointwise average of the retained curves."""
    if len(trace) == 0:
        raise DegenerateInputError("cannot average an empty trace")
    grid = default_grid(tau=trace.domain_end) if grid is None else np.asarray(grid, dtype=float)
    total = np.zeros(grid.size)
    # curves are linear in coefficients: average coefficients within each order first
    for n, rows, coeffs in _grouped_by_order(trace):
        total += basis_matrix(n, grid / trace.domain_end) @ coeffs.sum(axis=0)
    return CurveEstimate(grid, total / len(trace))


def _trapezoid(y, x) -> float:
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2)


def error_metrics(est: CurveEstimate, f: TestFunction, mse_points=None) -> ErrorMetrics:
    """L1 (trapezoid), sup and mean squared error of ``est - f`` over [0, 1].

    The MSE averages over the grid, or over ``mse_points`` (e.g. the design
    points) when given.
    """
    grid = est.grid
    if not (math.isclose(grid[0], 0.0, abs_tol=1e-12) and math.isclose(grid[-1], 1.0, abs_tol=1e-12)):
        raise DomainError("error metrics need a grid spanning [0, 1]")
    err = est.values - true_fn_eval(f, grid)
    l1 = _trapezoid(np.abs(err), grid)
    sup = float(np.max(np.abs(err)))
    if mse_points is None:
        mse = float(np.mean(err**2))
    else:
        pts = np.asarray(mse_points, dtype=float)
        mse = float(np.mean((np.interp(pts, grid, est.values) - true_fn_eval(f, pts)) ** 2))
    return ErrorMetrics(l1, sup, mse)


def order_posterior(trace: ChainTrace) -> dict[int, float]:
    """Frequencies of the polynomial orders among the retained states."""
    if len(trace) == 0:
        raise DegenerateInputError("empty trace")
    values, counts = np.unique(trace.orders, return_counts=True)
    return {int(n): int(c) / len(trace) for n, c in zip(values, counts)}


def _centered(series) -> np.ndarray:
    s = np.asarray(series, dtype=float).reshape(-1)
    s = s - s.mean()
    if not np.any(s != 0):
        raise DegenerateInputError("autocorrelation is undefined for a constant series")
    return s


def _acf_all(s: np.ndarray) -> np.ndarray:
    """rho_0..rho_{m-1} of a centred series via zero-padded FFT."""
    m = s.size
    size = 1 << (2 * m - 1).bit_length()
    spec = np.fft.rfft(s, size)
    acov = np.fft.irfft(spec * np.conj(spec), size)[:m]
    return acov / acov[0]


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations ``rho_1..rho_L`` with the biased (1/m) normalisation."""
    s = _centered(series)
    if not 1 <= max_lag < s.size:
        raise DomainError(f"max_lag must lie in 1..{s.size - 1}")
    return _acf_all(s)[1 : max_lag + 1]


def effective_sample_size(series) -> float:
    """``m / (1 + 2 sum_{k<=k*} rho_k)`` with ``k*`` the first lag where ``rho_k < 0.05``."""
    s = _centered(series)
    m = s.size
    rho = _acf_all(s)[1:]
    below = np.flatnonzero(rho < 0.05)
    k_star = int(below[0]) + 1 if below.size else rho.size
    tau = 1 + 2 * float(np.sum(rho[:k_star]))
    return float(min(m, m / tau)) if tau > 0 else float(m)


def l1_norm_series(trace: ChainTrace, grid=None, f: TestFunction | None = None, chunk: int = 4096) -> np.ndarray:
    """Per-state L1 norm of the curve (of ``curve - f`` when ``f`` is given)."""
    grid = default_grid(tau=trace.domain_end) if grid is None else np.asarray(grid, dtype=float)
    target = true_fn_eval(f, grid) if f is not None else 0.0
    w = np.empty(grid.size)
    dx = np.diff(grid)
    w[0], w[-1] = dx[0] / 2, dx[-1] / 2
    w[1:-1] = (dx[1:] + dx[:-1]) / 2
    out = np.empty(len(trace))
    for n, rows, coeffs in _grouped_by_order(trace):
        basis_t = basis_matrix(n, grid / trace.domain_end).T
        for start in range(0, rows.size, chunk):
            part = slice(start, start + chunk)
            out[rows[part]] = np.abs(coeffs[part] @ basis_t - target) @ w
    return out


def diagnostics(trace: ChainTrace, max_lag: int = 40, grid=None, f: TestFunction | None = None) -> Diagnostics:
    """ACF, ESS, acceptance rate and order frequencies of one chain.

    The monitored series is the L1 norm of each retained curve.
    """
    series = l1_norm_series(trace, grid, f)
    lag = min(max_lag, series.size - 1)
    return Diagnostics(
        acf=tuple(float(r) for r in autocorrelation(series, lag)),
        ess=effective_sample_size(series),
        acceptance_rate=trace.acceptance_rate,
        order_pmf_hat=order_posterior(trace),
    )


def write_metrics(metrics: ErrorMetrics, path) -> None:
    Path(path).write_text(json.dumps(metrics.to_dict(), indent=1))


def write_acf(acf, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lag", "rho"])
        for k, r in enumerate(acf, start=1):
            writer.writerow([k, repr(float(r))])
