"""Regression model ``Y_jk = F(X_k) + eps_jk`` with Gaussian errors.

Includes the four benchmark regression functions, synthetic data
generation, the Gaussian log-likelihood, the first-difference noise
variance estimator and the data-driven prior hyperparameters.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bernstein import BernsteinPoly, ShapeClass, basis_matrix
from .errors import ConfigurationError, DegenerateInputError, DomainError
from .priors import OrderDistribution, OrderKind, PriorSpec

__all__ = [
    "Dataset",
    "NoiseModel",
    "TestFunction",
    "true_fn_eval",
    "generate_dataset",
    "estimate_sigma_sq",
    "log_likelihood",
    "empirical_hyperparams",
]


@dataclass(frozen=True)
class Dataset:
    """Design points ``xs`` with one or more responses per point.

    ``ys[k]`` holds the ``m_k`` responses observed at ``xs[k]``.
    """

    xs: np.ndarray
    ys: tuple
    tau: float = 1.0
    obs_x: np.ndarray = field(init=False, repr=False, compare=False)
    obs_y: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float).reshape(-1)
        ys = tuple(np.array(y, dtype=float).reshape(-1) for y in self.ys)
        if len(ys) != xs.size:
            raise DegenerateInputError(f"{xs.size} design points but {len(ys)} response groups")
        if any(y.size < 1 for y in ys):
            raise DegenerateInputError("every design point needs at least one response")
        tau = float(self.tau)
        if not tau > 0:
            raise DomainError("tau must be positive")
        if np.any((xs < 0) | (xs > tau)):
            raise DomainError(f"design points must lie in [0, {tau}]")
        if not all(np.all(np.isfinite(y)) for y in ys) or not np.all(np.isfinite(xs)):
            raise DomainError("data must be finite")
        for arr in (xs, *ys):
            arr.setflags(write=False)
        obs_x = np.repeat(xs, [y.size for y in ys])
        obs_y = np.concatenate(ys) if ys else np.empty(0)
        obs_x.setflags(write=False)
        obs_y.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "obs_x", obs_x)
        object.__setattr__(self, "obs_y", obs_y)

    @classmethod
    def from_pairs(cls, x, y, tau: float = 1.0) -> "Dataset":
        """One response per design point."""
        y = np.asarray(y, dtype=float).reshape(-1)
        return cls(np.asarray(x, dtype=float), tuple(y[:, None]), tau)

    @property
    def K(self) -> int:
        return self.xs.size

    @property
    def n_obs(self) -> int:
        return self.obs_y.size

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.tau == other.tau
            and np.array_equal(self.xs, other.xs)
            and len(self.ys) == len(other.ys)
            and all(np.array_equal(a, b) for a, b in zip(self.ys, other.ys))
        )

    def y_by_x(self) -> np.ndarray:
        """Responses ordered by ascending x; ties keep their original order."""
        order = np.argsort(self.obs_x, kind="stable")
        return self.obs_y[order]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y"])
            for x, y in zip(self.obs_x, self.obs_y):
                writer.writerow([repr(float(x)), repr(float(y))])

    @classmethod
    def from_csv(cls, path, tau: float = 1.0) -> "Dataset":
        """Read ``x,y`` rows; rows sharing an x value form one design point."""
        groups: dict[float, list[float]] = {}
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y"]:
                raise DomainError(f"{path}: expected header 'x,y'")
            for lineno, row in enumerate(reader, start=2):
                try:
                    x, y = float(row["x"]), float(row["y"])
                except (TypeError, ValueError):
                    raise DomainError(f"{path}:{lineno}: malformed row {row}") from None
                groups.setdefault(x, []).append(y)
        if not groups:
            raise DegenerateInputError(f"{path}: no observations")
        return cls(np.array(list(groups)), tuple(groups.values()), tau)


@dataclass(frozen=True)
class NoiseModel:
    sigma: float

    def __post_init__(self):
        # sigma = 0 is allowed for generating noiseless data
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be non-negative, got {self.sigma}")


class TestFunction(enum.Enum):
    """Benchmark regression functions on [0, 1]: F1, F2 increasing, F3, F4 convex."""

    __test__ = False  # keep pytest from collecting this enum

    F1 = "f1"
    F2 = "f2"
    F3 = "f3"
    F4 = "f4"

    @classmethod
    def parse(cls, value) -> "TestFunction":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown test function {value!r}") from None

    def __call__(self, t):
        return true_fn_eval(self, t)


def true_fn_eval(f: TestFunction, t):
    f = TestFunction.parse(f)
    arr = np.asarray(t, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise DomainError("test functions are defined on [0, 1]")
    if f is TestFunction.F1:
        out = np.sin(np.pi / 2 * arr)
    elif f is TestFunction.F2:
        out = np.where(arr <= 0.25, 2 * arr, np.where(arr <= 0.75, 0.5, 2 * arr - 1))
    elif f is TestFunction.F3:
        out = (16 / 9) * (arr - 0.25) ** 2
    else:
        out = np.where(arr <= 0.25, 1 - 4 * arr, np.where(arr <= 0.75, 0.0, 4 * arr - 3))
    return float(out) if out.ndim == 0 else out


def generate_dataset(f: TestFunction, K: int, noise: NoiseModel, rng: np.random.Generator) -> Dataset:
    """``K`` uniform design points, one noisy response each."""
    if K < 2:
        raise DegenerateInputError("need at least two design points")
    xs = rng.uniform(0.0, 1.0, K)
    ys = true_fn_eval(f, xs) + noise.sigma * rng.standard_normal(K)
    return Dataset.from_pairs(xs, ys)


def estimate_sigma_sq(d: Dataset) -> float:
    """First-difference variance estimate ``sum (Y[i+1] - Y[i])^2 / (2 (N - 1))``.

    ``Y[i]`` are the responses sorted by design point.
    """
    y = d.y_by_x()
    if y.size < 2:
        raise DegenerateInputError("need at least two observations to estimate sigma^2")
    return float(np.sum(np.diff(y) ** 2) / (2 * (y.size - 1)))


def log_likelihood(d: Dataset, p: BernsteinPoly, sigma_sq: float) -> float:
    if not sigma_sq > 0:
        raise DomainError("sigma_sq must be positive")
    if d.tau != p.domain_end:
        raise DomainError(f"dataset domain [0, {d.tau}] differs from polynomial domain [0, {p.domain_end}]")
    fitted = basis_matrix(p.order, d.obs_x / d.tau) @ p.coeffs
    rss = float(np.sum((d.obs_y - fitted) ** 2))
    return -0.5 * d.n_obs * math.log(2 * math.pi * sigma_sq) - rss / (2 * sigma_sq)


def _block(K: int, fraction: int) -> int:
    return math.ceil(K / fraction)


def empirical_hyperparams(
    d: Dataset,
    shape: ShapeClass | str,
    alpha: float = 10.0,
    n_max: int = 20,
    q02_rule: str = "printed",
) -> PriorSpec:
    """Data-driven prior hyperparameters.

    Monotone: ``q1 ~ U(min of first 10% Y by x, mean Y)`` and
    ``q2 ~ U(mean Y, max of last 10% Y by x)``.  Convex: the minimum is
    ``U(q01, q02)`` with ``q01`` the mean of the smallest 10% of Y and
    ``q02 = |q01 + mean Y| / 2`` (``q02_rule="midpoint"`` drops the absolute
    value); ``beta1``/``beta2`` are the maxima of the first/last 5% of Y by x.
    Concave priors use the mirror image of the convex rule.
    """
    shape = ShapeClass.parse(shape)
    if any(y.size != 1 for y in d.ys):
        raise DomainError("empirical hyperparameters assume one response per design point")
    y_x = d.y_by_x()
    K = y_x.size
    mean = float(np.mean(y_x))
    if shape is ShapeClass.MONOTONE:
        if K < 10:
            raise DegenerateInputError("monotone hyperparameters need at least 10 observations")
        b = _block(K, 10)
        q11, q22 = float(np.min(y_x[:b])), float(np.max(y_x[-b:]))
        if not (q11 < mean < q22):
            raise ConfigurationError(
                f"empty end-value ranges: q11={q11}, q12=q21={mean}, q22={q22}"
            )
        return PriorSpec(
            ShapeClass.MONOTONE,
            OrderDistribution(alpha, n_max, OrderKind.ISOTONIC_SHIFT),
            q1_range=(q11, mean),
            q2_range=(mean, q22),
        )
    if shape not in (ShapeClass.UNIMODAL_CONVEX, ShapeClass.UNIMODAL_CONCAVE):
        raise ConfigurationError(f"no hyperparameter rule for shape {shape.value}")
    if K < 5:
        raise DegenerateInputError("convex hyperparameters need at least 5 observations")
    if q02_rule not in ("printed", "midpoint"):
        raise ConfigurationError(f"q02_rule must be 'printed' or 'midpoint', got {q02_rule!r}")
    s = 1.0 if shape is ShapeClass.UNIMODAL_CONVEX else -1.0
    # convex orientation throughout; flipped back for concave priors
    z_x = s * y_x
    b10, b20 = _block(K, 10), _block(K, 20)
    q01 = float(np.mean(np.sort(z_x)[:b10]))
    q02 = (q01 + s * mean) / 2
    if q02_rule == "printed":
        q02 = abs(q02)
    beta1, beta2 = float(np.max(z_x[:b20])), float(np.max(z_x[-b20:]))
    if not q01 < q02:
        raise ConfigurationError(f"empty range for the extreme coefficient: q01={q01}, q02={q02}")
    order_dist = OrderDistribution(alpha, n_max, OrderKind.CONVEX_SHIFT)
    if s > 0:
        return PriorSpec(shape, order_dist, q_range=(q01, q02), beta1=beta1, beta2=beta2)
    return PriorSpec(shape, order_dist, q_range=(-q02, -q01), beta1=-beta1, beta2=-beta2)
