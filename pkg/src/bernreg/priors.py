"""Constructive Bernstein priors for monotone and unimodal concave/convex curves.

The prior over ``(n, a_0..a_n)`` factors as ``p(n) * pi_n(a)``.  The order
``n`` follows a truncated Poisson whose leftover mass is pushed onto the
lowest admissible order and onto the cap ``n_max``.  Given ``n`` the
coefficients are built from uniform order statistics so that every draw
satisfies the coefficient-level shape condition.

Both conditional densities ``pi_n`` have closed forms, implemented in
:func:`isotonic_prior_logdensity` and :func:`peaked_prior_logdensity`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bernstein import BernsteinPoly, ShapeClass, shape_check
from .errors import ConfigurationError, DomainError

__all__ = [
    "OrderKind",
    "OrderDistribution",
    "PriorSpec",
    "PriorDraw",
    "order_pmf",
    "sample_order",
    "sample_isotonic",
    "sample_concave",
    "sample_convex",
    "sample_prior",
    "isotonic_prior_logdensity",
    "peaked_prior_logdensity",
    "prior_logdensity",
]

_MAX_ENDPOINT_ATTEMPTS = 10_000


class OrderKind(enum.Enum):
    ISOTONIC_SHIFT = "isotonic"
    CONVEX_SHIFT = "convex"


@dataclass(frozen=True)
class OrderDistribution:
    """Truncated, shifted Poisson(``alpha``) law on polynomial orders."""

    alpha: float = 10.0
    n_max: int = 20
    kind: OrderKind = OrderKind.ISOTONIC_SHIFT
    pmf_table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = OrderKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if int(self.n_max) != self.n_max or self.n_max < self.n_min + 1:
            raise ConfigurationError(
                f"n_max must be an integer >= {self.n_min + 1} for {kind.value} orders, got {self.n_max}"
            )
        object.__setattr__(self, "n_max", int(self.n_max))
        orders = np.arange(self.n_min, self.n_max + 1)
        table = stats.poisson.pmf(orders, self.alpha)
        # lowest order absorbs P(N < n_min); the cap absorbs the upper tail
        table[0] = stats.poisson.cdf(self.n_min, self.alpha)
        table[-1] = stats.poisson.sf(self.n_max - 1, self.alpha)
        table.setflags(write=False)
        object.__setattr__(self, "pmf_table", table)
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "_log_table", tuple(np.log(table).tolist()))

    @property
    def n_min(self) -> int:
        return 1 if self.kind is OrderKind.ISOTONIC_SHIFT else 2

    @property
    def support(self) -> range:
        return range(self.n_min, self.n_max + 1)

    def pmf(self, n: int) -> float:
        if n not in self.support:
            raise DomainError(f"order {n} outside support {self.n_min}..{self.n_max}")
        return float(self.pmf_table[n - self.n_min])

    def logpmf(self, n: int) -> float:
        i = n - (1 if self.kind is OrderKind.ISOTONIC_SHIFT else 2)
        if 0 <= i < len(self._log_table):
            return self._log_table[i]
        return -math.inf

    def sample(self, rng: np.random.Generator) -> int:
        return sample_order(self, rng)


def order_pmf(d: OrderDistribution, n: int) -> float:
    return d.pmf(n)


def sample_order(d: OrderDistribution, rng: np.random.Generator) -> int:
    # inverse cdf on a single uniform keeps the stream consumption fixed
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(d.pmf_table), u, side="right"))
    return d.n_min + min(idx, len(d.pmf_table) - 1)


def _interval(value, name) -> tuple[float, float] | None:
    if value is None:
        return None
    lo, hi = (float(v) for v in value)
    if not (lo < hi) or not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigurationError(f"{name} must be a non-empty finite interval, got ({lo}, {hi})")
    return lo, hi


@dataclass(frozen=True)
class PriorSpec:
    """Shape, order law and data-driven hyperparameters of a Bernstein prior.

    Monotone priors use ``q1_range`` and ``q2_range`` (uniform laws of the
    end coefficients).  Concave priors use ``q_range`` for the peak
    coefficient and lower bounds ``beta1``/``beta2`` for the end values;
    convex priors use the same fields with ``beta`` as upper bounds.
    """

    shape: ShapeClass
    order_dist: OrderDistribution
    q1_range: tuple[float, float] | None = None
    q2_range: tuple[float, float] | None = None
    q_range: tuple[float, float] | None = None
    beta1: float | None = None
    beta2: float | None = None

    def __post_init__(self):
        shape = ShapeClass.parse(self.shape)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "q1_range", _interval(self.q1_range, "q1_range"))
        object.__setattr__(self, "q2_range", _interval(self.q2_range, "q2_range"))
        object.__setattr__(self, "q_range", _interval(self.q_range, "q_range"))
        if shape is ShapeClass.MONOTONE:
            if self.q1_range is None or self.q2_range is None:
                raise ConfigurationError("monotone prior needs q1_range and q2_range")
            if self.order_dist.kind is not OrderKind.ISOTONIC_SHIFT:
                raise ConfigurationError("monotone prior needs an isotonic-shift order law")
            if self.q1_range[0] >= self.q2_range[1]:
                raise ConfigurationError(
                    f"q1_range {self.q1_range} lies entirely above q2_range {self.q2_range}; a_0 < a_n is impossible"
                )
            object.__setattr__(
                self,
                "_log_endpoint_order_probability",
                math.log(_uniform_order_probability(self.q1_range, self.q2_range)),
            )
        elif shape in (ShapeClass.UNIMODAL_CONCAVE, ShapeClass.UNIMODAL_CONVEX):
            if self.q_range is None or self.beta1 is None or self.beta2 is None:
                raise ConfigurationError(f"{shape.value} prior needs q_range, beta1 and beta2")
            if self.order_dist.kind is not OrderKind.CONVEX_SHIFT:
                raise ConfigurationError(f"{shape.value} prior needs a convex-shift order law")
            object.__setattr__(self, "beta1", float(self.beta1))
            object.__setattr__(self, "beta2", float(self.beta2))
            self.peak_range()  # fail early on inconsistent bounds
        else:
            raise ConfigurationError("no prior sampler exists for the general unimodal class")

    @classmethod
    def monotone(cls, q1_range, q2_range, alpha=10.0, n_max=20) -> "PriorSpec":
        return cls(ShapeClass.MONOTONE, OrderDistribution(alpha, n_max, OrderKind.ISOTONIC_SHIFT),
                   q1_range=q1_range, q2_range=q2_range)

    @classmethod
    def concave(cls, q_range, beta1, beta2, alpha=10.0, n_max=20) -> "PriorSpec":
        return cls(ShapeClass.UNIMODAL_CONCAVE, OrderDistribution(alpha, n_max, OrderKind.CONVEX_SHIFT),
                   q_range=q_range, beta1=beta1, beta2=beta2)

    @classmethod
    def convex(cls, q_range, beta1, beta2, alpha=10.0, n_max=20) -> "PriorSpec":
        return cls(ShapeClass.UNIMODAL_CONVEX, OrderDistribution(alpha, n_max, OrderKind.CONVEX_SHIFT),
                   q_range=q_range, beta1=beta1, beta2=beta2)

    @property
    def sign(self) -> float:
        """+1 for concave priors, -1 for convex ones (mirror image)."""
        return -1.0 if self.shape is ShapeClass.UNIMODAL_CONVEX else 1.0

    def peak_range(self) -> tuple[float, float]:
        """Range of the peak coefficient, in concave orientation.

        Peak values that would leave an end interval empty are excluded, which
        is the same law as resampling the peak until both intervals are valid.
        """
        s = self.sign
        lo, hi = sorted((s * self.q_range[0], s * self.q_range[1]))
        floor = max(s * self.beta1, s * self.beta2)
        lo = max(lo, floor)
        if not lo < hi:
            raise ConfigurationError(
                f"peak range {self.q_range} is inconsistent with end bounds beta1={self.beta1}, beta2={self.beta2}"
            )
        return lo, hi

    def sampler_bounds(self) -> tuple[float, float]:
        """Default ``(M1, M2)`` for the monotone H move: the outer q-range ends."""
        if self.shape is not ShapeClass.MONOTONE:
            raise ConfigurationError("sampler bounds are defined for monotone priors only")
        return self.q1_range[0], self.q2_range[1]


@dataclass(frozen=True)
class PriorDraw:
    poly: BernsteinPoly
    peak_index: int | None = None

    @property
    def order(self) -> int:
        return self.poly.order

    @property
    def coeffs(self) -> np.ndarray:
        return self.poly.coeffs


def _draw_order(spec: PriorSpec, rng, order):
    if order is None:
        return sample_order(spec.order_dist, rng)
    if order not in spec.order_dist.support:
        raise DomainError(f"order {order} outside prior support {spec.order_dist.support}")
    return int(order)


def sample_isotonic(spec: PriorSpec, rng: np.random.Generator, order: int | None = None) -> PriorDraw:
    """Monotone prior draw: uniform end values, sorted uniform interior.

    ``order`` fixes ``n`` instead of drawing it from the order law.
    """
    if spec.shape is not ShapeClass.MONOTONE:
        raise ConfigurationError("sample_isotonic needs a monotone prior spec")
    n = _draw_order(spec, rng, order)
    for _ in range(_MAX_ENDPOINT_ATTEMPTS):
        a0 = rng.uniform(*spec.q1_range)
        an = rng.uniform(*spec.q2_range)
        if a0 < an:
            break
    else:
        raise ConfigurationError(
            f"could not draw a_0 < a_n from q1_range={spec.q1_range}, q2_range={spec.q2_range}"
        )
    coeffs = np.empty(n + 1)
    coeffs[0], coeffs[n] = a0, an
    coeffs[1:n] = np.sort(rng.uniform(a0, an, n - 1))
    return PriorDraw(BernsteinPoly(coeffs))


def _peaked_coeffs(rng, n, l, a0, peak, an) -> np.ndarray:
    """Concave coefficients through ``a0``, ``peak`` (at index ``l``) and ``an``.

    Increments left of the peak are the spacings of ``l - 1`` uniforms on
    ``(a0, peak)`` in decreasing order; right of the peak the drops are the
    spacings of ``n - l - 1`` uniforms on ``(an, peak)`` in increasing order.
    """
    coeffs = np.empty(n + 1)
    u = np.sort(rng.uniform(a0, peak, l - 1))
    gaps = np.sort(np.diff(np.concatenate(([a0], u, [peak]))))
    coeffs[0] = a0
    coeffs[1:l] = a0 + np.cumsum(gaps[::-1][: l - 1])
    coeffs[l] = peak
    v = np.sort(rng.uniform(an, peak, n - l - 1))
    drops = np.sort(np.diff(np.concatenate(([an], v, [peak]))))
    coeffs[l + 1:n] = peak - np.cumsum(drops[: n - l - 1])
    coeffs[n] = an
    return coeffs


def _sample_peaked(spec: PriorSpec, rng, order):
    n = _draw_order(spec, rng, order)
    s = spec.sign
    l = int(rng.integers(1, n))
    lo, hi = spec.peak_range()
    peak = rng.uniform(lo, hi)
    a0 = rng.uniform(2 * s * spec.beta1 - peak, peak)
    an = rng.uniform(2 * s * spec.beta2 - peak, peak)
    coeffs = s * _peaked_coeffs(rng, n, l, a0, peak, an)
    return PriorDraw(BernsteinPoly(coeffs), peak_index=l)


def sample_concave(spec: PriorSpec, rng: np.random.Generator, order: int | None = None) -> PriorDraw:
    """Unimodal concave prior draw with a peak coefficient in ``q_range``."""
    if spec.shape is not ShapeClass.UNIMODAL_CONCAVE:
        raise ConfigurationError("sample_concave needs a concave prior spec")
    return _sample_peaked(spec, rng, order)


def sample_convex(spec: PriorSpec, rng: np.random.Generator, order: int | None = None) -> PriorDraw:
    """Unimodal convex prior draw: the mirror image of :func:`sample_concave`."""
    if spec.shape is not ShapeClass.UNIMODAL_CONVEX:
        raise ConfigurationError("sample_convex needs a convex prior spec")
    return _sample_peaked(spec, rng, order)


def sample_prior(spec: PriorSpec, rng: np.random.Generator, order: int | None = None) -> PriorDraw:
    if spec.shape is ShapeClass.MONOTONE:
        return sample_isotonic(spec, rng, order)
    if spec.shape is ShapeClass.UNIMODAL_CONCAVE:
        return sample_concave(spec, rng, order)
    return sample_convex(spec, rng, order)


def _uniform_order_probability(r1, r2) -> float:
    """P(U1 < U2) for independent U1 ~ Uniform(r1), U2 ~ Uniform(r2)."""
    (a, b), (c, d) = r1, r2
    if b <= c:
        return 1.0
    if d <= a:
        return 0.0
    # integrate P(U1 < u) = clip((u - a) / (b - a), 0, 1) over u ~ Uniform(c, d)
    def antiderivative(u):
        # integral of clip((u - a)/(b - a), 0, 1) du
        if u <= a:
            return 0.0
        if u <= b:
            return (u - a) ** 2 / (2 * (b - a))
        return (b - a) / 2 + (u - b)

    return (antiderivative(d) - antiderivative(c)) / (d - c)


def _uniform_logpdf(x, rng_) -> float:
    lo, hi = rng_
    if lo <= x <= hi:
        return -math.log(hi - lo)
    return -math.inf


def isotonic_prior_logdensity(draw: PriorDraw | BernsteinPoly | np.ndarray, spec: PriorSpec) -> float:
    """Log joint density ``log(p(n) pi_n(a))`` of the monotone prior.

    Returns ``-inf`` outside the support.  The end-value density carries the
    normalising constant of the ``a_0 < a_n`` restriction, which is 1 when the
    two q-ranges do not overlap.
    """
    coeffs = _coeffs_of(draw)
    if np.any(coeffs[1:] < coeffs[:-1]):
        return -math.inf
    return _isotonic_logdensity_sorted(coeffs.size - 1, float(coeffs[0]), float(coeffs[-1]), spec)


def _isotonic_logdensity_sorted(n: int, a0: float, an: float, spec: PriorSpec) -> float:
    # caller guarantees a non-decreasing coefficient vector
    if not a0 < an:
        return -math.inf
    (l1, h1), (l2, h2) = spec.q1_range, spec.q2_range
    if not (l1 <= a0 <= h1 and l2 <= an <= h2):
        return -math.inf
    lp = spec.order_dist.logpmf(n)
    if lp == -math.inf:
        return lp
    lp -= math.log(h1 - l1) + math.log(h2 - l2) + spec._log_endpoint_order_probability
    return lp + math.lgamma(n) - (n - 1) * math.log(an - a0)


def peaked_prior_logdensity(draw: PriorDraw | BernsteinPoly | np.ndarray, spec: PriorSpec) -> float:
    """Log joint density of the concave/convex prior.

    With peak index ``l``, peak value ``P`` and the peak law truncated to
    :meth:`PriorSpec.peak_range`, the conditional density is

        q(P) / (n - 1) / (2 (P - b1)) / (2 (P - b2))
          * l! (l-1)! / (P - a_0)^(l-1) * (n-l)! (n-l-1)! / (P - a_n)^(n-l-1)

    in concave orientation (``b = beta``), since sorting ``k`` exchangeable
    uniform spacings multiplies their simplex density by ``k!``.
    """
    coeffs = spec.sign * _coeffs_of(draw)
    n = coeffs.size - 1
    if n not in spec.order_dist.support:
        return -math.inf
    d = np.diff(coeffs)
    if not (d[0] > 0 and d[-1] < 0 and np.all(np.diff(d) <= 0)):
        return -math.inf
    l = int(np.argmax(d <= 0))
    peak, a0, an = coeffs[l], coeffs[0], coeffs[-1]
    b1, b2 = spec.sign * spec.beta1, spec.sign * spec.beta2
    lo, hi = spec.peak_range()
    if not (lo <= peak <= hi) or a0 <= 2 * b1 - peak or an <= 2 * b2 - peak:
        return -math.inf
    lp = -math.log(hi - lo) - math.log(n - 1)
    lp -= math.log(2 * (peak - b1)) + math.log(2 * (peak - b2))
    lp += math.lgamma(l + 1) + math.lgamma(l) - (l - 1) * math.log(peak - a0)
    r = n - l
    lp += math.lgamma(r + 1) + math.lgamma(r) - (r - 1) * math.log(peak - an)
    return lp + spec.order_dist.logpmf(n)


def prior_logdensity(draw, spec: PriorSpec) -> float:
    if spec.shape is ShapeClass.MONOTONE:
        return isotonic_prior_logdensity(draw, spec)
    return peaked_prior_logdensity(draw, spec)


def _coeffs_of(draw) -> np.ndarray:
    if isinstance(draw, PriorDraw):
        return draw.coeffs
    if isinstance(draw, BernsteinPoly):
        return draw.coeffs
    return np.asarray(draw, dtype=float)


def check_draw(draw: PriorDraw, spec: PriorSpec) -> bool:
    """True when ``draw`` satisfies the shape condition of ``spec``."""
    return shape_check(draw.coeffs, spec.shape)
