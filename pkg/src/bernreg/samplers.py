"""Posterior samplers for Bernstein-prior regression.

Two algorithms are provided for the monotone prior:

* an independent Metropolis sampler (:func:`ima_step`) whose proposal is the
  prior itself, so only the likelihood ratio enters the acceptance test;
* a reversible-jump Metropolis-Hastings sampler built from a within-order
  coefficient update (:func:`mhra_h_move`) and birth/death moves that add
  or delete an interior coefficient (:func:`mhra_birth_move`,
  :func:`mhra_death_move`).

Concave and convex priors use :func:`convex_posterior_step`, which combines
coordinate updates restricted to the exact support slice with independent
prior proposals at the neighbouring orders.

Every step returns the *same* :class:`ChainState` object when the proposal
is rejected, so ``new is old`` tests for rejection.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bernstein import BernsteinPoly, ShapeClass, basis_matrix, shape_check
from .errors import ConfigurationError, DegenerateInputError
from .model import Dataset
from .priors import (
    OrderDistribution,
    PriorDraw,
    PriorSpec,
    _isotonic_logdensity_sorted,
    prior_logdensity,
    sample_prior,
)

__all__ = [
    "SamplerKind",
    "SamplerConfig",
    "PosteriorTarget",
    "ChainState",
    "ChainTrace",
    "move_probabilities",
    "ima_step",
    "ima_log_ratio",
    "mhra_h_move",
    "mhra_birth_move",
    "mhra_death_move",
    "mhra_step",
    "convex_feasible_interval",
    "convex_posterior_step",
    "run_chain",
    "write_trace",
    "read_trace",
    "write_states",
    "read_states",
]

MOVES = ("H", "H+", "H-", "IMA")


class SamplerKind(enum.Enum):
    IMA = "ima"
    MHRA = "mhra"


@dataclass(frozen=True)
class SamplerConfig:
    """Settings of one MCMC run.

    ``c`` scales the probability of proposing an order change.  ``m1`` and
    ``m2`` bound the end-coefficient proposals of the monotone H move; when
    left as ``None`` they default to the outer ends of the prior's q-ranges.
    ``balance`` selects how birth/death acceptance ratios are computed:
    ``"paper"`` uses the printed closed forms, ``"strict"`` assembles the
    generic reversible-jump ratio term by term.
    """

    kind: SamplerKind = SamplerKind.MHRA
    c: float = 0.35
    m1: float | None = None
    m2: float | None = None
    updates: int = 100_000
    burn_in: int = 10_000
    thinning: int = 1
    seed: int = 0
    balance: str = "paper"

    def __post_init__(self):
        object.__setattr__(self, "kind", SamplerKind(self.kind))
        if not 0 <= self.c <= 0.5:
            raise ConfigurationError(f"c must lie in [0, 1/2], got {self.c}")
        if self.updates < 1 or not 0 <= self.burn_in < self.updates:
            raise ConfigurationError(
                f"need 0 <= burn_in < updates, got burn_in={self.burn_in}, updates={self.updates}"
            )
        if self.thinning < 1:
            raise ConfigurationError("thinning must be >= 1")
        if self.m1 is not None and self.m2 is not None and not self.m1 < self.m2:
            raise ConfigurationError(f"need m1 < m2, got {self.m1}, {self.m2}")
        if self.balance not in ("paper", "strict"):
            raise ConfigurationError(f"balance must be 'paper' or 'strict', got {self.balance!r}")


class PosteriorTarget:
    """Data, prior and noise level defining the posterior density.

    Basis matrices at the observation points are cached per order, so the
    fitted values of any state cost one matrix-vector product.  With
    ``flat_likelihood=True`` the likelihood is replaced by 1 and the chain
    targets the prior.
    """

    def __init__(self, data: Dataset, spec: PriorSpec, sigma_sq: float, flat_likelihood: bool = False):
        if not sigma_sq > 0:
            raise ConfigurationError(f"sigma_sq must be positive, got {sigma_sq}")
        self.data = data
        self.spec = spec
        self.sigma_sq = float(sigma_sq)
        self.flat_likelihood = flat_likelihood
        self._x = data.obs_x / data.tau
        self._y = data.obs_y
        self._const = -0.5 * data.n_obs * math.log(2 * math.pi * self.sigma_sq)
        self._basis: dict[int, np.ndarray] = {}

    def basis(self, n: int) -> np.ndarray:
        mat = self._basis.get(n)
        if mat is None:
            mat = basis_matrix(n, self._x)
            mat.setflags(write=False)
            self._basis[n] = mat
        return mat

    def fitted(self, coeffs: np.ndarray) -> np.ndarray:
        return self.basis(coeffs.size - 1) @ coeffs

    def loglik_from_fitted(self, fitted: np.ndarray) -> float:
        if self.flat_likelihood:
            return 0.0
        r = self._y - fitted
        return self._const - float(r @ r) / (2 * self.sigma_sq)

    def logprior(self, coeffs: np.ndarray) -> float:
        return prior_logdensity(coeffs, self.spec)

    def _logprior_sorted(self, coeffs: np.ndarray) -> float:
        # monotone moves keep the vector sorted by construction
        return _isotonic_logdensity_sorted(coeffs.size - 1, float(coeffs[0]), float(coeffs[-1]), self.spec)

    def state(self, draw: PriorDraw | np.ndarray) -> "ChainState":
        coeffs = draw.coeffs if isinstance(draw, PriorDraw) else np.asarray(draw, dtype=float)
        return self._make_state(np.array(coeffs, dtype=float))

    def _make_state(self, coeffs, fitted=None, loglik=None, logprior=None) -> "ChainState":
        coeffs.setflags(write=False)
        if fitted is None:
            fitted = self.fitted(coeffs)
        if loglik is None:
            loglik = self.loglik_from_fitted(fitted)
        if logprior is None:
            logprior = self.logprior(coeffs)
        return ChainState(coeffs, loglik, logprior, fitted)


@dataclass(frozen=True, eq=False)
class ChainState:
    """Current coefficients plus cached log-likelihood, log-prior and fit."""

    coeffs: np.ndarray
    cached_loglik: float
    cached_logprior: float
    fitted: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def log_posterior(self) -> float:
        return self.cached_loglik + self.cached_logprior

    @property
    def draw(self) -> PriorDraw:
        d = np.diff(self.coeffs)
        peak = None
        if d.size >= 2 and d[0] * d[-1] < 0:
            peak = int(np.argmax(d <= 0)) if d[0] > 0 else int(np.argmax(d >= 0))
        return PriorDraw(BernsteinPoly(self.coeffs), peak_index=peak)

    def check(self, target: PosteriorTarget, tol: float = 1e-9) -> None:
        """Raise ``AssertionError`` if the caches or the shape are stale."""
        if not shape_check(self.coeffs, target.spec.shape):
            raise AssertionError(f"state leaves the {target.spec.shape.value} constraint set: {self.coeffs}")
        fresh = target.state(self.coeffs)
        if abs(fresh.cached_loglik - self.cached_loglik) > tol * max(1.0, abs(fresh.cached_loglik)):
            raise AssertionError("cached log-likelihood is stale")
        if abs(fresh.cached_logprior - self.cached_logprior) > tol * max(1.0, abs(fresh.cached_logprior)):
            raise AssertionError("cached log-prior is stale")


@lru_cache(maxsize=64)
def _move_table(d: OrderDistribution, c: float) -> dict[int, tuple[float, float, float]]:
    table = {}
    for n in d.support:
        up = 0.0 if n == d.n_max else c * min(1.0, d.pmf(n + 1) / d.pmf(n))
        down = 0.0 if n == d.n_min else c * min(1.0, d.pmf(n - 1) / d.pmf(n))
        table[n] = (1.0 - up - down, up, down)
    return table


def move_probabilities(n: int, cfg: SamplerConfig | float, d: OrderDistribution) -> tuple[float, float, float]:
    """``(P_H, P_H+, P_H-)`` at order ``n``; ``cfg`` may be a config or ``c`` itself."""
    c = cfg.c if isinstance(cfg, SamplerConfig) else float(cfg)
    if n not in d.support:
        raise DegenerateInputError(f"order {n} outside support {d.support}")
    return _move_table(d, c)[n]


def _accept(log_ratio: float, rng: np.random.Generator) -> bool:
    if log_ratio >= 0:
        return True
    if log_ratio == -math.inf:
        return False
    return math.log(rng.random()) < log_ratio


# --- independent Metropolis ---------------------------------------------------


def ima_log_ratio(current: ChainState, proposal: ChainState, verbatim: bool = False) -> float:
    """Log acceptance ratio of an independent prior proposal.

    The simplified form is the log-likelihood ratio.  ``verbatim=True``
    evaluates the unsimplified expression, posterior ratio times the inverse
    prior-proposal ratio, which must agree up to rounding.
    """
    if not verbatim:
        return proposal.cached_loglik - current.cached_loglik
    return (proposal.log_posterior + current.cached_logprior) - (current.log_posterior + proposal.cached_logprior)


def ima_step(state: ChainState, target: PosteriorTarget, rng: np.random.Generator) -> ChainState:
    """One independent Metropolis update with the prior as proposal."""
    proposal = target.state(sample_prior(target.spec, rng))
    if _accept(ima_log_ratio(state, proposal), rng):
        return proposal
    return state


# --- reversible jump, monotone prior ----------------------------------------------


def _bounds(target: PosteriorTarget, cfg: SamplerConfig) -> tuple[float, float]:
    m1, m2 = target.spec.sampler_bounds()
    if cfg.m1 is not None:
        m1 = cfg.m1
    if cfg.m2 is not None:
        m2 = cfg.m2
    return m1, m2


def _pick_h_index(n: int, rng: np.random.Generator) -> int:
    if n == 1:
        return 0 if rng.random() < 0.5 else 1
    u = rng.random()
    if u < 1 / 3:
        return 0
    if u < 2 / 3:
        return n
    return 1 + int(rng.integers(n - 1))


def mhra_h_move(state: ChainState, target: PosteriorTarget, cfg: SamplerConfig, rng: np.random.Generator) -> ChainState:
    """Replace one coefficient by a uniform draw between its neighbours.

    End coefficients are drawn between the global bounds ``M1``/``M2`` and
    their single neighbour.
    """
    a = state.coeffs
    n = a.size - 1
    m1, m2 = _bounds(target, cfg)
    k = _pick_h_index(n, rng)
    lo = m1 if k == 0 else a[k - 1]
    hi = m2 if k == n else a[k + 1]
    v = rng.uniform(lo, hi)
    new = a.copy()
    new[k] = v
    logprior = target._logprior_sorted(new)
    if logprior == -math.inf:
        return state
    fitted = state.fitted + target.basis(n)[:, k] * (v - a[k])
    loglik = target.loglik_from_fitted(fitted)
    log_ratio = loglik + logprior - state.log_posterior
    if _accept(log_ratio, rng):
        return target._make_state(new, fitted, loglik, logprior)
    return state


def _birth_log_ratio(x: ChainState, y: ChainState, target: PosteriorTarget, cfg: SamplerConfig) -> float:
    d = target.spec.order_dist
    n = x.order
    span = x.coeffs[-1] - x.coeffs[0]
    log_nu = y.log_posterior - x.log_posterior
    if cfg.balance == "paper":
        return log_nu + d.logpmf(n) + math.log(span) - d.logpmf(n + 1) - math.log(n)
    # generic ratio: target x reverse proposal / (target x forward proposal)
    p_death = move_probabilities(n + 1, cfg, d)[2]
    p_birth = move_probabilities(n, cfg, d)[1]
    forward = math.log(p_birth) - math.log(span)  # select birth, V ~ U(a0, an)
    reverse = math.log(p_death) - math.log(n)  # select death, pick V among n interior
    return log_nu + reverse - forward


def _death_log_ratio(x: ChainState, y: ChainState, target: PosteriorTarget, cfg: SamplerConfig) -> float:
    d = target.spec.order_dist
    n = x.order
    span = x.coeffs[-1] - x.coeffs[0]
    log_nu = y.log_posterior - x.log_posterior
    if cfg.balance == "paper":
        return log_nu + d.logpmf(n) + math.log(n - 1) - d.logpmf(n - 1) - math.log(span)
    p_birth = move_probabilities(n - 1, cfg, d)[1]
    p_death = move_probabilities(n, cfg, d)[2]
    forward = math.log(p_death) - math.log(n - 1)
    reverse = math.log(p_birth) - math.log(span)
    return log_nu + reverse - forward


def mhra_birth_move(state: ChainState, target: PosteriorTarget, cfg: SamplerConfig, rng: np.random.Generator) -> ChainState:
    """Insert a coefficient drawn uniformly on ``(a_0, a_n)`` in sorted position."""
    a = state.coeffs
    n = a.size - 1
    if n >= target.spec.order_dist.n_max:
        return state
    v = rng.uniform(a[0], a[-1])
    j = int(np.searchsorted(a, v, side="right"))
    j = min(max(j, 1), n)
    new = np.concatenate((a[:j], [v], a[j:]))
    proposal = target._make_state(new, logprior=target._logprior_sorted(new))
    if _accept(_birth_log_ratio(state, proposal, target, cfg), rng):
        return proposal
    return state


def mhra_death_move(state: ChainState, target: PosteriorTarget, cfg: SamplerConfig, rng: np.random.Generator) -> ChainState:
    """Delete an interior coefficient chosen uniformly."""
    a = state.coeffs
    n = a.size - 1
    if n <= target.spec.order_dist.n_min:
        return state
    k = int(rng.integers(1, n))
    new = np.concatenate((a[:k], a[k + 1:]))
    proposal = target._make_state(new, logprior=target._logprior_sorted(new))
    if _accept(_death_log_ratio(state, proposal, target, cfg), rng):
        return proposal
    return state


def mhra_step(state: ChainState, target: PosteriorTarget, cfg: SamplerConfig, rng: np.random.Generator):
    """Select a move type and apply it.  Returns ``(new_state, move_name)``."""
    _, p_up, p_down = move_probabilities(state.order, cfg, target.spec.order_dist)
    u = rng.random()
    if u < p_up:
        return mhra_birth_move(state, target, cfg, rng), "H+"
    if u < p_up + p_down:
        return mhra_death_move(state, target, cfg, rng), "H-"
    return mhra_h_move(state, target, cfg, rng), "H"


# --- concave / convex ----------------------------------------------------------


def convex_feasible_interval(coeffs, k: int, spec: PriorSpec) -> tuple[float, float]:
    """Values of coefficient ``k`` keeping the vector inside the prior support.

    All other coefficients are held fixed.  The support is cut out by the
    curvature and end-slope conditions, the peak range and the two end bounds;
    each is linear (or a union of a half-line with everything) in the free
    coordinate, so the slice is an interval.  Returned in the original (not
    mirrored) orientation; ``lo > hi`` means empty.
    """
    s = spec.sign
    b = s * np.asarray(coeffs, dtype=float)
    n = b.size - 1
    b1, b2 = s * spec.beta1, s * spec.beta2
    p_lo, p_hi = spec.peak_range()
    lower, upper = [-math.inf], [p_hi]
    if k == 0:
        upper.append(b[1])
    if k == 1:
        lower.append(b[0])
    if k == n:
        upper.append(b[n - 1])
    if k == n - 1:
        lower.append(b[n])
    if k >= 2:
        upper.append(2 * b[k - 1] - b[k - 2])
    if 1 <= k <= n - 1:
        lower.append((b[k - 1] + b[k + 1]) / 2)
    if k <= n - 2:
        upper.append(2 * b[k + 1] - b[k + 2])
    others = np.delete(b, k).max()
    if others < p_lo:
        lower.append(p_lo)
    # end bounds: b_0 > 2 b1 - peak and b_n > 2 b2 - peak
    if k == 0:
        lower.append(2 * b1 - others)
    elif others <= 2 * b1 - b[0]:
        lower.append(2 * b1 - b[0])
    if k == n:
        lower.append(2 * b2 - others)
    elif others <= 2 * b2 - b[n]:
        lower.append(2 * b2 - b[n])
    lo, hi = max(lower), min(upper)
    if s > 0:
        return lo, hi
    return -hi, -lo


def convex_posterior_step(state: ChainState, target: PosteriorTarget, cfg: SamplerConfig, rng: np.random.Generator):
    """Composite update for concave or convex priors.  Returns ``(state, move)``.

    With probability ``P_H`` one coefficient is redrawn uniformly on its
    feasible interval (a symmetric proposal, accepted on the posterior
    ratio).  Otherwise a fresh prior draw at order ``n + 1`` or ``n - 1`` is
    proposed; with the selection probabilities of :func:`move_probabilities`
    the order prior and proposal densities cancel and the likelihood ratio
    decides.
    """
    spec = target.spec
    n = state.order
    _, p_up, p_down = move_probabilities(n, cfg, spec.order_dist)
    u = rng.random()
    if u < p_up + p_down:
        move = "H+" if u < p_up else "H-"
        proposal = target.state(sample_prior(spec, rng, order=n + 1 if move == "H+" else n - 1))
        if _accept(proposal.cached_loglik - state.cached_loglik, rng):
            return proposal, move
        return state, move
    a = state.coeffs
    k = int(rng.integers(n + 1))
    lo, hi = convex_feasible_interval(a, k, spec)
    if not lo < hi:
        return state, "H"
    v = rng.uniform(lo, hi)
    new = a.copy()
    new[k] = v
    logprior = target.logprior(new)
    if logprior == -math.inf:
        return state, "H"
    fitted = state.fitted + target.basis(n)[:, k] * (v - a[k])
    loglik = target.loglik_from_fitted(fitted)
    if _accept(loglik + logprior - state.log_posterior, rng):
        return target._make_state(new, fitted, loglik, logprior), "H"
    return state, "H"


# --- chains -----------------------------------------------------------------------


@dataclass
class ChainTrace:
    """Retained states of one chain plus move statistics.

    ``coeffs`` is a ``(m, n_max + 1)`` array padded with NaN beyond each
    state's order; ``order_history`` holds the order after every update,
    burn-in included.
    """

    orders: np.ndarray
    coeffs: np.ndarray
    accept_counts: dict[str, int]
    propose_counts: dict[str, int]
    order_history: np.ndarray
    domain_end: float = 1.0

    def __len__(self) -> int:
        return self.orders.size

    def state_coeffs(self, i: int) -> np.ndarray:
        return self.coeffs[i, : self.orders[i] + 1]

    @property
    def states(self) -> list[PriorDraw]:
        return [PriorDraw(BernsteinPoly(self.state_coeffs(i), self.domain_end)) for i in range(len(self))]

    @property
    def acceptance_rate(self) -> float:
        proposed = sum(self.propose_counts.values())
        return sum(self.accept_counts.values()) / proposed if proposed else 0.0

    def __eq__(self, other):
        if not isinstance(other, ChainTrace):
            return NotImplemented
        return (
            np.array_equal(self.orders, other.orders)
            and np.array_equal(self.coeffs, other.coeffs, equal_nan=True)
            and self.accept_counts == other.accept_counts
            and self.propose_counts == other.propose_counts
            and np.array_equal(self.order_history, other.order_history)
            and self.domain_end == other.domain_end
        )


def run_chain(
    data: Dataset,
    spec: PriorSpec,
    cfg: SamplerConfig,
    sigma_sq: float,
    *,
    initial: PriorDraw | np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    flat_likelihood: bool = False,
    validate: bool = False,
) -> ChainTrace:
    """Run ``cfg.updates`` MCMC updates and keep the thinned post-burn-in states.

    The chain starts from ``initial`` or from a prior draw.  ``rng`` overrides
    the generator seeded from ``cfg.seed``.  ``validate`` re-checks shape
    and caches after every update (slow; for tests).
    """
    target = PosteriorTarget(data, spec, sigma_sq, flat_likelihood=flat_likelihood)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if spec.shape is ShapeClass.MONOTONE:
        m1, m2 = _bounds(target, cfg)
        if not (m1 <= spec.q1_range[0] and m2 >= spec.q2_range[1] and m1 < m2):
            raise ConfigurationError(
                f"bounds M1={m1}, M2={m2} must enclose the end-value ranges {spec.q1_range}, {spec.q2_range}"
            )
    state = target.state(sample_prior(spec, rng) if initial is None else initial)
    if state.log_posterior == -math.inf:
        raise ConfigurationError("initial state lies outside the prior support")

    if cfg.kind is SamplerKind.IMA:
        def step(s):
            return ima_step(s, target, rng), "IMA"
    elif spec.shape is ShapeClass.MONOTONE:
        def step(s):
            return mhra_step(s, target, cfg, rng)
    else:
        def step(s):
            return convex_posterior_step(s, target, cfg, rng)

    n_keep = len(range(cfg.burn_in, cfg.updates, cfg.thinning))
    width = spec.order_dist.n_max + 1
    orders = np.empty(n_keep, dtype=np.int64)
    coeffs = np.full((n_keep, width), np.nan)
    history = np.empty(cfg.updates, dtype=np.int64)
    accepted = dict.fromkeys(MOVES, 0)
    proposed = dict.fromkeys(MOVES, 0)
    kept = 0
    for it in range(cfg.updates):
        new, move = step(state)
        if it >= cfg.burn_in:
            proposed[move] += 1
            accepted[move] += new is not state
        state = new
        if validate:
            state.check(target)
        history[it] = state.order
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thinning == 0:
            orders[kept] = state.order
            coeffs[kept, : state.order + 1] = state.coeffs
            kept += 1
    return ChainTrace(orders, coeffs, accepted, proposed, history, data.tau)


# --- trace files ----------------------------------------------------------------


def write_states(trace: ChainTrace, path) -> None:
    """Binary dump: per state a little-endian u32 order then order+1 f64 values."""
    with open(path, "wb") as fh:
        for i in range(len(trace)):
            c = trace.state_coeffs(i)
            fh.write(struct.pack("<I", c.size - 1))
            fh.write(c.astype("<f8").tobytes())


def read_states(path) -> list[np.ndarray]:
    raw = Path(path).read_bytes()
    out, pos = [], 0
    while pos < len(raw):
        (n,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        out.append(np.frombuffer(raw, dtype="<f8", count=n + 1, offset=pos).astype(float))
        pos += 8 * (n + 1)
    return out


def write_trace(trace: ChainTrace, path, states_file=None) -> None:
    """JSON summary ``{orders, acceptance, states_file?}``; states optionally dumped."""
    doc = {
        "orders": [int(n) for n in trace.orders],
        "acceptance": {
            m: {"proposed": int(trace.propose_counts[m]), "accepted": int(trace.accept_counts[m])}
            for m in MOVES
        },
    }
    if states_file is not None:
        write_states(trace, states_file)
        sf = Path(states_file)
        same_dir = sf.resolve().parent == Path(path).resolve().parent
        doc["states_file"] = sf.name if same_dir else str(sf.resolve())
    Path(path).write_text(json.dumps(doc, indent=1))


def read_trace(path, n_max: int | None = None, domain_end: float = 1.0) -> ChainTrace:
    """Rebuild a trace from :func:`write_trace` output (states need the dump)."""
    doc = json.loads(Path(path).read_text())
    orders = np.array(doc["orders"], dtype=np.int64)
    width = (n_max if n_max is not None else int(orders.max(initial=0))) + 1
    coeffs = np.full((orders.size, width), np.nan)
    if "states_file" in doc:
        states_path = Path(doc["states_file"])
        if not states_path.is_absolute():
            states_path = Path(path).parent / states_path.name
        for i, c in enumerate(read_states(states_path)):
            coeffs[i, : c.size] = c
    acc = {m: v["accepted"] for m, v in doc["acceptance"].items()}
    prop = {m: v["proposed"] for m, v in doc["acceptance"].items()}
    return ChainTrace(orders, coeffs, acc, prop, orders.copy(), domain_end)
