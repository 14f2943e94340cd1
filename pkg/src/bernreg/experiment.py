"""Replicated simulation studies and their on-disk report format.

Each replicate draws a fresh dataset, fits the empirical prior, runs one
chain and scores the posterior mean curve against the true function.
Replicate ``r`` takes its randomness from ``SeedSequence([master_seed, r])``
(entropy pooling over the pair), split into one stream for the data and one
for the chain, so results do not depend on scheduling.

Report files written by :func:`emit_report`:

``table.json``
    settings, mean L1 / sup / MSE, mean acceptance rate and ESS.
``order_posterior.csv``
    ``n,probability``: order posterior averaged over replicates.
``acf_replicate0.csv``
    ``lag,rho`` for replicate 0.
``per_replicate.csv``
    one row per replicate: metrics, ESS, acceptance, order frequencies
    ``p_<n>`` and autocorrelations ``rho_<k>``.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import (
    Diagnostics,
    ErrorMetrics,
    default_grid,
    diagnostics,
    error_metrics,
    posterior_mean_curve,
    write_acf,
)
from .bernstein import ShapeClass
from .errors import BernregError, ConfigurationError
from .model import NoiseModel, TestFunction, empirical_hyperparams, estimate_sigma_sq, generate_dataset
from .samplers import SamplerConfig, run_chain

__all__ = [
    "PRESETS",
    "ExperimentConfig",
    "ReplicateResult",
    "ExperimentReport",
    "replicate_streams",
    "run_replicate",
    "run_experiment",
    "summarize",
    "emit_report",
    "load_report",
    "default_shape",
]

PRESETS = {
    "paper": {"replicates": 200, "updates": 100_000, "burn_in": 10_000},
    "quick": {"replicates": 50, "updates": 20_000, "burn_in": 2_000},
}


def default_shape(f: TestFunction) -> ShapeClass:
    return ShapeClass.MONOTONE if f in (TestFunction.F1, TestFunction.F2) else ShapeClass.UNIMODAL_CONVEX


@dataclass(frozen=True)
class ExperimentConfig:
    function: TestFunction
    sigma: float
    K: int = 100
    replicates: int = 200
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    shape: ShapeClass | None = None
    grid_size: int = 1001
    master_seed: int = 0
    output_dir: Path | None = None
    parallelism: int = 1
    alpha: float = 10.0
    n_max: int = 20
    q02_rule: str = "printed"
    max_lag: int = 40

    def __post_init__(self):
        f = TestFunction.parse(self.function)
        object.__setattr__(self, "function", f)
        shape = default_shape(f) if self.shape is None else ShapeClass.parse(self.shape)
        object.__setattr__(self, "shape", shape)
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if self.grid_size < 11:
            raise ConfigurationError("grid_size must be >= 11")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be >= 1")
        if self.K < 2:
            raise ConfigurationError("K must be >= 2")

    @classmethod
    def from_preset(cls, preset: str, function, sigma, **overrides) -> "ExperimentConfig":
        try:
            p = PRESETS[preset]
        except KeyError:
            raise ConfigurationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}") from None
        sampler = overrides.pop("sampler", SamplerConfig())
        sampler = replace(sampler, updates=p["updates"], burn_in=p["burn_in"])
        overrides.setdefault("replicates", p["replicates"])
        return cls(function=function, sigma=sigma, sampler=sampler, **overrides)

    def settings(self) -> dict:
        s = self.sampler
        return {
            "function": self.function.value,
            "sigma": self.sigma,
            "shape": self.shape.value,
            "K": self.K,
            "replicates": self.replicates,
            "grid_size": self.grid_size,
            "master_seed": self.master_seed,
            "alpha": self.alpha,
            "n_max": self.n_max,
            "q02_rule": self.q02_rule,
            "sampler": s.kind.value,
            "c": s.c,
            "updates": s.updates,
            "burn_in": s.burn_in,
            "thinning": s.thinning,
            "balance": s.balance,
        }


@dataclass(frozen=True)
class ReplicateResult:
    index: int
    metrics: ErrorMetrics
    diagnostics: Diagnostics


@dataclass(frozen=True)
class ExperimentReport:
    settings: dict
    per_replicate: tuple[ReplicateResult, ...]
    aggregate: ErrorMetrics
    order_pmf_mean: dict[int, float]
    mean_acceptance: float
    mean_ess: float

    @property
    def acf_replicate0(self) -> tuple[float, ...]:
        return self.per_replicate[0].diagnostics.acf


def replicate_streams(master_seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (data, chain) generators for one replicate."""
    data_ss, chain_ss = np.random.SeedSequence([master_seed, index]).spawn(2)
    return np.random.default_rng(data_ss), np.random.default_rng(chain_ss)


def run_replicate(cfg: ExperimentConfig, index: int) -> ReplicateResult:
    data_rng, chain_rng = replicate_streams(cfg.master_seed, index)
    try:
        data = generate_dataset(cfg.function, cfg.K, NoiseModel(cfg.sigma), data_rng)
        spec = empirical_hyperparams(data, cfg.shape, cfg.alpha, cfg.n_max, cfg.q02_rule)
        trace = run_chain(data, spec, cfg.sampler, estimate_sigma_sq(data), rng=chain_rng)
    except BernregError as exc:
        raise ConfigurationError(f"replicate {index}: {exc}") from exc
    grid = default_grid(cfg.grid_size)
    metrics = error_metrics(posterior_mean_curve(trace, grid), cfg.function)
    return ReplicateResult(index, metrics, diagnostics(trace, cfg.max_lag, grid))


def _run_one(args):
    return run_replicate(*args)


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentReport:
    """Run every replicate (in worker processes when ``parallelism > 1``)."""
    jobs = [(cfg, r) for r in range(cfg.replicates)]
    if cfg.parallelism == 1:
        results = []
        for job in jobs:
            results.append(_run_one(job))
            if progress is not None:
                progress(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = []
            for res in pool.map(_run_one, jobs):
                results.append(res)
                if progress is not None:
                    progress(res)
    report = summarize(results, cfg.settings(), cfg.n_max, 2 if cfg.shape is not ShapeClass.MONOTONE else 1)
    if cfg.output_dir is not None:
        emit_report(report, cfg.output_dir)
    return report


def _mean(values) -> float:
    values = list(values)
    # fsum is exactly rounded, hence independent of replicate order
    return math.fsum(values) / len(values)


def summarize(results, settings: dict, n_max: int, n_min: int = 1) -> ExperimentReport:
    results = tuple(sorted(results, key=lambda r: r.index))
    if not results:
        raise ConfigurationError("no replicate results to summarize")
    aggregate = ErrorMetrics(
        _mean(r.metrics.l1 for r in results),
        _mean(r.metrics.sup for r in results),
        _mean(r.metrics.mse for r in results),
    )
    orders = range(n_min, n_max + 1)
    pmf = {n: _mean(r.diagnostics.order_pmf_hat.get(n, 0.0) for r in results) for n in orders}
    return ExperimentReport(
        settings=dict(settings),
        per_replicate=results,
        aggregate=aggregate,
        order_pmf_mean=pmf,
        mean_acceptance=_mean(r.diagnostics.acceptance_rate for r in results),
        mean_ess=_mean(r.diagnostics.ess for r in results),
    )


def emit_report(rep: ExperimentReport, directory) -> list[Path]:
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        table = {
            "settings": rep.settings,
            "aggregate": rep.aggregate.to_dict(),
            "mean_acceptance": rep.mean_acceptance,
            "mean_ess": rep.mean_ess,
            "replicates": len(rep.per_replicate),
        }
        paths = [out / "table.json", out / "order_posterior.csv", out / "acf_replicate0.csv", out / "per_replicate.csv"]
        paths[0].write_text(json.dumps(table, indent=1, sort_keys=True) + "\n")
        with open(paths[1], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "probability"])
            for n, p in rep.order_pmf_mean.items():
                w.writerow([n, repr(p)])
        write_acf(rep.acf_replicate0, paths[2])
        orders = list(rep.order_pmf_mean)
        n_lags = len(rep.acf_replicate0)
        with open(paths[3], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["replicate", "l1", "sup", "mse", "ess", "acceptance_rate"]
                + [f"p_{n}" for n in orders]
                + [f"rho_{k}" for k in range(1, n_lags + 1)]
            )
            for r in rep.per_replicate:
                m, d = r.metrics, r.diagnostics
                w.writerow(
                    [r.index, repr(m.l1), repr(m.sup), repr(m.mse), repr(d.ess), repr(d.acceptance_rate)]
                    + [repr(d.order_pmf_hat.get(n, 0.0)) for n in orders]
                    + [repr(x) for x in d.acf]
                )
    except OSError as exc:
        raise OSError(f"writing report to {out}: {exc}") from exc
    return paths


def load_report(directory) -> ExperimentReport:
    """Parse :func:`emit_report` output; aggregates are re-derived and checked."""
    src = Path(directory)
    table = json.loads((src / "table.json").read_text())
    with open(src / "order_posterior.csv", newline="") as fh:
        pmf = {int(row["n"]): float(row["probability"]) for row in csv.DictReader(fh)}
    results = []
    with open(src / "per_replicate.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            order_hat = {int(k[2:]): float(v) for k, v in row.items() if k.startswith("p_") and float(v) > 0}
            rhos = sorted((int(k[4:]), float(v)) for k, v in row.items() if k.startswith("rho_"))
            results.append(
                ReplicateResult(
                    int(row["replicate"]),
                    ErrorMetrics(float(row["l1"]), float(row["sup"]), float(row["mse"])),
                    Diagnostics(tuple(v for _, v in rhos), float(row["ess"]), float(row["acceptance_rate"]), order_hat),
                )
            )
    rep = summarize(results, table["settings"], max(pmf), min(pmf))
    stored = ErrorMetrics(**table["aggregate"])
    if (
        stored != rep.aggregate
        or table["mean_acceptance"] != rep.mean_acceptance
        or table["mean_ess"] != rep.mean_ess
        or pmf != rep.order_pmf_mean
    ):
        raise ValueError(f"{src}: stored aggregates disagree with per-replicate values")
    return rep

