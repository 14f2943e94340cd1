"""Command-line entry point.

``bernreg run``       replicated simulation study, writes a report directory
``bernreg generate``  one synthetic dataset as ``x,y`` CSV
``bernreg fit``       posterior fit of a CSV dataset

Exit status: 0 on success, 2 on configuration or input errors, 1 on any
other failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import default_grid, diagnostics, error_metrics, posterior_mean_curve, write_acf, write_metrics
from .bernstein import ShapeClass
from .errors import BernregError, ConfigurationError
from .experiment import PRESETS, ExperimentConfig, default_shape, run_experiment
from .model import Dataset, NoiseModel, TestFunction, empirical_hyperparams, estimate_sigma_sq, generate_dataset
from .samplers import SamplerConfig, SamplerKind, run_chain, write_trace

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

# keys accepted in a --config JSON file for `run`, with their value types
RUN_KEYS = {
    "function": str,
    "sigma": float,
    "shape": str,
    "preset": str,
    "seed": int,
    "out": str,
    "sampler": str,
    "updates": int,
    "burnin": int,
    "replicates": int,
    "grid": int,
    "parallel": int,
    "K": int,
    "c": float,
    "balance": str,
    "q02_rule": str,
}


class _ConfigArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _add_sampler_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sampler", choices=[k.value for k in SamplerKind], default=None)
    p.add_argument("--updates", type=int, default=None)
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--c", type=float, default=None, help="order-move scale in [0, 1/2]")
    p.add_argument("--balance", choices=["paper", "strict"], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _ConfigArgumentParser(prog="bernreg", description="Shape-restricted regression with random Bernstein polynomials")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ConfigArgumentParser)

    run = sub.add_parser("run", help="replicated simulation study")
    run.add_argument("--config", type=Path, default=None, help="JSON file of settings; flags override it")
    run.add_argument("--function", choices=[f.value for f in TestFunction], default=None)
    run.add_argument("--sigma", type=float, default=None)
    run.add_argument("--shape", choices=["monotone", "convex", "concave"], default=None)
    run.add_argument("--preset", choices=sorted(PRESETS), default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None)
    run.add_argument("--replicates", type=int, default=None)
    run.add_argument("--grid", type=int, default=None)
    run.add_argument("--parallel", type=int, default=None)
    run.add_argument("--K", type=int, default=None)
    run.add_argument("--q02-rule", dest="q02_rule", choices=["printed", "midpoint"], default=None)
    _add_sampler_flags(run)

    gen = sub.add_parser("generate", help="write one synthetic dataset")
    gen.add_argument("--function", choices=[f.value for f in TestFunction], required=True)
    gen.add_argument("--sigma", type=float, required=True)
    gen.add_argument("--K", type=int, default=100)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)

    fit = sub.add_parser("fit", help="posterior fit of an x,y CSV dataset")
    fit.add_argument("--data", type=Path, required=True)
    fit.add_argument("--shape", choices=["monotone", "convex", "concave"], required=True)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", type=Path, required=True)
    fit.add_argument("--grid", type=int, default=1001)
    fit.add_argument("--function", choices=[f.value for f in TestFunction], default=None, help="score against this curve")
    _add_sampler_flags(fit)
    return parser


def _load_config_file(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    unknown = sorted(set(raw) - set(RUN_KEYS))
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {unknown}")
    out = {}
    for key, value in raw.items():
        kind = RUN_KEYS[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool):
            raise ConfigurationError(f"{path}: {key} must be {kind.__name__}, got {value!r}")
        out[key] = value
    return out


def resolve_run_settings(args: argparse.Namespace) -> dict:
    """Merge preset defaults, the config file and explicit flags (in that order)."""
    from_file = _load_config_file(args.config) if args.config is not None else {}
    flags = {k: getattr(args, k) for k in RUN_KEYS if getattr(args, k, None) is not None}
    merged = {**from_file, **flags}
    preset = merged.get("preset", "paper")
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}")
    p = PRESETS[preset]
    settings = {"seed": 0, "sampler": "mhra", "grid": 1001, "parallel": 1, "K": 100, "c": 0.35, "balance": "paper", "q02_rule": "printed"}
    settings.update(updates=p["updates"], burnin=p["burn_in"], replicates=p["replicates"], preset=preset)
    settings.update(merged)
    for key in ("function", "sigma", "out"):
        if key not in settings:
            raise ConfigurationError(f"missing required setting --{key}")
    return settings


def config_from_settings(s: dict) -> ExperimentConfig:
    f = TestFunction.parse(s["function"])
    shape = ShapeClass.parse(s["shape"]) if "shape" in s else default_shape(f)
    sampler = SamplerConfig(
        kind=SamplerKind(s["sampler"]),
        c=s["c"],
        updates=s["updates"],
        burn_in=s["burnin"],
        balance=s["balance"],
    )
    if shape is not ShapeClass.MONOTONE and sampler.kind is SamplerKind.IMA:
        raise ConfigurationError("the independent sampler is available for monotone fits only")
    return ExperimentConfig(
        function=f,
        sigma=s["sigma"],
        K=s["K"],
        replicates=s["replicates"],
        sampler=sampler,
        shape=shape,
        grid_size=s["grid"],
        master_seed=s["seed"],
        output_dir=Path(s["out"]),
        parallelism=s["parallel"],
        q02_rule=s["q02_rule"],
    )


def _cmd_run(args) -> int:
    cfg = config_from_settings(resolve_run_settings(args))

    def progress(res):
        m = res.metrics
        print(f"replicate {res.index}: l1={m.l1:.4f} sup={m.sup:.4f} mse={m.mse:.5f}", file=sys.stderr)

    rep = run_experiment(cfg, progress=progress if cfg.parallelism == 1 else None)
    a = rep.aggregate
    print(f"{cfg.function.value} sigma={cfg.sigma} shape={cfg.shape.value} replicates={cfg.replicates}")
    print(f"L1 {a.l1:.4f}  sup {a.sup:.4f}  MSE {a.mse:.4f}")
    print(f"acceptance {rep.mean_acceptance:.4f}  ESS {rep.mean_ess:.1f}")
    mode = max(rep.order_pmf_mean, key=rep.order_pmf_mean.get)
    print(f"order posterior mode n={mode} (p={rep.order_pmf_mean[mode]:.4f})")
    print(f"report written to {cfg.output_dir}")
    return EXIT_OK


def _cmd_generate(args) -> int:
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    data = generate_dataset(TestFunction.parse(args.function), args.K, NoiseModel(args.sigma), rng)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    data.to_csv(args.out)
    print(f"wrote {data.n_obs} observations to {args.out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    data = Dataset.from_csv(args.data)
    shape = ShapeClass.parse(args.shape)
    sampler = SamplerConfig()
    overrides = {
        "kind": SamplerKind(args.sampler) if args.sampler else None,
        "updates": args.updates,
        "burn_in": args.burnin,
        "c": args.c,
        "balance": args.balance,
    }
    sampler = replace(sampler, **{k: v for k, v in overrides.items() if v is not None})
    if shape is not ShapeClass.MONOTONE and sampler.kind is SamplerKind.IMA:
        raise ConfigurationError("the independent sampler is available for monotone fits only")
    spec = empirical_hyperparams(data, shape)
    sigma_sq = estimate_sigma_sq(data)
    trace = run_chain(data, spec, sampler, sigma_sq, rng=np.random.default_rng(np.random.SeedSequence(args.seed)))
    args.out.mkdir(parents=True, exist_ok=True)
    write_trace(trace, args.out / "trace.json", states_file=args.out / "states.bin")
    grid = default_grid(args.grid, data.tau)
    curve = posterior_mean_curve(trace, grid)
    np.savetxt(args.out / "curve.csv", np.column_stack([curve.grid, curve.values]), delimiter=",", header="x,fhat", comments="")
    diag = diagnostics(trace, grid=grid)
    write_acf(diag.acf, args.out / "acf.csv")
    print(f"sigma^2 estimate {sigma_sq:.5f}; acceptance {diag.acceptance_rate:.4f}; ESS {diag.ess:.1f}")
    if args.function is not None:
        m = error_metrics(curve, TestFunction.parse(args.function))
        write_metrics(m, args.out / "metrics.json")
        print(f"L1 {m.l1:.4f}  sup {m.sup:.4f}  MSE {m.mse:.4f}")
    print(f"fit written to {args.out}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "generate": _cmd_generate, "fit": _cmd_fit}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except BernregError as exc:
        print(f"bernreg: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("bernreg: interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        print(f"bernreg: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
