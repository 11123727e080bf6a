"""Command-line interface: ``riskratio fit | compare | simulate``.

Exit status is 0 on success, 2 for usage or validation errors and 3 for
numerical failures (singular design, non-convergence, infeasible start,
out-of-range simulated probabilities).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import (
    DEFAULT_EXP_ALPHA,
    DEFAULT_EXP_BETA,
    SimulationParams,
    breast_cancer_table,
    simulate_cohort_table,
    toy_table,
)
from .design import CATEGORICAL, DesignData, ModelSpec, RawTable, build_design, read_csv
from .diagnostics import BETA, RR, acf_table, ess_per_parameter, summarize, transform
from .errors import DataError, NumericalError
from .sampler import ChainOutput, SamplerConfig, flat_prior, run_baseline_chain, run_chain

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

SEED_ENV = "RISKRATIO_SEED"

# builtin name -> (table factory, default outcome)
BUILTINS = {
    "breast-cancer": (breast_cancer_table, "Dead"),
    "toy": (toy_table, "y"),
}

SAMPLERS = {"proposed": run_chain, "baseline": run_baseline_chain}


@dataclass(frozen=True)
class RunManifest:
    data: str
    spec: ModelSpec
    sampler: str
    config: SamplerConfig
    out: Path
    chains: int = 1
    max_lag: int = 40


def _parse_factor(text: str) -> tuple[str, str]:
    name, sep, ref = text.partition(":")
    if not sep or not ref.startswith("ref=") or not name or len(ref) == 4:
        raise argparse.ArgumentTypeError(f"expected NAME:ref=LEVEL, got {text!r}")
    return name, ref[4:]


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    if value is None:
        return 0
    try:
        return int(value)
    except ValueError:
        raise DataError(f"{SEED_ENV}={value!r} is not an integer") from None


def load_table(source: str, categorical=()) -> tuple[RawTable, str | None]:
    """Resolve ``builtin:<name>`` or a CSV path to a table and default outcome."""
    if source.startswith("builtin:"):
        name = source[len("builtin:"):]
        if name not in BUILTINS:
            raise DataError(f"unknown builtin dataset {name!r}; choose from {sorted(BUILTINS)}")
        factory, outcome = BUILTINS[name]
        return factory(), outcome
    try:
        return read_csv(source, {c: CATEGORICAL for c in categorical}), None
    except OSError as exc:
        raise DataError(f"cannot read {source}: {exc.strerror}") from None


def _add_model_args(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="CSV path or builtin:breast-cancer / builtin:toy")
    p.add_argument("--outcome", help="0/1 outcome column (required for CSV input)")
    p.add_argument("--numeric", action="append", default=[], metavar="COL", help="numeric covariate")
    p.add_argument("--factor", action="append", default=[], type=_parse_factor, metavar="COL:ref=LEVEL",
                   help="categorical covariate with its reference level")
    p.add_argument("--categorical", action="append", default=[], metavar="COL",
                   help="read COL as categorical even if it looks numeric")
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=None, help="default: 10%% of iterations")
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    p.add_argument("--recompute-every", type=int, default=1000, metavar="SWEEPS")
    p.add_argument("--step-scale", type=float, default=0.1, help="baseline random-walk sd")
    p.add_argument("--max-lag", type=int, default=40)
    p.add_argument("--out", type=Path, default=Path("riskratio-out"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskratio", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="sample the posterior and write summaries")
    _add_model_args(fit)
    fit.add_argument("--sampler", choices=sorted(SAMPLERS), default="proposed")
    fit.add_argument("--chains", type=int, default=1)

    cmp_ = sub.add_parser("compare", help="run both samplers and compare efficiency")
    _add_model_args(cmp_)

    sim = sub.add_parser("simulate", help="generate a synthetic cohort")
    sim.add_argument("--n", type=int, default=1500)
    sim.add_argument("--exp-beta", type=_parse_floats, default=DEFAULT_EXP_BETA)
    sim.add_argument("--exp-alpha", type=_parse_floats, default=DEFAULT_EXP_ALPHA)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", type=Path, default=Path("riskratio-out"))
    return parser


def manifest_from_args(args, parser) -> tuple[RunManifest, DesignData]:
    table, default_outcome = load_table(args.data, args.categorical)
    outcome = args.outcome or default_outcome
    if outcome is None:
        parser.error("--outcome is required for CSV input")
    spec = ModelSpec(
        outcome=outcome,
        numeric=tuple(args.numeric),
        factors=tuple(args.factor),
        intercept=not args.no_intercept,
    )
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        config = SamplerConfig(
            iterations=args.iterations,
            burn_in=args.burn_in,
            thin=args.thin,
            seed=seed,
            recompute_every=args.recompute_every,
            step_scale=args.step_scale,
        )
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if getattr(args, "chains", 1) < 1:
        raise DataError("--chains must be positive")
    manifest = RunManifest(
        data=args.data,
        spec=spec,
        sampler=getattr(args, "sampler", "proposed"),
        config=config,
        out=args.out,
        chains=getattr(args, "chains", 1),
        max_lag=args.max_lag,
    )
    return manifest, build_design(table, spec)


def _floats_by_label(labels, values) -> dict:
    return {lab: float(v) for lab, v in zip(labels, values)}


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_fit_artifacts(out_dir: Path, manifest: RunManifest, design: DesignData, output: ChainOutput, seed: int):
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = output.labels
    config = manifest.config
    ess = ess_per_parameter(output, RR)
    summary = {
        "version": __version__,
        "data": manifest.data,
        "model": {
            "outcome": manifest.spec.outcome,
            "numeric": list(manifest.spec.numeric),
            "factors": [{"column": c, "reference": r} for c, r in manifest.spec.factors],
            "intercept": manifest.spec.intercept,
        },
        "sampler": output.sampler,
        "config": {**asdict(config), "seed": seed},
        "n": design.n,
        "k": design.k,
        "kept_draws": int(output.draws.shape[0]),
        "parameters": list(labels),
        "beta": summarize(output, BETA).rows(),
        "rr": summarize(output, RR).rows(),
        "acceptance_rate": _floats_by_label(labels, output.acceptance_rate),
        "ess": _floats_by_label(labels, ess),
        "seconds": output.seconds,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")

    _write_rows(out_dir / "samples.csv", labels, ([repr(float(v)) for v in row] for row in output.draws))

    acfs = acf_table(output, manifest.max_lag, RR)
    _write_rows(
        out_dir / "acf.csv",
        ("lag", "parameter", "value"),
        ((h, lab, repr(float(acfs[h, j]))) for j, lab in enumerate(labels) for h in range(acfs.shape[0])),
    )

    rr = transform(output.draws, RR)
    iterations = range(config.burn_in + 1, config.iterations + 1, config.thin)
    _write_rows(
        out_dir / "trace.csv",
        ("iteration", "parameter", "value"),
        ((it, lab, repr(float(rr[t, j]))) for j, lab in enumerate(labels) for t, it in enumerate(iterations)),
    )
    return summary


def _run_one(sampler: str, design: DesignData, config: SamplerConfig) -> ChainOutput:
    return SAMPLERS[sampler](design, flat_prior(), config)


def _with_seed(config: SamplerConfig, seed: int) -> SamplerConfig:
    return SamplerConfig(**{**asdict(config), "seed": seed})


def cmd_fit(manifest: RunManifest, design: DesignData) -> int:
    if manifest.chains == 1:
        output = _run_one(manifest.sampler, design, manifest.config)
        summary = write_fit_artifacts(manifest.out, manifest, design, output, manifest.config.seed)
        _print_rr(summary)
        return EXIT_OK

    seeds = [manifest.config.seed + c for c in range(manifest.chains)]
    configs = [_with_seed(manifest.config, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=min(manifest.chains, os.cpu_count() or 1)) as pool:
        outputs = list(pool.map(_run_one, [manifest.sampler] * len(configs), [design] * len(configs), configs))
    for c, (seed, output) in enumerate(zip(seeds, outputs), start=1):
        summary = write_fit_artifacts(manifest.out / f"chain-{c}", manifest, design, output, seed)
        print(f"chain {c} (seed {seed})")
        _print_rr(summary)
    return EXIT_OK


def _print_rr(summary: dict):
    for row in summary["rr"]:
        print(f"  {row['parameter']:<24} {row['mean']:8.3f}  ({row['q2.5']:.3f}, {row['q97.5']:.3f})")


def cmd_compare(manifest: RunManifest, design: DesignData) -> int:
    labels = design.labels
    report = {"data": manifest.data, "parameters": list(labels), "config": asdict(manifest.config)}
    ess = {}
    for name in ("proposed", "baseline"):
        output = _run_one(name, design, manifest.config)
        ess[name] = ess_per_parameter(output, RR)
        report[name] = {
            "ess": _floats_by_label(labels, ess[name]),
            "acceptance_rate": _floats_by_label(labels, output.acceptance_rate),
            "seconds": output.seconds,
        }
    report["ess_ratio"] = _floats_by_label(labels, ess["proposed"] / ess["baseline"])
    manifest.out.mkdir(parents=True, exist_ok=True)
    (manifest.out / "compare.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    for lab in labels:
        print(f"  {lab:<24} ESS {report['proposed']['ess'][lab]:9.1f} vs {report['baseline']['ess'][lab]:9.1f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    params = SimulationParams(n=args.n, exp_beta=tuple(args.exp_beta), exp_alpha=tuple(args.exp_alpha), seed=seed)
    table = simulate_cohort_table(params)
    args.out.mkdir(parents=True, exist_ok=True)
    columns = [table[name] for name in table.names]
    _write_rows(
        args.out / "cohort.csv",
        table.names,
        ([format(v, "g") if name in ("y", "E", "F1", "F2") else repr(float(v)) for name, v in zip(table.names, row)]
         for row in np.column_stack(columns)),
    )
    echo = {"n": params.n, "exp_beta": list(params.exp_beta), "exp_alpha": list(params.exp_alpha), "seed": seed,
            "event_rate": float(table["y"].mean())}
    (args.out / "params.json").write_text(json.dumps(echo, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {params.n} rows to {args.out / 'cohort.csv'} (event rate {echo['event_rate']:.3f})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        manifest, design = manifest_from_args(args, parser)
        if args.command == "fit":
            return cmd_fit(manifest, design)
        return cmd_compare(manifest, design)
    except DataError as exc:
        print(f"riskratio: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"riskratio: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"riskratio: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
