"""Command-line interface.

Exit codes: 0 success, 2 configuration/usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import accounting, harness, mechanisms
from .errors import ConfigError, DomainError
from .rng import RngHandle
from .tabular import Histogram, Schema


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="datoolkit",
        description="Disclosure-avoidance mechanisms, accounting, and experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="TOML or JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--eps", default=None, help="comma-separated epsilon list")
        p.add_argument("--k", type=int, default=None, help="suppression threshold")

    release = sub.add_parser("release", help="data-release comparison table")
    common(release)

    sweep = sub.add_parser("sweep", help="traditional-vs-DP error sweeps")
    common(sweep)
    sweep.add_argument(
        "--axis",
        choices=["cs-threshold", "swap-fraction", "kanon-k"],
        required=True,
    )

    classify_p = sub.add_parser("classify", help="classification comparison")
    common(classify_p)

    acct = sub.add_parser("accounting", help="print analytic (epsilon, delta) values")
    acct.add_argument("--eps", type=float, required=True)
    acct.add_argument("--n-q", type=int, default=None, help="QI universe size (swapping)")
    acct.add_argument("--bound", type=int, default=None, help="histogram bound B")
    acct.add_argument("--k", type=int, default=None, help="suppression threshold")
    acct.add_argument("--beta", type=float, default=None, help="subsample rate")
    acct.add_argument("--delta", type=float, default=None, help="discrete Gaussian delta")

    verify = sub.add_parser("verify-dp", help="brute-force DP check on tiny instances")
    verify.add_argument("--mechanism", choices=["suppression", "swapping"], required=True)
    verify.add_argument("--eps", type=float, required=True)
    verify.add_argument("--k", type=int, default=2)
    verify.add_argument("--samples", type=int, default=1_000_000)
    verify.add_argument("--seed", type=int, default=0)

    synth = sub.add_parser("synth-data", help="write bundled synthetic microdata CSV")
    synth.add_argument("--rows", type=int, default=4400)
    synth.add_argument("--seed", type=int, default=7)
    synth.add_argument("--out", default="synthetic.csv")

    return parser


def _experiment_config(args) -> harness.ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.reps is not None:
        overrides["repetitions"] = args.reps
    if args.eps is not None:
        overrides["epsilons"] = [float(e) for e in args.eps.split(",") if e]
    if args.out is not None:
        overrides["out_dir"] = args.out
    config = harness.load_experiment_config(args.config, overrides)
    if args.k is not None:
        from dataclasses import replace

        config = replace(config, suppression_k=args.k)
    return config


def _cmd_accounting(args) -> int:
    printed = False
    if args.n_q is not None:
        delta = accounting.delta_swapping(args.eps, args.n_q)
        print(f"dp_swapping: epsilon={args.eps:g} n_q={args.n_q} delta={delta:.3f}")
        printed = True
    if args.bound is not None and args.k is not None:
        delta = accounting.delta_cell_suppression(args.eps, args.bound, args.k)
        print(
            f"dp_suppression: epsilon={args.eps:g} bound={args.bound} "
            f"k={args.k} delta={delta:.3f}"
        )
        printed = True
    if args.beta is not None:
        if args.bound is None:
            raise ConfigError("k-anonymity delta needs --bound")
        delta = accounting.delta_kanonymity(args.eps, args.beta, args.bound)
        print(
            f"dp_kanonymity: epsilon={args.eps:g} beta={args.beta:g} "
            f"bound={args.bound} delta={delta:.3f}"
        )
        printed = True
    if args.delta is not None:
        eff = accounting.gaussian_dp_parameters(args.eps, args.delta)
        print(
            f"discrete_gaussian: epsilon={args.eps:g} delta={args.delta:g} "
            f"effective_epsilon={eff:.6f}"
        )
        printed = True
    if not printed:
        raise ConfigError(
            "nothing to compute: pass --n-q, --bound/--k, --beta, or --delta"
        )
    return 0


def _cmd_verify(args) -> int:
    from .tabular import GroupIndex

    if args.mechanism == "suppression":
        schema = Schema((("CELL", ("a", "b")),))
        hist = Histogram(schema, [2, 1])
        sampler = mechanisms.cell_suppression_sampler(args.k, args.eps)
        analytic = accounting.delta_cell_suppression(args.eps, 3, args.k)
    else:
        schema = Schema((("QI", ("a", "b")),), quasi_identifiers=("QI",))
        hist = Histogram(schema, [2, 1])
        groups = GroupIndex.from_schema(schema)
        sampler = mechanisms.swapping_sampler(groups, args.eps)
        analytic = accounting.delta_swapping(args.eps, schema.qi_universe_size)
    report = accounting.verify_dp_bruteforce(
        hist, args.eps, sampler, n_samples=args.samples, rng=RngHandle(args.seed)
    )
    print(
        f"{args.mechanism}: epsilon={args.eps:g} delta_hat={report.delta_hat:.6f} "
        f"analytic_delta={analytic:.6f} mc_se={report.mc_standard_error:.2e}"
    )
    ok = report.delta_hat <= analytic + 3.0 * report.mc_standard_error
    print("within analytic bound" if ok else "EXCEEDS analytic bound")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        if args.command == "release":
            harness.run_data_release(_experiment_config(args))
        elif args.command == "sweep":
            axis = args.axis.replace("-", "_")
            harness.run_sweep(_experiment_config(args), axis)
        elif args.command == "classify":
            harness.run_classification(_experiment_config(args))
        elif args.command == "accounting":
            return _cmd_accounting(args)
        elif args.command == "verify-dp":
            return _cmd_verify(args)
        elif args.command == "synth-data":
            from .synth import write_synthetic_csv

            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            write_synthetic_csv(args.out, args.rows, args.seed)
            print(f"wrote {args.rows} rows to {args.out}")
        return 0
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
