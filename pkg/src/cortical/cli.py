"""Command line front end.

Four subcommands, each exiting 0 on success and 1 on any failure:

    cortical sweep    --estimator ddime_hat --estimator mine \\
                      --snr-db -5,0,5,10 --repeats 10 --out runs/sweep
    cortical capacity --latent discrete --m 8 --snr-db 10 --out runs/cap
    cortical validate
    cortical plot runs/sweep/sweep_summary.csv --kind line --out sweep.svg

Flags override values from an optional ``--config`` file; unspecified
settings fall back to the documented defaults. ``sweep`` and ``capacity``
print the output paths they wrote; ``validate`` prints one line per check.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from cortical.estimators import ESTIMATOR_NAMES
from cortical.harness import (
    ExperimentConfig,
    HarnessError,
    parse_config,
    parse_estimator_spec,
    run_capacity,
    run_sweep,
    run_validate,
)
from cortical.plotting import PlotError, write_plot


def _float_list(text: str):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _add_common(sub):
    sub.add_argument("--config", help="key=value config file to start from")
    sub.add_argument("--alpha", type=float, help="exponent weight")
    sub.add_argument("--snr-db", type=_float_list, metavar="LIST",
                     help="comma separated SNR grid in dB")
    sub.add_argument("--dim", type=int, help="channel dimension")
    sub.add_argument("--batch", type=int, help="training batch size")
    sub.add_argument("--seed", type=int, help="base seed")
    sub.add_argument("--eval-batches", type=int,
                     help="evaluation batches for the final readout")
    sub.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cortical",
        description="Discriminative MI estimation and cooperative "
                    "channel-capacity learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="train estimators over a grid")
    _add_common(sweep)
    sweep.add_argument("--estimator", action="append", metavar="SPEC",
                       help=f"estimator name from {ESTIMATOR_NAMES}, with "
                            "optional options like smile:tau=5; repeatable")
    sweep.add_argument("--tau", type=float, help="clip threshold for smile")
    sweep.add_argument("--rho", type=_float_list, metavar="LIST",
                       help="comma separated correlation grid "
                            "(alternative to --snr-db)")
    sweep.add_argument("--iters", type=int, help="training iterations")
    sweep.add_argument("--lr", type=float, help="discriminator learning rate")
    sweep.add_argument("--repeats", type=int, help="runs per grid point")
    sweep.add_argument("--workers", type=int,
                       help="worker threads (also CORTICAL_WORKERS)")

    cap = sub.add_parser("capacity", help="learn a channel input distribution")
    _add_common(cap)
    cap.add_argument("--latent", choices=("gaussian", "discrete"),
                     help="latent source kind")
    cap.add_argument("--latent-dim", type=int, help="gaussian latent width")
    cap.add_argument("--m", type=int, help="discrete alphabet size")
    cap.add_argument("--gen-iters", type=int, help="generator iterations")
    cap.add_argument("--disc-steps", type=int,
                     help="discriminator steps per generator step")
    cap.add_argument("--gen-lr", type=float, help="generator learning rate")
    cap.add_argument("--lr", type=float, help="discriminator learning rate")

    sub.add_parser("validate", help="run the oracle validation suite")

    plot = sub.add_parser("plot", help="render a harness CSV to SVG")
    plot.add_argument("csv", help="CSV file produced by sweep or capacity")
    plot.add_argument("--kind", choices=("line", "scatter"), default="line")
    plot.add_argument("--out", required=True, help="SVG output path")
    return parser


_SWEEP_FIELDS = {"alpha": None, "dim": "dim", "batch": "batch",
                 "seed": "seed_base", "eval_batches": "eval_batches",
                 "out": "out_dir", "iters": "iterations", "lr": "lr",
                 "repeats": "repeats"}
_CAP_FIELDS = {"alpha": "alpha", "dim": "dim", "batch": "batch",
               "seed": "seed_base", "eval_batches": "eval_batches",
               "out": "out_dir", "latent": "latent",
               "latent_dim": "latent_dim", "m": "m",
               "gen_iters": "gen_iterations",
               "disc_steps": "disc_steps_per_gen", "gen_lr": "gen_lr",
               "lr": "disc_lr"}


def _base_config(args, kind: str) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        if cfg.kind != kind:
            cfg = replace(cfg, kind=kind)
        return cfg
    return ExperimentConfig(kind=kind, snr_grid=(0.0,))


def _sweep_config(args) -> ExperimentConfig:
    cfg = _base_config(args, "estimator-sweep")
    overrides = {}
    for flag, fname in _SWEEP_FIELDS.items():
        value = getattr(args, flag)
        if fname is not None and value is not None:
            overrides[fname] = value
    if args.snr_db is not None:
        overrides["snr_grid"], overrides["rho_grid"] = args.snr_db, ()
    if args.rho is not None:
        if args.snr_db is not None:
            raise HarnessError("--snr-db and --rho are mutually exclusive")
        overrides["rho_grid"], overrides["snr_grid"] = args.rho, ()
    if args.estimator:
        kinds = []
        for spec in args.estimator:
            kind = parse_estimator_spec(spec)
            if args.alpha is not None and ":" not in spec:
                kind = replace(kind, alpha=args.alpha)
            if args.tau is not None and ":" not in spec \
                    and kind.name == "smile":
                kind = replace(kind, tau=args.tau)
            kinds.append(kind)
        overrides["estimators"] = tuple(kinds)
    return replace(cfg, **overrides)


def _capacity_config(args) -> ExperimentConfig:
    cfg = _base_config(args, "capacity-run")
    overrides = {}
    for flag, fname in _CAP_FIELDS.items():
        value = getattr(args, flag)
        if value is not None:
            overrides[fname] = value
    if args.snr_db is not None:
        overrides["snr_grid"] = args.snr_db
    return replace(cfg, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            result = run_sweep(_sweep_config(args), workers=args.workers)
            print(f"wrote {result.data_path}")
            print(f"wrote {result.summary_path}")
            print(f"wrote {result.manifest_path}")
            for failure in result.failures:
                print(f"failed cell: {failure}", file=sys.stderr)
            return 0 if result.ok else 1
        if args.command == "capacity":
            result = run_capacity(_capacity_config(args))
            print(f"wrote {result.data_path}")
            if result.constellation_path:
                print(f"wrote {result.constellation_path}")
            print(f"wrote {result.manifest_path}")
            for failure in result.failures:
                print(f"failed run: {failure}", file=sys.stderr)
            return 0 if result.ok else 1
        if args.command == "validate":
            report = run_validate()
            for line in report.lines():
                print(line)
            return 0 if report.ok else 1
        write_plot(args.csv, args.out, kind=args.kind)
        print(f"wrote {args.out}")
        return 0
    except (HarnessError, PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
