"""Command-line entry point: ``psc-alloc run`` and ``psc-alloc sweep``.

Exit codes: 0 success, 1 validation error, 2 solver infeasible everywhere.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .channel import RngStream, sample_channel
from .experiments import (
    POWER_HEADER,
    SWEEP_HEADER,
    Scheme,
    SweepSpec,
    emit_trace,
    power_split_report,
    run_scheme,
    run_sweep,
    write_csv,
)
from .model import ConfigError, load_config
from .optimizer import InfeasibleError

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2


def _scheme(name: str) -> Scheme:
    try:
        return Scheme(name.strip().lower())
    except ValueError:
        choices = ", ".join(s.value for s in Scheme)
        raise argparse.ArgumentTypeError(f"unknown scheme {name!r} (choose from {choices})")


def _schemes(text: str) -> tuple[Scheme, ...]:
    return tuple(_scheme(t) for t in text.split(",") if t.strip())


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psc-alloc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one channel draw with one scheme")
    run.add_argument("--config", required=True)
    run.add_argument("--scheme", type=_scheme, default=Scheme.PSC)
    run.add_argument("--seed", type=_seed, default=None, help="overrides the config seed")
    run.add_argument("--trial", type=int, default=0, help="channel stream index")
    run.add_argument("--out", required=True)
    run.add_argument("--trace", default=None)

    sweep = sub.add_parser("sweep", help="Monte-Carlo sweep over one parameter")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--param", required=True)
    sweep.add_argument("--values", required=True, help="comma-separated list")
    sweep.add_argument("--trials", type=int, default=50)
    sweep.add_argument("--schemes", type=_schemes, default=(Scheme.PSC,))
    sweep.add_argument("--seed", type=_seed, default=None)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--out", required=True)
    return parser


def _bundle(args):
    cf = load_config(args.config)
    cfg = cf.config if args.seed is None else cf.config.replace(rng_seed=args.seed)
    return cf.bundle(cfg)


def cmd_run(args) -> int:
    bundle = _bundle(args)
    H = sample_channel(bundle.config, RngStream(bundle.config.rng_seed, args.trial))
    try:
        record = run_scheme(args.scheme, H, bundle)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    write_csv(args.out, POWER_HEADER, power_split_report([record]))
    if args.trace:
        emit_trace(record, args.trace)
    print(f"{record.scheme.label}: objective {record.objective:.6g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _bundle(args)
    conv = int if args.param == "num_users" else float
    try:
        values = tuple(conv(v) for v in args.values.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError([f"bad --values: {exc}"])
    spec = SweepSpec(args.param, values, args.trials, args.schemes, args.jobs)
    result = run_sweep(spec, base)
    write_csv(args.out, SWEEP_HEADER, result.rows)
    if result.all_infeasible:
        print("infeasible in every trial", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _glue_values(argv):
    # "--values -20,-10" would otherwise be read as an unknown option
    out = list(argv)
    for i, tok in enumerate(out[:-1]):
        if tok == "--values":
            out[i:i + 2] = [f"--values={out[i + 1]}"]
            break
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_glue_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return cmd_run(args) if args.command == "run" else cmd_sweep(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
