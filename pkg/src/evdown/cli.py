"""Command-line interface.

Subcommands: downsample (run a sampler over a stream file), synth (generate
a labeled scene), metrics (compare a downsampled stream against its
original), bench (time the pipeline phases).

Exit codes: 0 success, 2 bad arguments, 3 malformed input file, 4 I/O
failure.  Stochastic seeds come from --seed, falling back to the
EVDOWN_SEED environment variable, then 0.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys

from .density import SigmoidParams
from .evio import (EventFileError, read_events, read_prior, stats_doc,
                   write_events, write_json_doc, write_log, write_stats)
from .events import SensorGeometry
from .metrics import retention_ratio, selectivity
from .pipeline import METHODS, run
from .samplers import SamplerConfig
from .synth import EdgeSpec, SceneSpec, generate


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("EVDOWN_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"EVDOWN_SEED must be an integer, got {env!r}") from None


def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (default: $EVDOWN_SEED, then 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evdown",
        description="Online downsampling toolkit for event-camera streams.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("downsample", help="downsample an event stream file")
    p.add_argument("--input", "-i", required=True, help="input stream path")
    p.add_argument("--output", "-o", required=True,
                   help="output stream path (.csv suffix selects CSV)")
    p.add_argument("--method", "-m", required=True, choices=METHODS)
    p.add_argument("--alpha", "-a", required=True, type=float,
                   help="target sampling rate in (0, 1]")
    p.add_argument("--window-us", type=int, default=6000,
                   help="analysis window length, microseconds")
    p.add_argument("--tw-us", type=int, default=100,
                   help="deterministic duty-cycle window, microseconds")
    p.add_argument("--theta1", type=float, default=5.0, help="sigmoid slope")
    p.add_argument("--theta2", type=float, default=0.5, help="sigmoid midpoint")
    p.add_argument("--prior", help="spatial prior file (poisson method only)")
    p.add_argument("--no-cap", action="store_true",
                   help="disable the hard budget cap")
    p.add_argument("--stats", help="write run stats JSON here ('-' for stdout)")
    p.add_argument("--log", help="write the per-event decision log CSV here")
    p.add_argument("--format", choices=("auto", "csv", "binary"),
                   default="auto", help="input format (default: sniff)")
    _add_seed(p)
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("synth", help="generate a synthetic labeled scene")
    p.add_argument("--output", "-o", required=True,
                   help="output path (labeled CSV)")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--duration-us", type=int, required=True)
    p.add_argument("--noise-rate", type=float, default=0.0,
                   help="background events per pixel per second")
    p.add_argument("--edge", action="append", default=[],
                   metavar="X0,Y0,X1,Y1,VEL,RATE",
                   help="moving edge: endpoints, px/s along the normal, "
                        "events per edge pixel per second (repeatable)")
    p.add_argument("--polarity", choices=("alternating", "random"),
                   default="alternating")
    _add_seed(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("metrics",
                       help="score a downsampled stream against its original")
    p.add_argument("--original", required=True, help="original stream path")
    p.add_argument("--downsampled", required=True,
                   help="downsampled stream path (must be a subset)")
    p.add_argument("--out", required=True,
                   help="report JSON path ('-' for stdout)")
    p.add_argument("--window-us", type=int, default=6000)
    p.add_argument("--alpha", type=float, default=None,
                   help="target rate to record in the report")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="time the pipeline on a stream file")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--method", "-m", required=True, choices=METHODS)
    p.add_argument("--alpha", "-a", required=True, type=float)
    p.add_argument("--repeat", type=int, default=3,
                   help="runs to take the median over")
    p.add_argument("--window-us", type=int, default=6000)
    p.add_argument("--tw-us", type=int, default=100)
    _add_seed(p)
    p.set_defaults(func=cmd_bench)

    return parser


def _check_alpha(alpha: float) -> float:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"--alpha must be in (0, 1], got {alpha}")
    return alpha


def _check_window(value: int, flag: str) -> int:
    if value < 1:
        raise ValueError(f"{flag} must be >= 1, got {value}")
    return value


def cmd_downsample(args) -> int:
    config_kwargs = dict(
        alpha=_check_alpha(args.alpha),
        tw_us=_check_window(args.tw_us, "--tw-us"),
        t_us=_check_window(args.window_us, "--window-us"),
        theta=SigmoidParams(args.theta1, args.theta2),
        seed=_resolve_seed(args.seed),
        cap_enabled=not args.no_cap,
    )
    stream = read_events(args.input, fmt=args.format)
    if args.prior:
        config_kwargs["prior"] = read_prior(args.prior, stream.geometry)
    out, stats, log = run(stream, args.method, SamplerConfig(**config_kwargs))
    write_events(out, args.output)
    if args.stats:
        write_stats(stats, sys.stdout if args.stats == "-" else args.stats)
    if args.log:
        write_log(log, args.log)
    print(f"downsample: kept {stats.retained}/{stats.processed} events "
          f"(ratio {stats.ratio:.4f}, {stats.capped} capped)", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    edges = []
    for text in args.edge:
        fields = text.split(",")
        if len(fields) != 6:
            raise ValueError(
                f"--edge expects X0,Y0,X1,Y1,VEL,RATE, got {text!r}")
        try:
            vals = [float(v) for v in fields]
        except ValueError:
            raise ValueError(
                f"--edge expects numeric fields, got {text!r}") from None
        edges.append(EdgeSpec(*vals[:4], velocity_px_s=vals[4],
                              rate_per_px_s=vals[5]))
    spec = SceneSpec(
        geometry=SensorGeometry(args.width, args.height),
        duration_us=args.duration_us,
        edges=tuple(edges),
        noise_rate_px_s=args.noise_rate,
        polarity=args.polarity,
        seed=_resolve_seed(args.seed),
    )
    stream = generate(spec)
    write_events(stream, args.output, fmt="csv")
    n_edge = int((stream.labels == 1).sum())
    print(f"synth: {len(stream)} events ({n_edge} edge, "
          f"{len(stream) - n_edge} noise) -> {args.output}", file=sys.stderr)
    return 0


def cmd_metrics(args) -> int:
    original = read_events(args.original)
    downsampled = read_events(args.downsampled)
    try:
        retention = retention_ratio(original, downsampled,
                                    window_us=args.window_us)
        sel = (selectivity(original, downsampled, alpha=args.alpha)
               if original.is_labeled else None)
    except ValueError as exc:
        # The downsampled file not being a subset of the original is an
        # input-contract failure, not a usage error.
        raise EventFileError(str(exc)) from None
    doc = {
        "alpha": args.alpha,
        "method": None,
        "seed": None,
        "processed": len(original),
        "retained": len(downsampled),
        "capped": None,
        "ratio": retention.overall,
        "per_window_ratios": retention.per_window_ratios,
        "ms_per_kev_total": None,
        "ms_per_kev_pdf": None,
        "ms_per_kev_eval": None,
    }
    if sel is not None:
        doc["selectivity"] = {
            "edge_total": sel.edge_total,
            "noise_total": sel.noise_total,
            "edge_retained": sel.edge_retained,
            "noise_retained": sel.noise_retained,
            "edge_fraction": sel.edge_fraction,
            "noise_fraction": sel.noise_fraction,
            "ratio": sel.ratio,
            "overall": sel.overall,
            "alpha": sel.alpha,
        }
    write_json_doc(doc, sys.stdout if args.out == "-" else args.out)
    return 0


def cmd_bench(args) -> int:
    if args.repeat < 1:
        raise ValueError(f"--repeat must be >= 1, got {args.repeat}")
    config = SamplerConfig(
        alpha=_check_alpha(args.alpha),
        tw_us=_check_window(args.tw_us, "--tw-us"),
        t_us=_check_window(args.window_us, "--window-us"),
        seed=_resolve_seed(args.seed),
    )
    stream = read_events(args.input)
    totals, pdfs, evals = [], [], []
    for _ in range(args.repeat):
        _, stats, _ = run(stream, args.method, config)
        totals.append(stats.ms_per_kev_total)
        pdfs.append(stats.ms_per_kev_pdf)
        evals.append(stats.ms_per_kev_eval)
    doc = {
        "method": args.method,
        "alpha": args.alpha,
        "events": len(stream),
        "repeat": args.repeat,
        "ms_per_kev_total": statistics.median(totals),
        "ms_per_kev_pdf": statistics.median(pdfs),
        "ms_per_kev_eval": statistics.median(evals),
    }
    write_json_doc(doc, sys.stdout)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EventFileError as exc:
        print(f"evdown: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"evdown: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"evdown: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
