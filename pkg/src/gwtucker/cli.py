"""
Command line entry point.

    gwtucker generate --config exp.json --out runs/a
    gwtucker compress --config exp.json --out runs/a --model groupwise --ranks 4,8,6
    gwtucker evaluate --config exp.json --out runs/a
    gwtucker report   --config exp.json --out runs/a [--storage-only]
    gwtucker sweep    --config sweep.json --out runs/s
"""

import argparse
import json
import logging
import sys

from . import archive
from .channel_model import generate_channel_set
from .decomposition import MODELS, SolveTrace, solve
from .runner import (ARCHIVE_NAME, CHANNELS_NAME, TRACE_NAME, ConfigError,
                     ExperimentConfig, write_report, build_report, load_channels,
                     resolve_out_dir, run_experiment, run_sweep, save_channels)

log = logging.getLogger("gwtucker")


def _ranks(text):
    try:
        m, n, p = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected m,n,p, got {text!r}")
    return m, n, p


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="gwtucker", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("generate", "compress", "evaluate", "sweep", "report"):
        p = sub.add_parser(verb)
        p.add_argument("--config", help="flat JSON experiment config")
        p.add_argument("--seed", type=_u64)
        p.add_argument("--model", choices=MODELS)
        p.add_argument("--ranks", type=_ranks, help="m,n,p")
        p.add_argument("--iters", type=int)
        p.add_argument("--out", help="output directory (overrides $GWTK_OUT)")
        p.add_argument("--storage-only", action="store_true",
                       help="report the storage ratio without generating channels")
    return parser


def load_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = ExperimentConfig.from_file(args.config).__dict__.copy()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.model is not None:
        data["model"] = args.model
    if args.ranks is not None:
        data["m"], data["n"], data["p"] = args.ranks
    if args.iters is not None:
        data["iters"] = args.iters
    return ExperimentConfig.from_dict(data)


def _channels(config, out):
    path = out / CHANNELS_NAME
    if path.exists():
        channels = load_channels(path)
        if channels.topology != config.topology:
            raise ConfigError(f"{path} holds {channels.topology}, config asks for {config.topology}")
        return channels
    channels = generate_channel_set(config.topology, config.gen_params, config.seed)
    save_channels(path, channels)
    return channels


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
        if args.verb == "sweep":
            rows = run_sweep(config, args.out)
            print("axis,Rs,Rt,ec")
            for row in rows:
                print(",".join(str(v) for v in row))
            return 0
        if args.verb == "report":
            report = run_experiment(config, args.out, storage_only=args.storage_only)
            _summary(report)
            return 0

        out = resolve_out_dir(config, args.out)
        if args.verb == "generate":
            channels = generate_channel_set(config.topology, config.gen_params, config.seed)
            save_channels(out / CHANNELS_NAME, channels)
            print(f"wrote {out / CHANNELS_NAME}")
        elif args.verb == "compress":
            channels = _channels(config, out)
            factors, trace = solve(config.model, channels, config.ranks, config.iters)
            size = archive.save_archive(out / ARCHIVE_NAME, factors, channels.coeffs)
            with open(out / TRACE_NAME, "w") as fh:
                json.dump({"objective_trace": trace.objective_per_iter,
                           "gain_trace": trace.gain_per_iter,
                           "energy": trace.energy}, fh, indent=2)
            print(f"wrote {out / ARCHIVE_NAME} ({size} bytes), "
                  f"{trace.iterations_run} sweeps, f={trace.final:.6g}")
        elif args.verb == "evaluate":
            channels = _channels(config, out)
            factors, _ = archive.load_archive(out / ARCHIVE_NAME)
            if factors.model != config.model or factors.ranks != config.ranks:
                raise ConfigError(
                    f"archive holds a {factors.model} model at ranks "
                    f"{factors.ranks.as_tuple()}, config asks for {config.model} at "
                    f"{config.ranks.as_tuple()}")
            trace = None
            if (out / TRACE_NAME).exists():
                with open(out / TRACE_NAME) as fh:
                    t = json.load(fh)
                trace = SolveTrace(t["objective_trace"], t["gain_trace"], t["energy"])
            report = build_report(config, channels, factors, trace,
                                  storage_only=args.storage_only)
            write_report(out, report)
            _summary(report)
        return 0
    except (ConfigError, archive.ArchiveError, OSError) as exc:
        print(f"gwtucker: error: {exc}", file=sys.stderr)
        return 2


def _summary(report):
    line = f"R_s={report['R_s']:.4f} R_t(ledger)={report['R_t_ledger']:.4f}"
    if "e_c" in report:
        line += f" R_t(measured)={report['R_t']:.4f} e_c={report['e_c']:.6g}"
    print(line)


if __name__ == "__main__":
    sys.exit(main())
