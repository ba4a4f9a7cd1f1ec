"""Command-line interface.

Subcommands: generate, simulate, fit, bootstrap, pipeline.  Exit codes:
0 success, 1 configuration error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import sys

from .config import RunConfig, load_config
from .errors import SeisfragError
from .pipeline import (cmd_bootstrap, cmd_fit, cmd_generate, cmd_pipeline,
                       cmd_simulate)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="run configuration file")
    shared.add_argument("--seed", type=int, help="override the config seed")
    shared.add_argument("--out", help="override the output directory")
    shared.add_argument("--threads", type=int, help="worker process count")
    shared.add_argument("--plot", action="store_true",
                        help="also render SVG figures")
    shared.add_argument("--units", choices=["g", "m/s2"],
                        help="units of two-column recorded motion files")
    parser = argparse.ArgumentParser(
        prog="seisfrag",
        description="Synthetic ground motions, shear-frame response, and "
                    "seismic fragility estimation.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[shared],
                   help="synthesize ground motions")
    p = sub.add_parser("simulate", parents=[shared],
                       help="run transient analyses")
    p.add_argument("--motions", help="motion directory (default <out>/motions)")
    p = sub.add_parser("fit", parents=[shared],
                       help="estimate fragility curves")
    p.add_argument("--records", help="demand-records CSV")
    p = sub.add_parser("bootstrap", parents=[shared],
                       help="bootstrap fragility uncertainty")
    p.add_argument("--records", help="demand-records CSV")
    sub.add_parser("pipeline", parents=[shared],
                   help="all stages in sequence")
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "generate":
            result = cmd_generate(cfg)
            print(f"wrote {result['n_motions']} motions to {result['motions_dir']}")
        elif args.command == "simulate":
            if args.motions:
                cfg.motions_dir = args.motions
            result = cmd_simulate(cfg, units=args.units)
            print(f"wrote {result['n_ok']} demand records "
                  f"({result['n_failed']} analyses failed)")
        elif args.command == "fit":
            result = cmd_fit(cfg, records_csv=args.records, plot=args.plot)
            print(f"wrote {len(result['outputs'])} fragility outputs")
        elif args.command == "bootstrap":
            result = cmd_bootstrap(cfg, records_csv=args.records, plot=args.plot)
            print(f"wrote {len(result['outputs'])} bootstrap outputs")
        elif args.command == "pipeline":
            result = cmd_pipeline(cfg, plot=args.plot)
            print(f"pipeline complete in {cfg.out_dir}")
        for warning in result.get("warnings", []):
            print(f"warning: {warning}", file=sys.stderr)
    except SeisfragError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
