"""Command-line entry point: ``edgesim run|sweep|report|validate-trace``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import ConfigError, load_config
from .core import EdgeSimError
from .harness import SWEEP_AXES, report, run_campaign, sweep
from .mobility import load_trace

EXIT_CONFIG = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgesim", description="Deadline-aware offloading simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a campaign from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, help="override base_seed")
    run.add_argument("--trials", type=int, help="override trials")
    run.add_argument("--out", help="output directory (default: outputs.dir)")

    sw = sub.add_parser("sweep", help="run a campaign at several values of one knob")
    sw.add_argument("--config", required=True)
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--values", required=True, help="comma-separated values, e.g. 1,2,3")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--trials", type=int)
    sw.add_argument("--out")

    rep = sub.add_parser("report", help="print tables for a results directory")
    rep.add_argument("dir")

    vt = sub.add_parser("validate-trace", help="check a mobility trace CSV")
    vt.add_argument("file")
    return p


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials", "must be >= 1")
        cfg = replace(cfg, trials=args.trials)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = _load(args)
            summaries = run_campaign(cfg, args.out)
            out = args.out or cfg.out_dir
            for s in summaries:
                print(f"{s.policy}: completion {s.completion_s.mean:.2f} s, "
                      f"energy {s.total_mAh.mean:.4f} mAh, deadline met {s.deadline_met_rate:.2f}")
            print(f"wrote {out}/trials.csv and {out}/summary.csv")
        elif args.command == "sweep":
            cfg = _load(args)
            values = [v for v in args.values.split(",") if v.strip()]
            sweep(cfg, args.axis, values, args.out)
            out = args.out or cfg.out_dir
            print(report(out), end="")
            print(f"wrote {out}/sweep.csv")
        elif args.command == "report":
            print(report(args.dir), end="")
        elif args.command == "validate-trace":
            trace = load_trace(args.file)
            devs = trace.devices()
            print(f"{args.file}: {len(trace.states)} rows, {len(devs)} devices, "
                  f"{max(len(trace.series(d)) for d in devs) if devs else 0} slots")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except EdgeSimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
