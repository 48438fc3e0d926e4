"""Command-line entry point.

Exit codes: 0 on success, 2 on configuration or usage errors, 1 on any other
failure.  ``HIRESIM_WORKERS`` overrides the worker count.
"""

from __future__ import annotations

import argparse
import logging
import sys

from hiresim import persist, presets
from hiresim.engine import run_batch
from hiresim.model import ConfigError

log = logging.getLogger("hiresim")

EXIT_OK, EXIT_FAULT, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hiresim", description="Monte Carlo hiring-market simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one policy on a configured market")
    s.add_argument("--config", required=True, help="JSON config file")
    s.add_argument("--policy", help="decision rule, e.g. LF, UCB, Hybrid:0.5, RooneyThenLF:100")
    s.add_argument("--subsidy", help="subsidy rule: none, ucb_index, hybrid_index, cost_saving")
    s.add_argument("--runs", type=_positive_int, default=100)
    s.add_argument("--workers", type=_positive_int)
    s.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("preset", help="run a named figure preset")
    r.add_argument("--name", required=True, choices=presets.PRESET_NAMES, metavar="NAME")
    r.add_argument("--runs", type=_positive_int, help="runs per arm (default: the preset's own)")
    r.add_argument("--scale", type=_positive_float, default=1.0, help="multiply the run count")
    r.add_argument("--workers", type=_positive_int)
    r.add_argument("--out", required=True)

    v = sub.add_parser("validate", help="check a config and print it fully resolved")
    v.add_argument("--config", required=True)
    return p


def _simulate(args) -> int:
    started = persist._now()
    cfg, sel = persist.parse_config(args.config)
    policy = args.policy or sel.policy or "LF"
    subsidy = args.subsidy or (sel.subsidy if args.policy is None else None) or "none"
    persist.check_selection(cfg, policy, subsidy)
    log.info("simulate %s/%s, %d runs", policy, subsidy, args.runs)
    stats = run_batch(cfg, policy, subsidy, args.runs, args.workers)
    bundle = persist.simulate_bundle(cfg, policy, subsidy, stats, started)
    for path in persist.emit_results(bundle, args.out):
        log.info("wrote %s", path)
    return EXIT_OK


def _preset(args) -> int:
    started = persist._now()
    p = presets.preset(args.name)
    R = presets.scaled_runs(args.runs or p.R, args.scale)
    result = presets.run_preset(p, R, args.workers, progress=log.info)
    for path in persist.emit_results(persist.preset_bundle(result, started), args.out):
        log.info("wrote %s", path)
    return EXIT_OK


def _validate(args) -> int:
    cfg, sel = persist.parse_config(args.config)
    sys.stdout.write(persist.serialize_config(cfg, sel))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    handler = {"simulate": _simulate, "preset": _preset, "validate": _validate}[args.command]
    try:
        return handler(args)
    except ConfigError as e:
        print(f"hiresim: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_FAULT
    except Exception as e:  # noqa: BLE001 - every other fault maps to exit 1
        print(f"hiresim: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAULT


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
