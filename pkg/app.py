"""
TLB Hierarchy Simulator: command-line entry point.

Verbs:
  run              simulate one trace through one hierarchy and emit the report
  sweep            run the config's named variants on the identical trace
  gen-trace        write a synthetic trace file
  presets          print the five reference configurations with their reach
  compare-presets  run all five presets on one trace (MPKI, CPI, speedup)

Exit status is 0 on success, 2 on a configuration error, and 1 on any
other simulator or I/O failure.

Examples:
  python app.py presets
  python app.py run --preset IV --generator uniform_random \\
      --param working_set_pages=4096 --param length=100000
  python app.py sweep --config apps/config/examples/sweep_l2_ways.json --jobs 3
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import yaml

from core.config import RunConfig, config_from_dict
from core.errors import ConfigError, SimulatorError
from core.helpers import load_structured_file
from core.presets import get_presets
from core.runner import compare_presets, run, sweep
from core.stats import ReportFormat, emit_frame, emit_report
from core.trace import GENERATORS, generate, trace_spec_from_dict, write_trace

logger = logging.getLogger("tlbsim")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


# -------------------------------------------------------------------------------------------------
# Argument handling
# -------------------------------------------------------------------------------------------------


def _parse_params(pairs: Optional[Sequence[str]]) -> Dict[str, Any]:
    params: Dict[str, Any] = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigError("--param", f"expected key=value, got {pair!r}")
        params[key.strip()] = yaml.safe_load(value)
    return params


def _build_config(args: argparse.Namespace) -> RunConfig:
    """
    Merge the config file (if any) with command-line flags. Flags win over
    the file; a config file's relative trace path stays relative to the file.
    """
    raw: Dict[str, Any] = {}
    base_dir: Optional[str] = None
    if getattr(args, "config", None):
        loaded = load_structured_file(args.config)
        if not isinstance(loaded, dict):
            raise ConfigError(args.config, "expected a JSON object at the top level")
        raw = loaded
        base_dir = os.path.dirname(os.path.abspath(args.config))

    if getattr(args, "preset", None):
        raw["preset"] = args.preset
    if not raw.get("preset") and "itlb" not in raw:
        raise ConfigError("config", "give --config or --preset")
    if getattr(args, "trace", None):
        raw["trace"] = os.path.abspath(args.trace)
    if getattr(args, "generator", None):
        raw["trace"] = {"generator": args.generator, **_parse_params(args.param)}
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed

    output = dict(raw.get("output") or {})
    if getattr(args, "out", None):
        output["path"] = args.out
    if getattr(args, "format", None):
        output["format"] = args.format
    if output:
        raw["output"] = output
    return config_from_dict(raw, base_dir=base_dir)


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info("wrote %s", path)
    else:
        sys.stdout.write(text)


# -------------------------------------------------------------------------------------------------
# Verbs
# -------------------------------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args)
    report = run(config)
    if not config.output_path:
        sys.stdout.write(emit_report(report, config.output_format))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _build_config(args)
    frame = sweep(config, jobs=args.jobs)
    _emit(emit_frame(frame, config.output_format), config.output_path)
    return 0


def cmd_compare_presets(args: argparse.Namespace) -> int:
    if not getattr(args, "preset", None) and not args.config:
        args.preset = "I"  # placeholder hierarchy; every preset is run anyway
    config = _build_config(args)
    frame = compare_presets(config, jobs=args.jobs)
    _emit(emit_frame(frame, config.output_format), config.output_path)
    return 0


def cmd_gen_trace(args: argparse.Namespace) -> int:
    spec = trace_spec_from_dict(
        {"generator": args.generator, **_parse_params(args.param)},
        default_seed=args.seed if args.seed is not None else 1,
    )
    write_trace(args.out, generate(spec))
    return 0


def cmd_presets(args: argparse.Namespace) -> int:
    table = get_presets().table()
    if args.format:
        _emit(emit_frame(table, args.format), args.out)
    else:
        _emit(table.to_string(index=False) + "\n", args.out)
    return 0


# -------------------------------------------------------------------------------------------------
# Parser
# -------------------------------------------------------------------------------------------------


def _add_run_flags(parser: argparse.ArgumentParser, *, jobs: bool = False) -> None:
    parser.add_argument("--config", help="JSON (or YAML) run config")
    parser.add_argument("--preset", choices=["I", "II", "III", "IV", "V"], help="reference hierarchy")
    parser.add_argument("--trace", help="trace file (plain or .gz)")
    parser.add_argument("--generator", choices=sorted(GENERATORS), help="synthetic trace generator")
    parser.add_argument("--param", action="append", metavar="KEY=VALUE", help="generator parameter (repeatable)")
    parser.add_argument("--seed", type=int, help="seed for random policies and generators")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--format", choices=[f.value for f in ReportFormat], help="json or csv")
    if jobs:
        parser.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="app.py",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging level (default: WARNING)",
    )
    verbs = parser.add_subparsers(dest="verb", required=True)

    p = verbs.add_parser("run", help="simulate one trace")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = verbs.add_parser("sweep", help="compare the config's variants on one trace")
    _add_run_flags(p, jobs=True)
    p.set_defaults(func=cmd_sweep)

    p = verbs.add_parser("compare-presets", help="run all five presets on one trace")
    _add_run_flags(p, jobs=True)
    p.set_defaults(func=cmd_compare_presets)

    p = verbs.add_parser("gen-trace", help="write a synthetic trace file")
    p.add_argument("--generator", required=True, choices=sorted(GENERATORS))
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="trace file to write (.gz compresses)")
    p.set_defaults(func=cmd_gen_trace)

    p = verbs.add_parser("presets", help="print the reference configurations")
    p.add_argument("--format", choices=[f.value for f in ReportFormat])
    p.add_argument("--out")
    p.set_defaults(func=cmd_presets)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimulatorError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
