"""Batch command-line front end.

Commands:
    run          execute a JSON config and write CSV/metadata outputs
    preset       execute a named benchmark preset, with key=value overrides
    convergence  rerun a config across resolutions and report observed orders
    compare      run several schemes on identical data and join diagnostics

Exit codes: 0 success, 2 configuration/usage error, 3 solver failure
(including partially failed comparisons).  KSFV_THREADS caps how many
comparison runs execute in parallel.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, config_echo, parse_config, parse_config_dict
from .harness import run_compare, run_convergence
from .output import write_run_outputs
from .presets import PRESETS, preset_config
from .simulation import run
from .solver import PseudoTimeDidNotConverge, StepFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _apply_override(doc: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = path.split(".")
    node = doc
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            node[key] = {}
        node = node[key]
    node[keys[-1]] = value


def _parse_resolutions(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"--resolutions expects comma-separated integers, got {text!r}") from None
    if len(values) < 2:
        raise ConfigError("--resolutions needs at least two values")
    return values


def _cmd_run(args: argparse.Namespace) -> int:
    config = parse_config(Path(args.config).read_text())
    result = run(config)
    out = write_run_outputs(args.out, result, config_echo(config))
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_preset(args: argparse.Namespace) -> int:
    try:
        doc = preset_config(args.name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    for assignment in args.set or []:
        _apply_override(doc, assignment)
    config = parse_config_dict(doc)
    result = run(config)
    out = write_run_outputs(args.out, result, config_echo(config))
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_convergence(args: argparse.Namespace) -> int:
    doc = json.loads(Path(args.config).read_text())
    resolutions = _parse_resolutions(args.resolutions)
    try:
        rows = run_convergence(doc, resolutions)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"{'cells':>8} {'error':>14} {'order':>8}")
    lines = [["cells", "error", "observed_order"]]
    for row in rows:
        order = "" if row.observed_order is None else f"{row.observed_order:.3f}"
        print(f"{row.cells:>8} {row.error:>14.6e} {order:>8}")
        lines.append([str(row.cells), repr(row.error), order])
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "convergence.csv", "w") as fh:
            fh.write("\n".join(",".join(line) for line in lines) + "\n")
        print(f"wrote {out / 'convergence.csv'}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    doc = json.loads(Path(args.config).read_text())
    schemes = [tok.strip() for tok in args.schemes.split(",") if tok.strip()]
    try:
        report = run_compare(doc, schemes, seed=args.seed, out_dir=args.out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for scheme, path in report.succeeded.items():
        print(f"{scheme}: {path}")
    for scheme, message in report.failed.items():
        print(f"{scheme}: FAILED ({message})", file=sys.stderr)
    if report.joint_csv:
        print(f"joint diagnostics: {report.joint_csv}")
    return EXIT_SOLVER if report.failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ksfv",
        description="Structure-preserving finite-volume runs for chemotaxis and Fokker-Planck problems",
    )
    parser.add_argument("--version", action="version", version=f"ksfv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a JSON configuration")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(fn=_cmd_run)

    p_preset = sub.add_parser("preset", help="run a named preset")
    p_preset.add_argument("name", choices=sorted(PRESETS), help="preset name")
    p_preset.add_argument("--set", action="append", metavar="KEY=VALUE",
                          help="override a config entry (dotted keys, JSON values)")
    p_preset.add_argument("--out", required=True, help="output directory")
    p_preset.set_defaults(fn=_cmd_preset)

    p_conv = sub.add_parser("convergence", help="grid-refinement study")
    p_conv.add_argument("--config", required=True, help="path to the JSON config")
    p_conv.add_argument("--resolutions", required=True, help="comma-separated cell counts")
    p_conv.add_argument("--out", help="optional directory for convergence.csv")
    p_conv.set_defaults(fn=_cmd_convergence)

    p_cmp = sub.add_parser("compare", help="run several schemes on identical data")
    p_cmp.add_argument("--config", required=True, help="path to the JSON config")
    p_cmp.add_argument("--schemes", required=True, help="comma-separated scheme names")
    p_cmp.add_argument("--seed", type=int, default=0, help="shared noise seed")
    p_cmp.add_argument("--out", required=True, help="output directory")
    p_cmp.set_defaults(fn=_cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"configuration error: invalid JSON ({exc})", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailure, PseudoTimeDidNotConverge) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
