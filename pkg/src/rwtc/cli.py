"""Command-line front end: check, explain, generate, search, stats.

Exit status is the machine contract for ``check``: 0 when the configuration
type-checks, 1 when it does not, 2 for usage, I/O or parse errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from rwtc.checker import check_config
from rwtc.expr import ExprError
from rwtc.ingest import SiteFileError, merge_configs, parse_site_file, serialize_config
from rwtc.model import REFERENCE_ENV, EnvError, Environment, load_env
from rwtc.schema import (
    ConfigSchema,
    SchemaError,
    UnknownFieldError,
    bundled_hadoop_schema,
    explain_field,
    load_schema,
)
from rwtc.search import (
    GridError,
    MockProfiler,
    build_grid,
    compute_savings,
    run_search,
    sample_candidates,
)

SCHEMA_ENV_VAR = "RWTC_SCHEMA"


class ExitCode:
    PASS = 0
    TYPE_ERROR = 1
    USAGE = 2


class UsageError(Exception):
    pass


def _load_schema(spec: Optional[str]) -> ConfigSchema:
    spec = spec or os.environ.get(SCHEMA_ENV_VAR) or "bundled"
    if spec == "bundled":
        return bundled_hadoop_schema()
    return load_schema(spec)


def _load_env(path: Optional[str]) -> Environment:
    return REFERENCE_ENV if path is None else load_env(path)


def _parse_overrides(items: Sequence[str]) -> dict[str, list[str]]:
    out = {}
    for item in items or ():
        name, sep, values = item.partition("=")
        if not sep or not name:
            raise UsageError(f"--set expects FIELD=v1,v2,..., got {item!r}")
        out[name.strip()] = [v.strip() for v in values.split(",")]
    return out


def _parse_profiler(spec: str) -> MockProfiler:
    kind, _, arg = spec.partition(":")
    if kind != "mock":
        raise UsageError(f"unsupported profiler {spec!r}; only mock:<seed> is available")
    try:
        seed = int(arg) if arg else 0
    except ValueError:
        raise UsageError(f"bad mock profiler seed {arg!r}") from None
    return MockProfiler(seed)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    schema = _load_schema(args.schema)
    env = _load_env(args.env)
    files = [parse_site_file(p) for p in args.files]
    raw, warnings = merge_configs(files)
    identity = ",".join(args.files)
    report = check_config(schema, raw, env, identity=identity, warnings=warnings)
    if args.format == "machine":
        print(report.to_json(with_timing=False))
    else:
        sys.stdout.write(report.to_text())
    return ExitCode.PASS if report.passed else ExitCode.TYPE_ERROR


def cmd_explain(args) -> int:
    schema = _load_schema(args.schema)
    info = explain_field(schema, args.field)
    if args.format == "machine":
        print(json.dumps(info.__dict__, indent=2, default=list))
    else:
        sys.stdout.write(info.to_text())
    return ExitCode.PASS


def cmd_generate(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    schema = _load_schema(args.schema)
    env = _load_env(args.env)
    grid = build_grid(schema, _parse_overrides(args.set), args.seed, args.count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = valid = 0
    for i, cand in enumerate(sample_candidates(grid)):
        passed = check_config(schema, cand, env).passed
        valid += passed
        if (args.valid_only and not passed) or (args.invalid_only and passed):
            continue
        (out / f"candidate-{i:05d}.xml").write_text(serialize_config(cand), encoding="utf-8")
        written += 1
    print(f"sampled: {args.count}")
    print(f"valid: {valid}")
    print(f"invalid: {args.count - valid}")
    print(f"written: {written}")
    return ExitCode.PASS


def cmd_search(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    schema = _load_schema(args.schema)
    env = _load_env(args.env)
    profiler = _parse_profiler(args.profiler)
    grid = build_grid(schema, _parse_overrides(args.set), args.seed, args.count)
    stats = run_search(schema, env, grid, profiler, args.runs, check_cost_s=args.check_cost)
    # measured check time is wall-clock; keep stdout reproducible
    modeled = args.check_cost is not None
    summary = stats.to_text(with_timing=modeled)
    sys.stdout.write(summary)
    if not modeled:
        timing = stats.summary_lines(with_timing=True)[-3:]
        sys.stderr.write("\n".join(timing) + "\n")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.txt").write_text(summary, encoding="utf-8")
        if stats.best_config is not None:
            (out / "best-site.xml").write_text(stats.best_site_xml(), encoding="utf-8")
    return ExitCode.PASS


def _fmt_num(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return f"{x:.6f}".rstrip("0")


def cmd_stats(args) -> int:
    try:
        saved, frac = compute_savings(
            args.total, args.invalid, args.profile_time, args.runs, args.check_total
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.format == "machine":
        print(json.dumps({"saved_s": saved, "saved_fraction": frac}))
    else:
        print(f"saved_s: {_fmt_num(saved)}")
        print(f"saved_fraction: {frac:.4f}")
    return ExitCode.PASS


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _number(text: str) -> float:
    v = float(text)
    return int(v) if v.is_integer() and "." not in text else v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwtc",
        description="Real-world type checking and filter-then-profile search for configurations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, env=True):
        p.add_argument(
            "--schema",
            help=f"manifest path or 'bundled' (default: ${SCHEMA_ENV_VAR} or bundled)",
        )
        if env:
            p.add_argument("--env", help="environment descriptor file (default: reference env)")

    p = sub.add_parser("check", help="type-check layered site files")
    common(p)
    p.add_argument("files", nargs="+", help="site files, later ones override earlier ones")
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("explain", help="show a field's real-world type and metadata")
    common(p, env=False)
    p.add_argument("field")
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("generate", help="write sampled candidate site files")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--set", action="append", metavar="FIELD=V1,V2", help="override a field's candidates")
    only = p.add_mutually_exclusive_group()
    only.add_argument("--valid-only", action="store_true")
    only.add_argument("--invalid-only", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("search", help="filter sampled candidates and profile the valid ones")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--profiler", default="mock:0", help="mock:<seed>")
    p.add_argument("--check-cost", type=float, help="model each check as this many seconds")
    p.add_argument("--set", action="append", metavar="FIELD=V1,V2", help="override a field's candidates")
    p.add_argument("--out", help="directory for summary.txt and best-site.xml")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("stats", help="time saved by filtering before profiling")
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--invalid", type=int, required=True)
    p.add_argument("--profile-time", type=_number, required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--check-total", type=_number, required=True)
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UnknownFieldError, UsageError, OSError, SiteFileError, SchemaError, EnvError, GridError, ExprError) as exc:
        print(f"rwtc: error: {exc}", file=sys.stderr)
    return ExitCode.USAGE


if __name__ == "__main__":
    sys.exit(main())
