"""Command-line entry point (``likert-resp``).

Exit codes: 0 success, 1 completed with analysis warnings, 2 input errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .analysis import (
    compare_groups,
    group_curves,
    load_inputs,
    metadata,
    run_metrics,
    select_top_raters,
    validate,
)
from .config import RunConfig, load_run_config
from .pipeline import METRICS
from .ratings_model import DataWarning, GroupKey, InputError, export_binary, export_ratings
from .reference import CROWD, GUIDELINE
from .report import SCHEMA_VERSION, curves_csv, curves_svg, dumps, slug, write_csv_report, write_json
from .simulation import PATTERNS, SimulationConfig, crowd_table, directional_checks, generate_world, run_scenarios, trained_reference

EXIT_OK, EXIT_WARN, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("likert_responsiveness")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=default, help="run configuration (JSON)")
    p.add_argument("--seed", type=int, default=default, help="seed for tie-breaks and resampling (u64)")
    p.add_argument("--out", type=Path, default=default, help="output directory")
    p.add_argument("--workers", type=int, default=default, help="worker threads (results do not depend on it)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="likert-resp",
        description="Responsiveness of ordinal ratings to a binary severity reference.",
        parents=[_global_flags(False)],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    flags = _global_flags(True)

    sub.add_parser("validate", parents=[flags], help="check inputs and group coverage")
    sub.add_parser("metrics", parents=[flags], help="per-group metrics report (JSON + CSV)")

    p = sub.add_parser("compare", parents=[flags], help="permutation test between two groups")
    p.add_argument("--group-a", required=True)
    p.add_argument("--group-b", required=True)
    p.add_argument("--metric", default="hm", choices=METRICS)
    p.add_argument("--reference", choices=(GUIDELINE, CROWD))

    p = sub.add_parser("curves", parents=[flags], help="precision/recall/Y_so/Y_d curves as CSV and SVG")
    p.add_argument("--group", required=True)
    p.add_argument("--reference", choices=(GUIDELINE, CROWD))

    p = sub.add_parser("simulate", parents=[flags], help="synthetic scenario study")
    p.add_argument("--bootstrap-trials", type=int, default=100)

    p = sub.add_parser("select-raters", parents=[flags], help="most responsive raters within each group")
    p.add_argument("-n", "--per-group", type=int, required=True)
    p.add_argument("--reference", choices=(GUIDELINE, CROWD), default=CROWD)
    return parser


def _fail(message: str, *, path=None, line=None) -> int:
    print(json.dumps({"error": {"message": message, "path": path, "line": line}}), file=sys.stderr)
    return EXIT_INPUT


def _run_config(args) -> RunConfig:
    if args.config is None:
        raise InputError("--config is required for this command")
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args, cfg: RunConfig | None) -> Path:
    out = args.out or (cfg.out if cfg is not None else Path("out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _reference(args, cfg: RunConfig) -> str:
    if args.reference:
        return args.reference
    return cfg.reference_kinds[0]


def cmd_validate(args) -> int:
    cfg = _run_config(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DataWarning)
        inputs = load_inputs(cfg)
    diag, warns = validate(cfg, inputs)
    diag["warnings"] = [str(w.message) for w in caught] + warns
    sys.stdout.write(dumps(diag))
    return EXIT_WARN if diag["warnings"] else EXIT_OK


def cmd_metrics(args) -> int:
    cfg = _run_config(args)
    inputs = load_inputs(cfg)
    report, warns = run_metrics(cfg, inputs, workers=args.workers or 1)
    out = _out_dir(args, cfg)
    write_json(report, out / "report.json")
    write_csv_report(report["rows"], out / "report.csv")
    for w in warns:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {out / 'report.json'} and {out / 'report.csv'} ({len(report['rows'])} rows)")
    return EXIT_WARN if warns else EXIT_OK


def cmd_compare(args) -> int:
    cfg = _run_config(args)
    inputs = load_inputs(cfg)
    kind = _reference(args, cfg)
    res = compare_groups(cfg, inputs, GroupKey.parse(args.group_a), GroupKey.parse(args.group_b), kind, args.metric)
    out = _out_dir(args, cfg)
    write_json({"schema_version": SCHEMA_VERSION, "metadata": metadata(cfg), "comparisons": [res]}, out / "compare.json")
    sys.stdout.write(dumps(res))
    if res["note"]:
        print(f"warning: {res['note']}", file=sys.stderr)
        return EXIT_WARN
    return EXIT_OK


def cmd_curves(args) -> int:
    cfg = _run_config(args)
    inputs = load_inputs(cfg)
    kind = _reference(args, cfg)
    key = GroupKey.parse(args.group)
    try:
        by_boundary = group_curves(cfg, inputs, key, kind)
    except ValueError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        return EXIT_WARN
    out = _out_dir(args, cfg)
    for t, curves in by_boundary.items():
        stem = f"curves_{slug(key.label)}_{kind}" + ("" if t is None else f"_t{t}")
        title = f"{key.label} ({kind}" + ("" if t is None else f", t={t}") + ")"
        (out / f"{stem}.csv").write_text(curves_csv(curves), encoding="utf-8")
        (out / f"{stem}.svg").write_text(curves_svg(curves, title), encoding="utf-8")
        print(f"wrote {out / stem}.csv/.svg")
    return EXIT_OK


def _simulation_config(args) -> SimulationConfig:
    data = {}
    if args.config is not None:
        if not args.config.exists():
            raise InputError("config file not found", path=str(args.config))
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc.msg}", path=str(args.config), line=exc.lineno) from None
        data = raw.get("simulation", raw) if "simulation" in raw or "ratings" not in raw else {}
    if args.seed is not None:
        data = {**data, "seed": args.seed}
    try:
        return SimulationConfig.from_mapping(data)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc), path=None if args.config is None else str(args.config)) from None


def cmd_simulate(args) -> int:
    cfg = _simulation_config(args)
    out = args.out or Path("out")
    out.mkdir(parents=True, exist_ok=True)
    world = generate_world(cfg)
    for pattern in PATTERNS:
        export_ratings(crowd_table(world, pattern), out / f"ratings_{pattern}.csv")
    export_binary(trained_reference(world), out / "binary.csv")
    res = run_scenarios(cfg, bootstrap_trials=args.bootstrap_trials, workers=args.workers or 1, world=world)
    settings = json.dumps(cfg.as_dict(), sort_keys=True, separators=(",", ":"))
    scenarios = {}
    for p in PATTERNS:
        scenarios[p] = {
            "means": res.means[p],
            "intervals": {m: {"lo": ci.lo, "hi": ci.hi} for m, ci in res.intervals[p].items()},
            "per_rater": [
                {"rater_id": r, **{m: float(v[j]) for m, v in res.per_rater[p].items()}}
                for j, r in enumerate(res.rater_ids)
            ],
        }
    doc = {
        "schema_version": SCHEMA_VERSION,
        "metadata": {
            "tool_version": __version__,
            "config_hash": hashlib.sha256(settings.encode()).hexdigest(),
            "seed": cfg.seed,
            "bootstrap_trials": args.bootstrap_trials,
            "config": cfg.as_dict(),
        },
        "scenarios": scenarios,
        "checks": directional_checks(res.means),
    }
    write_json(doc, out / "scenario_metrics.json")
    print(f"wrote scenario datasets and {out / 'scenario_metrics.json'}")
    return EXIT_OK


def cmd_select_raters(args) -> int:
    cfg = _run_config(args)
    if args.per_group < 1:
        raise InputError("--per-group must be >= 1")
    inputs = load_inputs(cfg)
    report, warns = select_top_raters(cfg, inputs, args.per_group, reference=args.reference, workers=args.workers or 1)
    out = _out_dir(args, cfg)
    write_json(report, out / "select_raters.json")
    for w in warns:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {out / 'select_raters.json'}")
    return EXIT_WARN if warns else EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "metrics": cmd_metrics,
    "compare": cmd_compare,
    "curves": cmd_curves,
    "simulate": cmd_simulate,
    "select-raters": cmd_select_raters,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.workers is not None and args.workers < 1:
        return _fail("--workers must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        return _fail(str(exc), path=exc.path, line=exc.line)
    except (KeyError, ValueError) as exc:
        return _fail(str(exc.args[0]) if exc.args else str(exc))


if __name__ == "__main__":
    sys.exit(main())
