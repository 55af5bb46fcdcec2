"""ztbench command line.

Exit codes: 0 success, 1 failed check (stats-check), 2 usage/config/data error,
3 I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

from . import __version__, report, stats
from .config import RunConfig, config_to_dict, load_config
from .harness import (DEFAULT_GRID, compare_empirical, compare_engines, monte_carlo,
                      run_empirical, run_engines, sensitivity_ofat)
from .scenarios import DatasetError, calibration_summary, generate_dataset, write_dataset
from .trust import ConfigError

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _need_file(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"{what} not found: {path}")
    return path


def _config(args) -> RunConfig:
    if args.config is not None:
        _need_file(args.config, "config file")
    over = {}
    for flag, key in (("runs", "runs"), ("events", "events_per_run"), ("seed", "base_seed")):
        if getattr(args, flag, None) is not None:
            over[key] = getattr(args, flag)
    return load_config(args.config, **over)


def _out_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _manifest(out_dir: str, command: str, cfg: Optional[RunConfig], files: Sequence[str],
              extra: Optional[dict] = None) -> None:
    m = {
        "schema_version": "1",
        "tool": "ztbench",
        "version": __version__,
        "command": command,
        "config": config_to_dict(cfg) if cfg is not None else None,
        "seeds": [cfg.seed_for(i) for i in range(cfg.runs)] if cfg is not None else [],
        "files": {os.path.basename(f): _sha256(f) for f in files},
    }
    if extra:
        m.update(extra)
    report.write_json(os.path.join(out_dir, "manifest.json"), m)


# --- subcommands ------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _config(args)
    cfg = replace(cfg, runs=max(cfg.runs, args.run_index + 1))
    res = run_engines(cfg, args.run_index)
    out = {"schema_version": "1", "run_index": args.run_index,
           "seed": cfg.seed_for(args.run_index),
           "metrics": {e: m.to_dict() for e, (m, _) in res.items()}}
    text = report.dumps(out)
    if args.out_dir:
        d = _out_dir(args.out_dir)
        path = os.path.join(d, "run.json")
        report.write_text(path, text)
        files = [path]
        if args.decision_log:
            for e, (_, log) in res.items():
                p = os.path.join(d, f"decisions_{e}.csv")
                _write_log(p, log)
                files.append(p)
        _manifest(d, "simulate", cfg, files, {"run_index": args.run_index})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _write_log(path: str, log) -> None:
    import csv
    st = log.stream
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_index", "user", "device", "service", "attack", "action", "theta",
                    "fts", "band", "automated", "identity_before", "identity_after", "locked"])
        for i in range(len(st)):
            w.writerow([int(st.time_index[i]), int(st.user[i]), int(st.device[i]),
                        int(st.service[i]), int(st.attack[i]), int(log.action[i]),
                        report.fmt_number(float(log.theta[i])), report.fmt_number(float(log.fts[i])),
                        int(log.band[i]), int(log.automated[i]),
                        report.fmt_number(float(log.identity_before[i])),
                        report.fmt_number(float(log.identity_after[i])), int(log.locked[i])])


def cmd_monte_carlo(args) -> int:
    cfg = _config(args)
    d = _out_dir(args.out_dir)
    rep = monte_carlo(cfg, threads=args.threads)
    agg = rep.to_dict(include_runs=not args.no_runs)
    files = []
    p = os.path.join(d, "aggregate.json")
    report.write_json(p, agg)
    files.append(p)
    p = os.path.join(d, "aggregate.csv")
    report.write_text(p, report.aggregate_csv(agg["summary"]))
    files.append(p)
    if set(cfg.engines) == {"baseline", "securebank"} and cfg.runs >= 3:
        p = os.path.join(d, "stat_tests.json")
        report.write_json(p, compare_engines(rep))
        files.append(p)
    _manifest(d, "monte-carlo", cfg, files)
    if not args.quiet:
        sys.stdout.write(report.render_table(agg) if len(cfg.engines) == 2
                         else report.aggregate_csv(agg["summary"]))
    return EXIT_OK


def _parse_grid(args) -> dict:
    grid: dict = {}
    if args.grid is not None:
        text = args.grid
        if os.path.isfile(text):
            with open(text, encoding="utf-8") as fh:
                text = fh.read()
        try:
            grid = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--grid is not valid JSON: {exc}") from None
        if not isinstance(grid, dict):
            raise UsageError("--grid must be a JSON object of parameter -> value list")
    for spec in args.param or []:
        name, _, values = spec.partition("=")
        try:
            grid[name.strip()] = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"bad --param {spec!r}; expected name=v1,v2,...") from None
    if args.grid is None and not args.param:
        grid = dict(DEFAULT_GRID)
    if not grid:
        raise UsageError("sensitivity grid is empty")
    return grid


def cmd_sensitivity(args) -> int:
    grid = _parse_grid(args)
    cfg = _config(args)
    d = _out_dir(args.out_dir)
    rep = sensitivity_ofat(cfg, grid, threads=args.threads)
    p = os.path.join(d, "sensitivity.json")
    report.write_json(p, rep.to_dict())
    q = os.path.join(d, "sensitivity.csv")
    import csv
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["parameter", "engine", "metric", "cv"])
    for name, per_engine in rep.cv.items():
        for e, per_metric in per_engine.items():
            for k, v in per_metric.items():
                w.writerow([name, e, k, "" if v is None else report.fmt_number(v)])
    report.write_text(q, buf.getvalue())
    _manifest(d, "sensitivity", cfg, [p, q], {"grid": grid})
    if not args.quiet:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    if args.n < 100:
        raise UsageError("--n must be at least 100")
    records = generate_dataset(args.n, args.seed)
    out = args.out
    parent = os.path.dirname(os.path.abspath(out))
    os.makedirs(parent, exist_ok=True)
    write_dataset(records, out)
    s = calibration_summary(records)
    if not args.quiet:
        print(f"wrote {s['records']} records to {out}")
        print(f"fraud: {s['fraud']} ({s['fraud_rate'] * 100:.2f}%)")
        print(f"amount mean: {s['amount_mean']:.2f}  median: {s['amount_median']:.2f}")
        print("scenarios: " + ", ".join(f"{k}={v}" for k, v in s["scenarios"].items()))
    return EXIT_OK


def cmd_empirical(args) -> int:
    _need_file(args.dataset, "dataset")
    cfg = _config(args)
    d = _out_dir(args.out_dir)
    emp = run_empirical(args.dataset, cfg)
    if args.sim:
        _need_file(args.sim, "simulation aggregate")
        with open(args.sim, encoding="utf-8") as fh:
            sim_agg = json.load(fh)
        sim = {e: {k: v["mean"] for k, v in sim_agg["summary"][e].items()}
               for e in sim_agg["engines"]}
    else:
        sim = monte_carlo(cfg, threads=args.threads)
    out = {"schema_version": "1", "dataset": os.path.basename(args.dataset),
           "dataset_sha256": _sha256(args.dataset),
           "metrics": {e: m.to_dict() for e, m in emp.items()},
           "comparison": compare_empirical(sim, emp),
           "self_comparison_r": compare_empirical(emp, emp)["pearson_r"]}
    p = os.path.join(d, "empirical.json")
    report.write_json(p, out)
    _manifest(d, "empirical", cfg, [p])
    if not args.quiet:
        for e, m in emp.items():
            print(f"{e:<11} TII={m.tii:.4f} SAE={m.sae:.4f} ITAL={m.ital:.4f}")
        print(f"Pearson r (simulated vs empirical): {out['comparison']['pearson_r']:.4f}")
    return EXIT_OK


def cmd_stats_check(args) -> int:
    if args.fixtures is not None:
        _need_file(args.fixtures, "fixture file")
    rows = stats.run_fixture_suite(args.fixtures)
    failed = [r for r in rows if not r[2]]
    if not args.quiet:
        for case, check, ok, se, pe in rows:
            print(f"{'PASS' if ok else 'FAIL'}  {case:<14} {check:<13} "
                  f"stat_err={se:.2e} p_err={pe:.2e}")
        print(f"bonferroni threshold (m=3, alpha=0.05): {stats.bonferroni_threshold(3, 0.05):.6f}")
        print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_report(args) -> int:
    agg_path = _need_file(os.path.join(args.bundle, "aggregate.json"), "aggregate.json")
    with open(agg_path, encoding="utf-8") as fh:
        agg = json.load(fh)
    if set(agg.get("engines", [])) != {"baseline", "securebank"}:
        raise UsageError("report needs a bundle with both engines")
    tests = None
    tp = os.path.join(args.bundle, "stat_tests.json")
    if os.path.isfile(tp):
        with open(tp, encoding="utf-8") as fh:
            tests = json.load(fh)
    text = report.render_table(agg, tests)
    if args.out:
        report.write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- parser ------------------------------------------------------------------------------

def _common(p, runs=True):
    p.add_argument("--config", help="JSON config file (sections run/generator/policy/baseline_rules)")
    if runs:
        p.add_argument("--runs", type=int, help="Monte Carlo runs (default 30)")
    p.add_argument("--events", type=int, help="events per run (default 5000)")
    p.add_argument("--seed", type=int, help="base seed; run i uses seed + i (default 42)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ztbench", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ztbench {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one paired run of both engines")
    _common(p, runs=False)
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("--out-dir")
    p.add_argument("--decision-log", action="store_true", help="also write per-event CSV logs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("monte-carlo", help="batch of runs, aggregate tables and tests")
    _common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int, help="worker processes (default ZTBENCH_THREADS or cores)")
    p.add_argument("--no-runs", action="store_true", help="omit per-run metrics from aggregate.json")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_monte_carlo)

    p = sub.add_parser("sensitivity", help="one-factor-at-a-time sweep")
    _common(p)
    p.add_argument("--grid", help="JSON object (or file) mapping parameter -> list of values")
    p.add_argument("--param", action="append", help="name=v1,v2,... (repeatable)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("gen-dataset", help="calibrated synthetic transaction CSV")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("empirical", help="both engines over a transaction CSV")
    _common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--sim", help="aggregate.json to compare against (default: run a fresh batch)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_empirical)

    p = sub.add_parser("stats-check", help="verify the stats module against frozen fixtures")
    p.add_argument("--fixtures", help="alternative fixture JSON")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_stats_check)

    p = sub.add_parser("report", help="render a monte-carlo bundle as a text table")
    p.add_argument("--bundle", required=True, help="directory with aggregate.json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, DatasetError, stats.StatsError) as exc:
        print(f"ztbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"ztbench: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
