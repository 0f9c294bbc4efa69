"""Command-line experiment runner.

    ccbandit presets
    ccbandit validate CONFIG
    ccbandit run CONFIG [--seed N] [--runs N] [--threads N] [--out PATH] [--format csv|json]

CONFIG is a YAML/JSON file or the name of a bundled preset.  Exit codes:
0 success, 2 invalid config, 3 a policy broke the budget contract at run time.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .bounds import BoundReport, bound_ucb_alp
from .config import ConfigError, ExperimentConfig, list_presets, load_config
from .core import BudgetViolation
from .harness import RegretReport, estimate_regret

__all__ = ["COLUMNS", "BOUND_COLUMNS", "ExperimentResult", "run_config", "result_rows", "write_csv", "write_json", "main"]

log = logging.getLogger("ccbandit")

COLUMNS = ("policy", "T", "B", "rho", "runs", "mean_reward", "benchmark", "regret_mean", "regret_ci95", "seed", "checkpoint")
BOUND_COLUMNS = ("rho", "boundary", "threshold", "delta", "delta_prime", "theta_o", "alp_constant", "theta_a", "theta_c")

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 2, 3


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    reports: tuple[RegretReport, ...]
    bounds: tuple[BoundReport, ...]


def run_config(
    config: ExperimentConfig, threads: int = 1, runs: int | None = None, seed: int | None = None
) -> ExperimentResult:
    """Run every (rho, T, policy) combination of a validated config."""
    runs = config.runs if runs is None else runs
    seed = config.seed if seed is None else seed
    reports = []
    for rho in config.rhos:
        for T in config.horizons:
            B = config.budget(rho, T)
            for ps in config.policies:
                log.info("%s rho=%s T=%d runs=%d", ps.label, rho, T, runs)
                reports.append(
                    estimate_regret(
                        config.instance,
                        ps.build(),
                        T,
                        B,
                        runs,
                        master_seed=seed,
                        benchmark=config.benchmark,
                        checkpoints=config.checkpoints_for(T),
                        threads=threads,
                        reward_measure=config.reward_measure,
                        label=ps.label,
                    )
                )
    bounds = tuple(bound_ucb_alp(config.instance, rho) for rho in config.rhos) if config.bounds else ()
    return ExperimentResult(config, tuple(reports), bounds)


def _num(x) -> str:
    """Integers verbatim, everything else with 17 significant digits."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return str(x.numerator)
        x = float(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def result_rows(result: ExperimentResult) -> list[dict]:
    """One row per (policy, rho, T, checkpoint); the checkpoint == T row is the headline result."""
    rows = []
    for rep in result.reports:
        for pt in rep.curve:
            rows.append(
                {
                    "policy": rep.policy,
                    "T": rep.T,
                    "B": rep.B,
                    "rho": rep.rho,
                    "runs": rep.runs,
                    "mean_reward": pt.mean_reward,
                    "benchmark": pt.benchmark,
                    "regret_mean": pt.regret_mean,
                    "regret_ci95": pt.regret_ci95,
                    "seed": rep.seed,
                    "checkpoint": pt.T,
                }
            )
    return rows


def _bound_rows(result: ExperimentResult) -> list[dict]:
    return [{k: getattr(b, k) for k in BOUND_COLUMNS} for b in result.bounds]


def _csv_text(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else _num(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(result: ExperimentResult, out: Path | None) -> None:
    """Regret rows to ``out`` (stdout if None); bound rows to ``<stem>.bounds.csv`` next to it."""
    text = _csv_text(result_rows(result), COLUMNS)
    if out is None:
        sys.stdout.write(text)
        if result.bounds:
            log.warning("bound rows are written only with --out (CSV) or in JSON output")
        return
    out.write_text(text)
    if result.bounds:
        out.with_name(out.stem + ".bounds.csv").write_text(_csv_text(_bound_rows(result), BOUND_COLUMNS))


def _json_value(x):
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else float(x)
    if isinstance(x, float) and math.isnan(x):
        return None
    if isinstance(x, tuple):
        return list(x)
    return x


def write_json(result: ExperimentResult, out: Path | None) -> None:
    doc = {
        "config": result.config.name,
        "columns": list(COLUMNS),
        "rows": [{k: _json_value(v) for k, v in r.items()} for r in result_rows(result)],
        "bounds": [{k: _json_value(v) for k, v in r.items()} for r in _bound_rows(result)],
    }
    text = json.dumps(doc, indent=1) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccbandit", description="Budget-constrained contextual bandit experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("presets", help="list bundled presets")
    v = sub.add_parser("validate", help="parse and check a config without running it")
    v.add_argument("config", help="config file or preset name")
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("config", help="config file or preset name")
    r.add_argument("--seed", type=int, help="override the master seed")
    r.add_argument("--runs", type=int, help="override the run count")
    r.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    r.add_argument("--out", type=Path, help="output file (default: the config's output path, else stdout)")
    r.add_argument("--format", choices=("csv", "json"), help="output format (default: from the config)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "presets":
        for name, desc in list_presets().items():
            print(f"{name}\t{desc}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"ok: {cfg.name} ({len(cfg.policies)} policies, {len(cfg.rhos)} ratios, {len(cfg.horizons)} horizons)")
            return EXIT_OK
        if args.runs is not None and args.runs < 2:
            raise ConfigError("--runs must be >= 2", ("runs",))
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be >= 0", ("seed",))
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", ("threads",))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_config(cfg, threads=args.threads, runs=args.runs, seed=args.seed)
    except BudgetViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    out = args.out or (Path(cfg.output_path) if cfg.output_path else None)
    fmt = args.format or cfg.output_format
    (write_json if fmt == "json" else write_csv)(result, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
