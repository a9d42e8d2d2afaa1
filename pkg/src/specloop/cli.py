"""Command-line front end.

Subcommands:

- ``run-sequential``: adaptive campaign with the parametric scorer
- ``run-static``: uniform-exposure baseline run
- ``run-gp``: adaptive campaign with the Gaussian-process scorer
- ``analyze``: aggregate per-run metrics from finished run directories
- ``presets``: list the built-in problem presets

Every run directory receives config.json, dataset.csv, rounds.jsonl,
per-round acquisition CSVs, metrics.json and a manifest.  All randomness
derives from the single ``--seed``; with ``--trials N`` each trial gets a
named sub-seed, and independent trials run in parallel up to the
``SPECLOOP_THREADS`` cap.

Exit codes: 0 success, 2 usage/configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .campaign import CampaignError, StrategySpec, run_sequential, run_static
from .evalmetrics import evaluate_history, summarize_metrics
from .presets import (
    PRESET_NAMES,
    default_static_exposure,
    preset_config,
    preset_description,
)
from .rng import subseed
from .runio import (
    atomic_write_text,
    read_config,
    read_metrics,
    write_manifest,
    write_run_dir,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


def _max_workers() -> int:
    cap = os.environ.get("SPECLOOP_THREADS")
    if cap:
        try:
            return max(1, int(cap))
        except ValueError as exc:
            raise UsageError(f"SPECLOOP_THREADS must be an integer, got {cap!r}") from exc
    return os.cpu_count() or 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specloop",
        description="Sequential experimental design for photon-counting spectra",
    )
    parser.add_argument("--version", action="version", version=f"specloop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run(name, help_text, static=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="path to a campaign config JSON")
        p.add_argument("--preset", choices=PRESET_NAMES, help="built-in preset name")
        p.add_argument("--seed", type=int, help="root seed (overrides config)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--trials", type=int, default=1,
                       help="number of independent trials (default 1)")
        p.add_argument("--force", action="store_true",
                       help="allow writing into a non-empty output directory")
        if static:
            p.add_argument("--t-static", type=float, default=None,
                           help="uniform exposure per point (default: preset value)")
        return p

    add_run("run-sequential", "run an adaptive campaign with the parametric scorer")
    add_run("run-static", "run the uniform-exposure baseline", static=True)
    add_run("run-gp", "run an adaptive campaign with the GP scorer")

    p = sub.add_parser("analyze", help="aggregate metrics over finished run directories")
    p.add_argument("run_dirs", nargs="+", help="run directories with metrics.json")
    p.add_argument("--out", required=True, help="output directory for the summary")
    p.add_argument("--trials", type=int, default=None,
                   help="expected number of runs (checked when given)")
    p.add_argument("--force", action="store_true",
                   help="allow writing into a non-empty output directory")

    sub.add_parser("presets", help="list built-in problem presets")
    return parser


def _resolve_config(args, command):
    if bool(args.config) == bool(args.preset):
        raise UsageError("exactly one of --config or --preset is required")
    if args.preset:
        config = preset_config(args.preset, seed=args.seed if args.seed is not None else 0)
    else:
        try:
            config = read_config(args.config)
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            raise UsageError(f"unreadable config {args.config}: {exc}") from exc
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if command == "run-static":
        t_static = args.t_static
        if t_static is None and args.preset:
            t_static = default_static_exposure(args.preset)
        if t_static is None:
            if config.strategy.kind == "static":
                t_static = config.strategy.t_static
            else:
                raise UsageError("run-static needs --t-static or a static config")
        config = replace(config, strategy=StrategySpec(kind="static", t_static=t_static))
    elif command == "run-gp":
        config = replace(config, strategy=StrategySpec(kind="gp"))
    else:
        config = replace(config, strategy=StrategySpec(kind="parametric"))
    return config


def _prepare_out_dir(path, force: bool) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not force:
        raise UsageError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_one_trial(config_json: dict, seed: int, out_dir: str, command: str) -> dict:
    """Execute a single campaign and persist its run directory."""
    from .campaign import CampaignConfig  # local import keeps workers lean

    config = replace(CampaignConfig.from_json(config_json), seed=seed)
    start = time.monotonic()
    history = run_static(config) if command == "run-static" else run_sequential(config)
    metrics = evaluate_history(history)
    write_run_dir(out_dir, history, metrics)
    return {
        "out": str(out_dir),
        "seed": seed,
        "t_sum": history.t_sum,
        "duration_seconds": time.monotonic() - start,
    }


def _cmd_run(args, command: str) -> int:
    config = _resolve_config(args, command)
    out = _prepare_out_dir(args.out, args.force)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    started = time.monotonic()
    config_json = config.to_json()
    if args.trials == 1:
        jobs = [(config_json, config.seed, str(out), command)]
    else:
        jobs = [
            (
                config_json,
                subseed(config.seed, "trial", i),
                str(out / f"trial_{i:03d}"),
                command,
            )
            for i in range(args.trials)
        ]
    workers = min(_max_workers(), len(jobs))
    try:
        if workers <= 1 or len(jobs) == 1:
            results = [_run_one_trial(*job) for job in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_one_trial_star, jobs))
    except CampaignError as exc:
        # Preserve whatever the failed campaign measured before aborting.
        write_run_dir(out / "partial", exc.history, None)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    manifest = {
        "command": command,
        "config": args.config or f"preset:{args.preset}",
        "out": str(out),
        "seed": config.seed,
        "trials": args.trials,
        "artifact_version": __version__,
        "duration_seconds": time.monotonic() - started,
        "runs": results,
    }
    write_manifest(out, manifest)
    print(f"{command}: {len(results)} run(s) -> {out} (T_sum = {results[0]['t_sum']:g})")
    return EXIT_OK


def _run_one_trial_star(job):
    return _run_one_trial(*job)


def _cmd_analyze(args) -> int:
    out = _prepare_out_dir(args.out, args.force)
    try:
        metrics = [read_metrics(d) for d in args.run_dirs]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot read run metrics: {exc}") from exc
    if args.trials is not None and len(metrics) != args.trials:
        raise UsageError(f"expected {args.trials} runs, found {len(metrics)}")
    summary = summarize_metrics(metrics)
    atomic_write_text(
        out / "metrics.json",
        json.dumps(summary.to_json(), sort_keys=True, indent=2) + "\n",
    )
    write_manifest(
        out,
        {
            "command": "analyze",
            "config": None,
            "out": str(out),
            "seed": None,
            "runs": list(args.run_dirs),
            "artifact_version": __version__,
            "duration_seconds": 0.0,
        },
    )
    n_params = len(summary.w_values)
    print(f"analyze: {len(metrics)} runs, {n_params} parameters -> {out / 'metrics.json'}")
    return EXIT_OK


def _cmd_presets() -> int:
    for name in PRESET_NAMES:
        print(f"{name:18s} {preset_description(name)}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        if args.command == "presets":
            return _cmd_presets()
        if args.command == "analyze":
            return _cmd_analyze(args)
        return _cmd_run(args, args.command)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
