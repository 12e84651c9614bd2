"""Command-line entry point.

Subcommands:
  train          build (and cache) the policy set for an environment
  run            run a batch experiment, writing metrics + summary CSVs
  summarize      recompute and print the summary for an existing metrics file
  serve          start the HTTP session service
  inspect-front  print a trained policy set

Exit codes: 0 success, 2 configuration problem, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .envs import resolve_env
from .errors import ConfigError, MorlAlignError, UnknownIdError
from .harness import (
    ExperimentConfig,
    empty_summary,
    format_summary_table,
    load_experiment_config,
    read_metrics_csv,
    run_experiment_with_audit,
    summarize,
    write_metrics_csv,
    write_summary_csv,
)
from .learning import config_fingerprint, load_or_build_policy_set

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_CACHE_DIR = "policy-cache"


def _parse_override_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # bare strings need no quoting on the command line


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``key.path=value`` overrides to a config dict (values parsed
    as JSON, falling back to plain strings)."""
    for override in overrides:
        if "=" not in override:
            raise ConfigError(f"override {override!r} is not of the form key=value")
        path, raw = override.split("=", 1)
        keys = path.split(".")
        target = data
        for key in keys[:-1]:
            node = target.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {path!r} crosses non-object field {key!r}")
            target = node
        target[keys[-1]] = _parse_override_value(raw)
    return data


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {args.config} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError(f"config file {args.config} must hold a JSON object")
    else:
        data = {}
    data = apply_overrides(data, args.override or [])
    cfg = ExperimentConfig.from_dict(data)
    if getattr(args, "seed", None) is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seeds": [args.seed]})
    return cfg


def cmd_train(args) -> int:
    cfg = _load_config(args)
    spec = resolve_env(cfg.env)
    cache_dir = args.out or DEFAULT_CACHE_DIR
    started = time.monotonic()
    ps = load_or_build_policy_set(spec, cfg.learner, cache_dir)
    elapsed = time.monotonic() - started
    fingerprint = config_fingerprint(spec.id, cfg.learner)
    print(f"env: {spec.id}")
    print(f"config fingerprint: {fingerprint}")
    print(f"cache: {os.path.join(cache_dir, f'{spec.id}-{fingerprint}.json')}")
    print(f"policies: {len(ps.policies)} ({elapsed:.1f}s)")
    for p in ps.policies:
        print(f"  policy {p.policy_id}: return {tuple(p.return_vector)} "
              f"[{p.scalarization} @ {tuple(round(w, 4) for w in p.anchor_weight)}]")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out_dir = args.out or "runs"
    os.makedirs(out_dir, exist_ok=True)
    spec = resolve_env(cfg.env)
    started = time.monotonic()
    policy_set = load_or_build_policy_set(spec, cfg.learner, args.cache_dir)
    rows, audits = run_experiment_with_audit(cfg, policy_set=policy_set)
    elapsed = time.monotonic() - started

    metrics_path = os.path.join(out_dir, "metrics.csv")
    write_metrics_csv(rows, metrics_path)
    summary = summarize(rows) if rows else empty_summary(cfg)
    summary_path = os.path.join(out_dir, "summary.csv")
    write_summary_csv(summary, summary_path)
    audit_dir = os.path.join(out_dir, "audit")
    os.makedirs(audit_dir, exist_ok=True)
    for run_id, jsonl in sorted(audits.items()):
        with open(os.path.join(audit_dir, f"{run_id}.jsonl"), "w") as fh:
            fh.write(jsonl)
    with open(os.path.join(out_dir, "run-meta.json"), "w") as fh:
        json.dump(
            {"config": cfg.to_dict(), "rows": len(rows), "elapsed_seconds": elapsed},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")

    print(f"wrote {len(rows)} rows to {metrics_path}")
    print(format_summary_table(summary), end="")
    return EXIT_OK


def cmd_summarize(args) -> int:
    if args.out is None:
        raise ConfigError("summarize needs --out pointing at a run directory")
    metrics_path = os.path.join(args.out, "metrics.csv")
    if not os.path.exists(metrics_path):
        raise ConfigError(f"no metrics file at {metrics_path}")
    rows = read_metrics_csv(metrics_path)
    if not rows:
        raise ConfigError(f"{metrics_path} holds no rows; nothing to summarize")
    summary = summarize(rows)
    write_summary_csv(summary, os.path.join(args.out, "summary.csv"))
    print(format_summary_table(summary), end="")
    return EXIT_OK


def cmd_inspect_front(args) -> int:
    cfg = _load_config(args)
    spec = resolve_env(cfg.env)
    cache_dir = args.cache_dir
    fingerprint = config_fingerprint(spec.id, cfg.learner)
    cache_path = os.path.join(cache_dir, f"{spec.id}-{fingerprint}.json")
    if not os.path.exists(cache_path):
        raise ConfigError(
            f"no cached policy set at {cache_path}; run `train` first"
        )
    ps = load_or_build_policy_set(spec, cfg.learner, cache_dir)
    print(f"env: {spec.id} ({', '.join(spec.objective_names)})")
    print(f"policies: {len(ps.policies)}; front order: {list(ps.front_order)}")
    print(f"utopia: {tuple(ps.utopia())}")
    for p in ps.policies:
        print(f"  policy {p.policy_id}: return {tuple(p.return_vector)} "
              f"[{p.scalarization} @ {tuple(round(w, 4) for w in p.anchor_weight)}]")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = _load_config(args)
    app = create_app(
        learner=cfg.learner,
        cache_dir=args.cache_dir,
        static_dir=args.static_dir,
    )
    uvicorn.run(app, host=args.addr, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morl-align",
        description="Adaptive preference alignment over multi-objective policy fronts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cache=False):
        p.add_argument("--config", help="experiment config JSON file")
        p.add_argument("--seed", type=int, help="replace the config's seed list with this one seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="override a config field by dot path (repeatable)")
        if cache:
            p.add_argument("--cache-dir", default=DEFAULT_CACHE_DIR,
                           help="policy-set cache directory")

    p_train = sub.add_parser("train", help="build and cache the policy set")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_run = sub.add_parser("run", help="run a batch experiment")
    common(p_run, cache=True)
    p_run.set_defaults(func=cmd_run)

    p_sum = sub.add_parser("summarize", help="summarize an existing metrics file")
    common(p_sum)
    p_sum.set_defaults(func=cmd_summarize)

    p_front = sub.add_parser("inspect-front", help="print a cached policy set")
    common(p_front, cache=True)
    p_front.set_defaults(func=cmd_inspect_front)

    p_serve = sub.add_parser("serve", help="start the HTTP session service")
    common(p_serve, cache=True)
    p_serve.add_argument("--addr", default="127.0.0.1", help="bind address")
    p_serve.add_argument("--port", type=int, default=8000, help="bind port")
    p_serve.add_argument("--static-dir", help="directory of UI files to serve at /")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, ConfigError, UnknownIdError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MorlAlignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 -- the CLI boundary reports, not raises
        print(f"unexpected failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
