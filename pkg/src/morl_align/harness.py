"""Batch experiment runner: seeded sweeps over interpreter and selector
variants against simulated users, with per-interaction metrics rows and
recomputable summary tables.

Outputs are plain CSV. Everything in the summary can be recomputed from
the raw rows; nothing is carried as hidden state. Identical config and
seeds produce byte-identical files (wall-clock time goes in a separate
meta file, never in the dataset).
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .envs import resolve_env
from .errors import ConfigError, EmptySetError
from .interpret import InterpreterConfig
from .learning import LearnerConfig, PolicySet, load_or_build_policy_set
from .loop import AlignmentSession, ProfileStore, audit_to_jsonl
from .preferences import LinearUtility
from .simulate import SimulatedUser, user_from_spec

METRICS_COLUMNS = (
    "run_id",
    "seed",
    "interaction",
    "interpreter",
    "selector",
    "true_regret",
    "aligned",
    "xi_error_l1",
    "zeta",
    "policy_id",
)

SUMMARY_COLUMNS = (
    "interpreter",
    "selector",
    "num_seeds",
    "interactions",
    "mean_regret",
    "mean_terminal_regret",
    "median_terminal_regret",
    "terminal_regret_q25",
    "terminal_regret_q75",
    "median_time_to_align",
    "time_to_align_q25",
    "time_to_align_q75",
    "aligned_at_horizon",
)

# Executing any policy whose true utility is within machine noise of the
# best front point counts as aligned.
ALIGNED_EPS = 1e-9


@dataclass(frozen=True)
class MetricsRow:
    run_id: str
    seed: int
    interaction: int
    interpreter: str
    selector: str
    true_regret: float
    aligned: bool
    xi_error_l1: float | None  # None when the user's preference has no Ξ*
    zeta: float
    policy_id: int

    def to_csv_values(self) -> list[str]:
        return [
            self.run_id,
            str(self.seed),
            str(self.interaction),
            self.interpreter,
            self.selector,
            repr(self.true_regret),
            "true" if self.aligned else "false",
            "" if self.xi_error_l1 is None else repr(self.xi_error_l1),
            repr(self.zeta),
            str(self.policy_id),
        ]

    @staticmethod
    def from_csv_values(values: list[str]) -> "MetricsRow":
        return MetricsRow(
            run_id=values[0],
            seed=int(values[1]),
            interaction=int(values[2]),
            interpreter=values[3],
            selector=values[4],
            true_regret=float(values[5]),
            aligned=values[6] == "true",
            xi_error_l1=None if values[7] == "" else float(values[7]),
            zeta=float(values[8]),
            policy_id=int(values[9]),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "treasure_grid"
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    interpreters: tuple[InterpreterConfig, ...] = (InterpreterConfig(),)
    selectors: tuple[str, ...] = ("argmax",)
    users: tuple[dict, ...] = (
        {"user_id": "sim-user", "utility": {"kind": "linear", "weights": [0.7, 0.3]}},
    )
    schedule: tuple[dict, ...] = ()  # [{"at": interaction, "user_id": id}, ...]
    interactions: int = 100
    seeds: tuple[int, ...] = (0,)
    review_every_k: int = 1

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.interpreters:
            raise ConfigError("at least one interpreter config is required")
        if not self.selectors:
            raise ConfigError("at least one selector kind is required")
        if not self.users:
            raise ConfigError("at least one simulated user is required")
        if self.interactions < 0:
            raise ConfigError(f"interactions must be >= 0, got {self.interactions}")
        ids = [u.get("user_id") for u in self.users]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate user ids in population: {ids}")
        for entry in self.schedule:
            unknown = set(entry) - {"at", "user_id"}
            if unknown:
                raise ConfigError(f"unknown schedule fields: {sorted(unknown)}")
            if entry["user_id"] not in ids:
                raise ConfigError(f"schedule references unknown user {entry['user_id']!r}")
            if not 0 <= entry["at"]:
                raise ConfigError(f"schedule 'at' must be >= 0, got {entry['at']}")

    def interpreter_labels(self) -> list[str]:
        kinds = [cfg.kind for cfg in self.interpreters]
        labels = []
        for i, kind in enumerate(kinds):
            labels.append(kind if kinds.count(kind) == 1 else f"{kind}#{i}")
        return labels

    def cells(self) -> list[tuple[str, InterpreterConfig, str]]:
        labels = self.interpreter_labels()
        return [
            (labels[i], cfg, selector)
            for i, cfg in enumerate(self.interpreters)
            for selector in self.selectors
        ]

    def to_dict(self) -> dict:
        return {
            "env": self.env,
            "learner": self.learner.to_dict(),
            "interpreters": [cfg.to_dict() for cfg in self.interpreters],
            "selectors": list(self.selectors),
            "users": [dict(u) for u in self.users],
            "schedule": [dict(s) for s in self.schedule],
            "interactions": self.interactions,
            "seeds": list(self.seeds),
            "review_every_k": self.review_every_k,
        }

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        known = {
            "env", "learner", "interpreters", "selectors", "users",
            "schedule", "interactions", "seeds", "review_every_k",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment config fields: {sorted(unknown)}")
        kwargs: dict = {}
        if "env" in data:
            kwargs["env"] = data["env"]
        if "learner" in data:
            kwargs["learner"] = LearnerConfig.from_dict(data["learner"])
        if "interpreters" in data:
            kwargs["interpreters"] = tuple(
                InterpreterConfig.from_dict(d) for d in data["interpreters"]
            )
        if "selectors" in data:
            kwargs["selectors"] = tuple(data["selectors"])
        if "users" in data:
            kwargs["users"] = tuple(data["users"])
        if "schedule" in data:
            kwargs["schedule"] = tuple(data["schedule"])
        if "interactions" in data:
            kwargs["interactions"] = data["interactions"]
        if "seeds" in data:
            kwargs["seeds"] = tuple(data["seeds"])
        if "review_every_k" in data:
            kwargs["review_every_k"] = data["review_every_k"]
        return ExperimentConfig(**kwargs)


def load_experiment_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return ExperimentConfig.from_dict(data)


def _cell_seed(master_seed: int, pair_index: int) -> int:
    return int(np.random.SeedSequence([master_seed, pair_index]).generate_state(1)[0])


def _make_users(cfg: ExperimentConfig, session_seed: int) -> dict[str, SimulatedUser]:
    users = {}
    for i, spec in enumerate(cfg.users):
        rng = np.random.default_rng(np.random.SeedSequence([session_seed, 1 + i]))
        user = user_from_spec(spec, rng=rng)
        users[user.user_id] = user
    return users


def _run_cell(policy_set: PolicySet, cfg: ExperimentConfig, label: str,
              interpreter: InterpreterConfig, selector: str, seed: int,
              pair_index: int) -> tuple[list[MetricsRow], str, str]:
    session_seed = _cell_seed(seed, pair_index)
    users = _make_users(cfg, session_seed)
    order = [u["user_id"] for u in cfg.users]
    switches = {entry["at"]: entry["user_id"] for entry in cfg.schedule}
    run_id = f"{label}+{selector}+s{seed}"
    store = ProfileStore(policy_set.env.num_objectives)
    session = AlignmentSession(
        policy_set,
        store,
        user_id=order[0],
        interpreter_config=interpreter,
        selector_kind=selector,
        seed=session_seed,
        simulated_user=users[order[0]],
        review_every_k=cfg.review_every_k,
    )
    rows = []
    for t in range(cfg.interactions):
        if t in switches and switches[t] != session.user_id:
            # Keep drifted/consumed RNG state for users we return to.
            users[session.user_id] = session.simulated_user
            session.switch_user(switches[t], users[switches[t]])
        active = session.simulated_user
        xi_star = (
            active.utility.weights if isinstance(active.utility, LinearUtility) else None
        )
        record = session.run_interaction()
        xi_error = None
        if xi_star is not None:
            xi_error = float(
                sum(abs(a - b) for a, b in zip(record["xi_after"], xi_star))
            )
        rows.append(
            MetricsRow(
                run_id=run_id,
                seed=seed,
                interaction=t,
                interpreter=label,
                selector=selector,
                true_regret=record["true_regret"],
                aligned=record["true_regret"] <= ALIGNED_EPS,
                xi_error_l1=xi_error,
                zeta=record["zeta"],
                policy_id=record["policy_before"],
            )
        )
    session.close()
    return rows, run_id, audit_to_jsonl(session.audit_log())


def run_experiment_with_audit(
    cfg: ExperimentConfig, policy_set: PolicySet | None = None,
    cache_dir: str | None = None, max_workers: int | None = None,
) -> tuple[list[MetricsRow], dict[str, str]]:
    """Run every (interpreter × selector × seed) cell. Returns the rows
    sorted by cell identity plus each cell's audit log as JSON lines."""
    if policy_set is None:
        spec = resolve_env(cfg.env)
        policy_set = load_or_build_policy_set(spec, cfg.learner, cache_dir)
    cells = cfg.cells()
    jobs = [
        (label, interpreter, selector, seed, pair_index)
        for pair_index, (label, interpreter, selector) in enumerate(cells)
        for seed in cfg.seeds
    ]
    workers = max_workers if max_workers is not None else min(8, max(1, len(jobs)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            pool.map(
                lambda job: _run_cell(policy_set, cfg, job[0], job[1], job[2], job[3], job[4]),
                jobs,
            )
        )
    rows = [row for cell_rows, _, _ in results for row in cell_rows]
    rows.sort(key=lambda r: (r.interpreter, r.selector, r.seed, r.interaction))
    audits = {run_id: jsonl for _, run_id, jsonl in results}
    return rows, audits


def run_experiment(cfg: ExperimentConfig, policy_set: PolicySet | None = None,
                   cache_dir: str | None = None,
                   max_workers: int | None = None) -> list[MetricsRow]:
    """Run every (interpreter × selector × seed) cell and return the rows
    sorted by cell identity, ready for CSV writing."""
    rows, _ = run_experiment_with_audit(cfg, policy_set, cache_dir, max_workers)
    return rows


# -- summaries --


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _quantiles(values: list[float]) -> tuple[float, float, float]:
    arr = np.asarray(values, dtype=float)
    q25, q50, q75 = np.percentile(arr, [25.0, 50.0, 75.0])
    return float(q25), float(q50), float(q75)


def _summarize_cell(rows: list[MetricsRow]) -> dict:
    seeds = sorted({r.seed for r in rows})
    horizon = max(r.interaction for r in rows) + 1
    by_seed = {
        seed: sorted((r for r in rows if r.seed == seed), key=lambda r: r.interaction)
        for seed in seeds
    }
    times = []
    terminal = []
    aligned_at_horizon = 0
    for seed_rows in by_seed.values():
        flags = [r.aligned for r in seed_rows]
        # First interaction from which the run stays aligned; horizon if never.
        t = len(flags)
        for i in range(len(flags) - 1, -1, -1):
            if not flags[i]:
                break
            t = i
        times.append(float(t))
        terminal.append(seed_rows[-1].true_regret)
        if flags[-1]:
            aligned_at_horizon += 1
    tq25, tq50, tq75 = _quantiles(times)
    rq25, rq50, rq75 = _quantiles(terminal)
    return {
        "interpreter": rows[0].interpreter,
        "selector": rows[0].selector,
        "num_seeds": len(seeds),
        "interactions": horizon,
        "mean_regret": float(np.mean([r.true_regret for r in rows])),
        "mean_terminal_regret": float(np.mean(terminal)),
        "median_terminal_regret": rq50,
        "terminal_regret_q25": rq25,
        "terminal_regret_q75": rq75,
        "median_time_to_align": tq50,
        "time_to_align_q25": tq25,
        "time_to_align_q75": tq75,
        "aligned_at_horizon": aligned_at_horizon / len(seeds),
    }


def summarize(rows: list[MetricsRow]) -> list[dict]:
    """Per-cell aggregates (stable column order, derivable from the rows
    alone); raises on an empty dataset."""
    if not rows:
        raise EmptySetError("cannot summarize an empty metrics dataset")
    cells: dict[tuple[str, str], list[MetricsRow]] = {}
    for row in rows:
        cells.setdefault((row.interpreter, row.selector), []).append(row)
    return [_summarize_cell(cells[key]) for key in sorted(cells)]


def empty_summary(cfg: ExperimentConfig) -> list[dict]:
    """Zero-interaction aggregate frame: one row per cell, empty stats."""
    out = []
    for label, _, selector in cfg.cells():
        entry = {col: None for col in SUMMARY_COLUMNS}
        entry.update(
            interpreter=label,
            selector=selector,
            num_seeds=len(cfg.seeds),
            interactions=0,
        )
        out.append(entry)
    return sorted(out, key=lambda e: (e["interpreter"], e["selector"]))


# -- CSV I/O --


def write_metrics_csv(rows: list[MetricsRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(row.to_csv_values())


def read_metrics_csv(path: str) -> list[MetricsRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(METRICS_COLUMNS):
            raise ConfigError(f"{path} is not a metrics CSV (header {header})")
        return [MetricsRow.from_csv_values(values) for values in reader]


def write_summary_csv(summary: list[dict], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for entry in summary:
            writer.writerow([_fmt(entry[col]) for col in SUMMARY_COLUMNS])


def format_summary_table(summary: list[dict]) -> str:
    """Console-friendly fixed-width rendering of a summary."""
    def show(entry, col):
        value = entry[col]
        if value is None:
            return "-"
        if isinstance(value, float):
            return f"{value:.4g}"
        return str(value)

    table = [list(SUMMARY_COLUMNS)] + [
        [show(entry, col) for col in SUMMARY_COLUMNS] for entry in summary
    ]
    widths = [max(len(row[i]) for row in table) for i in range(len(SUMMARY_COLUMNS))]
    out = io.StringIO()
    for i, row in enumerate(table):
        out.write("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        out.write("\n")
        if i == 0:
            out.write("  ".join("-" * w for w in widths).rstrip() + "\n")
    return out.getvalue()


def single_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, seeds=(seed,))
