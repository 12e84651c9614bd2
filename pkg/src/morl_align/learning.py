"""Offline construction of a fixed set of Pareto-optimal policies.

A policy set is built by sweeping a grid of scalarization weights and
running tabular Q-learning once per weight. Two scalarizations are swept:

* linear (w . r) -- finds every policy on the convex hull of the front;
* weighted Chebyshev distance to an adaptive utopia point -- also
  reaches front policies that sit in concave regions, which no linear
  weight can select.

Duplicate greedy outcomes are merged and the survivors Pareto-filtered,
so the result is a clean approximate front with one anchor weight per
policy. Everything is seeded and deterministic.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import envs
from .errors import ConfigError, EmptySetError, UnknownIdError
from .preferences import pareto_filter


@dataclass(frozen=True)
class LearnerConfig:
    """Knobs for the weight sweep; defaults match the reference setup."""

    weight_grid_resolution: int | None = None  # None: 21 for 2 objectives, else 11
    episodes_per_weight: int = 5000
    learning_rate: float = 0.1
    epsilon_start: float = 0.2
    epsilon_final: float = 0.01
    seed: int = 0

    def resolution_for(self, num_objectives: int) -> int:
        if self.weight_grid_resolution is not None:
            return self.weight_grid_resolution
        return 21 if num_objectives == 2 else 11

    def to_dict(self) -> dict:
        return {
            "weight_grid_resolution": self.weight_grid_resolution,
            "episodes_per_weight": self.episodes_per_weight,
            "learning_rate": self.learning_rate,
            "epsilon_start": self.epsilon_start,
            "epsilon_final": self.epsilon_final,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(data: dict) -> "LearnerConfig":
        known = {f: data[f] for f in LearnerConfig.__dataclass_fields__ if f in data}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown learner config fields: {sorted(unknown)}")
        return LearnerConfig(**known)


def weight_grid(num_objectives: int, resolution: int) -> list[tuple[float, ...]]:
    """Evenly spaced simplex weights. For two objectives this is
    ``resolution`` points including both vertices; in general it is the
    lattice with ``resolution - 1`` divisions per axis."""
    if num_objectives < 1 or resolution < 2:
        raise ConfigError(f"bad weight grid: m={num_objectives}, resolution={resolution}")
    divisions = resolution - 1
    grid: list[tuple[float, ...]] = []

    def build(prefix: list[int], remaining: int, slots: int) -> None:
        if slots == 1:
            grid.append(tuple((p / divisions) for p in prefix + [remaining]))
            return
        for take in range(remaining + 1):
            build(prefix + [take], remaining - take, slots - 1)

    build([], divisions, num_objectives)
    return grid


class _IndexedDynamics:
    """Transition/reward tables over the states reachable from the start.

    Index -1 stands for "terminal"; everything else is a row into the
    tables. Built once per environment and shared by every training run.
    """

    def __init__(self, spec: envs.MomdpSpec):
        self.spec = spec
        states: list[envs.EnvState] = []
        index: dict[str, int] = {}
        frontier = [spec.initial_state()]
        index[frontier[0].key()] = 0
        states.append(frontier[0])
        while frontier:
            state = frontier.pop()
            for action in spec.actions:
                nxt, _, terminal = envs.step(spec, state, action)
                if terminal:
                    continue
                if nxt.key() not in index:
                    index[nxt.key()] = len(states)
                    states.append(nxt)
                    frontier.append(nxt)
        self.states = states
        self.index = index
        num_a = len(spec.actions)
        self.next_state = [[0] * num_a for _ in states]
        self.rewards = [[None] * num_a for _ in states]
        self.terminal = [[False] * num_a for _ in states]
        for s, state in enumerate(states):
            for a, action in enumerate(spec.actions):
                nxt, reward, terminal = envs.step(spec, state, action)
                self.next_state[s][a] = -1 if terminal else index[nxt.key()]
                self.rewards[s][a] = reward
                self.terminal[s][a] = terminal

    def greedy_policy(self, q: list[list[float]]) -> dict[str, str]:
        policy = {}
        for s, state in enumerate(self.states):
            row = q[s]
            best = 0
            for a in range(1, len(row)):
                if row[a] > row[best]:
                    best = a
            policy[state.key()] = self.spec.actions[best]
        return policy


@dataclass(frozen=True)
class LearnedPolicy:
    """One greedy policy extracted after a scalarized training run."""

    policy_id: int
    anchor_weight: tuple[float, ...]
    scalarization: str  # "linear" | "chebyshev"
    return_vector: tuple[float, ...]
    action_map: dict[str, str]

    def to_dict(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "anchor_weight": list(self.anchor_weight),
            "scalarization": self.scalarization,
            "return_vector": list(self.return_vector),
            "action_map": {k: self.action_map[k] for k in sorted(self.action_map)},
        }


@dataclass(frozen=True)
class TrainingRun:
    """Record of a single sweep entry, kept for inspection."""

    run_index: int
    weight: tuple[float, ...]
    scalarization: str
    return_vector: tuple[float, ...]
    kept: bool


@dataclass(frozen=True)
class PolicySet:
    """The deduplicated, Pareto-filtered outcome of a weight sweep."""

    env: envs.MomdpSpec
    config: LearnerConfig
    policies: tuple[LearnedPolicy, ...]
    runs: tuple[TrainingRun, ...]
    front_order: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.policies)

    def returns(self) -> list[tuple[float, ...]]:
        return [p.return_vector for p in self.policies]

    def objective_ranges(self) -> tuple[float, ...]:
        """Per-objective span (max - min) across the front returns."""
        rets = self.returns()
        return tuple(
            max(r[i] for r in rets) - min(r[i] for r in rets)
            for i in range(self.env.num_objectives)
        )

    def utopia(self) -> tuple[float, ...]:
        rets = self.returns()
        return tuple(max(r[i] for r in rets) for i in range(self.env.num_objectives))

    def get(self, policy_id: int) -> LearnedPolicy:
        for p in self.policies:
            if p.policy_id == policy_id:
                return p
        raise UnknownIdError(f"no policy with id {policy_id} in set for {self.env.id!r}")

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "env": self.env.to_dict(),
            "config": self.config.to_dict(),
            "policies": [p.to_dict() for p in self.policies],
            "runs": [
                {
                    "run_index": r.run_index,
                    "weight": list(r.weight),
                    "scalarization": r.scalarization,
                    "return_vector": list(r.return_vector),
                    "kept": r.kept,
                }
                for r in self.runs
            ],
            "front_order": list(self.front_order),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _env_from_dict(data: dict) -> envs.MomdpSpec:
    return envs.MomdpSpec(
        id=data["id"],
        kind=data["kind"],
        width=data["width"],
        height=data["height"],
        start=tuple(data["start"]),
        horizon=data["horizon"],
        actions=tuple(data["actions"]),
        objective_names=tuple(data["objective_names"]),
        discount=data["discount"],
        treasures=tuple(envs.Treasure(tuple(t["cell"]), t["value"]) for t in data["treasures"]),
        dirt_cells=tuple(tuple(c) for c in data["dirt_cells"]),
        human_cell=tuple(data["human_cell"]) if data["human_cell"] is not None else None,
    )


def policy_set_from_json(text: str) -> PolicySet:
    data = json.loads(text)
    if data.get("format_version") != 1:
        raise ConfigError(f"unsupported policy set format {data.get('format_version')!r}")
    return PolicySet(
        env=_env_from_dict(data["env"]),
        config=LearnerConfig.from_dict(data["config"]),
        policies=tuple(
            LearnedPolicy(
                policy_id=p["policy_id"],
                anchor_weight=tuple(p["anchor_weight"]),
                scalarization=p["scalarization"],
                return_vector=tuple(p["return_vector"]),
                action_map=dict(p["action_map"]),
            )
            for p in data["policies"]
        ),
        runs=tuple(
            TrainingRun(r["run_index"], tuple(r["weight"]), r["scalarization"], tuple(r["return_vector"]), r["kept"])
            for r in data["runs"]
        ),
        front_order=tuple(data["front_order"]),
    )


def _epsilon_schedule(config: LearnerConfig) -> list[float]:
    n = config.episodes_per_weight
    if n == 1:
        return [config.epsilon_start]
    span = config.epsilon_final - config.epsilon_start
    return [config.epsilon_start + span * k / (n - 1) for k in range(n)]


def _train_linear(dyn: _IndexedDynamics, weights: tuple[float, ...], config: LearnerConfig,
                  rng: np.random.Generator) -> dict[str, str]:
    spec = dyn.spec
    num_a = len(spec.actions)
    scalar_r = [
        [sum(w * r for w, r in zip(weights, dyn.rewards[s][a])) for a in range(num_a)]
        for s in range(len(dyn.states))
    ]
    q = [[0.0] * num_a for _ in dyn.states]
    lr = config.learning_rate
    gamma = spec.discount
    num_s = len(dyn.states)
    for eps in _epsilon_schedule(config):
        # Exploring starts: long paths stay reachable even once the
        # greedy policy terminates early.
        s = int(rng.integers(num_s))
        for _ in range(spec.horizon):
            if rng.random() < eps:
                a = int(rng.integers(num_a))
            else:
                row = q[s]
                a = 0
                for i in range(1, num_a):
                    if row[i] > row[a]:
                        a = i
            target = scalar_r[s][a]
            ns = dyn.next_state[s][a]
            if ns >= 0:
                target += gamma * max(q[ns])
            q[s][a] += lr * (target - q[s][a])
            if ns < 0:
                break
            s = ns
    return dyn.greedy_policy(q)


def _cheby_best_action(qv_row: list[list[float]], weights: tuple[float, ...], ref: list[float]) -> int:
    """Action minimizing the weighted Chebyshev distance of its value
    estimate to the reference point (ties to the lowest index)."""
    best, best_d = 0, None
    for a, vec in enumerate(qv_row):
        d = max(w * (z - v) for w, z, v in zip(weights, ref, vec))
        if best_d is None or d < best_d:
            best, best_d = a, d
    return best


def _train_chebyshev(dyn: _IndexedDynamics, weights: tuple[float, ...], config: LearnerConfig,
                     rng: np.random.Generator) -> dict[str, str]:
    """Vector Q-learning with Chebyshev-scalarized action selection.

    The reference point adapts to the best per-objective episode return
    seen so far, plus a unit margin so gaps stay positive.
    """
    spec = dyn.spec
    num_a = len(spec.actions)
    m = spec.num_objectives
    qv = [[[0.0] * m for _ in range(num_a)] for _ in dyn.states]
    lr = config.learning_rate
    gamma = spec.discount
    best = [-float("inf")] * m
    ref = [0.0] * m
    have_ref = False
    num_s = len(dyn.states)
    for eps in _epsilon_schedule(config):
        s = int(rng.integers(num_s))
        ep_ret = [0.0] * m
        disc = 1.0
        for _ in range(spec.horizon):
            if not have_ref or rng.random() < eps:
                a = int(rng.integers(num_a))
            else:
                a = _cheby_best_action(qv[s], weights, ref)
            reward = dyn.rewards[s][a]
            ns = dyn.next_state[s][a]
            if ns >= 0 and have_ref:
                na = _cheby_best_action(qv[ns], weights, ref)
                nxt_vec = qv[ns][na]
            elif ns >= 0:
                nxt_vec = qv[ns][0]
            else:
                nxt_vec = None
            row = qv[s][a]
            for i in range(m):
                target = reward[i]
                if nxt_vec is not None:
                    target += gamma * nxt_vec[i]
                row[i] += lr * (target - row[i])
            for i in range(m):
                ep_ret[i] += disc * reward[i]
            disc *= gamma
            if ns < 0:
                break
            s = ns
        for i in range(m):
            if ep_ret[i] > best[i]:
                best[i] = ep_ret[i]
        ref = [b + 1.0 for b in best]
        have_ref = True
    policy = {}
    for s, state in enumerate(dyn.states):
        a = _cheby_best_action(qv[s], weights, ref)
        policy[state.key()] = spec.actions[a]
    return policy


def train_scalarized(spec: envs.MomdpSpec, weights, config: LearnerConfig | None = None,
                     *, scalarization: str = "linear", seed: int | None = None) -> LearnedPolicy:
    """Train one policy for one weight vector and return it with its
    exact return vector (from a deterministic rollout)."""
    config = config or LearnerConfig()
    w = tuple(float(x) for x in weights)
    if len(w) != spec.num_objectives:
        raise ConfigError(f"weight {w} has wrong dimension for {spec.id!r} ({spec.num_objectives} objectives)")
    if scalarization not in ("linear", "chebyshev"):
        raise ConfigError(f"unknown scalarization {scalarization!r}")
    dyn = _IndexedDynamics(spec)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed if seed is None else seed, 0]))
    trainer = _train_linear if scalarization == "linear" else _train_chebyshev
    action_map = trainer(dyn, w, config, rng)
    traj = envs.rollout(spec, action_map)
    return LearnedPolicy(
        policy_id=0,
        anchor_weight=w,
        scalarization=scalarization,
        return_vector=traj.return_vector,
        action_map=action_map,
    )


def build_policy_set(spec: envs.MomdpSpec, config: LearnerConfig | None = None) -> PolicySet:
    """Sweep the weight grid with both scalarizations, dedupe identical
    return vectors (earliest run wins), Pareto-filter, and renumber the
    survivors in ascending objective-0 order."""
    config = config or LearnerConfig()
    grid = weight_grid(spec.num_objectives, config.resolution_for(spec.num_objectives))
    dyn = _IndexedDynamics(spec)

    sweep: list[tuple[tuple[float, ...], str]] = [(w, "linear") for w in grid]
    sweep += [(w, "chebyshev") for w in grid]

    outcomes: list[tuple[tuple[float, ...], dict[str, str]]] = []
    for run_index, (w, scal) in enumerate(sweep):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, run_index]))
        trainer = _train_linear if scal == "linear" else _train_chebyshev
        action_map = trainer(dyn, w, config, rng)
        traj = envs.rollout(spec, action_map)
        outcomes.append((traj.return_vector, action_map))

    first_by_return: dict[tuple[float, ...], int] = {}
    for run_index, (ret, _) in enumerate(outcomes):
        first_by_return.setdefault(ret, run_index)

    unique_returns = list(first_by_return)
    surviving = {unique_returns[i] for i in pareto_filter(unique_returns)}

    kept_runs = sorted(first_by_return[ret] for ret in surviving)
    runs = tuple(
        TrainingRun(
            run_index=i,
            weight=sweep[i][0],
            scalarization=sweep[i][1],
            return_vector=outcomes[i][0],
            kept=i in kept_runs,
        )
        for i in range(len(sweep))
    )

    ordered = sorted(kept_runs, key=lambda i: outcomes[i][0])
    policies = tuple(
        LearnedPolicy(
            policy_id=pid,
            anchor_weight=sweep[i][0],
            scalarization=sweep[i][1],
            return_vector=outcomes[i][0],
            action_map=outcomes[i][1],
        )
        for pid, i in enumerate(ordered)
    )
    if not policies:
        raise EmptySetError(f"weight sweep produced no policies for {spec.id!r}")
    front_order = tuple(sorted(range(len(policies)), key=lambda i: policies[i].return_vector))
    return PolicySet(env=spec, config=config, policies=policies, runs=runs, front_order=front_order)


def config_fingerprint(env_id: str, config: LearnerConfig) -> str:
    payload = json.dumps({"env": env_id, "config": config.to_dict()}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def save_policy_set(ps: PolicySet, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(ps.to_json())


def load_policy_set(path: str) -> PolicySet:
    with open(path) as fh:
        return policy_set_from_json(fh.read())


def load_or_build_policy_set(spec: envs.MomdpSpec, config: LearnerConfig | None = None,
                             cache_dir: str | None = None) -> PolicySet:
    """Build the policy set, using ``cache_dir`` as a read/write cache
    keyed by environment id and config fingerprint."""
    config = config or LearnerConfig()
    if cache_dir is None:
        return build_policy_set(spec, config)
    path = os.path.join(cache_dir, f"{spec.id}-{config_fingerprint(spec.id, config)}.json")
    if os.path.exists(path):
        return load_policy_set(path)
    ps = build_policy_set(spec, config)
    save_policy_set(ps, path)
    return ps
