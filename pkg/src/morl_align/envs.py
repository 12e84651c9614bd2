"""Deterministic grid MOMDPs with vector rewards.

Two concrete environments are provided:

* ``treasure_grid`` -- a 4x5 descent grid where deeper columns hide more
  valuable treasure, trading treasure value against time spent.
* ``chore_grid`` -- a 5x5 cleaning task with three objectives: dirt
  cleaned, disruption caused near a human, and energy spent moving.

Both are finite-horizon, deterministic, and small enough to enumerate,
which the test suite leans on heavily.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .errors import DimensionMismatchError, InvalidActionError, PolicyUndefinedError, UnknownIdError

Cell = tuple[int, int]  # (row, col), row 0 at the top

_MOVES: dict[str, tuple[int, int]] = {
    "up": (-1, 0),
    "down": (1, 0),
    "left": (0, -1),
    "right": (0, 1),
    "stay": (0, 0),
}


@dataclass(frozen=True)
class EnvState:
    """Immutable environment state: agent cell plus remaining dirt (if any)."""

    cell: Cell
    dirt: frozenset[Cell] = frozenset()

    def key(self) -> str:
        """Stable string key used by policies and serialized tables."""
        base = f"{self.cell[0]},{self.cell[1]}"
        if not self.dirt:
            return base
        dirt = ";".join(f"{r},{c}" for r, c in sorted(self.dirt))
        return f"{base}|{dirt}"


@dataclass(frozen=True)
class Treasure:
    cell: Cell
    value: float


@dataclass(frozen=True)
class MomdpSpec:
    """Static description of a grid MOMDP.

    ``kind`` selects the transition/reward semantics in :func:`step`;
    everything else is plain data so specs serialize cleanly.
    """

    id: str
    kind: str  # "treasure" | "chore"
    width: int
    height: int
    start: Cell
    horizon: int
    actions: tuple[str, ...]
    objective_names: tuple[str, ...]
    discount: float = 1.0
    treasures: tuple[Treasure, ...] = ()
    dirt_cells: tuple[Cell, ...] = ()
    human_cell: Cell | None = None

    @property
    def num_objectives(self) -> int:
        return len(self.objective_names)

    def initial_state(self) -> EnvState:
        return EnvState(self.start, frozenset(self.dirt_cells))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "width": self.width,
            "height": self.height,
            "start": list(self.start),
            "horizon": self.horizon,
            "actions": list(self.actions),
            "objective_names": list(self.objective_names),
            "discount": self.discount,
            "treasures": [{"cell": list(t.cell), "value": t.value} for t in self.treasures],
            "dirt_cells": [list(c) for c in self.dirt_cells],
            "human_cell": list(self.human_cell) if self.human_cell is not None else None,
        }


@dataclass(frozen=True)
class Trajectory:
    """One rollout: the visited states, actions taken, per-step vector
    rewards, and the (discounted) return vector."""

    states: tuple[EnvState, ...]
    actions: tuple[str, ...]
    rewards: tuple[tuple[float, ...], ...]
    return_vector: tuple[float, ...]
    terminated: bool

    def to_dict(self) -> dict:
        return {
            "cells": [list(s.cell) for s in self.states],
            "actions": list(self.actions),
            "rewards": [list(r) for r in self.rewards],
            "return_vector": list(self.return_vector),
            "terminated": self.terminated,
        }


def _clamp(cell: Cell, height: int, width: int) -> Cell:
    r, c = cell
    return (min(max(r, 0), height - 1), min(max(c, 0), width - 1))


def _adjacent8(a: Cell, b: Cell) -> bool:
    return a != b and abs(a[0] - b[0]) <= 1 and abs(a[1] - b[1]) <= 1


def step(spec: MomdpSpec, state: EnvState, action: str) -> tuple[EnvState, tuple[float, ...], bool]:
    """Apply ``action`` in ``state``; returns (next_state, reward_vector, terminal).

    Deterministic. Moves that would leave the grid (or, in the chore
    task, enter the human's cell) leave the agent in place but still
    cost what the attempted move costs.
    """
    if action not in spec.actions:
        raise InvalidActionError(f"action {action!r} not in {spec.actions} for env {spec.id!r}")

    if spec.kind == "treasure":
        dr, dc = _MOVES[action]
        nxt = _clamp((state.cell[0] + dr, state.cell[1] + dc), spec.height, spec.width)
        for t in spec.treasures:
            if nxt == t.cell:
                return EnvState(nxt), (t.value, -1.0), True
        return EnvState(nxt), (0.0, -1.0), False

    if spec.kind == "chore":
        if action == "stay":
            if state.cell in state.dirt:
                remaining = state.dirt - {state.cell}
                return EnvState(state.cell, remaining), (1.0, 0.0, 0.0), not remaining
            return state, (0.0, 0.0, 0.0), False
        dr, dc = _MOVES[action]
        target = _clamp((state.cell[0] + dr, state.cell[1] + dc), spec.height, spec.width)
        if target == spec.human_cell:
            target = state.cell
        entered = target != state.cell
        disruption = -1.0 if entered and spec.human_cell is not None and _adjacent8(target, spec.human_cell) else 0.0
        return EnvState(target, state.dirt), (0.0, disruption, -1.0), False

    raise UnknownIdError(f"unknown environment kind {spec.kind!r}")


def rollout(spec: MomdpSpec, policy: dict[str, str]) -> Trajectory:
    """Roll the deterministic policy from the start state to termination
    or the horizon, accumulating the discounted return vector."""
    state = spec.initial_state()
    states = [state]
    actions: list[str] = []
    rewards: list[tuple[float, ...]] = []
    ret = [0.0] * spec.num_objectives
    gamma = 1.0
    terminated = False
    for _ in range(spec.horizon):
        key = state.key()
        if key not in policy:
            raise PolicyUndefinedError(f"policy has no action for state {key!r} in env {spec.id!r}")
        action = policy[key]
        state, reward, terminated = step(spec, state, action)
        if len(reward) != spec.num_objectives:
            raise DimensionMismatchError(
                f"reward has {len(reward)} objectives, spec {spec.id!r} has {spec.num_objectives}"
            )
        states.append(state)
        actions.append(action)
        rewards.append(reward)
        for i, r in enumerate(reward):
            ret[i] += gamma * r
        gamma *= spec.discount
        if terminated:
            break
    return Trajectory(tuple(states), tuple(actions), tuple(rewards), tuple(ret), terminated)


def treasure_grid() -> MomdpSpec:
    """The 4-column descent grid.

    Column k (1-based) holds a treasure at depth k worth 1, 3, 6, 10.
    Every step costs one unit of time; reaching a treasure ends the
    episode. Actions are only ``down`` and ``right``.
    """
    values = (1.0, 3.0, 6.0, 10.0)
    treasures = tuple(Treasure((k + 1, k), values[k]) for k in range(4))
    return MomdpSpec(
        id="treasure_grid",
        kind="treasure",
        width=4,
        height=5,
        start=(0, 0),
        horizon=12,
        actions=("down", "right"),
        objective_names=("treasure", "time"),
        treasures=treasures,
    )


def chore_grid(seed: int = 0) -> MomdpSpec:
    """A 5x5 cleaning grid with four dirt cells and one human cell placed
    by a seeded generator (never on the start cell).

    Objectives: dirt cleaned (+1 per cell, by staying on it), disruption
    (-1 for entering a cell next to the human), energy (-1 per move).
    """
    rng = random.Random(seed)
    cells = [(r, c) for r in range(5) for c in range(5) if (r, c) != (0, 0)]
    placed = rng.sample(cells, 5)
    return MomdpSpec(
        id=f"chore_grid_{seed}",
        kind="chore",
        width=5,
        height=5,
        start=(0, 0),
        horizon=20,
        actions=("up", "down", "left", "right", "stay"),
        objective_names=("dirt", "disruption", "energy"),
        dirt_cells=tuple(sorted(placed[:4])),
        human_cell=placed[4],
    )


def resolve_env(env_id: str) -> MomdpSpec:
    """Map an environment id ("treasure_grid", "chore_grid_<seed>") to its spec."""
    if env_id == "treasure_grid":
        return treasure_grid()
    if env_id.startswith("chore_grid_"):
        tail = env_id[len("chore_grid_"):]
        try:
            return chore_grid(int(tail))
        except ValueError:
            pass
    raise UnknownIdError(f"unknown environment id {env_id!r}")


def spec_to_json(spec: MomdpSpec) -> str:
    return json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":"))
