"""The interactive alignment loop: select, execute, observe a reaction,
reinterpret, re-select — plus multi-user profiles, the population prior,
and an append-only audit log.

Sessions come in two modes. With a simulated user attached, one call to
:meth:`AlignmentSession.run_interaction` performs a full loop turn. In
human mode the turn splits: :meth:`execute_step` rolls the episode out
and waits; :meth:`submit_reaction` consumes the human's scalar reaction
and finishes the turn.
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import simulate
from .envs import Trajectory, rollout
from .errors import ConfigError, PhaseError
from .interpret import (
    BanditState,
    InteractionContext,
    InterpreterConfig,
    InterpreterState,
    ReactionBelief,
    interpret,
)
from .learning import PolicySet
from .preferences import project_to_simplex, uniform_preference
from .selection import SelectionState, apply_update, explain_selection, initial_select

RECORD_SCHEMA_VERSION = 1
_USER_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$")


def _check_user_id(user_id: str) -> str:
    if not _USER_ID_RE.match(user_id):
        raise ConfigError(f"bad user id {user_id!r} (letters, digits, . _ -, max 64)")
    return user_id


@dataclass
class UserProfile:
    """Per-user adaptive state that survives user switches."""

    user_id: str
    xi: tuple[float, ...]
    preferred_policy_id: int
    belief: ReactionBelief
    interaction_count: int = 0
    bandit: BanditState | None = None
    last_zeta_hat: float | None = None

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "xi": list(self.xi),
            "preferred_policy_id": self.preferred_policy_id,
            "belief": self.belief.to_dict(),
            "interaction_count": self.interaction_count,
            "bandit": self.bandit.to_dict() if self.bandit is not None else None,
            "last_zeta_hat": self.last_zeta_hat,
        }

    @staticmethod
    def from_dict(data: dict) -> "UserProfile":
        return UserProfile(
            user_id=data["user_id"],
            xi=tuple(data["xi"]),
            preferred_policy_id=data["preferred_policy_id"],
            belief=ReactionBelief.from_dict(data["belief"]),
            interaction_count=data["interaction_count"],
            bandit=BanditState.from_dict(data["bandit"]) if data["bandit"] is not None else None,
            last_zeta_hat=data["last_zeta_hat"],
        )


@dataclass(frozen=True)
class PopulationPrior:
    """Arithmetic mean of each user's latest preference estimate.

    Re-contribution replaces the user's earlier entry, so long-lived
    users never dominate the average.
    """

    num_objectives: int
    contributions: dict[str, tuple[float, ...]] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.contributions)

    def mean(self) -> tuple[float, ...]:
        if not self.contributions:
            return uniform_preference(self.num_objectives).weights
        m = self.num_objectives
        sums = [0.0] * m
        for xi in self.contributions.values():
            for i in range(m):
                sums[i] += xi[i]
        return project_to_simplex(tuple(s / len(self.contributions) for s in sums))

    def to_dict(self) -> dict:
        return {
            "num_objectives": self.num_objectives,
            "contributions": {k: list(v) for k, v in sorted(self.contributions.items())},
        }

    @staticmethod
    def from_dict(data: dict) -> "PopulationPrior":
        return PopulationPrior(
            num_objectives=data["num_objectives"],
            contributions={k: tuple(v) for k, v in data["contributions"].items()},
        )


def update_population_prior(prior: PopulationPrior, profile: UserProfile) -> PopulationPrior:
    """Fold a profile's latest estimate into the prior (replacing any
    earlier contribution from the same user)."""
    updated = dict(prior.contributions)
    updated[profile.user_id] = profile.xi
    return replace(prior, contributions=updated)


class ProfileStore:
    """Profiles plus the population prior, optionally persisted as one
    JSON file per user under a data directory."""

    def __init__(self, num_objectives: int, directory: str | None = None):
        self.num_objectives = num_objectives
        self.directory = directory
        self._profiles: dict[str, UserProfile] = {}
        self.population = PopulationPrior(num_objectives)
        if directory is not None:
            os.makedirs(os.path.join(directory, "profiles"), exist_ok=True)
            pop_path = os.path.join(directory, "population.json")
            if os.path.exists(pop_path):
                with open(pop_path) as fh:
                    self.population = PopulationPrior.from_dict(json.load(fh))
            for name in sorted(os.listdir(os.path.join(directory, "profiles"))):
                if name.endswith(".json"):
                    with open(os.path.join(directory, "profiles", name)) as fh:
                        profile = UserProfile.from_dict(json.load(fh))
                    self._profiles[profile.user_id] = profile

    def load(self, user_id: str) -> UserProfile | None:
        return self._profiles.get(user_id)

    def save(self, profile: UserProfile) -> None:
        _check_user_id(profile.user_id)
        self._profiles[profile.user_id] = profile
        if profile.interaction_count >= 1:
            # Fresh profiles are stored but don't pull the population
            # average toward the prior they were initialized from.
            self.population = update_population_prior(self.population, profile)
        if self.directory is not None:
            path = os.path.join(self.directory, "profiles", f"{profile.user_id}.json")
            with open(path, "w") as fh:
                json.dump(profile.to_dict(), fh, sort_keys=True, separators=(",", ":"))
            with open(os.path.join(self.directory, "population.json"), "w") as fh:
                json.dump(self.population.to_dict(), fh, sort_keys=True, separators=(",", ":"))

    def user_ids(self) -> list[str]:
        return sorted(self._profiles)


class AlignmentSession:
    """One logical thread of the loop for one active user at a time."""

    def __init__(self, policy_set: PolicySet, store: ProfileStore, user_id: str = "user-0",
                 interpreter_config: InterpreterConfig | None = None,
                 selector_kind: str = "argmax", seed: int = 0,
                 simulated_user: simulate.SimulatedUser | None = None,
                 review_every_k: int = 1):
        if review_every_k < 1:
            raise ConfigError(f"review_every_k must be >= 1, got {review_every_k}")
        if store.num_objectives != policy_set.env.num_objectives:
            raise ConfigError("profile store and policy set disagree on objective count")
        _check_user_id(user_id)
        self.policy_set = policy_set
        self.store = store
        self.interpreter_config = interpreter_config or InterpreterConfig()
        self.selector_kind = selector_kind
        self.seed = seed
        self.review_every_k = review_every_k
        self.simulated_user = simulated_user
        self.mode = "simulated-user" if simulated_user is not None else "human-reaction"
        self.records: list[dict] = []
        self.phase = "awaiting-step"
        self._pending: Trajectory | None = None
        self._interpreter_rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
        self.user_id = user_id
        self._load_user(user_id)

    # -- profile plumbing --

    def _load_user(self, user_id: str) -> None:
        profile = self.store.load(user_id)
        if profile is None:
            state = initial_select(self.policy_set, self.store.population.mean(), self.selector_kind)
            profile = UserProfile(
                user_id=user_id,
                xi=state.xi,
                preferred_policy_id=state.policy_id,
                belief=ReactionBelief.with_prior(),
            )
        else:
            state = SelectionState(profile.preferred_policy_id, profile.xi, self.selector_kind)
        self.user_id = user_id
        self.profile = profile
        self.selection = state
        self.interpreter_state = InterpreterState.create(
            self.interpreter_config, self.policy_set.env.num_objectives, self._interpreter_rng
        )
        self.interpreter_state.belief = profile.belief
        if self.interpreter_state.bandit is not None and profile.bandit is not None:
            self.interpreter_state.bandit = profile.bandit

    def _persist_profile(self) -> None:
        self.store.save(self.profile)

    def switch_user(self, user_id: str, simulated_user: simulate.SimulatedUser | None = None) -> UserProfile:
        """Persist the active profile, then load (or create) the target's."""
        _check_user_id(user_id)
        if self.phase == "awaiting-reaction":
            raise PhaseError("cannot switch users while a reaction is pending")
        self._persist_profile()
        if simulated_user is not None:
            self.simulated_user = simulated_user
            self.mode = "simulated-user"
        elif self.simulated_user is not None and self.simulated_user.user_id != user_id:
            # The attached simulated user speaks only for their own id.
            self.simulated_user = None
            self.mode = "human-reaction"
        self._load_user(user_id)
        return self.profile

    # -- the loop --

    def front_returns(self) -> list[tuple[float, ...]]:
        return self.policy_set.returns()

    def current_policy(self):
        return self.policy_set.get(self.selection.policy_id)

    def execute_step(self) -> Trajectory:
        """Execution phase: roll out the current policy."""
        if self.phase != "awaiting-step":
            raise PhaseError(f"execute_step called in phase {self.phase!r}")
        traj = rollout(self.policy_set.env, self.current_policy().action_map)
        self._pending = traj
        self.phase = "awaiting-reaction"
        return traj

    def submit_reaction(self, zeta: float, true_regret: float | None = None) -> dict:
        """Review phase: interpret the reaction, update, re-select, record."""
        if self.phase != "awaiting-reaction":
            raise PhaseError(f"submit_reaction called in phase {self.phase!r}")
        traj = self._pending
        assert traj is not None
        observed = traj.return_vector
        index = len(self.records)
        before = self.selection

        reviewed = (self.profile.interaction_count + 1) % self.review_every_k == 0
        if reviewed:
            ctx = InteractionContext(
                user_id=self.user_id,
                policy_id=before.policy_id,
                observed=observed,
                xi_est=before.xi,
                population_prior_mean=self.store.population.mean(),
                history_len=self.profile.interaction_count,
                last_zeta_hat=self.profile.last_zeta_hat,
            )
            outcome, self.interpreter_state = interpret(ctx, zeta, self.interpreter_state, self.policy_set)
            delta = outcome.delta
            zeta_hat = outcome.zeta_hat
            after = apply_update(before, delta, self.policy_set)
        else:
            delta = (0.0,) * self.policy_set.env.num_objectives
            zeta_hat = None
            after = before

        explanation = explain_selection(before, after, delta, zeta, zeta_hat, index, self.policy_set)
        record = {
            "schema_version": RECORD_SCHEMA_VERSION,
            "index": index,
            "user_id": self.user_id,
            "policy_before": before.policy_id,
            "policy_after": after.policy_id,
            "return_observed": list(observed),
            "zeta": zeta,
            "zeta_hat": zeta_hat,
            "delta": list(delta),
            "xi_before": list(before.xi),
            "xi_after": list(after.xi),
            "true_regret": true_regret,
            "reviewed": reviewed,
            "explanation": explanation,
        }
        self.records.append(record)

        self.selection = after
        self.profile = replace(
            self.profile,
            xi=after.xi,
            preferred_policy_id=after.policy_id,
            belief=self.interpreter_state.belief,
            interaction_count=self.profile.interaction_count + 1,
            bandit=self.interpreter_state.bandit,
            last_zeta_hat=zeta_hat if reviewed else self.profile.last_zeta_hat,
        )
        self._pending = None
        self.phase = "awaiting-step"
        return record

    def run_interaction(self) -> dict:
        """One full loop turn against the attached simulated user."""
        if self.simulated_user is None:
            raise ConfigError("run_interaction needs a simulated user; use execute_step/submit_reaction")
        traj = self.execute_step()
        observed = traj.return_vector
        front = self.front_returns()
        zeta = simulate.react(self.simulated_user, observed, front)
        regret = simulate.true_regret(self.simulated_user, observed, front)
        record = self.submit_reaction(zeta, true_regret=regret)
        if self.simulated_user.drift_rate > 0:
            self.simulated_user = simulate.drift(self.simulated_user)
        return record

    # -- audit --

    def audit_log(self) -> list[dict]:
        return list(self.records)

    def close(self) -> None:
        if self.phase == "closed":
            return
        self._persist_profile()
        self.phase = "closed"


def audit_to_jsonl(records: list[dict]) -> str:
    """Deterministic JSON-lines rendering of an audit log."""
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)
