"""Turning raw scalar reactions into preference updates.

Three interpreter kinds share one state container:

* ``explicit-eq1`` -- standardize the reaction against a conjugate
  Normal-Inverse-Gamma belief, then apply the component-wise update
  delta_i = alpha_i * zhat * (observed_i - ideal_i) - tau_i.
* ``contextual-bandit`` -- learn which preference nudge to emit from a
  discretized interaction context, with one-step delayed credit (the
  next standardized reaction rewards the previous nudge).
* ``random-baseline`` -- uniformly random nudges; the evaluation control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatchError, EmptySetError, MorlAlignError
from .learning import PolicySet
from .preferences import LinearUtility, utility_argmax

INTERPRETER_KINDS = ("explicit-eq1", "contextual-bandit", "random-baseline")
IDEAL_MODES = ("utopia", "front-max-under-estimate")
TAU_MODES = ("literal", "deadzone")


@dataclass(frozen=True)
class ReactionBelief:
    """Conjugate Normal-Inverse-Gamma belief over the user's raw reaction
    distribution. ``mu0..b0`` are the prior; ``mu..b`` the posterior."""

    mu0: float = 0.0
    kappa0: float = 1.0
    a0: float = 2.0
    b0: float = 1.0
    mu: float = 0.0
    kappa: float = 1.0
    a: float = 2.0
    b: float = 1.0
    count: int = 0

    def __post_init__(self) -> None:
        if self.kappa <= 0 or self.a <= 0 or self.b <= 0 or self.count < 0:
            raise MorlAlignError(f"invalid belief hyperparameters {self}")

    def predictive_scale(self) -> float:
        return math.sqrt(self.b * (self.kappa + 1.0) / (self.a * self.kappa))

    def to_dict(self) -> dict:
        return {
            "mu0": self.mu0, "kappa0": self.kappa0, "a0": self.a0, "b0": self.b0,
            "mu": self.mu, "kappa": self.kappa, "a": self.a, "b": self.b,
            "count": self.count,
        }

    @staticmethod
    def from_dict(data: dict) -> "ReactionBelief":
        return ReactionBelief(**{k: data[k] for k in ("mu0", "kappa0", "a0", "b0", "mu", "kappa", "a", "b", "count")})

    @staticmethod
    def with_prior(mu0: float = 0.0, kappa0: float = 1.0, a0: float = 2.0, b0: float = 1.0) -> "ReactionBelief":
        return ReactionBelief(mu0=mu0, kappa0=kappa0, a0=a0, b0=b0, mu=mu0, kappa=kappa0, a=a0, b=b0)


def standardize(belief: ReactionBelief, zeta: float) -> tuple[float, ReactionBelief]:
    """Standardize against the *current* posterior predictive scale, then
    fold the observation into the belief."""
    if not math.isfinite(zeta):
        raise MorlAlignError(f"non-finite reaction {zeta}")
    zhat = (zeta - belief.mu) / belief.predictive_scale()
    kappa_n = belief.kappa + 1.0
    mu_n = (belief.kappa * belief.mu + zeta) / kappa_n
    a_n = belief.a + 0.5
    b_n = belief.b + belief.kappa * (zeta - belief.mu) ** 2 / (2.0 * kappa_n)
    updated = replace(belief, mu=mu_n, kappa=kappa_n, a=a_n, b=b_n, count=belief.count + 1)
    return zhat, updated


def eq1_delta(zeta_hat: float, observed: Sequence[float], ideal: Sequence[float],
              alpha: Sequence[float], tau: Sequence[float], tau_mode: str = "literal") -> tuple[float, ...]:
    """The component-wise preference update.

    ``literal`` subtracts tau exactly as written; ``deadzone`` reads tau
    as an activation threshold (soft-threshold toward zero).
    """
    if not (len(observed) == len(ideal) == len(alpha) == len(tau)):
        raise DimensionMismatchError(
            f"mismatched lengths: observed {len(observed)}, ideal {len(ideal)}, alpha {len(alpha)}, tau {len(tau)}"
        )
    if tau_mode not in TAU_MODES:
        raise ConfigError(f"unknown tau_mode {tau_mode!r}")
    out = []
    for a_i, t_i, o_i, d_i in zip(alpha, tau, observed, ideal):
        raw = a_i * zeta_hat * (o_i - d_i)
        if tau_mode == "literal":
            out.append(raw - t_i)
        else:
            if abs(raw) <= t_i:
                out.append(0.0)
            else:
                out.append(raw - math.copysign(t_i, raw))
    return tuple(out)


def ideal_returns(policy_set: PolicySet, mode: str, xi_est: Sequence[float]) -> tuple[float, ...]:
    """The reference return Eq. 1 compares against: the component-wise
    utopia point, or the front maximizer under the current estimate."""
    if len(policy_set) == 0:
        raise EmptySetError("ideal_returns over an empty policy set")
    if mode == "utopia":
        return policy_set.utopia()
    if mode == "front-max-under-estimate":
        rets = policy_set.returns()
        idx = utility_argmax(LinearUtility(tuple(float(w) for w in xi_est)), rets)
        return rets[idx]
    raise ConfigError(f"unknown ideal mode {mode!r}")


@dataclass(frozen=True)
class InterpreterConfig:
    """Per-session interpreter settings. ``alpha=None`` scales each
    objective by 0.05 / front range; ``tau=None`` means no thresholds."""

    kind: str = "explicit-eq1"
    alpha: tuple[float, ...] | None = None
    tau: tuple[float, ...] | None = None
    ideal_mode: str = "front-max-under-estimate"
    tau_mode: str = "literal"
    bandit_epsilon: float = 0.1
    bandit_step_size: float = 0.2
    bandit_nudge: float = 0.05

    def __post_init__(self) -> None:
        if self.kind not in INTERPRETER_KINDS:
            raise ConfigError(f"unknown interpreter kind {self.kind!r}")
        if self.ideal_mode not in IDEAL_MODES:
            raise ConfigError(f"unknown ideal_mode {self.ideal_mode!r}")
        if self.tau_mode not in TAU_MODES:
            raise ConfigError(f"unknown tau_mode {self.tau_mode!r}")
        if not (0.0 <= self.bandit_epsilon <= 1.0):
            raise ConfigError(f"bandit_epsilon {self.bandit_epsilon} outside [0,1]")
        for name in ("alpha", "tau"):
            vec = getattr(self, name)
            if vec is not None and any(v < 0 or not math.isfinite(v) for v in vec):
                raise ConfigError(f"{name} must be nonnegative and finite, got {vec}")

    def resolved_alpha(self, policy_set: PolicySet) -> tuple[float, ...]:
        if self.alpha is not None:
            if len(self.alpha) != policy_set.env.num_objectives:
                raise DimensionMismatchError(
                    f"alpha has {len(self.alpha)} entries for {policy_set.env.num_objectives} objectives"
                )
            return self.alpha
        return tuple(0.05 / r if r > 0 else 0.05 for r in policy_set.objective_ranges())

    def resolved_tau(self, num_objectives: int) -> tuple[float, ...]:
        if self.tau is not None:
            if len(self.tau) != num_objectives:
                raise DimensionMismatchError(f"tau has {len(self.tau)} entries for {num_objectives} objectives")
            return self.tau
        return (0.0,) * num_objectives

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": list(self.alpha) if self.alpha is not None else None,
            "tau": list(self.tau) if self.tau is not None else None,
            "ideal_mode": self.ideal_mode,
            "tau_mode": self.tau_mode,
            "bandit_epsilon": self.bandit_epsilon,
            "bandit_step_size": self.bandit_step_size,
            "bandit_nudge": self.bandit_nudge,
        }

    @staticmethod
    def from_dict(data: dict) -> "InterpreterConfig":
        known = set(InterpreterConfig.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown interpreter config fields: {sorted(unknown)}")
        kwargs = dict(data)
        for name in ("alpha", "tau"):
            if kwargs.get(name) is not None:
                kwargs[name] = tuple(float(v) for v in kwargs[name])
        return InterpreterConfig(**kwargs)


@dataclass(frozen=True)
class InteractionContext:
    """Everything the interpreter may condition on for one interaction."""

    user_id: str
    policy_id: int
    observed: tuple[float, ...]
    xi_est: tuple[float, ...]
    population_prior_mean: tuple[float, ...]
    history_len: int
    last_zeta_hat: float | None


@dataclass
class BanditState:
    """Tabular action values over discretized contexts.

    Actions: 0 is no-op; 2i+1 / 2i+2 nudge objective i by +/- delta.
    ``pending`` remembers the last (context, action) awaiting its
    delayed reward.
    """

    num_objectives: int
    epsilon: float = 0.1
    step_size: float = 0.2
    nudge: float = 0.05
    values: dict[str, list[float]] = field(default_factory=dict)
    pending: tuple[str, int] | None = None

    @property
    def num_actions(self) -> int:
        return 2 * self.num_objectives + 1

    def action_delta(self, action: int) -> tuple[float, ...]:
        delta = [0.0] * self.num_objectives
        if action > 0:
            obj, sign = divmod(action - 1, 2)
            delta[obj] = self.nudge if sign == 0 else -self.nudge
        return tuple(delta)

    def context_key(self, ctx: InteractionContext, front_rank: int) -> str:
        bins = ",".join(str(int(math.floor(x / 0.1 + 1e-9))) for x in ctx.xi_est)
        if ctx.last_zeta_hat is None or ctx.last_zeta_hat == 0.0:
            sign = 0
        else:
            sign = 1 if ctx.last_zeta_hat > 0 else -1
        return f"{bins}|{sign}|{front_rank}"

    def to_dict(self) -> dict:
        return {
            "num_objectives": self.num_objectives,
            "epsilon": self.epsilon,
            "step_size": self.step_size,
            "nudge": self.nudge,
            "values": {k: list(v) for k, v in sorted(self.values.items())},
            "pending": list(self.pending) if self.pending is not None else None,
        }

    @staticmethod
    def from_dict(data: dict) -> "BanditState":
        return BanditState(
            num_objectives=data["num_objectives"],
            epsilon=data["epsilon"],
            step_size=data["step_size"],
            nudge=data["nudge"],
            values={k: list(v) for k, v in data["values"].items()},
            pending=(data["pending"][0], data["pending"][1]) if data["pending"] is not None else None,
        )


@dataclass
class InterpreterState:
    """Mutable per-user interpreter state owned by a session."""

    config: InterpreterConfig
    belief: ReactionBelief
    rng: np.random.Generator
    bandit: BanditState | None = None

    @staticmethod
    def create(config: InterpreterConfig, num_objectives: int,
               rng: np.random.Generator) -> "InterpreterState":
        bandit = None
        if config.kind == "contextual-bandit":
            bandit = BanditState(
                num_objectives=num_objectives,
                epsilon=config.bandit_epsilon,
                step_size=config.bandit_step_size,
                nudge=config.bandit_nudge,
            )
        return InterpreterState(config=config, belief=ReactionBelief.with_prior(), rng=rng, bandit=bandit)


@dataclass(frozen=True)
class InterpretOutcome:
    delta: tuple[float, ...]
    zeta_hat: float
    ideal: tuple[float, ...] | None  # None for non-eq1 kinds


def _front_rank(policy_set: PolicySet, policy_id: int) -> int:
    order = list(policy_set.front_order)
    for rank, idx in enumerate(order):
        if policy_set.policies[idx].policy_id == policy_id:
            return rank
    return 0


def interpret(ctx: InteractionContext, zeta: float, state: InterpreterState,
              policy_set: PolicySet) -> tuple[InterpretOutcome, InterpreterState]:
    """One review step: standardize the reaction and produce a preference
    delta according to the configured interpreter kind.

    The returned state is the same object, mutated (belief always; bandit
    values when applicable) -- sessions own their interpreter state.
    """
    cfg = state.config
    zhat, state.belief = standardize(state.belief, zeta)

    if cfg.kind == "explicit-eq1":
        alpha = cfg.resolved_alpha(policy_set)
        tau = cfg.resolved_tau(policy_set.env.num_objectives)
        ideal = ideal_returns(policy_set, cfg.ideal_mode, ctx.xi_est)
        delta = eq1_delta(zhat, ctx.observed, ideal, alpha, tau, cfg.tau_mode)
        return InterpretOutcome(delta, zhat, ideal), state

    if cfg.kind == "contextual-bandit":
        bandit = state.bandit
        if bandit is None:
            raise ConfigError("bandit interpreter state missing its bandit table")
        if bandit.pending is not None:
            key, action = bandit.pending
            row = bandit.values[key]
            row[action] += bandit.step_size * (zhat - row[action])
        key = bandit.context_key(ctx, _front_rank(policy_set, ctx.policy_id))
        row = bandit.values.setdefault(key, [0.0] * bandit.num_actions)
        if state.rng.random() < bandit.epsilon:
            action = int(state.rng.integers(bandit.num_actions))
        else:
            action = 0
            for i in range(1, bandit.num_actions):
                if row[i] > row[action]:
                    action = i
        bandit.pending = (key, action)
        return InterpretOutcome(bandit.action_delta(action), zhat, None), state

    if cfg.kind == "random-baseline":
        num_actions = 2 * policy_set.env.num_objectives + 1
        action = int(state.rng.integers(num_actions))
        scratch = BanditState(num_objectives=policy_set.env.num_objectives, nudge=cfg.bandit_nudge)
        return InterpretOutcome(scratch.action_delta(action), zhat, None), state

    raise ConfigError(f"unknown interpreter kind {cfg.kind!r}")
