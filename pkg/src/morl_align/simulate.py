"""Ground-truth simulated users: latent preferences, noisy scalar
reactions, and optional preference drift.

The simulated user is the oracle the rest of the system is evaluated
against; nothing in the adaptive loop may read its latent utility.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, EmptySetError, MorlAlignError
from .preferences import (
    LinearUtility,
    ThresholdedLexicographicUtility,
    UtilityFunction,
    project_to_simplex,
    tlo_compare,
    utility_from_dict,
)


@dataclass(eq=False)
class SimulatedUser:
    """A user with a latent utility over return vectors.

    ``rng`` drives reaction noise and drift; callers that need exact
    reproducibility construct it from their own seed stream.
    """

    user_id: str
    utility: UtilityFunction
    reaction_gain: float = 1.0
    reaction_noise: float = 0.25
    drift_rate: float = 0.0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self) -> None:
        if self.reaction_gain <= 0:
            raise ConfigError(f"reaction_gain must be positive, got {self.reaction_gain}")
        if self.reaction_noise < 0 or not math.isfinite(self.reaction_noise):
            raise ConfigError(f"bad reaction_noise {self.reaction_noise}")
        if self.drift_rate < 0 or not math.isfinite(self.drift_rate):
            raise ConfigError(f"bad drift_rate {self.drift_rate}")

    def to_spec(self) -> dict:
        return {
            "user_id": self.user_id,
            "utility": self.utility.to_dict(),
            "reaction_gain": self.reaction_gain,
            "reaction_noise": self.reaction_noise,
            "drift_rate": self.drift_rate,
        }


def user_from_spec(data: dict, rng: np.random.Generator | None = None) -> SimulatedUser:
    """Build a runtime user from its serializable spec dict.

    A ``seed`` field (if present) is only used when no rng is supplied.
    """
    known = {"user_id", "utility", "reaction_gain", "reaction_noise", "drift_rate", "seed"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown simulated-user fields: {sorted(unknown)}")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([int(data.get("seed", 0))]))
    return SimulatedUser(
        user_id=data.get("user_id", "user-0"),
        utility=utility_from_dict(data["utility"]),
        reaction_gain=float(data.get("reaction_gain", 1.0)),
        reaction_noise=float(data.get("reaction_noise", 0.25)),
        drift_rate=float(data.get("drift_rate", 0.0)),
        rng=rng,
    )


def _best_and_observed(user: SimulatedUser, observed: Sequence[float],
                       front: Sequence[Sequence[float]]) -> tuple[float, float]:
    """Scalar (best-on-front, observed) utilities for the user.

    For thresholded-lexicographic users no scalar utility exists, so the
    gap is measured as the (negated) count of front policies strictly
    preferred to the observed one — zero exactly at the optimum.
    """
    if not front:
        raise EmptySetError("reaction needs a non-empty front")
    if isinstance(user.utility, ThresholdedLexicographicUtility):
        preferred = sum(1 for r in front if tlo_compare(user.utility, r, observed) > 0)
        return 0.0, -float(preferred)
    u = user.utility
    return max(u(r) for r in front), u(observed)


def true_regret(user: SimulatedUser, observed: Sequence[float], front: Sequence[Sequence[float]]) -> float:
    """Best-achievable utility on the front minus the observed utility; >= 0."""
    best, obs = _best_and_observed(user, observed, front)
    return best - obs


def react(user: SimulatedUser, observed: Sequence[float], front: Sequence[Sequence[float]]) -> float:
    """Noisy scalar reaction: gain * (observed utility - best on front) + noise."""
    best, obs = _best_and_observed(user, observed, front)
    eta = float(user.rng.normal(0.0, user.reaction_noise))
    return user.reaction_gain * (obs - best) + eta


def drift(user: SimulatedUser) -> SimulatedUser:
    """Random-walk the latent preference on the simplex.

    Only linear users can drift; the rate 0 case is the exact identity.
    """
    if not isinstance(user.utility, LinearUtility):
        raise ConfigError(f"drift requires a linear true utility (user {user.user_id!r})")
    if user.drift_rate == 0.0:
        return user
    eps = user.rng.standard_normal(len(user.utility.weights))
    shifted = tuple(w + user.drift_rate * e for w, e in zip(user.utility.weights, eps))
    return replace(user, utility=LinearUtility(project_to_simplex(shifted)))
