"""A-posteriori policy choice over a fixed policy set.

Two selector kinds: ``argmax`` jumps straight to the utility maximizer
under the current estimate; ``steering`` moves at most one position
along the front per update, which looks steadier to the user at the
cost of slower large-scale changes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, DimensionMismatchError, EmptySetError
from .learning import PolicySet
from .preferences import LinearUtility, project_to_simplex, utility_argmax

SELECTOR_KINDS = ("argmax", "steering")


@dataclass(frozen=True)
class SelectionState:
    """Current policy choice plus the preference estimate that justified it."""

    policy_id: int
    xi: tuple[float, ...]
    kind: str = "argmax"

    def __post_init__(self) -> None:
        if self.kind not in SELECTOR_KINDS:
            raise ConfigError(f"unknown selector kind {self.kind!r}")


def initial_select(policy_set: PolicySet, prior, kind: str = "argmax") -> SelectionState:
    """Pick the linear-utility argmax under the prior estimate."""
    if len(policy_set) == 0:
        raise EmptySetError("initial_select over an empty policy set")
    xi = tuple(float(w) for w in prior)
    idx = utility_argmax(LinearUtility(xi), policy_set.returns())
    return SelectionState(policy_id=policy_set.policies[idx].policy_id, xi=xi, kind=kind)


def _utility(xi: tuple[float, ...], ret: tuple[float, ...]) -> float:
    return sum(w * r for w, r in zip(xi, ret))


def _steer_two_objectives(state: SelectionState, xi: tuple[float, ...], policy_set: PolicySet) -> int:
    order = list(policy_set.front_order)
    ids = [policy_set.policies[i].policy_id for i in order]
    rets = [policy_set.policies[i].return_vector for i in order]
    pos = ids.index(state.policy_id)
    here = _utility(xi, rets[pos])
    down = _utility(xi, rets[pos - 1]) if pos > 0 else -math.inf
    up = _utility(xi, rets[pos + 1]) if pos + 1 < len(ids) else -math.inf
    if max(down, up) <= here:
        return state.policy_id
    # Strict improvement exists; take the better direction (ties go down
    # the order, i.e. toward the lower objective-0 policy).
    if down >= up:
        return ids[pos - 1]
    return ids[pos + 1]


def _steer_by_anchors(state: SelectionState, xi: tuple[float, ...], policy_set: PolicySet) -> int:
    def dist(a, b):
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))

    current = policy_set.get(state.policy_id)
    others = sorted(
        (p for p in policy_set.policies if p.policy_id != current.policy_id),
        key=lambda p: (dist(p.anchor_weight, current.anchor_weight), p.policy_id),
    )
    candidates = [current] + others[:2]
    best = min(candidates, key=lambda p: (dist(p.anchor_weight, xi), p.policy_id != current.policy_id, p.policy_id))
    return best.policy_id


def apply_update(state: SelectionState, delta, policy_set: PolicySet) -> SelectionState:
    """Apply a preference delta (projected back to the simplex) and
    re-select per the state's selector kind."""
    if len(delta) != len(state.xi):
        raise DimensionMismatchError(f"delta has {len(delta)} entries for {len(state.xi)} objectives")
    xi = project_to_simplex(tuple(x + d for x, d in zip(state.xi, delta)))
    if state.kind == "argmax":
        idx = utility_argmax(LinearUtility(xi), policy_set.returns())
        new_id = policy_set.policies[idx].policy_id
    elif policy_set.env.num_objectives == 2:
        new_id = _steer_two_objectives(state, xi, policy_set)
    else:
        new_id = _steer_by_anchors(state, xi, policy_set)
    return SelectionState(policy_id=new_id, xi=xi, kind=state.kind)


def explain_selection(before: SelectionState, after: SelectionState, delta, zeta: float,
                      zeta_hat: float | None, interaction_index: int,
                      policy_set: PolicySet) -> dict:
    """Structured, serializable account of one update decision."""
    names = policy_set.env.objective_names
    shifts = [a - b for a, b in zip(after.xi, before.xi)]
    biggest = max(range(len(shifts)), key=lambda i: abs(shifts[i]))
    changed_policy = after.policy_id != before.policy_id
    changed_xi = any(abs(s) > 1e-12 for s in shifts)
    zhat_text = "none" if zeta_hat is None else f"{zeta_hat:+.3f}"
    if not changed_policy and not changed_xi:
        sentence = (
            f"interaction {interaction_index}: reaction {zeta:+.3f} "
            f"(standardized {zhat_text}); no change"
        )
    else:
        direction = "toward" if shifts[biggest] > 0 else "away from"
        sentence = (
            f"interaction {interaction_index}: reaction {zeta:+.3f} "
            f"(standardized {zhat_text}) shifted weight {direction} "
            f"'{names[biggest]}' by {abs(shifts[biggest]):.4f}; "
            f"policy {before.policy_id} -> {after.policy_id}"
        )
    return {
        "interaction_index": interaction_index,
        "zeta": zeta,
        "zeta_hat": zeta_hat,
        "delta": list(delta),
        "xi_before": list(before.xi),
        "xi_after": list(after.xi),
        "policy_before": before.policy_id,
        "policy_after": after.policy_id,
        "return_before": list(policy_set.get(before.policy_id).return_vector),
        "return_after": list(policy_set.get(after.policy_id).return_vector),
        "selector_kind": after.kind,
        "changed": changed_policy or changed_xi,
        "sentence": sentence,
    }
