"""Preference vectors, scalar utilities, Pareto dominance, and the
Euclidean projection onto the probability simplex."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, EmptySetError, MorlAlignError

_SIMPLEX_ATOL = 1e-9


@dataclass(frozen=True)
class PreferenceVector:
    """A point on the probability simplex: non-negative weights over the
    objectives, summing to one."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.weights:
            raise DimensionMismatchError("preference vector needs at least one objective")
        if any(not math.isfinite(w) for w in self.weights):
            raise MorlAlignError(f"non-finite preference weights {self.weights}")
        if any(w < -_SIMPLEX_ATOL for w in self.weights):
            raise MorlAlignError(f"negative preference weight in {self.weights}")
        if abs(sum(self.weights) - 1.0) > 1e-6:
            raise MorlAlignError(f"preference weights {self.weights} do not sum to 1")

    def __len__(self) -> int:
        return len(self.weights)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


def uniform_preference(num_objectives: int) -> PreferenceVector:
    return PreferenceVector(tuple(1.0 / num_objectives for _ in range(num_objectives)))


@dataclass(frozen=True)
class LinearUtility:
    """u(r) = w . r with w on the simplex."""

    weights: tuple[float, ...]

    kind = "linear"

    def __call__(self, returns: Sequence[float]) -> float:
        if len(returns) != len(self.weights):
            raise DimensionMismatchError(
                f"return has {len(returns)} objectives, utility expects {len(self.weights)}"
            )
        return float(sum(w * r for w, r in zip(self.weights, returns)))

    def to_dict(self) -> dict:
        return {"kind": "linear", "weights": list(self.weights)}


@dataclass(frozen=True)
class ThresholdedLexicographicUtility:
    """Compare returns objective-by-objective in ``priority`` order,
    clipping every objective except the last at its threshold.

    There is no scalar value; only the ordering via :func:`tlo_compare`
    is meaningful.
    """

    priority: tuple[int, ...]
    thresholds: tuple[float, ...]  # one per priority entry except the last

    kind = "tlo"

    def __post_init__(self) -> None:
        if sorted(self.priority) != list(range(len(self.priority))):
            raise MorlAlignError(f"priority {self.priority} is not a permutation of objectives")
        if len(self.thresholds) != len(self.priority) - 1:
            raise DimensionMismatchError(
                f"need {len(self.priority) - 1} thresholds for {len(self.priority)} objectives, got {len(self.thresholds)}"
            )

    def clipped(self, returns: Sequence[float]) -> tuple[float, ...]:
        if len(returns) != len(self.priority):
            raise DimensionMismatchError(
                f"return has {len(returns)} objectives, utility expects {len(self.priority)}"
            )
        out = []
        for rank, obj in enumerate(self.priority):
            v = float(returns[obj])
            if rank < len(self.thresholds):
                v = min(v, self.thresholds[rank])
            out.append(v)
        return tuple(out)

    def to_dict(self) -> dict:
        return {"kind": "tlo", "priority": list(self.priority), "thresholds": list(self.thresholds)}


UtilityFunction = Union[LinearUtility, ThresholdedLexicographicUtility]


def utility_from_dict(data: dict) -> UtilityFunction:
    if data.get("kind") == "linear":
        return LinearUtility(tuple(float(w) for w in data["weights"]))
    if data.get("kind") == "tlo":
        return ThresholdedLexicographicUtility(
            tuple(int(p) for p in data["priority"]),
            tuple(float(t) for t in data["thresholds"]),
        )
    raise MorlAlignError(f"unknown utility kind {data.get('kind')!r}")


def linear_utility(weights: PreferenceVector | Sequence[float], returns: Sequence[float]) -> float:
    w = weights.weights if isinstance(weights, PreferenceVector) else tuple(weights)
    return LinearUtility(tuple(float(x) for x in w))(returns)


def tlo_compare(utility: ThresholdedLexicographicUtility, a: Sequence[float], b: Sequence[float]) -> int:
    """-1, 0, or 1 as ``a`` is worse than, tied with, or better than ``b``."""
    ca, cb = utility.clipped(a), utility.clipped(b)
    for va, vb in zip(ca, cb):
        if va > vb:
            return 1
        if va < vb:
            return -1
    return 0


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Strict Pareto dominance: a >= b everywhere and > somewhere."""
    if len(a) != len(b):
        raise DimensionMismatchError(f"cannot compare returns of lengths {len(a)} and {len(b)}")
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    return bool(np.all(a_arr >= b_arr) and np.any(a_arr > b_arr))


def pareto_filter(points: Sequence[Sequence[float]]) -> list[int]:
    """Indices of the non-dominated points, in their original order.

    Duplicates of a surviving point all survive (none of them strictly
    dominates the others).
    """
    pts = [tuple(float(x) for x in p) for p in points]
    keep: list[int] = []
    for i, p in enumerate(pts):
        if not any(dominates(q, p) for j, q in enumerate(pts) if j != i):
            keep.append(i)
    return keep


def project_to_simplex(point: Sequence[float]) -> tuple[float, ...]:
    """Euclidean projection onto the probability simplex.

    Sort-and-threshold: find the largest k with
    x_(k) - (sum of the k largest - 1)/k > 0, subtract that threshold,
    clip at zero.
    """
    x = np.asarray(point, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DimensionMismatchError(f"expected a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise MorlAlignError(f"non-finite input to simplex projection: {point}")
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, x.size + 1)
    cond = u - (css - 1.0) / ks > 0.0
    k = int(ks[cond][-1])
    theta = (css[k - 1] - 1.0) / k
    y = np.maximum(x - theta, 0.0)
    return tuple(float(v) for v in y)


def utility_argmax(utility: UtilityFunction, returns: Sequence[Sequence[float]]) -> int:
    """Index of the best return under the utility; ties go to the lowest index."""
    if not returns:
        raise EmptySetError("utility_argmax over an empty set of returns")
    if isinstance(utility, ThresholdedLexicographicUtility):
        best = 0
        for i in range(1, len(returns)):
            if tlo_compare(utility, returns[i], returns[best]) > 0:
                best = i
        return best
    values = [utility(r) for r in returns]
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best
