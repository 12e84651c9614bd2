"""Utilities, dominance, Pareto filtering, and the simplex projection.

The projection is checked against an independent bisection oracle and
with hypothesis property tests; the worked cases are frozen by hand.
"""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morl_align.preferences import (
    LinearUtility,
    PreferenceVector,
    ThresholdedLexicographicUtility,
    dominates,
    linear_utility,
    pareto_filter,
    project_to_simplex,
    tlo_compare,
    uniform_preference,
    utility_argmax,
    utility_from_dict,
)
from morl_align.errors import DimensionMismatchError, EmptySetError, MorlAlignError

import oracles

FRONT = [(1.0, -1.0), (3.0, -3.0), (6.0, -5.0), (10.0, -7.0)]


def test_preference_vector_validation():
    PreferenceVector((0.5, 0.5))
    with pytest.raises(MorlAlignError):
        PreferenceVector((0.6, 0.6))
    with pytest.raises(MorlAlignError):
        PreferenceVector((-0.1, 1.1))
    with pytest.raises(DimensionMismatchError):
        PreferenceVector(())


def test_uniform_preference():
    assert uniform_preference(2).weights == (0.5, 0.5)
    assert uniform_preference(4).weights == (0.25, 0.25, 0.25, 0.25)


def test_linear_utility_values():
    u = LinearUtility((0.5, 0.5))
    assert u((10.0, -7.0)) == pytest.approx(1.5)
    assert u((1.0, -1.0)) == pytest.approx(0.0)
    assert linear_utility(PreferenceVector((1.0, 0.0)), (6.0, -5.0)) == 6.0


def test_linear_utility_dimension_check():
    with pytest.raises(DimensionMismatchError):
        LinearUtility((0.5, 0.5))((1.0, 2.0, 3.0))


def test_utility_argmax_regions():
    # Hand-derived: on this front the linear argmax flips from the fast
    # policy to the deep one at w1 = 0.4, with no interior winners.
    assert utility_argmax(LinearUtility((0.2, 0.8)), FRONT) == 0
    assert utility_argmax(LinearUtility((0.39, 0.61)), FRONT) == 0
    assert utility_argmax(LinearUtility((0.41, 0.59)), FRONT) == 3
    assert utility_argmax(LinearUtility((0.9, 0.1)), FRONT) == 3
    assert utility_argmax(LinearUtility((0.5, 0.5)), FRONT) == 3


def test_utility_argmax_tie_goes_low():
    # At w1 = 0.4 the endpoints tie exactly: 0.4*1-0.6*1 = 0.4*10-0.6*7.
    assert utility_argmax(LinearUtility((0.4, 0.6)), FRONT) == 0
    with pytest.raises(EmptySetError):
        utility_argmax(LinearUtility((0.5, 0.5)), [])


def test_tlo_ordering():
    # Clip objective 0 at 2, then compare objective 1 raw.
    u = ThresholdedLexicographicUtility((0, 1), (2.0,))
    assert tlo_compare(u, (3.0, -3.0), (1.0, -1.0)) == 1   # 2 > 1 on the clipped head
    assert tlo_compare(u, (10.0, -7.0), (3.0, -3.0)) == -1  # heads tie at 2, -7 < -3
    assert tlo_compare(u, (3.0, -3.0), (6.0, -3.0)) == 0    # both clip to (2, -3)
    assert utility_argmax(u, FRONT) == 1


def test_tlo_validation():
    with pytest.raises(MorlAlignError):
        ThresholdedLexicographicUtility((0, 0), (1.0,))
    with pytest.raises(DimensionMismatchError):
        ThresholdedLexicographicUtility((0, 1), ())


def test_utility_serialization_roundtrip():
    for u in (LinearUtility((0.3, 0.7)), ThresholdedLexicographicUtility((1, 0, 2), (0.5, -1.0))):
        assert utility_from_dict(u.to_dict()) == u


def test_dominates_basics():
    assert dominates((2.0, 0.0), (1.0, 0.0))
    assert not dominates((1.0, 0.0), (1.0, 0.0))
    assert not dominates((2.0, -1.0), (1.0, 0.0))
    with pytest.raises(DimensionMismatchError):
        dominates((1.0,), (1.0, 2.0))


def test_pareto_filter_front_is_clean():
    points = FRONT + [(0.0, -12.0), (3.0, -5.0), (1.0, -2.0)]
    keep = pareto_filter(points)
    assert keep == [0, 1, 2, 3]


def test_pareto_filter_keeps_duplicates():
    points = [(1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]
    assert pareto_filter(points) == [0, 1]


@settings(max_examples=200)
@given(
    st.lists(
        st.tuples(*([st.integers(min_value=-50, max_value=50)] * 3)),
        min_size=1,
        max_size=24,
    )
)
def test_pareto_filter_matches_bruteforce(points):
    pts = [tuple(float(v) for v in p) for p in points]
    assert pareto_filter(pts) == oracles.pareto_front_bruteforce(pts)


@settings(max_examples=200)
@given(
    st.lists(
        st.tuples(st.integers(-20, 20), st.integers(-20, 20)),
        min_size=1,
        max_size=16,
    )
)
def test_pareto_filter_survivors_are_mutually_nondominated(points):
    pts = [tuple(float(v) for v in p) for p in points]
    keep = pareto_filter(pts)
    assert keep, "at least one point always survives"
    for i in keep:
        for j in keep:
            if i != j:
                assert not dominates(pts[i], pts[j])


# --- simplex projection ---


def test_projection_worked_cases():
    assert project_to_simplex((1.2, 0.3)) == pytest.approx((0.95, 0.05), abs=1e-12)
    assert project_to_simplex((-1.0, -1.0)) == (0.5, 0.5)
    assert project_to_simplex((0.3, 0.7)) == (0.3, 0.7)


def test_projection_clips_to_vertex():
    assert project_to_simplex((2.0, -3.0)) == (1.0, 0.0)


def test_projection_uniform_shift_absorbed_exactly():
    # Interior points: adding c to every coordinate must be absorbed.
    # Dyadic fixtures keep the arithmetic exact, so equality is bitwise.
    for base in [(0.5, 0.5), (0.25, 0.75), (0.25, 0.25, 0.5), (0.125, 0.375, 0.5)]:
        for c in (0.5, -0.25, 2.0, -1.0):
            shifted = tuple(b + c for b in base)
            assert project_to_simplex(shifted) == base


@settings(max_examples=300)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=6))
def test_projection_lands_on_simplex(x):
    y = project_to_simplex(x)
    assert all(v >= 0.0 for v in y)
    assert math.isclose(sum(y), 1.0, abs_tol=1e-9)


@settings(max_examples=300)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=6))
def test_projection_idempotent(x):
    y = project_to_simplex(x)
    z = project_to_simplex(y)
    assert np.allclose(z, y, atol=1e-12)


@settings(max_examples=300)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=6))
def test_projection_matches_bisection_oracle(x):
    y = project_to_simplex(x)
    z = oracles.project_simplex_bisection(x)
    assert np.allclose(y, z, atol=1e-6)


@settings(max_examples=200)
@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=5),
    st.floats(-3, 3, allow_nan=False),
)
def test_projection_shift_invariance(x, c):
    a = project_to_simplex(x)
    b = project_to_simplex([v + c for v in x])
    assert np.allclose(a, b, atol=1e-9)
