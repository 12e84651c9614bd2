from __future__ import annotations

import pytest

from morl_align import envs, learning


@pytest.fixture(scope="session")
def treasure_spec():
    return envs.treasure_grid()


@pytest.fixture(scope="session")
def treasure_policy_set(treasure_spec):
    """Default-config policy set, built once per test session."""
    return learning.build_policy_set(treasure_spec)
