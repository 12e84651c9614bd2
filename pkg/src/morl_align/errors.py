"""Typed errors shared across the package."""
from __future__ import annotations


class MorlAlignError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(MorlAlignError):
    """A vector argument has the wrong number of objectives."""


class InvalidActionError(MorlAlignError):
    """An action id is not part of the environment's action set."""


class PolicyUndefinedError(MorlAlignError):
    """A policy has no action for a state it was asked about."""


class EmptySetError(MorlAlignError):
    """An operation that needs a non-empty collection received an empty one."""


class ConfigError(MorlAlignError):
    """A config file or override is malformed or inconsistent."""


class PhaseError(MorlAlignError):
    """A session operation was called in the wrong phase."""


class UnknownIdError(MorlAlignError):
    """A lookup by id (environment, session, policy, user) found nothing."""
