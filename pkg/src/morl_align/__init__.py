"""morl-align: adaptive preference alignment over multi-objective RL policy sets."""

__version__ = "0.1.0"
