"""Tolerance settings shared by every module."""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical tolerances.

    geom
        Absolute distance below which a point counts as lying on a boundary,
        and relative collinearity threshold for hull canonicalization.
    level
        Slack allowed when comparing density values against a level.
    edge_threshold
        Maximum polygon edge length for the sampled strict-convexity proxy.
    """

    geom: float = 1e-9
    level: float = 1e-7
    edge_threshold: float = 0.1

    def with_(self, **kwargs) -> "ToleranceConfig":
        return replace(self, **kwargs)


DEFAULT_TOL = ToleranceConfig()
