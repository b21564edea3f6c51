"""Exception hierarchy.

Errors are grouped by the CLI exit code they map to: configuration
problems (2), numerical failures (3) and construction failures (4).
"""


class WentzelError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(WentzelError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 2


class MeshError(ConfigError):
    """Invalid mesh parameters or a mesh that violates its invariants."""


class NumericError(WentzelError):
    exit_code = 3


class SingularSystemError(NumericError):
    """The interior stiffness block cannot be factorized."""


class ZeroBoundaryMass(NumericError):
    """A test function vanishes on the boundary, so its quotient is undefined."""


class SupportsOverlap(NumericError):
    """Two test functions of a family share a mesh element."""


class ConstructionError(WentzelError):
    exit_code = 4


class MeasureTooAtomic(ConstructionError):
    """The threshold measure is smaller than a single point weight."""


class HypothesisViolated(ConstructionError):
    """A hypothesis of the decomposition lemmas fails on the given space."""


class CMConstructionFailed(ConstructionError):
    """The greedy search for separated capacitors exhausted its budget."""
