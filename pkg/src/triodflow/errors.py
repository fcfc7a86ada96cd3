"""Exception types raised across the package."""


class TriodFlowError(Exception):
    """Base class for all package errors."""


class RootNotConverged(TriodFlowError, ArithmeticError):
    """Radial inversion of the regularizing map hit its iteration cap."""


class InvalidPins(TriodFlowError, ValueError):
    """A pinned chord is not strictly shorter than the arm length."""


class ShapeMismatch(TriodFlowError, ValueError):
    """An explicit polyline has the wrong node count or non-uniform edges."""


class TopologyMismatch(TriodFlowError, ValueError):
    """Two states do not share topology, grid and pins."""


class WrongTopology(TriodFlowError, ValueError):
    """An operation was applied to a topology it does not support."""


class StepNotConverged(TriodFlowError, RuntimeError):
    """Newton iteration for one implicit step did not converge.

    Carries the best iterate found and the partial step report.
    """

    def __init__(self, message, best_state=None, report=None):
        super().__init__(message)
        self.best_state = best_state
        self.report = report


class RunAborted(TriodFlowError, RuntimeError):
    """A flow run exhausted its timestep-halving retry budget."""


class GeometryTooSlack(TriodFlowError, ValueError):
    """The configuration is too far from unit speed for the tension BVP."""


class OracleNotConverged(TriodFlowError, ArithmeticError):
    """The catenary root-finder failed."""


class ParseError(TriodFlowError, ValueError):
    """Malformed configuration text."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(TriodFlowError, ValueError):
    """A configuration value violates an invariant."""
