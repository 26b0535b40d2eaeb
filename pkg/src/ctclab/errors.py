"""Exception hierarchy shared by all ctclab modules."""


class CtcLabError(Exception):
    pass


class StructuralError(CtcLabError):
    """A value violates the structural invariants of its type."""


class ContractError(CtcLabError, ValueError):
    """An operation was called outside its precondition."""


class ResourceError(CtcLabError):
    """A hard resource cap (nodes, candidates) was exceeded.

    ``partial`` carries whatever progress was made before the cap hit,
    e.g. the last fully enumerated depth.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class MachineParseError(CtcLabError):
    def __init__(self, message, line=None, source=None):
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.source = source


class InvariantViolation(CtcLabError):
    """A numerical object failed one of its tolerance-checked invariants."""

    def __init__(self, invariant, magnitude, tolerance):
        super().__init__(
            f"{invariant} violated: magnitude {magnitude:.3e} exceeds tolerance {tolerance:.1e}"
        )
        self.invariant = invariant
        self.magnitude = magnitude
        self.tolerance = tolerance


class OracleInconsistency(CtcLabError):
    """Certified oracle answers contradict each other."""
