"""Exception hierarchy shared by all modules."""


class MibError(Exception):
    """Base class for every error raised by this package."""


class VariableNameError(MibError, KeyError):
    """A variable name is unknown in the current scope."""

    def __str__(self):
        return Exception.__str__(self)


class ArgumentError(MibError, ValueError):
    """Arguments violate an operation's precondition (e.g. overlapping sets)."""


class ShapeError(MibError, ValueError):
    """Two distributions do not live on the same outcome space."""


class NormalizationError(MibError, ValueError):
    """A table is negative somewhere or does not sum to one."""


class ZeroProbabilityError(MibError, ValueError):
    """Conditioning on evidence that has probability zero."""


class CapacityError(MibError):
    """A dense table (or a cluster count) would exceed its configured cap."""


class CycleError(MibError, ValueError):
    """A directed graph that must be acyclic contains a cycle."""


class ConsistencyError(MibError, ArithmeticError):
    """Two independent evaluations of the same quantity disagree."""


class DomainError(MibError, ValueError):
    """A trade-off parameter lies outside the range an operation supports."""


class BoundaryError(MibError, ValueError):
    """A finite-difference probe was requested at a boundary point."""


class DegenerateRowError(MibError, FloatingPointError):
    """Every value of a bottleneck received zero weight for some parent configuration."""


class ValidationError(MibError, ValueError):
    """A problem definition violates one or more structural requirements.

    ``violations`` holds ``(code, message)`` pairs. Codes are one of
    ``leaf``, ``overlap``, ``cycle``, ``capacity``, ``inconsistent``,
    ``unknown-name``, ``cardinality``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"[{c}] {m}" for c, m in self.violations))

    @property
    def codes(self):
        return [c for c, _ in self.violations]


class ParseError(MibError, ValueError):
    """An input file is malformed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
