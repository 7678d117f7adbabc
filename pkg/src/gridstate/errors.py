"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so the split between schema
problems, physics validation and solver failures matters.
"""


class GridStateError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(GridStateError):
    """Bad command-line invocation (exit code 1)."""


class SchemaError(GridStateError):
    """Malformed input document: JSON syntax, missing keys, bad ids (exit 2)."""


class ValidationError(GridStateError):
    """Physically inadmissible data: sign domains, non-PD inductances,
    disconnected network (exit 3)."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems) if problems is not None else [message]


class LoadDomainError(GridStateError):
    """Voltage magnitude below the domain floor of a singular load model."""

    def __init__(self, message, bus=None):
        super().__init__(message)
        self.bus = bus


class SolverError(GridStateError):
    """Newton non-convergence, singular Jacobian, or an operating point for
    which no steady state exists (exit 4)."""


class InfeasibleSteadyStateError(SolverError):
    """No steady state exists at the requested frequency (e.g. zero frequency
    with a nonzero net stator voltage)."""
