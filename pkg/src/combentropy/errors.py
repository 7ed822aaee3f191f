"""Exception hierarchy.  The CLI maps each class to a process exit code."""


class CombError(Exception):
    exit_code = 1


class InvalidInput(CombError, ValueError):
    """Malformed data, failed preconditions, or inconsistent labels."""

    exit_code = 1


class SolverFailure(CombError, RuntimeError):
    """A conic or linear program did not reach an optimal status."""

    exit_code = 2


class CapExceeded(CombError, MemoryError):
    """A dimension or enumeration guard refused the request."""

    exit_code = 3
