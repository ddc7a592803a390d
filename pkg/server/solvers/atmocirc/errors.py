"""
Exception hierarchy shared by every atmocirc module
"""

from typing import Optional, Sequence


class AtmocircError(Exception):
    """Base class for all atmocirc failures"""


class ParameterError(AtmocircError, ValueError):
    """Invalid physical, dimensionless or numerical parameter"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class GridMismatchError(AtmocircError, ValueError):
    """Fields defined on different grids were combined"""


class SingularModeError(AtmocircError):
    """A nullspace Fourier mode was solved without pinning"""


class SolverBreakdownError(AtmocircError):
    """A per-mode banded solve failed"""


class NumericalBreakdownError(AtmocircError):
    """Non-finite values appeared in the state after a step"""

    def __init__(self, time: float, fields: Sequence[str], step: Optional[int] = None):
        self.time = time
        self.fields = list(fields)
        self.step = step
        where = f"step {step}, " if step is not None else ""
        super().__init__(f"non-finite values in {', '.join(self.fields)} ({where}t = {time:.6g})")


class ConfigError(AtmocircError, ValueError):
    """Run configuration could not be parsed or validated"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        self.message = message
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class TrajectoryError(AtmocircError, ValueError):
    """A time window or snapshot request does not fit the stored trajectory"""


class TestFunctionError(AtmocircError, ValueError):
    """A weak-form test function violates the wall conditions"""

    __test__ = False
