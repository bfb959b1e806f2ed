"""Exception hierarchy shared across the package."""


class SimExploreError(Exception):
    """Base class for all package errors."""


class ContractViolation(SimExploreError, ValueError):
    """A caller broke an operation's precondition (wrong dimension, bad argument)."""


class DomainError(SimExploreError, ValueError):
    """A quantity was requested outside the region where it is defined."""


class InitializationError(SimExploreError):
    """No starting state satisfying the outcome was found within the attempt budget."""


class KdeFitError(SimExploreError):
    """The density estimate could not be fitted to the given samples."""


class ExternalSimulatorError(SimExploreError):
    """An external simulator failed, timed out, or broke the line protocol."""

    def __init__(self, message: str, stdout: str = "", stderr: str = "", returncode: int | None = None):
        super().__init__(message)
        self.stdout = stdout
        self.stderr = stderr
        self.returncode = returncode

    def __str__(self) -> str:
        msg = super().__str__()
        if self.stderr:
            msg += f"\n--- stderr ---\n{self.stderr.rstrip()}"
        return msg


class ConfigError(SimExploreError):
    """An experiment configuration failed validation; ``errors`` lists every problem."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
