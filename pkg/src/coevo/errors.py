"""Exception types raised across the package."""


class CoevoError(Exception):
    """Base class for all package errors."""


class DisconnectedGraph(CoevoError):
    pass


class InvalidProbability(CoevoError, ValueError):
    pass


class TooManyInterLinks(CoevoError, ValueError):
    pass


class EmptyPartitionSide(CoevoError, ValueError):
    pass


class IndexOutOfRange(CoevoError, IndexError):
    pass


class DimensionMismatch(CoevoError, ValueError):
    pass


class AssumptionViolated(CoevoError):
    """A theorem precondition does not hold; ``clause`` names the failed part."""

    def __init__(self, clause: str):
        super().__init__(clause)
        self.clause = clause


class NonPositiveSelfLoop(AssumptionViolated):
    pass


class SingularSystem(CoevoError):
    pass


class InvalidUniformDegree(CoevoError, ValueError):
    pass


class SchedulerExhausted(CoevoError):
    pass


class MaxIterExceeded(CoevoError):
    pass


class InvalidGridStep(CoevoError, ValueError):
    pass


class TooLarge(CoevoError, ValueError):
    pass


class UnknownScenario(CoevoError, KeyError):
    def __str__(self):
        # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class ParseError(CoevoError, ValueError):
    pass


class ConfigError(CoevoError, ValueError):
    """Invalid configuration value; the message names the field and bound."""
