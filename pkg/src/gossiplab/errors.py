"""Shared exception and warning types."""


class ConfigError(ValueError):
    """Invalid experiment configuration (bad schema, bad value)."""


class GraphConnectivityError(ValueError):
    """An operation required a connectivity property the graph lacks."""


class ModelMismatchError(ValueError):
    """Communication-model arguments are inconsistent (e.g. a single-coin
    model with unequal direction probabilities)."""


class DyadicOverflowError(ArithmeticError):
    """The shared power-of-two denominator exceeded the soft cap; rerun the
    computation in float mode."""


class NoCounterexampleError(ValueError):
    """Counterexample generation was asked for a graph that satisfies the
    connectivity assumption it is supposed to break."""


class HorizonExceededError(RuntimeError):
    """The simulation horizon ended before the requested event.

    Carries ``achieved_fraction``: the fraction of trials still above the
    spread threshold when the horizon ran out.
    """

    def __init__(self, message, achieved_fraction=None):
        super().__init__(message)
        self.achieved_fraction = achieved_fraction


class EnumerationCeilingError(RuntimeError):
    """Exhaustive product enumeration hit the distinct-product ceiling.

    The result is inconclusive rather than a pass or fail.
    """


class ExactnessWarning(UserWarning):
    """An exact comparison was requested on float data; a 1e-12 tolerance
    was used instead."""
