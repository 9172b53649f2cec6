"""Exception hierarchy shared by all modules."""


class NonautoBifError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteResult(NonautoBifError, ArithmeticError):
    """An expression or vector field produced a value that is not a finite real.

    ``path`` locates the offending subexpression as a dotted string such as
    ``"root.right.arg"``; ``source`` is its printed form when known.
    """

    def __init__(self, message, path="root", source=None):
        super().__init__(message)
        self.path = path
        self.source = source


class StepFailure(NonautoBifError):
    """Adaptive step size underflowed before the local error test passed."""

    def __init__(self, t_fail, message=None):
        super().__init__(message or f"step size underflow at t={t_fail!r}")
        self.t_fail = t_fail


class NoConvergence(NonautoBifError):
    """Adaptive quadrature exhausted its subdivision budget."""


class TailDivergence(NonautoBifError):
    """An improper integral failed its tail check (the integral diverges)."""

    def __init__(self, message, cutoff=None, partial=None):
        super().__init__(message)
        self.cutoff = cutoff
        self.partial = partial


class StencilUnderflow(NonautoBifError):
    """Finite-difference step too small for the requested derivative order."""


class ConfigError(NonautoBifError):
    """Scenario configuration failed to parse or validate."""

    def __init__(self, message, where=None):
        super().__init__(message if where is None else f"{where}: {message}")
        self.where = where


class NoTransitionFound(NonautoBifError):
    """Every point of a parameter sweep classified identically."""
