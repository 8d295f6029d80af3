"""Exception types raised by the solvers and the file readers."""


class QuitSolveError(Exception):
    """Base class for all library errors."""


class InvalidGame(QuitSolveError, ValueError):
    pass


class InvalidProfile(QuitSolveError, ValueError):
    pass


class NonAbsorbingProfile(QuitSolveError, ArithmeticError):
    """The expected absorbing payoff is undefined because p(x) = 0."""


class ConvergenceFailure(QuitSolveError, RuntimeError):
    """An iterative solve did not reach its tolerance.

    ``diagnostics`` carries whatever the solver knew when it gave up
    (last iterate, residual, iteration count).
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class PathStalled(ConvergenceFailure):
    """Continuation hit its minimum step; ``diagnostics['path']`` holds the prefix."""


class AbsorptionCollapse(ConvergenceFailure):
    """Joint iteration left the region where the absorption floor holds."""


class IndifferenceRootNotBracketed(QuitSolveError, RuntimeError):
    def __init__(self, message, signs=None):
        super().__init__(message)
        self.signs = signs


class DegenerateSupport(QuitSolveError, ArithmeticError):
    pass


class MalformedHistory(QuitSolveError, ValueError):
    pass
