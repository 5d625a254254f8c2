"""Exception types shared across the solver modules."""


class GigDeployError(Exception):
    pass


class InvalidInput(GigDeployError, ValueError):
    pass


class DomainError(GigDeployError, ValueError):
    pass


class UnstableQueue(GigDeployError, ValueError):
    pass


class NoConvergence(GigDeployError, RuntimeError):
    pass


class PatternViolation(GigDeployError, AssertionError):
    def __init__(self, message, cells=()):
        super().__init__(message)
        self.cells = list(cells)


class TheoremViolation(GigDeployError, AssertionError):
    pass


class GridTooCoarse(UserWarning):
    """A brute-force refinement pass moved the optimum by more than 1%."""
