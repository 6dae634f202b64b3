"""Exception hierarchy shared by the solver modules."""


class KPPError(Exception):
    """Base class for all errors raised by kppw."""


class UnknownEquation(KPPError, KeyError):
    pass


class InvalidSpec(KPPError, ValueError):
    pass


class DegenerateLeadingCoefficient(KPPError, ValueError):
    pass


class BracketInvalid(KPPError, ValueError):
    pass


class CenterModesPresent(KPPError):
    """Projection closure requested while an equilibrium has center modes."""


class ClosureCountMismatch(KPPError):
    pass


class NoConvergence(KPPError):
    """Newton iteration failed; ``best_residual`` holds the smallest norm reached."""

    def __init__(self, message, best_residual=float("inf"), iterations=0):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations


class SingularJacobian(NoConvergence):
    pass


class RegularizationStall(NoConvergence):
    pass


class InterfaceNotFound(KPPError):
    pass


class NonPositiveN(KPPError, ValueError):
    pass


class SpecMismatch(KPPError, ValueError):
    pass


class SingularSystem(KPPError):
    pass
