"""Exception hierarchy shared by all solver modules."""


class StatGamesError(Exception):
    pass


class InvalidSpec(StatGamesError, ValueError):
    pass


class InvalidFraction(StatGamesError, ValueError):
    pass


class DomainError(StatGamesError, ValueError):
    pass


class PoleError(DomainError):
    pass


class NotNormalized(DomainError):
    pass


class SupportViolation(DomainError):
    pass


class SupportMismatch(StatGamesError, ValueError):
    pass


class Degenerate(StatGamesError):
    """Raised when an operation needs a Nontrivial game."""


class NoConvergence(StatGamesError, RuntimeError):
    pass


class NotContractive(StatGamesError, RuntimeError):
    pass


class GuardNotMet(NoConvergence):
    pass


class TooLarge(StatGamesError):
    pass


class BoundViolation(StatGamesError, AssertionError):
    pass


class Refuted(StatGamesError):
    """An equilibrium candidate failed certification; ``certificate`` holds the gaps."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate
