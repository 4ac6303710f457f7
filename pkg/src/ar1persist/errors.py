"""Exception hierarchy.

Every error carries the process exit code the command line front end uses
for it: 2 for configuration problems, 3 for numerical-domain problems and 4
for iterations that did not converge.
"""


class ArtifactError(Exception):
    exit_code = 1


class ConfigError(ArtifactError, ValueError):
    exit_code = 2


class DomainError(ArtifactError, ArithmeticError):
    exit_code = 3


class ConvergenceError(ArtifactError, RuntimeError):
    exit_code = 4


class DegenerateModel(DomainError):
    """The innovation law never kills (P(xi < 0) = 0) or never rises."""


class NotBounded(DomainError):
    pass


class InvalidSplit(DomainError):
    pass


class MassDefect(DomainError):
    pass


class Diverges(DomainError):
    pass


class SeriesDiverges(DomainError):
    def __init__(self, which, message=None):
        self.which = which
        super().__init__(message or f"geometric series for block {which} diverges")


class BadBracket(DomainError):
    pass


class DomainExceeded(DomainError):
    pass


class SingularAtRoot(DomainError):
    pass


class OutOfRange(DomainError):
    pass


class InvalidRatio(DomainError):
    pass


class PastPole(DomainError):
    pass


class DegenerateKernel(DomainError):
    pass


class DegenerateConditioning(DomainError):
    pass


class EmptyWindow(DomainError):
    pass


class Extinction(DomainError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"all particles killed at step {step}")


class NoConvergence(ConvergenceError):
    def __init__(self, max_iter, residual):
        self.max_iter = max_iter
        self.residual = residual
        super().__init__(f"no convergence after {max_iter} iterations (residual {residual:.3e})")
