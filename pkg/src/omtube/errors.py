"""Exception hierarchy for omtube.

Two families: ``ValidationFailure`` for bad inputs (CLI exit code 2) and
``NumericalFailure`` for solvers that did not deliver (CLI exit code 3).
"""

from __future__ import annotations

from collections.abc import Sequence


class OmtubeError(Exception):
    """Base class for every error raised by omtube."""

    exit_code: int = 1


class ValidationFailure(OmtubeError):
    """Inputs violate a documented precondition."""

    exit_code = 2


class NumericalFailure(OmtubeError):
    """A numerical procedure failed to produce a trustworthy result."""

    exit_code = 3


# -- validation ------------------------------------------------------------


class InputError(ValidationFailure):
    """Non-finite or out-of-range argument."""


class MetastabilityViolation(ValidationFailure):
    """An endpoint is not a root of the drift."""


class DomainTooSmall(ValidationFailure):
    """|x_f - x0| does not fit strictly inside the domain half-width."""


class BadNoise(ValidationFailure):
    """Noise intensity is not strictly positive."""


class InvalidTube(ValidationFailure):
    """Tube radius outside (0, |x_f - x0|)."""


class IncompatibleGrids(ValidationFailure):
    """Reference path grid is not an integer multiple of the simulation step."""


class GridMismatch(ValidationFailure):
    """Two paths cover different time windows."""


class PathTooShort(ValidationFailure):
    """Path has too few samples for second-order differences."""


# -- numerical -------------------------------------------------------------


class NewtonDivergence(NumericalFailure):
    """Implicit theta-scheme step did not converge."""

    def __init__(self, message: str, path_indices: Sequence[int] = ()) -> None:
        super().__init__(message)
        self.path_indices = list(path_indices)


class EnsembleFailure(NumericalFailure):
    """One or more paths of an ensemble failed; indices are attached."""

    def __init__(self, message: str, path_indices: Sequence[int]) -> None:
        super().__init__(message)
        self.path_indices = sorted(path_indices)


class HorizonTooShort(NumericalFailure):
    """Too many paths were still inside the domain at the horizon."""


class QuadratureFailure(NumericalFailure):
    """Adaptive quadrature missed its tolerance."""


class ShootingOverflow(NumericalFailure):
    """A shot left the bounding box; ``terminal`` is the last finite state."""

    def __init__(self, message: str, terminal: float) -> None:
        super().__init__(message)
        self.terminal = terminal


class NoBracket(NumericalFailure):
    """No sign change of the shooting residual over the velocity scan."""

    def __init__(self, message: str, T: float) -> None:
        super().__init__(message)
        self.T = T


class NoConvergence(NumericalFailure):
    """Iterative minimizer or collocation solve did not converge."""


class NoInteriorMinimum(NumericalFailure):
    """Scanned objective is monotone; ``direction`` names the boundary it runs to."""

    def __init__(self, message: str, direction: str) -> None:
        super().__init__(message)
        self.direction = direction


class NoSignChange(NumericalFailure):
    """Root bracket does not straddle the target."""


class ReparameterizationMismatch(NumericalFailure):
    """E(T) and the time integral of the energy relation disagree."""
