from __future__ import annotations


class CheegerLabError(Exception):
    """Base class for every data or solver failure raised by cheeger_lab."""


class InvalidParametersError(CheegerLabError, ValueError):
    """Bad sizes, degrees, dimensions or arities supplied by the caller."""


class GenerationExhaustedError(CheegerLabError, RuntimeError):
    pass


class NotConnectedError(CheegerLabError, ValueError):
    pass


class TooLargeError(CheegerLabError, ValueError):
    pass


class NoConvergenceError(CheegerLabError, RuntimeError):
    pass


class DegenerateSpectrumError(CheegerLabError, ValueError):
    pass


class RankDeficientError(CheegerLabError, ValueError):
    pass


class NonFiniteParameterError(CheegerLabError, ValueError):
    pass


class DivergenceError(CheegerLabError, RuntimeError):
    pass


class EmptySplitError(CheegerLabError, ValueError):
    pass


class EmptyCandidatesError(CheegerLabError, ValueError):
    pass


class MissingSizeError(CheegerLabError, KeyError):
    def __str__(self) -> str:
        # KeyError quotes its argument; keep the plain message.
        return str(self.args[0]) if self.args else ""


class DataIntegrityError(CheegerLabError):
    """A record failed validation before persistence."""

    def __init__(self, key: tuple[int, int, int], violations: list[str]):
        self.key = key
        self.violations = violations
        n, k, index = key
        super().__init__(f"record (n={n}, k={k}, index={index}) failed checks: {'; '.join(violations)}")
