"""Exception hierarchy shared by all renormlab modules."""

from __future__ import annotations


class RenormLabError(Exception):
    """Base class for every error raised by the package."""


class NumericalError(RenormLabError):
    """A numerical procedure could not deliver its contract (CLI exit code 2)."""


class InvariantViolation(RenormLabError):
    """A checked mathematical invariant failed (CLI exit code 3)."""


class InvalidParameter(RenormLabError, ValueError):
    pass


class NoSignChange(NumericalError):
    pass


class MaxIterations(NumericalError):
    pass


class OrbitEscape(NumericalError):
    def __init__(self, step: int, value: float):
        super().__init__(f"orbit left [-1, 1] at step {step} (value {value!r})")
        self.step = step
        self.value = value


class NotRenormalizable(NumericalError):
    def __init__(self, stage: int, reason: str = ""):
        msg = f"map is not renormalizable at stage {stage}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.stage = stage
        self.reason = reason


class AmbiguousFixedPoint(NumericalError):
    def __init__(self, stage: int, count: int):
        super().__init__(f"{count} candidate fixed points found at stage {stage}")
        self.stage = stage
        self.count = count


class BracketNotFound(NumericalError):
    def __init__(self, k: int):
        super().__init__(f"no sign change found for superstable parameter k={k}")
        self.k = k


class ResidualPoint(RenormLabError):
    """The point lies in the untruncated tail I_{N+1} of the partition."""


class BoundaryPoint(RenormLabError):
    def __init__(self, x: float, endpoint: float):
        super().__init__(f"{x!r} is within tolerance of partition endpoint {endpoint!r}")
        self.x = x
        self.endpoint = endpoint


class OutOfImage(RenormLabError, ValueError):
    pass


class ExtensionNotMonotone(InvariantViolation):
    pass


class CombinatorialMismatch(InvariantViolation):
    pass


class DepthInsufficient(NumericalError):
    pass
