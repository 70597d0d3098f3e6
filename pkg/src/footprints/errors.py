"""Exception types shared across the package."""


class FootprintsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidTransform(FootprintsError):
    """Rotation is not orthonormal / det != 1 beyond repairable drift."""


class MalformedRecord(FootprintsError):
    """A sequence-file line could not be parsed.

    Carries the 1-based line number and a human-readable reason.
    """

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class InvariantViolation(FootprintsError):
    """A parsed value violates a structural invariant."""

    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        msg = kind if not detail else f"{kind}: {detail}"
        super().__init__(msg)


class DuplicateFrameIndex(InvariantViolation):
    def __init__(self, frame_index: int):
        self.frame_index = frame_index
        super().__init__("duplicate frame_index", str(frame_index))


class UnknownFrame(FootprintsError):
    """Requested frame_index does not exist in the sequence."""


class ShapeMismatch(FootprintsError):
    """Two grids/vectors that must agree in shape do not."""


class NonFiniteValue(FootprintsError):
    """NaN or infinity encountered where finite values are required."""


class EmptyGroundTruth(FootprintsError):
    """Ground-truth map contains no positive cell."""


class EmptyLocations(FootprintsError):
    """A location list that must be non-empty is empty."""


class InfeasibleSpec(FootprintsError):
    """Scene specification cannot host the requested walks."""
