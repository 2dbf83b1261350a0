"""Exception types shared across the toolkit."""


class LocustSdmError(Exception):
    """Base class for all toolkit errors."""


class EmptyGrid(LocustSdmError):
    """Bounding box too small to hold a single cell."""


class OutOfBounds(LocustSdmError):
    """Coordinate outside the valid latitude/longitude range or grid."""


class ParseError(LocustSdmError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CoverageError(LocustSdmError):
    """A required (date, cell) raster value is missing."""


class ConfigError(LocustSdmError):
    """Invalid configuration value or dimension mismatch."""


class SingleClassError(LocustSdmError):
    """Training labels contain only one class."""


class NonFiniteError(LocustSdmError):
    """Non-finite value in numeric input."""


class SchemaMismatch(LocustSdmError):
    """Feature matrix does not match the model's feature schema."""


class InsufficientCandidates(LocustSdmError):
    """Sampling constraints leave fewer candidates than requested."""

    def __init__(self, needed: int, available: int, detail: str = ""):
        self.needed = needed
        self.available = available
        msg = f"need {needed} candidates, only {available} available"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NoViableExtent(LocustSdmError):
    """Every radius in the extent ladder was skipped."""


class EmptyEvaluation(LocustSdmError):
    """Metric requested over zero evaluated rows."""


class OmnibusNotRejected(LocustSdmError):
    """Post-hoc tests requested although the omnibus test did not reject."""


class MissingArm(LocustSdmError):
    """A named experiment arm is absent from the results matrix."""


class DomainError(LocustSdmError):
    """Argument outside the mathematical domain of a function."""


class ExperimentFailure(LocustSdmError):
    """A run of the experiment harness failed; carries the run index."""

    def __init__(self, run: int, cause: Exception):
        self.run = run
        self.cause = cause
        super().__init__(f"run {run} failed: {cause}")
