"""
Pipeline Exceptions
Typed failures raised by the library modules; the CLI maps them to exit codes.
"""
from typing import Dict, Optional


class PipelineError(Exception):
    """Base class for every failure the pipeline reports to the user."""


class InvalidShapeError(PipelineError):
    """Tensor shapes do not satisfy an operation's contract."""


class FormatError(PipelineError):
    """A volume, mask, patch set or checkpoint file is malformed."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{message} (field: {field})" if field else message)


class ManifestError(PipelineError):
    """The case manifest is malformed."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class DegenerateVolumeError(PipelineError):
    """The masked region has no usable intensity spread."""


class ExtractionExhaustedError(PipelineError):
    """Not enough acceptable patch candidates were found."""

    def __init__(self, case_id: str, achieved: int, requested: int):
        self.case_id = case_id
        self.achieved = achieved
        self.requested = requested
        super().__init__(
            f"case {case_id}: extracted {achieved} of {requested} patches before giving up"
        )


class DegenerateDataError(PipelineError):
    """Clustering input has fewer distinct points than clusters."""


class DivergenceError(PipelineError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, learning_rate: float, phase: str = "train"):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(
            f"{phase} diverged at epoch {epoch} (learning rate {learning_rate:g})"
        )


class ConfigError(PipelineError):
    """A configuration value is out of range or unknown."""


class EmptyRoiError(PipelineError):
    """No sliding window was accepted inside the region of interest."""

    def __init__(self, case_id: str):
        self.case_id = case_id
        super().__init__(f"case {case_id}: no window inside the region of interest")


class SignatureBatchError(PipelineError):
    """One or more cases failed while computing signatures."""

    def __init__(self, failures: Dict[str, str]):
        self.failures = dict(failures)
        listing = "; ".join(f"{case}: {msg}" for case, msg in self.failures.items())
        super().__init__(f"{len(self.failures)} case(s) failed: {listing}")


class DegenerateLabelError(PipelineError):
    """A classifier was asked to learn from a single class."""


class ConvergenceError(PipelineError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message: str, change: float):
        self.change = change
        super().__init__(f"{message} (last change {change:.3e})")


class InputError(PipelineError):
    """Arguments are inconsistent with each other."""


class GenerationError(PipelineError):
    """Synthetic phantom generation could not meet its targets."""


class PipelineIOError(PipelineError):
    """Reading or writing a pipeline file failed."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
