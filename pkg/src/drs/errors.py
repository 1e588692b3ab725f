"""Exception hierarchy shared across the drs package."""


class DrsError(Exception):
    """Base class for all drs errors."""


class MalformedDiff(DrsError):
    """Raised when non-empty diff input contains no recognizable file header."""


class BudgetTooSmall(DrsError):
    """Raised when the protected prefix alone exceeds the truncation budget."""


class InsufficientSamples(DrsError):
    """Raised when a metric has too few finite samples to fit thresholds."""

    def __init__(self, metric: str, count: int, minimum: int):
        super().__init__(
            f"metric {metric!r} has {count} finite samples, needs >= {minimum}"
        )
        self.metric = metric
        self.count = count
        self.minimum = minimum


class DegenerateTrainingSet(DrsError):
    """Raised when training data does not contain both classes."""


class BackendTimeout(DrsError):
    """Raised when the remote scorer does not answer within the deadline."""


class BackendUnavailable(DrsError):
    """Raised when the remote scorer cannot be reached."""


class MalformedBackendResponse(DrsError):
    """Raised when the remote scorer answers with an unusable body."""


class DiffTooLarge(DrsError):
    """Raised when a diff exceeds the configured byte limit before dispatch."""


class InvalidPayload(DrsError):
    """Raised when a request body is structurally valid JSON but unusable."""


class MissingColumn(DrsError):
    """Raised when a dataset file lacks a required column."""

    def __init__(self, column: str):
        super().__init__(f"dataset is missing required column {column!r}")
        self.column = column


class EmptyDataset(DrsError):
    """Raised when a dataset file yields no usable rows."""


class LengthMismatch(DrsError):
    """Raised when scores and labels differ in length."""


class SingleClassInput(DrsError):
    """Raised when an operation needs both classes but got only one."""


class CommitNotFound(DrsError):
    """Raised when the hosting service does not know the requested commit."""


class HostingServiceError(DrsError):
    """Raised when the hosting service fails (5xx, rate limit, network)."""

    def __init__(self, message: str, retry_after: str | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class SignatureMismatch(DrsError):
    """Raised when a webhook payload fails HMAC verification."""
