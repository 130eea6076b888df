"""Exception types shared across the package."""


class IdbenchError(Exception):
    """Base class for all idbench errors."""


class ManifestError(IdbenchError):
    """Invalid manifest file or violated manifest invariant."""


class EmbeddingIOError(IdbenchError):
    """Malformed or inconsistent embedding file / matrix."""


class ProtocolError(IdbenchError):
    """Probe/gallery partitioning could not be carried out as requested."""


class SearchError(IdbenchError):
    """Rank-one search preconditions violated."""


class MetricError(IdbenchError):
    """Metric computation rejected its inputs."""


class DegradeError(IdbenchError):
    """Image degradation preconditions violated."""


class SimulateError(IdbenchError):
    """Invalid CohortSpec parameters."""


class ConfigError(IdbenchError):
    """Invalid experiment configuration (CLI exit code 2)."""


class CellError(IdbenchError):
    """A single experiment cell failed (CLI exit code 3)."""
