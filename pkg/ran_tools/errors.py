from typing import Optional


class RanError(Exception):
    pass


class ResourceExhausted(RanError):
    def __init__(self, requested: int, limit: int, t_max: int):
        self.requested = requested
        self.limit = limit
        self.t_max = t_max
        super().__init__(
            f"Generating t_max={t_max} needs about {requested} bytes, "
            f"over the memory budget of {limit} bytes"
        )


class NotConverged(RanError):
    def __init__(
        self, index: int, estimate: Optional[float], residual: float, iterations: int
    ):
        self.index = index
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Eigenvalue #{index} did not converge after {iterations} "
            f"iterations (best estimate {estimate}, residual {residual:.3g})"
        )


class SizeLimitExceeded(RanError):
    pass


class DegenerateHistogram(RanError, ValueError):
    pass


class InvalidVertex(RanError, IndexError):
    pass


class SnapshotFormatError(RanError):
    pass


class ExportError(RanError):
    pass
