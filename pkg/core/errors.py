# core/errors.py
from typing import List, Optional, Sequence


class RejectInferenceError(RuntimeError):
    """Base class for every error raised by the package."""


class ConfigError(RejectInferenceError):
    def __init__(self, message: str, keys: Optional[Sequence[str]] = None):
        super().__init__(message)
        self.keys: List[str] = list(keys or [])


class DataError(RejectInferenceError):
    """Ingestion, schema or masking problem."""


class DimensionError(DataError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"dimension mismatch: expected {expected} features, got {got}")
        self.expected = expected
        self.got = got


class SingularInformationError(RejectInferenceError):
    def __init__(self, columns: Sequence[int]):
        cols = ", ".join(str(c) for c in columns)
        super().__init__(f"singular information matrix; collinear design columns: [{cols}]")
        self.columns: List[int] = list(columns)


class ConvergenceError(RejectInferenceError):
    def __init__(self, message: str, diagnostic: str = ""):
        super().__init__(f"{message}: {diagnostic}" if diagnostic else message)
        self.diagnostic = diagnostic


class PositivityError(RejectInferenceError):
    """p(f|x) > 0 does not hold where a reweighting needs it."""

    def __init__(self, count: int):
        super().__init__(f"p(f|x) > 0 violated: {count} records have zero financing propensity")
        self.count = count


class MechanismError(RejectInferenceError):
    pass


class BandError(RejectInferenceError):
    pass


class MetricError(RejectInferenceError):
    pass


class InsufficientReplicationsError(RejectInferenceError):
    def __init__(self, got: int, minimum: int):
        super().__init__(f"insufficient replications: got {got}, need at least {minimum}")
        self.got = got
        self.minimum = minimum


class LeakageError(RejectInferenceError):
    def __init__(self, ids: Sequence[str]):
        shown = ", ".join(list(ids)[:5])
        super().__init__(f"test leakage: {len(ids)} ids shared between train and test ({shown})")
        self.ids: List[str] = list(ids)


class NumericalFailure(RejectInferenceError):
    def __init__(self, message: str, method: str = "", rate: Optional[float] = None):
        where = f"method={method or '?'}"
        if rate is not None:
            where += f" rate={rate:.4g}"
        super().__init__(f"{message} ({where})")
        self.method = method
        self.rate = rate
