"""Exception hierarchy.

Every error carries a machine-readable ``kind`` used in reports and for the
CLI exit status.
"""
from __future__ import annotations

from typing import Any


class AlmostActionError(Exception):
    kind = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "message": str(self)}
        out.update({k: _plain(v) for k, v in self.details.items()})
        return out


def _plain(v):
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return str(v)


class ModelMismatchError(AlmostActionError, ValueError):
    kind = "model_mismatch"


class DomainError(AlmostActionError, ValueError):
    """An argument is outside the range an operation accepts."""

    kind = "domain"


class GroupSpecError(AlmostActionError, ValueError):
    kind = "group_spec"


class ForeignSymbolError(AlmostActionError, KeyError):
    kind = "foreign_symbol"

    def __str__(self):
        return self.args[0]


class OracleInconsistency(AlmostActionError):
    kind = "oracle_inconsistency"


class RelationViolation(AlmostActionError):
    kind = "relation_violation"


class OutOfSupport(AlmostActionError, KeyError):
    kind = "out_of_support"

    def __str__(self):
        return self.args[0]


class SampleError(AlmostActionError, ValueError):
    kind = "sample"


class CountMismatch(AlmostActionError):
    """Cell counts differ along an orbit of cells; the index ``n`` is too small."""

    kind = "count_mismatch"


class GapViolation(CountMismatch):
    """An input permutation moves a point out of its expected cell."""

    kind = "gap_violation"


class LabellingObstruction(AlmostActionError):
    kind = "labelling_obstruction"


class IntertwiningObstruction(AlmostActionError):
    kind = "intertwining_obstruction"


class CertificateFailure(AlmostActionError):
    kind = "certificate_failure"


class NotEquicontinuous(AlmostActionError):
    kind = "not_equicontinuous"


class InsufficientData(AlmostActionError):
    kind = "insufficient_data"


class LiftingError(AlmostActionError, ValueError):
    """A spectral or norm precondition of a lifting routine fails."""

    kind = "lifting"


class ConfigError(AlmostActionError, ValueError):
    kind = "config"

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}", path=path)


class ConditioningWarning(UserWarning):
    pass
