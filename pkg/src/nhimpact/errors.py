"""Exception hierarchy.

Every error maps to a CLI exit code through its ``exit_code`` attribute.
Errors raised during a run carry the partial trajectory (``trajectory``)
so callers can still write out what was computed.
"""

from __future__ import annotations


class NHImpactError(Exception):
    exit_code = 3

    def __init__(self, message: str, *, trajectory=None, **details):
        super().__init__(message)
        self.trajectory = trajectory
        self.details = details


class SpecificationError(NHImpactError):
    """Malformed system, scenario or config (dimension mismatch, bad parameter)."""

    exit_code = 2


class ConfigError(SpecificationError):
    pass


class NumericalError(NHImpactError):
    exit_code = 3


class SingularMetricError(NumericalError):
    pass


class RankDropError(NumericalError):
    pass


class GeometryError(NumericalError):
    pass


class ConstraintDegeneracyError(NumericalError):
    pass


class BlowUpError(NumericalError):
    pass


class StepRejectedError(NumericalError):
    pass


class EventLocalizationError(NumericalError):
    pass


class ImpactInfeasibleError(NumericalError):
    pass


class StructuralMismatchError(NumericalError):
    pass


class HaltError(NHImpactError):
    """Run halted by a safeguard rather than a numerical failure."""

    exit_code = 4


class ZenoError(HaltError):
    pass


class GrazingError(HaltError):
    pass


class OutputError(NHImpactError):
    """Output file could not be written."""

    exit_code = 2
