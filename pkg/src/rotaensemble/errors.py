"""Exception types shared across the package."""


class RotaError(Exception):
    """Base class for all package-specific errors."""


class UnknownModel(RotaError):
    """Model identifier is not one of A..E."""


class LayoutMismatch(RotaError):
    """State vector layout disagrees with the model specification."""


class ZeroPopulation(RotaError):
    """An age class has nonpositive population where a denominator is needed."""


class InvalidPolicy(RotaError):
    """Vaccination policy fields outside [0, 1]."""


class StiffnessFailure(RotaError):
    """Adaptive step size underflowed during integration."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class NonConvergence(RotaError):
    """Periodic-solution criterion unmet within the year cap."""

    def __init__(self, message: str, discrepancy: float | None = None,
                 years: int | None = None):
        super().__init__(message)
        self.discrepancy = discrepancy
        self.years = years


class InvalidParams(RotaError):
    """Observation-model parameters outside their domain."""


class ShapeMismatch(RotaError):
    """Array shapes disagree."""


class ConfigError(RotaError):
    """Invalid run or sampler configuration."""


class InsufficientSamples(RotaError):
    """Too few samples for the requested summary."""


class WeightMismatch(RotaError):
    """Model weights malformed or inconsistent with the component count."""


class GridMismatch(RotaError):
    """Profiles to be combined do not share a time grid."""


class SingularTransition(RotaError):
    """An infected-state residence time is nonpositive."""


class ZeroDenominator(RotaError):
    """Division by a zero disease fraction."""


class Unattainable(RotaError):
    """Requested efficacy exceeds the maximum the structure allows."""


class AllZero(RotaError):
    """A profile with no mass cannot be normalized."""


class ParseError(RotaError):
    """Malformed input file."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class GridIncomplete(RotaError):
    """Case series grid has missing or duplicated cells."""


class MissingArtifact(RotaError):
    """A pipeline output required by a later stage is absent."""


class PipelineError(RotaError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
