"""Demographic and environmental scaffolding shared by all model variants.

Implements:
    - six fixed age classes (0-1, 2-3, 4-5, 6-11, 12-23, 24-59 months) with
      per-week aging rates and the stationary age profile they imply
    - the fixed who-mixes-with-whom contact matrix
    - seasonally forced transmission beta_i(t)
    - a monthly birth schedule around a mean weekly rate of 1/260
    - the two-dose vaccination policy container

Time is measured in weeks. Week 1 is the first week of January and every
forcing function has period 52, so week t and week t+52 are the same point
of the calendar year.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPolicy

WEEKS_PER_YEAR = 52

AGE_GROUP_LABELS = ("0-1m", "2-3m", "4-5m", "6-11m", "12-23m", "24-59m")

# Residence times 8, 8, 8, 24, 48, 144 weeks.
DEFAULT_AGING_RATES = (1 / 8, 1 / 8, 1 / 8, 1 / 24, 1 / 48, 1 / 144)

# Row i, column j: contact rate of one age-i individual with class j.
DEFAULT_CONTACT_MATRIX = (
    (1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
    (1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
    (1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
    (3.0, 3.0, 3.0, 1.0, 1.0, 1.0),
    (6.0, 6.0, 6.0, 2.0, 1.0, 1.0),
    (18.0, 18.0, 18.0, 6.0, 3.0, 1.0),
)

# One birth cohort per five-year (260-week) under-5 lifespan.
MEAN_BIRTH_RATE = 1.0 / 260.0

# January..December deviations from the mean weekly birth rate.
DEFAULT_BIRTH_AMPLITUDES = (
    -0.17, 0.01, 0.03, 0.25, 0.12, 0.03,
    -0.01, 0.09, 0.01, 0.13, -0.31, -0.17,
)


def stationary_fractions(aging_rates) -> np.ndarray:
    """Age profile implied by the aging chain: residence time, normalized."""
    rates = np.asarray(aging_rates, dtype=float)
    residence = 1.0 / rates
    return residence / residence.sum()


@dataclass(frozen=True, eq=False)
class AgeStructure:
    """Fixed age classes, aging rates, stationary fractions, contact matrix."""

    class_count: int = 6
    aging_rates: np.ndarray = field(default=DEFAULT_AGING_RATES)
    population_fractions: np.ndarray | None = None
    contact_matrix: np.ndarray = field(default=DEFAULT_CONTACT_MATRIX)

    def __post_init__(self):
        rates = np.asarray(self.aging_rates, dtype=float)
        if rates.shape != (self.class_count,):
            raise ValueError("aging_rates length must equal class_count")
        if np.any(rates <= 0):
            raise ValueError("aging rates must be strictly positive")
        object.__setattr__(self, "aging_rates", rates)
        contact = np.asarray(self.contact_matrix, dtype=float)
        if contact.shape != (self.class_count, self.class_count):
            raise ValueError("contact matrix must be square over age classes")
        if np.any(contact < 0):
            raise ValueError("contact matrix entries must be nonnegative")
        object.__setattr__(self, "contact_matrix", contact)
        if self.population_fractions is None:
            fractions = stationary_fractions(rates)
        else:
            fractions = np.asarray(self.population_fractions, dtype=float)
            if fractions.shape != (self.class_count,):
                raise ValueError("population_fractions length mismatch")
            if not math.isclose(fractions.sum(), 1.0, abs_tol=1e-9):
                raise ValueError("population_fractions must sum to 1")
        object.__setattr__(self, "population_fractions", fractions)


def default_age_structure() -> AgeStructure:
    return AgeStructure()


def contact_flow_asymmetry(ages: AgeStructure) -> float:
    """Residual of the contact balance f_j*C_ij = f_i*C_ji.

    Total contact flow between two classes must balance:
    C @ diag(f) is symmetric for the fixed matrix and the stationary
    fractions. Returns the max absolute asymmetry.
    """
    flow = ages.contact_matrix @ np.diag(ages.population_fractions)
    return float(np.max(np.abs(flow - flow.T)))


@dataclass(frozen=True, eq=False)
class SeasonalForcing:
    """beta_i(t) = baseline_rates[i] * (1 + amplitude*cos((2*pi*t - 52*phase)/52))."""

    baseline_rates: np.ndarray
    amplitude: float
    phase: float

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.baseline_rates, dtype=float))
        if np.any(rates <= 0):
            raise ValueError("baseline transmission rates must be positive")
        object.__setattr__(self, "baseline_rates", rates)
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError("seasonal amplitude must lie in [0, 1]")


def transmission_rate(forcing: SeasonalForcing, age_class: int, t: float) -> float:
    """Transmission rate of age class `age_class` (0-based) at week t."""
    beta0 = float(forcing.baseline_rates[age_class])
    arg = (2.0 * math.pi * t - 52.0 * forcing.phase) / 52.0
    return beta0 * (1.0 + forcing.amplitude * math.cos(arg))


def peak_transmission_week(forcing: SeasonalForcing) -> float:
    """Calendar week (in [0, 52)) at which beta_i(t) is maximal."""
    return (26.0 * forcing.phase / math.pi) % 52.0


@dataclass(frozen=True, eq=False)
class BirthSchedule:
    """Mean weekly birth rate with signed monthly deviations (Jan..Dec)."""

    mean_rate: float = MEAN_BIRTH_RATE
    monthly_amplitudes: np.ndarray = field(default=DEFAULT_BIRTH_AMPLITUDES)

    def __post_init__(self):
        if self.mean_rate < 0:
            raise ValueError("mean birth rate must be nonnegative")
        amps = np.asarray(self.monthly_amplitudes, dtype=float)
        if amps.shape != (12,):
            raise ValueError("exactly 12 monthly amplitudes required")
        if np.any(1.0 + amps <= 0):
            raise ValueError("1 + amplitude must stay positive every month")
        object.__setattr__(self, "monthly_amplitudes", amps)


def default_birth_schedule() -> BirthSchedule:
    return BirthSchedule()


def month_index(t: float) -> int:
    """0-based calendar month containing week t (week 1 = first of January)."""
    m = int(((t - 1.0) % 52.0) * 12.0 / 52.0)
    return 11 if m > 11 else m


def birth_rate(schedule: BirthSchedule, t: float) -> float:
    """Per-capita weekly birth rate at week t; piecewise constant by month."""
    return schedule.mean_rate * (1.0 + float(schedule.monthly_amplitudes[month_index(t)]))


# Dose boundaries: first dose on aging out of class 1 (2 months), second
# dose on aging out of class 2 (4 months). 0-based source classes.
DOSE_BOUNDARIES = (0, 1)


@dataclass(frozen=True)
class VaccinePolicy:
    """Two-dose vaccination at the fixed age-class boundaries.

    coverage: fraction of the aging flow receiving each dose.
    seroconversion: probability a dose confers immunity equivalent to one
        natural infection (used by the successive-infection models).
    model_a_efficacy: (eta_severe, eta_mild) breakthrough protection used by
        the vaccinated compartment of the single-infection model.
    """

    coverage: float
    seroconversion: float
    model_a_efficacy: tuple[float, float] = (0.796, 0.609)

    def __post_init__(self):
        for name, value in (
            ("coverage", self.coverage),
            ("seroconversion", self.seroconversion),
            ("eta_severe", self.model_a_efficacy[0]),
            ("eta_mild", self.model_a_efficacy[1]),
        ):
            if not 0.0 <= value <= 1.0:
                raise InvalidPolicy(f"{name} must lie in [0, 1], got {value}")
