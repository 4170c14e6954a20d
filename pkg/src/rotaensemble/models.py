"""The five transmission model variants.

Model A: single infection with severe/mild branches and waning immunity.
Model B: up to three successive infections, temporary immunity after each.
Model C: Model B with an incubating (exposed) stage before each infection.
Model D: up to four successive infections, no temporary immune period.
Model E: Model D, but recovery returns to the next susceptible stage only
         with probability kappa_k, otherwise immunity is permanent.

Successive infections have reduced susceptibility sigma = (1,.62,.37,.37)
and reduced infectiousness iota = (1,.5,.2,.2). Two-dose vaccination moves
the covered, seroconverted fraction of the dose-age aging flow to the state
one natural infection ahead (Model A instead uses an explicit vaccinated
compartment with breakthrough protection eta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import LayoutMismatch, UnknownModel, ZeroPopulation
from .structure import (AgeStructure, BirthSchedule, SeasonalForcing,
                        VaccinePolicy, birth_rate, default_age_structure,
                        default_birth_schedule)

MODEL_IDS = ("A", "B", "C", "D", "E")


@dataclass(frozen=True)
class ModelSpec:
    """Model identity plus the fixed epidemiological rate constants."""

    model_id: str
    maternal_waning: float = 1.0 / 13.0
    immunity_waning: float = 1.0 / 52.0
    recovery_first: float = 1.0
    recovery_later: float = 2.0
    incubation_rate: float = 7.0
    relative_susceptibility: tuple = (1.0, 0.62, 0.37, 0.37)
    relative_infectiousness: tuple = (1.0, 0.5, 0.2, 0.2)
    severe_fractions: tuple = (0.13, 0.03, 0.0)
    severe_split: float = 0.24
    mild_split: float = 0.76
    any_rvge_fractions: tuple = (0.47, 0.25, 0.32)
    return_probabilities: tuple = (0.62, 0.65, 0.85)

    def __post_init__(self):
        if self.model_id not in MODEL_IDS:
            raise UnknownModel(f"model_id must be one of {MODEL_IDS}, "
                               f"got {self.model_id!r}")
        for name in ("maternal_waning", "immunity_waning", "recovery_first",
                     "recovery_later", "incubation_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("relative_susceptibility", "relative_infectiousness",
                     "severe_fractions", "any_rvge_fractions",
                     "return_probabilities"):
            if any(not 0.0 <= v <= 1.0 for v in getattr(self, name)):
                raise ValueError(f"{name} entries must lie in [0, 1]")


def model_spec(model_id: str) -> ModelSpec:
    return ModelSpec(model_id=str(model_id).strip().upper())


_COMPARTMENTS = {
    "A": ("M", "S", "Is", "Im", "R"),
    "B": ("M", "S1", "I1", "R1", "S2", "I2", "R2", "S3", "I3", "R3"),
    "C": ("M", "S1", "I1", "R1", "S2", "I2", "R2", "S3", "I3", "R3",
          "E1", "E2", "E3"),
    "D": ("M", "S1", "I1", "S2", "I2", "S3", "I3", "S4", "I4", "Rfinal"),
    "E": ("M", "S1", "I1", "S2", "I2", "S3", "I3", "S4", "I4", "Rfinal"),
}

_CHANNELS = {
    "A": ("severe", "mild"),
    "B": ("first", "second", "third"),
    "C": ("first", "second", "third"),
    "D": ("first", "second", "third", "fourth"),
    "E": ("first", "second", "third", "fourth"),
}

# infection order associated with each compartment name
_ORDER = {
    "M": 0, "V": 0,
    "S": 1, "Is": 1, "Im": 1, "R": 1,
    "S1": 1, "E1": 1, "I1": 1, "R1": 1,
    "S2": 2, "E2": 2, "I2": 2, "R2": 2,
    "S3": 3, "E3": 3, "I3": 3, "R3": 3,
    "S4": 4, "I4": 4, "Rfinal": 4,
}

_KERNEL_CODES = {
    ("A", False): K.CODE_A,
    ("A", True): K.CODE_A_VAX,
    ("B", False): K.CODE_B,
    ("B", True): K.CODE_B,
    ("C", False): K.CODE_C,
    ("C", True): K.CODE_C,
    ("D", False): K.CODE_D,
    ("D", True): K.CODE_D,
    ("E", False): K.CODE_E,
    ("E", True): K.CODE_E,
}


@dataclass(frozen=True)
class StateLayout:
    """Compartment-major flat indexing for one model variant."""

    model_id: str
    vaccinated: bool
    compartments: tuple
    channels: tuple
    class_count: int = 6

    @property
    def n_state(self) -> int:
        return len(self.compartments) * self.class_count

    @property
    def n_channel(self) -> int:
        return len(self.channels) * self.class_count

    @property
    def dim(self) -> int:
        return self.n_state + self.n_channel

    def index(self, compartment: str, age_class: int) -> int:
        return self.compartments.index(compartment) * self.class_count + age_class

    def labels(self):
        """(compartment_name, infection_order, age_class) per state entry."""
        return [(name, _ORDER[name], a)
                for name in self.compartments
                for a in range(self.class_count)]


def state_layout(model_id: str, vaccinated: bool = False) -> StateLayout:
    if model_id not in MODEL_IDS:
        raise UnknownModel(f"unknown model {model_id!r}")
    comps = _COMPARTMENTS[model_id]
    if vaccinated and model_id == "A":
        comps = comps + ("V",)
    return StateLayout(model_id=model_id, vaccinated=vaccinated,
                       compartments=comps, channels=_CHANNELS[model_id])


@dataclass(frozen=True, eq=False)
class StateVector:
    """Occupancies for one model layout, flattened compartment-major."""

    layout: StateLayout
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.layout.n_state,):
            raise LayoutMismatch(
                f"state for model {self.layout.model_id} needs "
                f"{self.layout.n_state} entries, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, layout: StateLayout) -> "StateVector":
        return cls(layout, np.zeros(layout.n_state))

    def get(self, compartment: str, age_class: int) -> float:
        return float(self.values[self.layout.index(compartment, age_class)])

    def class_populations(self) -> np.ndarray:
        return self.values.reshape(len(self.layout.compartments),
                                   self.layout.class_count).sum(axis=0)

    def total(self) -> float:
        return float(self.values.sum())


def pack_params(spec: ModelSpec, ages: AgeStructure, forcing: SeasonalForcing,
                births: BirthSchedule, policy: VaccinePolicy | None = None,
                birth_population: float | None = None) -> np.ndarray:
    """Flatten everything the compiled kernels need into one float64 array."""
    p = np.zeros(K.N_PARS)
    p[K.P_B] = forcing.amplitude
    p[K.P_PHI] = forcing.phase
    beta = np.asarray(forcing.baseline_rates, dtype=float)
    if beta.size == 1:
        beta = np.full(6, float(beta[0]))
    if beta.shape != (6,):
        raise LayoutMismatch("six baseline transmission rates required")
    p[K.P_BETA0:K.P_BETA0 + 6] = beta
    p[K.P_MUBAR] = births.mean_rate
    p[K.P_AMPL:K.P_AMPL + 12] = births.monthly_amplitudes
    p[K.P_ALPHA:K.P_ALPHA + 6] = ages.aging_rates
    p[K.P_CONTACT:K.P_CONTACT + 36] = ages.contact_matrix.ravel()
    p[K.P_DELTA] = spec.maternal_waning
    p[K.P_TAU] = spec.immunity_waning
    p[K.P_GAMMA1] = spec.recovery_first
    p[K.P_GAMMA2] = spec.recovery_later
    p[K.P_INCUB] = spec.incubation_rate
    p[K.P_SIGMA:K.P_SIGMA + 4] = spec.relative_susceptibility
    p[K.P_IOTA:K.P_IOTA + 4] = spec.relative_infectiousness
    p[K.P_KAPPA:K.P_KAPPA + 3] = spec.return_probabilities
    if policy is not None:
        p[K.P_SC] = policy.coverage * policy.seroconversion
        p[K.P_CVAX] = policy.coverage
        p[K.P_ETA_S] = policy.model_a_efficacy[0]
        p[K.P_ETA_M] = policy.model_a_efficacy[1]
    p[K.P_NREF] = -1.0 if birth_population is None else float(birth_population)
    p[K.P_SPLIT_S] = spec.severe_split
    p[K.P_SPLIT_M] = spec.mild_split
    return p


@dataclass(frozen=True, eq=False)
class ModelDynamics:
    """A model's derivative function bound to its demographic context.

    Callable on (t, full_array) where full_array stacks live compartments
    and incidence channels; the integrator consumes `code` and `params`
    directly.
    """

    spec: ModelSpec
    layout: StateLayout
    code: int
    params: np.ndarray

    def __call__(self, t: float, y_full: np.ndarray) -> np.ndarray:
        y = np.asarray(y_full, dtype=float)
        if y.shape != (self.layout.dim,):
            raise LayoutMismatch(
                f"expected {self.layout.dim} entries (state plus channels), "
                f"got {y.shape}")
        dy = np.empty_like(y)
        K._rhs(self.code, float(t), y, dy, self.params, np.empty(12))
        return dy

    def state_derivative(self, state: StateVector, t: float) -> StateVector:
        full = np.zeros(self.layout.dim)
        full[:self.layout.n_state] = state.values
        dy = self(t, full)
        return StateVector(self.layout, dy[:self.layout.n_state])


def make_dynamics(spec: ModelSpec, ages: AgeStructure | None = None,
                  forcing: SeasonalForcing | None = None,
                  births: BirthSchedule | None = None,
                  policy: VaccinePolicy | None = None,
                  birth_population: float | None = None) -> ModelDynamics:
    ages = ages if ages is not None else default_age_structure()
    births = births if births is not None else default_birth_schedule()
    if forcing is None:
        raise ValueError("seasonal forcing is required")
    vaccinated = policy is not None and spec.model_id == "A"
    layout = state_layout(spec.model_id, vaccinated=vaccinated)
    code = _KERNEL_CODES[(spec.model_id, policy is not None)]
    params = pack_params(spec, ages, forcing, births, policy, birth_population)
    return ModelDynamics(spec=spec, layout=layout, code=code, params=params)


def _check_layout(spec: ModelSpec, state: StateVector,
                  vaccinated_ok: bool = True):
    if state.layout.model_id != spec.model_id:
        raise LayoutMismatch(
            f"state is for model {state.layout.model_id}, "
            f"spec is model {spec.model_id}")
    if state.layout.vaccinated and not vaccinated_ok:
        raise LayoutMismatch("vaccinated layout passed where the base "
                             "layout is required")


def force_of_infection(spec: ModelSpec, state: StateVector,
                       ages: AgeStructure, forcing: SeasonalForcing,
                       t: float) -> np.ndarray:
    """Per-age infection rate lambda_i at week t.

    lambda_i = sum_j beta_j(t) C_ij W_j / N_j where W_j weights infectious
    occupancies by the relative-infectiousness schedule.
    """
    _check_layout(spec, state)
    layout = state.layout
    n = state.class_populations()
    if np.any(n <= 0.0):
        raise ZeroPopulation("every age class needs positive population "
                             "for the frequency-dependent contact term")
    iota = spec.relative_infectiousness
    w = np.zeros(layout.class_count)
    if spec.model_id == "A":
        for a in range(6):
            w[a] = state.get("Is", a) + iota[1] * state.get("Im", a)
    else:
        names = ["I1", "I2", "I3"] if spec.model_id in ("B", "C") else \
                ["I1", "I2", "I3", "I4"]
        for a in range(6):
            w[a] = sum(iota[k] * state.get(name, a)
                       for k, name in enumerate(names))
    beta = np.asarray(forcing.baseline_rates, dtype=float)
    if beta.size == 1:
        beta = np.full(layout.class_count, float(beta[0]))
    season = 1.0 + forcing.amplitude * math.cos(
        (2.0 * math.pi * t - 52.0 * forcing.phase) / 52.0)
    lam = ages.contact_matrix @ (beta * season * w / n)
    return lam


def derivatives(spec: ModelSpec, state: StateVector, ages: AgeStructure,
                forcing: SeasonalForcing, births: BirthSchedule,
                t: float) -> StateVector:
    """Time derivative of the state under the model's equations.

    The birth inflow mu(t)*N reads N from the state's current total; the
    integration engine substitutes a fixed reference population instead
    (see engine module).
    """
    _check_layout(spec, state, vaccinated_ok=False)
    dyn = make_dynamics(spec, ages, forcing, births, policy=None,
                        birth_population=None)
    return dyn.state_derivative(state, t)


def apply_vaccination_wiring(spec: ModelSpec, policy: VaccinePolicy):
    """Derivative function with two-dose vaccination spliced into the aging flow.

    Returns a callable with the same signature as `derivatives` minus the
    spec. For the successive-infection models each dose moves coverage *
    seroconversion of the dose-boundary flow one infection ahead; for
    Model A coverage of the boundary flow enters the vaccinated compartment.
    Coverage zero reproduces the unvaccinated derivative exactly.
    """
    def wired(state: StateVector, ages: AgeStructure, forcing: SeasonalForcing,
              births: BirthSchedule, t: float) -> StateVector:
        _check_layout(spec, state)
        dyn = make_dynamics(spec, ages, forcing, births, policy=policy,
                            birth_population=None)
        if state.layout.vaccinated != dyn.layout.vaccinated:
            raise LayoutMismatch(
                "vaccinated dynamics for this model use the layout "
                f"{dyn.layout.compartments}; got {state.layout.compartments}")
        return dyn.state_derivative(state, t)

    return wired


def forcing_from_params(beta0, amplitude: float, phase: float) -> SeasonalForcing:
    beta = np.asarray(beta0, dtype=float)
    if beta.size == 1:
        beta = np.full(6, float(beta))
    return SeasonalForcing(baseline_rates=beta, amplitude=amplitude, phase=phase)
