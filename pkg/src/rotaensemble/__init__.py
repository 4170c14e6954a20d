"""Ensemble inference and vaccination projection for rotavirus
transmission models.

Five age-structured compartmental models are fit to weekly age-stratified
case counts by random-walk MCMC under a negative-binomial observation
model, compared by BIC-approximated posterior model probabilities, and
combined by Bayesian model averaging for burden, R0, and two-dose
vaccination impact projections.
"""

__version__ = "0.1.0"

from .errors import (AllZero, ConfigError, GridIncomplete, GridMismatch,
                     InsufficientSamples, InvalidParams, InvalidPolicy,
                     LayoutMismatch, MissingArtifact, NonConvergence,
                     ParseError, PipelineError, RotaError, ShapeMismatch,
                     SingularTransition, StiffnessFailure, Unattainable,
                     UnknownModel, WeightMismatch, ZeroDenominator,
                     ZeroPopulation)
from .structure import (AgeStructure, BirthSchedule, SeasonalForcing,
                        VaccinePolicy, birth_rate, default_age_structure,
                        default_birth_schedule, month_index,
                        peak_transmission_week, stationary_fractions,
                        transmission_rate)
from .parameters import PARAM_NAMES, ParamVector, in_support
from .models import (MODEL_IDS, ModelDynamics, ModelSpec, StateLayout,
                     StateVector, apply_vaccination_wiring, derivatives,
                     force_of_infection, forcing_from_params, make_dynamics,
                     model_spec, state_layout)
from .engine import (PeriodicSolution, Trajectory, default_initial_state,
                     find_periodic_solution, integrate, maternal_fractions,
                     project)
from .observation import (CaseSeries, expected_reported_cases,
                          log_likelihood, nb_log_pmf, reported_case_means,
                          severe_incidence, simulate_observations)
from .inference import (DEFAULT_PRIORS, McmcConfig, PosteriorChain,
                        PosteriorSummary, PriorSpec, hpd_interval,
                        log_prior, make_log_posterior, posterior_summary,
                        run_mcmc)
from .ensemble import (BmaEstimate, ModelEvidence, bic, bma_combine_profile,
                       bma_combine_scalar, mixture_interval,
                       model_evidences, pmp_weights,
                       posterior_model_probabilities)
from .metrics import (BurdenEstimate, ImpactResult, NextGenerationMatrix,
                      NgmInputs, age_distribution, annual_burden,
                      model_a_efficacy, next_generation_matrix,
                      ngm_from_inputs, reporting_prior_mean,
                      seroconversion_from_efficacy, spectral_radius,
                      vaccination_impact, vaccine_efficacy_forward)
from .storage import (load_case_series, load_chain, save_chain,
                      write_case_series)
from .pipeline import RunConfig, parse_config, run_pipeline
