"""Random-walk Metropolis-Hastings estimation of the ten free parameters.

Sampling runs on a transformed space (logit for b and rho, affine-logit
for phi, log for r and the six baseline rates) so proposals stay
in-support; the Jacobian correction keeps the natural-space posterior the
stationary distribution. Per-component proposal scales adapt during
burn-in only and are frozen afterward.
"""
from __future__ import annotations

import logging
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .engine import (DEFAULT_ATOL, DEFAULT_RTOL, find_periodic_solution)
from .errors import (ConfigError, InsufficientSamples, NonConvergence,
                     StiffnessFailure)
from .models import ModelSpec
from .observation import CaseSeries, log_likelihood
from .parameters import (PARAM_NAMES, PHI_LOWER, PHI_UPPER, ParamVector,
                         in_support)
from .structure import AgeStructure, BirthSchedule

logger = logging.getLogger(__name__)

DEFAULT_FIT_POPULATION = 200_000.0
_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / _SQRT2))


def _norm_logpdf(x: float, mean: float, sd: float) -> float:
    z = (x - mean) / sd
    return -0.5 * z * z - _LOG_SQRT_2PI - math.log(sd)


@dataclass(frozen=True)
class PriorSpec:
    """Independent priors for the ten components.

    Baseline rates are Normal(20, 5) truncated to positive values, the
    reporting rate Normal(0.117, 0.06) truncated to (0, 1], the dispersion
    Gamma(0.001, 0.001) in shape/rate form, and amplitude and phase are
    uniform on their supports.
    """

    beta0_mean: float = 20.0
    beta0_sd: float = 5.0
    amplitude_low: float = 0.0
    amplitude_high: float = 1.0
    phase_low: float = PHI_LOWER
    phase_high: float = PHI_UPPER
    dispersion_shape: float = 0.001
    dispersion_rate: float = 0.001
    reporting_mean: float = 0.117
    reporting_sd: float = 0.06

    def mean_vector(self) -> ParamVector:
        """Starting point for chains: component prior means."""
        return ParamVector(
            b=0.5 * (self.amplitude_low + self.amplitude_high),
            phi=0.5 * (self.phase_low + self.phase_high),
            r=self.dispersion_shape / self.dispersion_rate,
            rho=self.reporting_mean,
            beta0=np.full(6, self.beta0_mean))


DEFAULT_PRIORS = PriorSpec()


def log_prior(theta: ParamVector, priors: PriorSpec = DEFAULT_PRIORS) -> float:
    """Sum of component log-densities; -inf anywhere outside the supports."""
    p = priors
    if not (p.amplitude_low <= theta.b <= p.amplitude_high):
        return -math.inf
    if not (p.phase_low <= theta.phi <= p.phase_high):
        return -math.inf
    if not (theta.r > 0.0 and math.isfinite(theta.r)):
        return -math.inf
    if not 0.0 < theta.rho <= 1.0:
        return -math.inf
    if not np.all((theta.beta0 > 0.0) & np.isfinite(theta.beta0)):
        return -math.inf
    total = -math.log(p.amplitude_high - p.amplitude_low)
    total += -math.log(p.phase_high - p.phase_low)
    a, lam = p.dispersion_shape, p.dispersion_rate
    total += a * math.log(lam) - math.lgamma(a) + (a - 1.0) * math.log(theta.r) \
        - lam * theta.r
    rho_mass = _norm_cdf((1.0 - p.reporting_mean) / p.reporting_sd) \
        - _norm_cdf(-p.reporting_mean / p.reporting_sd)
    total += _norm_logpdf(theta.rho, p.reporting_mean, p.reporting_sd) \
        - math.log(rho_mass)
    beta_mass = _norm_cdf(p.beta0_mean / p.beta0_sd)
    for i in range(6):
        total += _norm_logpdf(float(theta.beta0[i]), p.beta0_mean, p.beta0_sd) \
            - math.log(beta_mass)
    return total


# Transform codes per component, in chain-column order.
_T_LOGIT, _T_AFFINE, _T_LOG = 0, 1, 2
_TRANSFORM_CODES = (_T_LOGIT, _T_AFFINE, _T_LOG, _T_LOGIT,
                    _T_LOG, _T_LOG, _T_LOG, _T_LOG, _T_LOG, _T_LOG)


def _softplus(x: float) -> float:
    return math.log1p(math.exp(-abs(x))) + max(x, 0.0)


def _expit(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def to_unconstrained(values: np.ndarray,
                     priors: PriorSpec = DEFAULT_PRIORS) -> np.ndarray:
    """Map a natural-space parameter array (10,) to sampling space."""
    z = np.empty(10)
    lo, hi = priors.phase_low, priors.phase_high
    for j, code in enumerate(_TRANSFORM_CODES):
        x = float(values[j])
        if code == _T_LOGIT:
            z[j] = math.log(x / (1.0 - x))
        elif code == _T_AFFINE:
            u = (x - lo) / (hi - lo)
            z[j] = math.log(u / (1.0 - u))
        else:
            z[j] = math.log(x)
    return z


def from_unconstrained(z: np.ndarray,
                       priors: PriorSpec = DEFAULT_PRIORS):
    """Inverse transform; returns (natural values (10,), log|Jacobian|)."""
    values = np.empty(10)
    lo, hi = priors.phase_low, priors.phase_high
    log_jac = 0.0
    for j, code in enumerate(_TRANSFORM_CODES):
        x = float(z[j])
        if code == _T_LOGIT:
            values[j] = _expit(x)
            log_jac += -_softplus(x) - _softplus(-x)
        elif code == _T_AFFINE:
            values[j] = lo + (hi - lo) * _expit(x)
            log_jac += math.log(hi - lo) - _softplus(x) - _softplus(-x)
        else:
            # exp overflows past ~709.8; a nearly flat log-space direction
            # (the vague dispersion prior) can push proposals that far, so
            # map them to inf and let the support check reject them
            values[j] = math.exp(x) if x < 709.0 else math.inf
            log_jac += x
    return values, log_jac


def make_log_posterior(spec: ModelSpec, series: CaseSeries,
                       priors: PriorSpec = DEFAULT_PRIORS, *,
                       ages: AgeStructure | None = None,
                       births: BirthSchedule | None = None,
                       population_size: float = DEFAULT_FIT_POPULATION,
                       rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                       cache_size: int = 16, warm_start: bool = False,
                       week_offset: int = 0):
    """Natural-space log-posterior closure for one model and data set.

    week_offset shifts how data weeks map onto the annual cycle (data week
    w reads profile week (w - 1 + offset) mod 52), for series that do not
    start in the first week of January.

    The expected-case profile is cached on (b, phi, rho, beta0): moves of
    the dispersion r re-use the cached profile. With warm_start the
    periodic search restarts from the most recent converged cycle, which
    changes the profile by less than the convergence tolerance and cuts
    the per-evaluation cost several-fold; chains remain deterministic.
    Integration failures score -inf and are logged.
    """
    cache: OrderedDict = OrderedDict()
    warm = {"state": None}
    week_rows = None
    if series.n_weeks > 0:
        week_rows = (series.weeks - 1 + int(week_offset)) % 52

    def _profile(theta: ParamVector):
        key = (theta.b, theta.phi, theta.rho, theta.beta0.tobytes())
        if key in cache:
            cache.move_to_end(key)
            return cache[key]
        try:
            sol = find_periodic_solution(
                spec, theta, ages, births,
                population_size=population_size,
                initial_state=warm["state"] if warm_start else None,
                rtol=rtol, atol=atol)
            xi = sol.expected_profile[week_rows].T.copy()
            if warm_start:
                warm["state"] = sol.cycle_start_state
        except (NonConvergence, StiffnessFailure) as exc:
            logger.warning("model %s: periodic solve failed at b=%.4g "
                           "phi=%.4g rho=%.4g: %s",
                           spec.model_id, theta.b, theta.phi, theta.rho, exc)
            xi = None
        cache[key] = xi
        if len(cache) > cache_size:
            cache.popitem(last=False)
        return xi

    def log_posterior(theta: ParamVector) -> float:
        if not in_support(theta):
            return -math.inf
        lp = log_prior(theta, priors)
        if lp == -math.inf:
            return -math.inf
        if series.n_weeks == 0:
            return lp
        xi = _profile(theta)
        if xi is None:
            return -math.inf
        return log_likelihood(series, xi, theta.r) + lp

    return log_posterior


@dataclass(frozen=True)
class McmcConfig:
    """Chain length, burn-in, seed, and proposal-adaptation settings."""

    iterations: int = 50_000
    burn_in: int = 10_000
    seed: int = 0
    initial_scale: float = 0.5
    adapt_batch: int = 50
    target_acceptance: float = 0.25

    def __post_init__(self):
        if self.iterations <= 0 or self.burn_in <= 0:
            raise ConfigError("iterations and burn_in must be positive")
        if self.iterations <= self.burn_in:
            raise ConfigError("iterations must exceed burn_in")
        if self.initial_scale <= 0.0:
            raise ConfigError("initial proposal scale must be positive")
        if self.adapt_batch <= 0:
            raise ConfigError("adaptation batch must be positive")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ConfigError("target acceptance must lie in (0, 1)")


def componentwise_random_walk(log_density, start: np.ndarray, *,
                              iterations: int, burn_in: int,
                              rng: np.random.Generator,
                              initial_scales, adapt_batch: int = 50,
                              target_acceptance: float = 0.25):
    """Adaptive componentwise Gaussian random walk on an open space.

    log_density(x) returns (value used for acceptance, payload stored with
    the sample). Scales adapt per component in burn-in batches, shrinking
    the adjustment as 1/sqrt(batch); they are frozen after burn-in so the
    kept samples target the exact stationary distribution.

    Returns (kept states, kept payloads, post-burn-in acceptance rate,
    final scales).
    """
    x = np.array(start, dtype=float)
    dim = x.size
    log_scale = np.log(np.broadcast_to(
        np.asarray(initial_scales, dtype=float), (dim,)).copy())
    value, payload = log_density(x)
    if not math.isfinite(value):
        raise ConfigError("starting point has zero target density")
    n_keep = iterations - burn_in
    kept = np.empty((n_keep, dim))
    payloads = np.empty(n_keep)
    batch_accepts = np.zeros(dim)
    in_batch = 0
    batches_done = 0
    accepted_after = 0
    for it in range(iterations):
        for j in range(dim):
            proposal = x.copy()
            proposal[j] += math.exp(log_scale[j]) * rng.standard_normal()
            cand_value, cand_payload = log_density(proposal)
            delta = cand_value - value
            accept = delta >= 0.0 or math.log(rng.random()) < delta
            if accept:
                x = proposal
                value = cand_value
                payload = cand_payload
                if it < burn_in:
                    batch_accepts[j] += 1.0
                else:
                    accepted_after += 1
        if it < burn_in:
            in_batch += 1
            if in_batch == adapt_batch:
                batches_done += 1
                step = min(0.1, 1.0 / math.sqrt(batches_done))
                rates = batch_accepts / adapt_batch
                log_scale += np.where(rates > target_acceptance, step, -step)
                batch_accepts[:] = 0.0
                in_batch = 0
        else:
            k = it - burn_in
            kept[k] = x
            payloads[k] = payload
    acceptance = accepted_after / float(n_keep * dim)
    return kept, payloads, acceptance, np.exp(log_scale)


@dataclass(frozen=True, eq=False)
class PosteriorChain:
    """Post-burn-in samples in natural space, one row per iteration."""

    model_id: str
    samples: np.ndarray        # (n, 10) in chain-column order
    log_posteriors: np.ndarray  # natural-space posterior, no Jacobian
    acceptance_rate: float
    seed: int
    burn_in_length: int
    n_observations: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != len(PARAM_NAMES):
            raise ValueError("chain samples must be (n, 10)")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "log_posteriors",
                           np.asarray(self.log_posteriors, dtype=float))

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    def parameter(self, name: str) -> np.ndarray:
        return self.samples[:, PARAM_NAMES.index(name)]

    def param_vector(self, i: int) -> ParamVector:
        return ParamVector.from_array(self.samples[i])


def run_mcmc(spec: ModelSpec, series: CaseSeries,
             config: McmcConfig | None = None, *,
             priors: PriorSpec = DEFAULT_PRIORS,
             ages: AgeStructure | None = None,
             births: BirthSchedule | None = None,
             population_size: float = DEFAULT_FIT_POPULATION,
             rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
             warm_start: bool = True, week_offset: int = 0) -> PosteriorChain:
    """Fit one model to a case series; returns the post-burn-in chain."""
    config = config if config is not None else McmcConfig()
    target = make_log_posterior(
        spec, series, priors, ages=ages, births=births,
        population_size=population_size, rtol=rtol, atol=atol,
        warm_start=warm_start, week_offset=week_offset)

    def density(z):
        values, log_jac = from_unconstrained(z, priors)
        natural = target(ParamVector.from_array(values))
        return natural + log_jac, natural

    z0 = to_unconstrained(priors.mean_vector().to_array(), priors)
    rng = np.random.default_rng(config.seed)
    kept, payloads, acceptance, _ = componentwise_random_walk(
        density, z0, iterations=config.iterations, burn_in=config.burn_in,
        rng=rng, initial_scales=config.initial_scale,
        adapt_batch=config.adapt_batch,
        target_acceptance=config.target_acceptance)
    samples = np.empty_like(kept)
    for i in range(kept.shape[0]):
        samples[i], _ = from_unconstrained(kept[i], priors)
    return PosteriorChain(model_id=spec.model_id, samples=samples,
                          log_posteriors=payloads, acceptance_rate=acceptance,
                          seed=config.seed, burn_in_length=config.burn_in,
                          n_observations=series.n_cells)


def hpd_interval(samples, level: float = 0.95):
    """Shortest contiguous interval holding ceil(level * n) sorted samples.

    Ties resolve to the leftmost window, so the result is deterministic.
    """
    if not 0.0 < level <= 1.0:
        raise ValueError("level must lie in (0, 1]")
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise InsufficientSamples("an interval needs at least 2 samples")
    m = int(math.ceil(level * n))
    m = min(max(m, 1), n)
    widths = x[m - 1:] - x[:n - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Per-parameter means and 95% HPDs plus the fit statistics used
    downstream for model comparison."""

    model_id: str
    parameter_names: tuple
    means: np.ndarray
    hpd_lower: np.ndarray
    hpd_upper: np.ndarray
    max_log_likelihood: float
    parameter_count: int
    observation_count: int

    def as_rows(self):
        for j, name in enumerate(self.parameter_names):
            yield (name, float(self.means[j]), float(self.hpd_lower[j]),
                   float(self.hpd_upper[j]))


def posterior_summary(chain: PosteriorChain,
                      priors: PriorSpec = DEFAULT_PRIORS,
                      level: float = 0.95) -> PosteriorSummary:
    """Summarize a chain; recovers max log-likelihood by subtracting the
    prior from the stored posterior values."""
    n = chain.n_samples
    if n == 0:
        raise InsufficientSamples("cannot summarize an empty chain")
    means = chain.samples.mean(axis=0)
    lower = np.empty(len(PARAM_NAMES))
    upper = np.empty(len(PARAM_NAMES))
    for j in range(len(PARAM_NAMES)):
        lower[j], upper[j] = hpd_interval(chain.samples[:, j], level)
    outside = [PARAM_NAMES[j] for j in range(len(PARAM_NAMES))
               if not lower[j] <= means[j] <= upper[j]]
    if outside:
        warnings.warn("posterior mean outside the HPD interval for: "
                      + ", ".join(outside), stacklevel=2)
    best = -math.inf
    for i in range(n):
        ll = float(chain.log_posteriors[i]) - log_prior(
            chain.param_vector(i), priors)
        if ll > best:
            best = ll
    return PosteriorSummary(
        model_id=chain.model_id, parameter_names=PARAM_NAMES,
        means=means, hpd_lower=lower, hpd_upper=upper,
        max_log_likelihood=best, parameter_count=len(PARAM_NAMES),
        observation_count=chain.n_observations)
