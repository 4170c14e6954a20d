"""Epidemiological summaries and vaccination analyses.

R0 comes from the next-generation matrix linearized at the fully
susceptible stationary population with transmission at its seasonal mean.
Burden and impact metrics are computed on true severe incidence (no
reporting rate): burden as annual severe cases per 100 under-5 children,
impact as the change in year-20 annual severe incidence relative to an
unvaccinated projection from the same cycle start.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import (DEFAULT_ATOL, DEFAULT_RTOL, PeriodicSolution,
                     find_periodic_solution, project)
from .errors import (AllZero, NonConvergence, SingularTransition,
                     StiffnessFailure, Unattainable, ZeroDenominator)
from .inference import hpd_interval
from .models import ModelSpec
from .observation import severe_incidence
from .parameters import ParamVector
from .structure import (AgeStructure, BirthSchedule, VaccinePolicy,
                        default_age_structure)

logger = logging.getLogger(__name__)

WEEKS_SHORT_HORIZON = 260
WEEKS_LONG_HORIZON = 1040
SEVERE_EFFICACY_FRACTIONS = (0.13, 0.03, 0.0)
ANY_EFFICACY_FRACTIONS = (0.47, 0.25, 0.32)


# ---------------------------------------------------------------------------
# Next-generation matrix


@dataclass(frozen=True, eq=False)
class NgmInputs:
    """New-infection matrix F and transition matrix V, F,V >= 0 checks
    deferred to construction sites; V rows/cols follow F's state order."""

    new_infections: np.ndarray
    transitions: np.ndarray


@dataclass(frozen=True, eq=False)
class NextGenerationMatrix:
    matrix: np.ndarray
    spectral_radius: float


def spectral_radius(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(matrix, float)))))


def ngm_from_inputs(inputs: NgmInputs) -> NextGenerationMatrix:
    """K = F V^-1 and its spectral radius."""
    f = np.asarray(inputs.new_infections, dtype=float)
    v = np.asarray(inputs.transitions, dtype=float)
    if f.shape != v.shape or f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError("F and V must be equal-size square matrices")
    if np.any(np.diag(v) <= 0.0):
        raise SingularTransition("infected-state residence times must be "
                                 "positive")
    try:
        k = f @ np.linalg.inv(v)
    except np.linalg.LinAlgError as exc:
        raise SingularTransition(str(exc)) from None
    return NextGenerationMatrix(matrix=k, spectral_radius=spectral_radius(k))


def _infected_states(spec: ModelSpec):
    """(labels, infectiousness weight, exit rate, progression target or -1)."""
    g1, g2 = spec.recovery_first, spec.recovery_later
    iota = spec.relative_infectiousness
    if spec.model_id == "A":
        return (("Is", "Im"), (1.0, 0.5), (g1, g2), (-1, -1))
    if spec.model_id in ("B",):
        return (("I1", "I2", "I3"), iota[:3], (g1, g2, g2), (-1, -1, -1))
    if spec.model_id == "C":
        xi = spec.incubation_rate
        # E_k feeds I_k; E states do not transmit
        return (("E1", "I1", "E2", "I2", "E3", "I3"),
                (0.0, iota[0], 0.0, iota[1], 0.0, iota[2]),
                (xi, g1, xi, g2, xi, g2),
                (1, -1, 3, -1, 5, -1))
    return (("I1", "I2", "I3", "I4"), iota[:4], (g1, g2, g2, g2),
            (-1, -1, -1, -1))


def _entry_rows(spec: ModelSpec):
    """Which infected states new infections enter, with their split."""
    if spec.model_id == "A":
        return ((0, spec.severe_split), (1, spec.mild_split))
    if spec.model_id == "C":
        return ((0, 1.0),)
    return ((0, 1.0),)


def next_generation_matrix(spec: ModelSpec, params: ParamVector,
                           ages: AgeStructure | None = None) -> NextGenerationMatrix:
    """Linearization at the fully susceptible stationary age profile.

    Transmission is evaluated at the seasonal mean (the cosine term
    averages to zero), and disease residence excludes the slow aging
    rates, so the matrix depends on age order only through C, beta0, f.
    """
    ages = ages if ages is not None else default_age_structure()
    n = ages.class_count
    f_pop = ages.population_fractions
    contact = ages.contact_matrix
    beta = np.asarray(params.beta0, dtype=float)
    if beta.size != n:
        beta = np.full(n, float(beta[0]))
    labels, weights, exits, feeds = _infected_states(spec)
    m = len(labels)
    dim = m * n
    sigma1 = spec.relative_susceptibility[0]
    fmat = np.zeros((dim, dim))
    vmat = np.zeros((dim, dim))
    lam_grad = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            # d lambda_i / d(one infectious individual in class j), times
            # the susceptible pool f_i, at unit total population
            lam_grad[i, j] = beta[j] * contact[i, j] * f_pop[i] / f_pop[j]
    for c_src in range(m):
        if weights[c_src] == 0.0:
            continue
        for row, split in _entry_rows(spec):
            block = split * sigma1 * weights[c_src] * lam_grad
            fmat[row * n:(row + 1) * n, c_src * n:(c_src + 1) * n] = block
    for c in range(m):
        if exits[c] <= 0.0:
            raise SingularTransition("infected-state residence times must "
                                     "be positive")
        for a in range(n):
            vmat[c * n + a, c * n + a] = exits[c]
        if feeds[c] >= 0:
            for a in range(n):
                vmat[feeds[c] * n + a, c * n + a] = -exits[c]
    return ngm_from_inputs(NgmInputs(new_infections=fmat, transitions=vmat))


# ---------------------------------------------------------------------------
# Burden and age distribution


@dataclass(frozen=True, eq=False)
class BurdenEstimate:
    """Annual severe cases as a percentage of the under-5 population."""

    annual_percent: float
    interval: tuple | None
    level: float = 0.95


def _annual_percent(spec: ModelSpec, solution: PeriodicSolution) -> float:
    severe = severe_incidence(spec, solution.weekly_incidence)
    return 100.0 * float(severe.sum()) / solution.mean_population


def annual_burden(spec: ModelSpec, params: ParamVector,
                  ages: AgeStructure | None = None,
                  population_size: float = 1.0, *,
                  births: BirthSchedule | None = None,
                  draw_params: Sequence[ParamVector] | None = None,
                  level: float = 0.95,
                  rtol: float = DEFAULT_RTOL,
                  atol: float = DEFAULT_ATOL) -> BurdenEstimate:
    """Severe-RVGE burden over one annual cycle; reporting-rate free.

    With posterior draws supplied, the interval is the equal-tailed
    credible interval of the per-draw burdens.
    """
    solution = find_periodic_solution(spec, params, ages, births,
                                      population_size=population_size,
                                      rtol=rtol, atol=atol)
    point = _annual_percent(spec, solution)
    interval = None
    if draw_params is not None and len(draw_params) > 0:
        values = []
        for d, theta in enumerate(draw_params):
            try:
                sol = find_periodic_solution(
                    spec, theta, ages, births,
                    population_size=population_size, rtol=rtol, atol=atol)
            except (NonConvergence, StiffnessFailure) as exc:
                logger.warning("model %s: dropping burden draw %d "
                               "(b=%.4g phi=%.4g rho=%.4g): %s",
                               spec.model_id, d, theta.b, theta.phi,
                               theta.rho, exc)
                continue
            values.append(_annual_percent(spec, sol))
        if values:
            values = np.array(values)
            tail = 0.5 * (1.0 - level)
            interval = (float(np.quantile(values, tail)),
                        float(np.quantile(values, 1.0 - tail)))
    return BurdenEstimate(annual_percent=point, interval=interval,
                          level=level)


def age_distribution(profile) -> np.ndarray:
    """Normalize per-age annual totals to proportions summing to 1."""
    arr = np.asarray(profile, dtype=float)
    if arr.ndim == 2:
        arr = arr.sum(axis=0)
    if arr.ndim != 1:
        raise ValueError("profile must be (T, classes) or (classes,)")
    if np.any(arr < 0.0):
        raise ValueError("profile must be nonnegative")
    total = arr.sum()
    if total == 0.0:
        raise AllZero("cannot normalize an all-zero profile")
    return arr / total


# ---------------------------------------------------------------------------
# Closed-form vaccine efficacy


def vaccine_efficacy_forward(s: float, sigma2: float = 0.62,
                             sigma3: float = 0.37,
                             disease_fractions=SEVERE_EFFICACY_FRACTIONS) -> float:
    """Two-dose efficacy from the seroconversion probability.

    Each dose seroconverts independently with probability s; k successful
    doses leave the recipient with the susceptibility and disease profile
    of someone past k natural infections:
    VE = 1 - [(1-s)^2 + 2s(1-s) sigma2 d2/d1 + s^2 sigma3 d3/d1].
    """
    for name, value in (("s", s), ("sigma2", sigma2), ("sigma3", sigma3)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    d1, d2, d3 = disease_fractions
    if d1 == 0.0:
        raise ZeroDenominator("first-infection disease fraction is zero")
    relative = ((1.0 - s) ** 2
                + 2.0 * s * (1.0 - s) * sigma2 * (d2 / d1)
                + s * s * sigma3 * (d3 / d1))
    return 1.0 - relative


def seroconversion_from_efficacy(ve_target: float, sigma2: float = 0.62,
                                 sigma3: float = 0.37,
                                 disease_fractions=SEVERE_EFFICACY_FRACTIONS) -> float:
    """Invert the forward efficacy formula by bisection on [0, 1]."""
    if ve_target < 0.0:
        raise ValueError("target efficacy must be nonnegative")
    top = vaccine_efficacy_forward(1.0, sigma2, sigma3, disease_fractions)
    if ve_target > top:
        raise Unattainable(
            f"efficacy {ve_target:.4f} exceeds the maximum {top:.4f} "
            "attainable at full seroconversion")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = vaccine_efficacy_forward(mid, sigma2, sigma3,
                                         disease_fractions)
        if abs(value - ve_target) < 1e-12:
            return mid
        if value < ve_target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


def model_a_efficacy(s: float, sigma2: float = 0.62,
                     sigma3: float = 0.37) -> tuple:
    """(severe, any-RVGE) breakthrough protection used by Model A's
    explicit vaccinated compartment."""
    return (vaccine_efficacy_forward(s, sigma2, sigma3,
                                     SEVERE_EFFICACY_FRACTIONS),
            vaccine_efficacy_forward(s, sigma2, sigma3,
                                     ANY_EFFICACY_FRACTIONS))


def reporting_prior_mean(consult_rate: float,
                         surveillance_coverage: float) -> float:
    """Fraction of severe cases expected in the surveillance counts."""
    for name, value in (("consult_rate", consult_rate),
                        ("surveillance_coverage", surveillance_coverage)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    return consult_rate * surveillance_coverage


# ---------------------------------------------------------------------------
# Vaccination impact


@dataclass(frozen=True, eq=False)
class ImpactResult:
    """Effect of one coverage level relative to the unvaccinated run."""

    coverage: float
    relative_incidence_series: np.ndarray   # (short horizon,) weekly ratio
    long_term_percent_reduction: float
    long_term_absolute_reduction: float
    interval_level: float = 0.99
    percent_interval: tuple | None = None       # equal-tailed over draws
    percent_interval_hpd: tuple | None = None
    draw_percent_reductions: np.ndarray | None = None
    draw_absolute_reductions: np.ndarray | None = None


def _policy_for(spec: ModelSpec, coverage: float,
                seroconversion: float) -> VaccinePolicy:
    return VaccinePolicy(coverage=coverage, seroconversion=seroconversion,
                         model_a_efficacy=model_a_efficacy(seroconversion))


def _weekly_severe_totals(spec: ModelSpec, weekly: np.ndarray) -> np.ndarray:
    return severe_incidence(spec, weekly).sum(axis=1)


def _impact_curves(spec: ModelSpec, theta: ParamVector, coverages,
                   seroconversion: float, ages, births, population_size,
                   short_horizon, long_horizon, rtol, atol,
                   want_series: bool):
    """Percent/absolute year-20 reductions per coverage, plus the 5-year
    relative series when requested."""
    solution = find_periodic_solution(spec, theta, ages, births,
                                      population_size=population_size,
                                      rtol=rtol, atol=atol)
    start = solution.cycle_start_state
    base = project(spec, theta, start, long_horizon, None, ages=ages,
                   births=births, population_size=population_size,
                   start_time=solution.start_time, rtol=rtol, atol=atol)
    base_weekly = _weekly_severe_totals(spec, base.weekly_new_infections)
    base_year20 = float(base_weekly[-52:].sum())
    base_profile = base_weekly[:52]
    if base_year20 == 0.0:
        raise ZeroDenominator("unvaccinated annual severe incidence "
                              "is zero")
    percents = np.empty(len(coverages))
    absolutes = np.empty(len(coverages))
    series = []
    years = short_horizon // 52
    denom = np.tile(base_profile, years)[:short_horizon]
    for ic, coverage in enumerate(coverages):
        if coverage == 0.0:
            # no doses administered: the policy run IS the baseline run,
            # so reuse it and keep "zero coverage = baseline" exact
            weekly = base_weekly
        else:
            policy = _policy_for(spec, float(coverage), seroconversion)
            traj = project(spec, theta, start, long_horizon, policy,
                           ages=ages, births=births,
                           population_size=population_size,
                           start_time=solution.start_time,
                           rtol=rtol, atol=atol)
            weekly = _weekly_severe_totals(spec, traj.weekly_new_infections)
        year20 = float(weekly[-52:].sum())
        percents[ic] = 100.0 * (1.0 - year20 / base_year20)
        absolutes[ic] = base_year20 - year20
        if want_series:
            series.append(weekly[:short_horizon] / denom)
    return percents, absolutes, series


def vaccination_impact(spec: ModelSpec, params: ParamVector, coverages, *,
                       seroconversion: float,
                       ages: AgeStructure | None = None,
                       births: BirthSchedule | None = None,
                       population_size: float = 1.0,
                       short_horizon: int = WEEKS_SHORT_HORIZON,
                       long_horizon: int = WEEKS_LONG_HORIZON,
                       draw_params: Sequence[ParamVector] | None = None,
                       interval_level: float = 0.99,
                       rtol: float = DEFAULT_RTOL,
                       atol: float = DEFAULT_ATOL) -> list[ImpactResult]:
    """Sweep a coverage grid; vaccination starts at a cycle-year boundary.

    Intervals, when posterior draws are given, are computed per coverage
    from the per-draw year-20 reductions (both equal-tailed quantiles and
    the shortest-interval variant are recorded).
    """
    coverages = [float(c) for c in coverages]
    for c in coverages:
        if not 0.0 <= c <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
    percents, absolutes, series = _impact_curves(
        spec, params, coverages, seroconversion, ages, births,
        population_size, short_horizon, long_horizon, rtol, atol,
        want_series=True)
    n_draws = 0 if draw_params is None else len(draw_params)
    draw_pct = None
    draw_abs = None
    if n_draws > 0:
        kept_pct = []
        kept_abs = []
        for d, theta in enumerate(draw_params):
            # a posterior draw without a periodic limit cannot contribute
            # an interval; dropping it keeps the sweep deterministic
            try:
                p, a, _ = _impact_curves(
                    spec, theta, coverages, seroconversion, ages, births,
                    population_size, short_horizon, long_horizon, rtol,
                    atol, want_series=False)
            except (NonConvergence, StiffnessFailure) as exc:
                logger.warning("model %s: dropping impact draw %d "
                               "(b=%.4g phi=%.4g rho=%.4g): %s",
                               spec.model_id, d, theta.b, theta.phi,
                               theta.rho, exc)
                continue
            kept_pct.append(p)
            kept_abs.append(a)
        n_draws = len(kept_pct)
        if n_draws > 0:
            draw_pct = np.array(kept_pct)
            draw_abs = np.array(kept_abs)
    results = []
    tail = 0.5 * (1.0 - interval_level)
    for ic, coverage in enumerate(coverages):
        pct_int = None
        pct_hpd = None
        d_pct = None
        d_abs = None
        if n_draws > 0:
            column = draw_pct[:, ic]
            pct_int = (float(np.quantile(column, tail)),
                       float(np.quantile(column, 1.0 - tail)))
            if n_draws >= 2:
                pct_hpd = hpd_interval(column, interval_level)
            d_pct = column.copy()
            d_abs = draw_abs[:, ic].copy()
        results.append(ImpactResult(
            coverage=coverage,
            relative_incidence_series=series[ic],
            long_term_percent_reduction=float(percents[ic]),
            long_term_absolute_reduction=float(absolutes[ic]),
            interval_level=interval_level,
            percent_interval=pct_int,
            percent_interval_hpd=pct_hpd,
            draw_percent_reductions=d_pct,
            draw_absolute_reductions=d_abs))
    return results
