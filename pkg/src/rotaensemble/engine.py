"""Forward integration and the annual periodic solution.

The seasonally forced systems settle into an annually repeating cycle;
the likelihood is evaluated on that cycle and projections start from it.
Convergence is declared when the year-over-year expected reported-case
profiles differ by less than a fixed L1 tolerance.

All integrations sample at integer-week nodes. The birth inflow uses a
fixed reference population captured at integration start: the aging chain
deliberately leaks (240 weeks of residence against a 1/260 mean birth
rate), so re-reading the live total would contract the population a few
percent per year and no periodic solution would exist.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import NonConvergence, StiffnessFailure
from .models import (ModelDynamics, ModelSpec, StateLayout, StateVector,
                     forcing_from_params, make_dynamics, state_layout)
from .observation import reported_case_means
from .parameters import ParamVector
from .structure import (AgeStructure, BirthSchedule, VaccinePolicy,
                        default_age_structure, default_birth_schedule)

DEFAULT_RTOL = 1e-6
DEFAULT_ATOL = 1e-8
PERIODIC_TOLERANCE = 0.01
MAX_PERIODIC_YEARS = 100
CALENDAR_ORIGIN = 1.0  # first week of January

_STATUS_MESSAGES = {
    K.STATUS_UNDERFLOW: "adaptive step size underflowed",
    K.STATUS_STEP_LIMIT: "step limit exhausted",
    K.STATUS_NONFINITE: "state became non-finite",
}


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Weekly-sampled solution, with per-week new-infection accumulators."""

    time_grid: np.ndarray
    states: np.ndarray
    weekly_new_infections: np.ndarray | None = None
    layout: StateLayout | None = None

    @property
    def n_weeks(self) -> int:
        return int(self.time_grid.shape[0]) - 1

    def final_state(self) -> StateVector:
        if self.layout is None:
            raise ValueError("generic trajectories carry no model layout")
        return StateVector(self.layout, self.states[-1].copy())


def _n_whole_weeks(t0: float, t1: float) -> int:
    span = float(t1) - float(t0)
    n = int(round(span))
    if n <= 0 or abs(span - n) > 1e-9:
        raise ValueError("t1 - t0 must be a positive whole number of weeks")
    return n


def _run_kernel(dyn: ModelDynamics, y0_state: np.ndarray, t0: float,
                n_weeks: int, rtol: float, atol: float):
    layout = dyn.layout
    full = np.zeros(layout.dim)
    full[:layout.n_state] = y0_state
    states = np.empty((n_weeks + 1, layout.n_state))
    weekly = np.empty((n_weeks, layout.n_channel))
    status, t_reached = K.integrate_weeks(
        dyn.code, full, float(t0), n_weeks, dyn.params,
        float(rtol), float(atol), layout.n_state, states, weekly)
    if status != K.STATUS_OK:
        raise StiffnessFailure(
            f"integration failed at t = {t_reached:.6f} weeks: "
            f"{_STATUS_MESSAGES.get(status, 'unknown failure')}",
            t=t_reached)
    return states, weekly


def _kernel_trajectory(dyn: ModelDynamics, y0_state: np.ndarray, t0: float,
                       n_weeks: int, rtol: float, atol: float) -> Trajectory:
    states, weekly = _run_kernel(dyn, y0_state, t0, n_weeks, rtol, atol)
    np.maximum(states, 0.0, out=states)
    np.maximum(weekly, 0.0, out=weekly)
    weekly = weekly.reshape(n_weeks, len(dyn.layout.channels),
                            dyn.layout.class_count)
    times = t0 + np.arange(n_weeks + 1, dtype=float)
    return Trajectory(time_grid=times, states=states,
                      weekly_new_infections=weekly, layout=dyn.layout)


def _rk45_generic(f, y0: np.ndarray, t0: float, n_weeks: int,
                  rtol: float, atol: float) -> np.ndarray:
    """Reference-path embedded Runge-Kutta for arbitrary callables."""
    y = np.array(y0, dtype=float)
    out = np.empty((n_weeks + 1,) + y.shape)
    out[0] = y
    k1 = np.asarray(f(t0, y), dtype=float)
    t = t0
    h = 0.05
    for w in range(n_weeks):
        t_end = t0 + (w + 1.0)
        while t < t_end - 1e-12:
            hs = min(h, t_end - t)
            clipped = hs < h
            if hs < 1e-12:
                raise StiffnessFailure(
                    f"adaptive step size underflowed at t = {t:.6f}", t=t)
            k2 = np.asarray(f(t + hs / 5.0, y + hs * (k1 / 5.0)))
            k3 = np.asarray(f(t + 3.0 * hs / 10.0,
                              y + hs * (3.0 * k1 + 9.0 * k2) / 40.0))
            k4 = np.asarray(f(t + 4.0 * hs / 5.0,
                              y + hs * (44.0 * k1 / 45.0 - 56.0 * k2 / 15.0
                                        + 32.0 * k3 / 9.0)))
            k5 = np.asarray(f(t + 8.0 * hs / 9.0,
                              y + hs * (19372.0 * k1 / 6561.0
                                        - 25360.0 * k2 / 2187.0
                                        + 64448.0 * k3 / 6561.0
                                        - 212.0 * k4 / 729.0)))
            k6 = np.asarray(f(t + hs,
                              y + hs * (9017.0 * k1 / 3168.0 - 355.0 * k2 / 33.0
                                        + 46732.0 * k3 / 5247.0
                                        + 49.0 * k4 / 176.0
                                        - 5103.0 * k5 / 18656.0)))
            ynew = y + hs * (35.0 * k1 / 384.0 + 500.0 * k3 / 1113.0
                             + 125.0 * k4 / 192.0 - 2187.0 * k5 / 6784.0
                             + 11.0 * k6 / 84.0)
            k7 = np.asarray(f(t + hs, ynew))
            err_vec = hs * (71.0 * k1 / 57600.0 - 71.0 * k3 / 16695.0
                            + 71.0 * k4 / 1920.0 - 17253.0 * k5 / 339200.0
                            + 22.0 * k6 / 525.0 - k7 / 40.0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not math.isfinite(err):
                h = hs * 0.2
                continue
            if err <= 1.0:
                t += hs
                y = ynew
                k1 = k7
                fac = min(5.0, max(0.2, 0.9 * err ** -0.2)) if err > 0 else 5.0
                if not (clipped and fac >= 1.0):
                    h = hs * fac
            else:
                h = hs * max(0.2, 0.9 * err ** -0.2)
        t = t_end
        out[w + 1] = y
    return out


def integrate(deriv, state0, t0: float, t1: float, *,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> Trajectory:
    """Adaptive integration of `deriv` from t0 to t1, sampled weekly.

    `deriv` is either a ModelDynamics (compiled path, incidence channels
    tracked) or any callable f(t, y) -> dy/dt over a flat array.
    """
    n_weeks = _n_whole_weeks(t0, t1)
    if isinstance(deriv, ModelDynamics):
        if isinstance(state0, StateVector):
            if state0.layout != deriv.layout:
                raise StiffnessFailure("state layout does not match dynamics")
            y0 = state0.values
        else:
            y0 = np.asarray(state0, dtype=float)
        return _kernel_trajectory(deriv, y0, float(t0), n_weeks, rtol, atol)
    y0 = np.atleast_1d(np.asarray(state0, dtype=float))
    states = _rk45_generic(deriv, y0, float(t0), n_weeks, rtol, atol)
    times = float(t0) + np.arange(n_weeks + 1, dtype=float)
    return Trajectory(time_grid=times, states=states)


def maternal_fractions(ages: AgeStructure, maternal_waning: float) -> np.ndarray:
    """Fraction of each age class still maternally protected at the
    demographic equilibrium of the aging chain."""
    alpha = ages.aging_rates
    n = ages.class_count
    m = np.empty(n)
    mstar = 1.0 / (maternal_waning + alpha[0])
    m[0] = mstar * alpha[0]
    for i in range(1, n):
        mstar = alpha[i - 1] * mstar / (maternal_waning + alpha[i])
        m[i] = mstar * alpha[i]
    return m


def default_initial_state(spec: ModelSpec, ages: AgeStructure | None = None,
                          population_size: float = 1.0) -> StateVector:
    """Fixed, model-independent starting point for the periodic search.

    Ages at the stationary profile; within each class 0.1% seeded in the
    first-infection infectious compartments and the rest split between
    maternal and first-susceptible by the maternal-waning residence.
    """
    ages = ages if ages is not None else default_age_structure()
    layout = state_layout(spec.model_id)
    state = np.zeros(layout.n_state)
    class_pop = population_size * ages.population_fractions
    m_frac = maternal_fractions(ages, spec.maternal_waning)
    seed = 1e-3
    healthy = 1.0 - seed
    first_s = "S" if spec.model_id == "A" else "S1"
    for a in range(layout.class_count):
        state[layout.index("M", a)] = healthy * class_pop[a] * m_frac[a]
        state[layout.index(first_s, a)] = healthy * class_pop[a] * (1.0 - m_frac[a])
        if spec.model_id == "A":
            state[layout.index("Is", a)] = seed * class_pop[a] * spec.severe_split
            state[layout.index("Im", a)] = seed * class_pop[a] * spec.mild_split
        else:
            state[layout.index("I1", a)] = seed * class_pop[a]
    return StateVector(layout, state)


@dataclass(frozen=True, eq=False)
class PeriodicSolution:
    """Converged annual cycle plus the profile the criterion was met on."""

    cycle_start_state: StateVector
    expected_profile: np.ndarray       # (52, 6) rho-scaled reported means
    convergence_years: int
    discrepancy: float
    weekly_incidence: np.ndarray       # (52, orders, 6) final-year channels
    mean_population: float
    population_size: float
    start_time: float


def find_periodic_solution(spec: ModelSpec, params: ParamVector,
                           ages: AgeStructure | None = None,
                           births: BirthSchedule | None = None, *,
                           population_size: float = 1.0,
                           initial_state: StateVector | None = None,
                           tolerance: float = PERIODIC_TOLERANCE,
                           max_years: int = MAX_PERIODIC_YEARS,
                           rtol: float = DEFAULT_RTOL,
                           atol: float = DEFAULT_ATOL) -> PeriodicSolution:
    """Integrate year over year until the reported-case profile repeats.

    The criterion is sum_i sum_t |xi_i(t) - xi_i(t - 52)| < tolerance on the
    rho-scaled expected reported cases, so the stopping year depends on the
    scale of the system (population_size) and on rho.
    """
    ages = ages if ages is not None else default_age_structure()
    births = births if births is not None else default_birth_schedule()
    forcing = forcing_from_params(params.beta0, params.b, params.phi)
    dyn = make_dynamics(spec, ages, forcing, births, policy=None,
                        birth_population=population_size)
    if initial_state is None:
        state = default_initial_state(spec, ages, population_size)
    else:
        state = initial_state
        if state.layout != dyn.layout:
            raise StiffnessFailure("initial state layout does not match model")
    y = state.values.copy()
    t = CALENDAR_ORIGIN
    previous = None
    discrepancy = math.inf
    for year in range(1, max_years + 1):
        states, weekly = _run_kernel(dyn, y, t, 52, rtol, atol)
        weekly3 = np.maximum(weekly, 0.0).reshape(
            52, len(dyn.layout.channels), dyn.layout.class_count)
        profile = reported_case_means(spec, weekly3, params.rho)
        if previous is not None:
            discrepancy = float(np.abs(profile - previous).sum())
            if discrepancy < tolerance:
                mean_pop = float(states[:52].sum(axis=1).mean())
                return PeriodicSolution(
                    cycle_start_state=StateVector(
                        dyn.layout, np.maximum(states[52], 0.0)),
                    expected_profile=profile,
                    convergence_years=year,
                    discrepancy=discrepancy,
                    weekly_incidence=weekly3,
                    mean_population=mean_pop,
                    population_size=population_size,
                    start_time=t + 52.0)
        previous = profile
        y = states[52]
        t += 52.0
    raise NonConvergence(
        f"no periodic solution within {max_years} years "
        f"(final year-over-year discrepancy {discrepancy:.6g})",
        discrepancy=discrepancy, years=max_years)


def _extend_for_policy(spec: ModelSpec, state: StateVector,
                       target: StateLayout) -> np.ndarray:
    """Map a base-layout state into the vaccinated layout (empty V)."""
    if state.layout == target:
        return state.values
    out = np.zeros(target.n_state)
    for name in state.layout.compartments:
        for a in range(state.layout.class_count):
            out[target.index(name, a)] = state.get(name, a)
    return out


def project(spec: ModelSpec, params: ParamVector, start_state: StateVector,
            horizon_weeks: int, policy: VaccinePolicy | None = None, *,
            ages: AgeStructure | None = None,
            births: BirthSchedule | None = None,
            population_size: float | None = None,
            start_time: float = CALENDAR_ORIGIN,
            rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> Trajectory:
    """Forward simulation from a cycle-start state, optionally vaccinated.

    population_size should be the birth reference the start state was
    produced with (defaults to the state's own total). Vaccination wiring,
    when present, is active from the first projected week.
    """
    ages = ages if ages is not None else default_age_structure()
    births = births if births is not None else default_birth_schedule()
    n_weeks = int(horizon_weeks)
    if n_weeks <= 0:
        raise ValueError("horizon must be a positive number of weeks")
    if population_size is None:
        population_size = start_state.total()
    forcing = forcing_from_params(params.beta0, params.b, params.phi)
    dyn = make_dynamics(spec, ages, forcing, births, policy=policy,
                        birth_population=population_size)
    y0 = _extend_for_policy(spec, start_state, dyn.layout)
    return _kernel_trajectory(dyn, y0, float(start_time), n_weeks, rtol, atol)
