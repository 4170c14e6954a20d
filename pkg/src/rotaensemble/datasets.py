"""Bundled synthetic reference dataset.

The surveillance data the models were designed around is not public, so
the package ships a synthetic stand-in: 118 weeks of age-stratified counts
drawn from Model B's periodic solution at documented parameters, at a
population of 200,000 under-5 children. All tutorial commands and the
end-to-end tests run against this file.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .engine import find_periodic_solution
from .models import model_spec
from .observation import CaseSeries, simulate_observations
from .parameters import ParamVector

SYNTHETIC_MODEL = "B"
SYNTHETIC_TRUTH = ParamVector(b=0.41, phi=7.4, r=2.6, rho=0.096,
                              beta0=np.full(6, 20.0))
SYNTHETIC_POPULATION = 200_000.0
SYNTHETIC_WEEKS = 118
SYNTHETIC_SEED = 1729
_FILENAME = "synthetic_reference.csv"


def synthetic_series_means(n_weeks: int = SYNTHETIC_WEEKS,
                           population_size: float = SYNTHETIC_POPULATION,
                           truth: ParamVector = SYNTHETIC_TRUTH,
                           model_id: str = SYNTHETIC_MODEL) -> np.ndarray:
    """Expected reported cases (6, n_weeks) at the generating parameters."""
    solution = find_periodic_solution(model_spec(model_id), truth,
                                      population_size=population_size)
    rows = np.arange(n_weeks) % 52
    return solution.expected_profile[rows].T.copy()


def generate_synthetic_series(seed: int = SYNTHETIC_SEED,
                              n_weeks: int = SYNTHETIC_WEEKS,
                              population_size: float = SYNTHETIC_POPULATION,
                              truth: ParamVector = SYNTHETIC_TRUTH,
                              model_id: str = SYNTHETIC_MODEL) -> CaseSeries:
    """Draw negative-binomial counts around the periodic expected cases."""
    xi = synthetic_series_means(n_weeks, population_size, truth, model_id)
    return simulate_observations(xi, truth.r, seed)


def synthetic_reference_path() -> Path:
    """Location of the bundled reference CSV inside the package."""
    return Path(resources.files("rotaensemble").joinpath("data", _FILENAME))


def load_synthetic_reference() -> CaseSeries:
    from .storage import load_case_series
    return load_case_series(synthetic_reference_path())


def regenerate_synthetic_reference(path=None) -> Path:
    """Rebuild the bundled CSV from scratch (used to create the shipped
    file; reruns must be byte-identical)."""
    from .storage import write_case_series
    target = Path(path) if path is not None else synthetic_reference_path()
    target.parent.mkdir(parents=True, exist_ok=True)
    return write_case_series(generate_synthetic_series(), target)
