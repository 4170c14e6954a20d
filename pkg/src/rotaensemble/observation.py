"""Observation model: latent incidence -> expected reported counts -> likelihood.

Reported surveillance counts are severe cases seen at a health structure:
a fraction of first and second infections is severe (13% and 3% for the
successive-infection models; the single-infection model tracks its severe
branch directly) and a reporting rate rho thins severe cases into counts.
Counts are scored with a negative binomial in mean/dispersion form,
var = mu + mu^2/r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import nb_loglik_sum
from .errors import GridIncomplete, InvalidParams, ShapeMismatch
from .models import ModelSpec

MEAN_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class CaseSeries:
    """Weekly reported case counts on a complete (week, age-class) grid."""

    counts: np.ndarray
    weeks: np.ndarray | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or (counts.size and counts.shape[1] != 6):
            raise ShapeMismatch("counts must be (weeks, 6 age groups)")
        if counts.size and not np.issubdtype(counts.dtype, np.integer):
            rounded = np.rint(counts)
            if not np.array_equal(rounded, counts):
                raise GridIncomplete("case counts must be integers")
            counts = rounded
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise GridIncomplete("case counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        n = counts.shape[0]
        if self.weeks is None:
            weeks = np.arange(1, n + 1, dtype=np.int64)
        else:
            weeks = np.asarray(self.weeks, dtype=np.int64)
            if weeks.shape != (n,) or not np.array_equal(
                    weeks, np.arange(1, n + 1)):
                raise GridIncomplete("weeks must be contiguous 1..T")
        object.__setattr__(self, "weeks", weeks)

    @property
    def n_weeks(self) -> int:
        return int(self.counts.shape[0])

    @property
    def n_cells(self) -> int:
        return int(self.counts.size)


def severe_incidence(spec: ModelSpec, weekly_new_infections: np.ndarray) -> np.ndarray:
    """Weekly severe cases per age from the per-order incidence channels.

    Severe cases are a fixed fraction of realized new infections by order
    (the single-infection model integrates its severe branch directly).
    Returns shape (weeks, 6).
    """
    weekly = np.asarray(weekly_new_infections, dtype=float)
    if weekly.ndim != 3 or weekly.shape[2] != 6:
        raise ShapeMismatch("weekly incidence must be (weeks, orders, 6)")
    if spec.model_id == "A":
        return weekly[:, 0, :].copy()
    out = np.zeros(weekly.shape[::2])
    for k, frac in enumerate(spec.severe_fractions):
        if k < weekly.shape[1] and frac != 0.0:
            out += frac * weekly[:, k, :]
    return out


def reported_case_means(spec: ModelSpec, weekly_new_infections: np.ndarray,
                        rho: float) -> np.ndarray:
    """Expected reported counts per (week, age): rho x severe incidence."""
    if not 0.0 <= rho <= 1.0:
        raise InvalidParams(f"reporting rate must lie in [0, 1], got {rho}")
    return rho * severe_incidence(spec, weekly_new_infections)


def expected_reported_cases(spec: ModelSpec, trajectory, rho: float) -> np.ndarray:
    """Expected reported counts as a 6 x T matrix (ages by weeks)."""
    weekly = trajectory.weekly_new_infections
    if weekly is None:
        raise ShapeMismatch("trajectory carries no incidence channels")
    return reported_case_means(spec, weekly, rho).T


def nb_log_pmf(count: int, mean: float, dispersion: float) -> float:
    """Negative-binomial log-pmf, mean/dispersion form (var = mu + mu^2/r)."""
    if mean < 0.0 or not math.isfinite(mean):
        raise InvalidParams(f"mean must be finite and nonnegative, got {mean}")
    if dispersion <= 0.0 or not math.isfinite(dispersion):
        raise InvalidParams(f"dispersion must be positive, got {dispersion}")
    if count < 0 or count != int(count):
        raise InvalidParams(f"count must be a nonnegative integer, got {count}")
    k = float(count)
    r = float(dispersion)
    if mean == 0.0:
        return 0.0 if k == 0 else -math.inf
    return (math.lgamma(k + r) - math.lgamma(r) - math.lgamma(k + 1.0)
            + r * math.log(r / (r + mean)) + k * math.log(mean / (r + mean)))


def log_likelihood(series: CaseSeries, xi: np.ndarray, r: float) -> float:
    """Sum of per-cell NB log-pmfs of the observed counts given means xi.

    xi is oriented ages x weeks (the expected_reported_cases layout).
    Means are floored at 1e-10 to keep transient zeros from absorbing the
    sampler; an empty series scores 0.
    """
    if r <= 0.0 or not math.isfinite(r):
        raise InvalidParams(f"dispersion must be positive, got {r}")
    xi = np.asarray(xi, dtype=float)
    if series.n_cells == 0 and xi.size == 0:
        return 0.0
    if xi.shape != (6, series.n_weeks):
        raise ShapeMismatch(
            f"expected means of shape (6, {series.n_weeks}), got {xi.shape}")
    if np.any(xi < 0.0):
        raise InvalidParams("expected means must be nonnegative")
    counts = series.counts.T.astype(float).ravel()
    means = xi.ravel()
    return float(nb_loglik_sum(counts, means, float(r)))


def simulate_observations(xi: np.ndarray, r: float, seed) -> CaseSeries:
    """Independent NB draws per cell of the ages x weeks mean matrix."""
    if r <= 0.0 or not math.isfinite(r):
        raise InvalidParams(f"dispersion must be positive, got {r}")
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 2 or xi.shape[0] != 6:
        raise ShapeMismatch("xi must be ages x weeks (6 rows)")
    if np.any(xi < 0.0) or not np.all(np.isfinite(xi)):
        raise InvalidParams("expected means must be finite and nonnegative")
    rng = np.random.default_rng(seed)
    means = xi.T  # draw in (week, age) order
    p = r / (r + means)
    counts = rng.negative_binomial(r, p)
    return CaseSeries(counts=counts.astype(np.int64))
