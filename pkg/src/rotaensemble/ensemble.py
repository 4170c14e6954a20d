"""BIC-weighted combination of the five fitted models.

Model evidence is approximated by BIC from the maximum log-likelihood a
chain visited; posterior model probabilities follow from a uniform model
prior. Combined estimates are means weighted by those probabilities, with
equal-tailed intervals taken from the pooled mixture of posterior draws
(a draw from model k carries weight pmp_k / n_k).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GridMismatch, WeightMismatch
from .inference import PosteriorSummary

_WEIGHT_SUM_TOL = 1e-8


def bic(max_log_likelihood: float, k: int, n: int) -> float:
    """Bayesian information criterion: -2 * max LL + k * ln(n)."""
    if n < 1 or k < 1:
        raise ValueError("k and n must be at least 1")
    return -2.0 * float(max_log_likelihood) + k * math.log(n)


def pmp_weights(bics) -> np.ndarray:
    """Normalized exp(-BIC/2), max-subtracted for stability."""
    b = np.asarray(bics, dtype=float)
    if b.size == 0:
        raise ValueError("at least one model is required")
    half = -0.5 * b
    half -= half.max()
    w = np.exp(half)
    return w / w.sum()


@dataclass(frozen=True)
class ModelEvidence:
    """One model's BIC evidence and its share of posterior probability."""

    model_id: str
    max_log_likelihood: float
    k: int
    n: int
    bic: float
    pmp: float


def model_evidences(summaries: Sequence[PosteriorSummary],
                    prior=None) -> list[ModelEvidence]:
    """Score a set of fitted models against each other."""
    bics = [bic(s.max_log_likelihood, s.parameter_count, s.observation_count)
            for s in summaries]
    weights = _apply_model_prior(np.asarray(bics), prior)
    return [ModelEvidence(model_id=s.model_id,
                          max_log_likelihood=s.max_log_likelihood,
                          k=s.parameter_count, n=s.observation_count,
                          bic=b, pmp=float(w))
            for s, b, w in zip(summaries, bics, weights)]


def _apply_model_prior(bics: np.ndarray, prior) -> np.ndarray:
    if prior is None:
        return pmp_weights(bics)
    p = np.asarray(prior, dtype=float)
    if p.shape != bics.shape:
        raise WeightMismatch("model prior length does not match models")
    if np.any(p < 0.0) or p.sum() <= 0.0:
        raise WeightMismatch("model prior must be nonnegative and nonzero")
    half = -0.5 * bics
    half -= half.max()
    w = p * np.exp(half)
    return w / w.sum()


def posterior_model_probabilities(evidences: Sequence[ModelEvidence],
                                  prior=None) -> np.ndarray:
    """Recompute pmps from stored BICs (uniform model prior by default)."""
    bics = np.asarray([e.bic for e in evidences], dtype=float)
    return _apply_model_prior(bics, prior)


@dataclass(frozen=True, eq=False)
class BmaEstimate:
    """Weighted point estimate with an equal-tailed mixture interval."""

    point: float
    interval: tuple
    level: float
    component_weights: np.ndarray


def _check_weights(weights, n_components: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (n_components,):
        raise WeightMismatch("one weight per component sample set required")
    if np.any(w < 0.0):
        raise WeightMismatch("weights must be nonnegative")
    if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
        raise WeightMismatch("weights must sum to 1")
    return w


def _pool(sample_sets, weights):
    values = []
    unit_weights = []
    for w, samples in zip(weights, sample_sets):
        s = np.asarray(samples, dtype=float).ravel()
        if w == 0.0:
            continue
        if s.size == 0:
            raise WeightMismatch("positive weight on an empty sample set")
        values.append(s)
        unit_weights.append(np.full(s.size, w / s.size))
    if not values:
        raise WeightMismatch("all weights are zero")
    return np.concatenate(values), np.concatenate(unit_weights)


def _weighted_quantile(values: np.ndarray, weights: np.ndarray,
                       q: float) -> float:
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    idx = int(np.searchsorted(cw, q * cw[-1], side="left"))
    return float(v[min(idx, v.size - 1)])


def mixture_interval(sample_sets, weights, level: float = 0.95):
    """Equal-tailed interval of the weighted mixture of sample sets."""
    if not 0.0 < level <= 1.0:
        raise ValueError("level must lie in (0, 1]")
    w = _check_weights(weights, len(sample_sets))
    values, unit = _pool(sample_sets, w)
    tail = 0.5 * (1.0 - level)
    return (_weighted_quantile(values, unit, tail),
            _weighted_quantile(values, unit, 1.0 - tail))


def bma_combine_scalar(sample_sets, weights,
                       level: float = 0.95) -> BmaEstimate:
    """Combine per-model posterior draws of one scalar quantity.

    The point estimate is the exact weighted average of component means;
    the interval is equal-tailed on the pooled mixture.
    """
    w = _check_weights(weights, len(sample_sets))
    point = 0.0
    for wk, samples in zip(w, sample_sets):
        if wk == 0.0:
            continue
        s = np.asarray(samples, dtype=float).ravel()
        if s.size == 0:
            raise WeightMismatch("positive weight on an empty sample set")
        point += wk * float(s.mean())
    interval = mixture_interval(sample_sets, w, level)
    return BmaEstimate(point=point, interval=interval, level=level,
                       component_weights=w)


def bma_combine_profile(profile_draws, weights,
                        level: float = 0.95) -> list[BmaEstimate]:
    """Combine per-model draws of a weekly profile, pointwise per week.

    profile_draws holds one (n_draws_k, T) array per model on a shared
    week grid; the result is one estimate per week.
    """
    w = _check_weights(weights, len(profile_draws))
    arrays = [np.atleast_2d(np.asarray(p, dtype=float)) for p in profile_draws]
    widths = {a.shape[1] for a in arrays}
    if len(widths) != 1:
        raise GridMismatch("profiles do not share a time grid")
    n_weeks = widths.pop()
    out = []
    for t in range(n_weeks):
        out.append(bma_combine_scalar([a[:, t] for a in arrays], w, level))
    return out
