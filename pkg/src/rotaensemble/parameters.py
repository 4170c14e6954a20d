"""The ten free parameters estimated per model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PARAM_NAMES = ("b", "phi", "r", "rho",
               "beta1", "beta2", "beta3", "beta4", "beta5", "beta6")

PHI_LOWER = 2.0
PHI_UPPER = 2.0 + 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Theta = (b, phi, r, rho, beta01..beta06).

    Construction does not enforce supports: the prior scores out-of-support
    points as -inf, so the container must be able to hold them.
    """

    b: float
    phi: float
    r: float
    rho: float
    beta0: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta0, dtype=float))
        if beta.size == 1:
            beta = np.full(6, float(beta[0]))
        if beta.shape != (6,):
            raise ValueError("beta0 must hold six baseline rates")
        object.__setattr__(self, "beta0", beta)

    def to_array(self) -> np.ndarray:
        out = np.empty(10)
        out[0] = self.b
        out[1] = self.phi
        out[2] = self.r
        out[3] = self.rho
        out[4:10] = self.beta0
        return out

    @classmethod
    def from_array(cls, values) -> "ParamVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (10,):
            raise ValueError("a parameter vector has exactly 10 entries")
        return cls(b=float(values[0]), phi=float(values[1]),
                   r=float(values[2]), rho=float(values[3]),
                   beta0=values[4:10].copy())


def in_support(theta: ParamVector) -> bool:
    finite = (math.isfinite(theta.b) and math.isfinite(theta.phi)
              and math.isfinite(theta.r) and math.isfinite(theta.rho)
              and bool(np.all(np.isfinite(theta.beta0))))
    return (finite
            and 0.0 <= theta.b <= 1.0
            and PHI_LOWER <= theta.phi <= PHI_UPPER
            and theta.r > 0.0
            and 0.0 < theta.rho <= 1.0
            and bool(np.all(theta.beta0 > 0.0)))
