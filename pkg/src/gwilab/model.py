"""Offspring and immigration laws for a critical branching process with immigration.

A model is a pair of distributions on the non-negative integers: the
offspring law (pgf ``f``, coefficients ``p_k``) and the immigration law
(pgf ``h``, coefficients ``h_k``). Validation derives the constants that
drive everything downstream:

    m     = f'(1)        offspring mean, required to equal 1 (critical case)
    beta  = h'(1)        immigration mean
    gamma = f''(1) / 2   half the second factorial moment of the offspring law
    sigma = beta / gamma

Named families (geometric, Poisson) carry analytic moments so the derived
constants are free of truncation bias; explicit pmfs compute moments from
their coefficients. Infinite-support laws can only enter as named families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .series import TruncatedSeries

#: |m - 1| above this is a criticality violation. Far below any quadrature
#: or series error downstream.
CRITICALITY_TOL = 1e-10

#: Explicit pmfs must sum to 1 within this absolute tolerance.
PMF_SUM_TOL = 1e-12


class CriticalityViolation(ValueError):
    """Offspring mean differs from 1 beyond tolerance."""


class DegenerateLaw(ValueError):
    """p0 or h0 outside (0,1), or offspring variance term gamma vanishes."""


class PeriodicSupport(ValueError):
    """gcd of the positive offspring support exceeds 1."""


class DistributionKind(str, Enum):
    EXPLICIT = "explicit"
    GEOMETRIC = "geometric"
    POISSON = "poisson"


@dataclass(frozen=True)
class DistributionSpec:
    """A law on {0, 1, 2, ...} given either as an explicit pmf or a named family.

    kind=GEOMETRIC: pmf p_k = q (1-q)^k with success parameter q = ``param``.
    kind=POISSON:   pmf p_k = e^{-lam} lam^k / k! with rate lam = ``param``.
    kind=EXPLICIT:  finite pmf stored in ``pmf``.

    ``pmf_truncation`` is the default order used when a named family has to
    be expanded to coefficients.
    """

    kind: DistributionKind
    param: float | None = None
    pmf: tuple[float, ...] | None = None
    pmf_truncation: int = 4096

    def __post_init__(self) -> None:
        if self.pmf_truncation < 0:
            raise ValueError("pmf_truncation must be non-negative")
        if self.kind is DistributionKind.EXPLICIT:
            if not self.pmf:
                raise ValueError("explicit kind requires a pmf")
            arr = tuple(float(p) for p in self.pmf)
            if any(p < 0.0 for p in arr):
                raise ValueError("pmf coefficients must be non-negative")
            if abs(sum(arr) - 1.0) > PMF_SUM_TOL:
                raise ValueError("pmf must sum to 1 within 1e-12")
            object.__setattr__(self, "pmf", arr)
        elif self.kind is DistributionKind.GEOMETRIC:
            if self.param is None or not 0.0 < self.param < 1.0:
                raise ValueError("geometric family requires success parameter in (0,1)")
        elif self.kind is DistributionKind.POISSON:
            if self.param is None or self.param <= 0.0:
                raise ValueError("Poisson family requires a positive rate")
        else:  # pragma: no cover - enum is closed
            raise ValueError(f"unknown kind {self.kind}")

    @staticmethod
    def geometric(q: float, pmf_truncation: int = 4096) -> "DistributionSpec":
        return DistributionSpec(DistributionKind.GEOMETRIC, param=float(q),
                                pmf_truncation=pmf_truncation)

    @staticmethod
    def poisson(rate: float, pmf_truncation: int = 4096) -> "DistributionSpec":
        return DistributionSpec(DistributionKind.POISSON, param=float(rate),
                                pmf_truncation=pmf_truncation)

    @staticmethod
    def explicit(pmf, pmf_truncation: int = 4096) -> "DistributionSpec":
        return DistributionSpec(DistributionKind.EXPLICIT, pmf=tuple(pmf),
                                pmf_truncation=pmf_truncation)

    @property
    def mean(self) -> float:
        if self.kind is DistributionKind.GEOMETRIC:
            q = self.param
            return (1.0 - q) / q
        if self.kind is DistributionKind.POISSON:
            return self.param
        return float(sum(k * p for k, p in enumerate(self.pmf)))

    @property
    def second_factorial_moment(self) -> float:
        """E X(X-1), the pgf curvature f''(1)."""
        if self.kind is DistributionKind.GEOMETRIC:
            q = self.param
            return 2.0 * (1.0 - q) ** 2 / q**2
        if self.kind is DistributionKind.POISSON:
            return self.param**2
        return float(sum(k * (k - 1) * p for k, p in enumerate(self.pmf)))

    @property
    def variance(self) -> float:
        m = self.mean
        return self.second_factorial_moment + m - m * m

    @property
    def mass_at_zero(self) -> float:
        if self.kind is DistributionKind.GEOMETRIC:
            return self.param
        if self.kind is DistributionKind.POISSON:
            return math.exp(-self.param)
        return self.pmf[0]


@dataclass(frozen=True)
class ModelParams:
    """Validated critical model with its derived constants.

    ``sigma`` is stored as the exact floating quotient beta/gamma.
    """

    offspring: DistributionSpec
    immigration: DistributionSpec
    m: float
    beta: float
    gamma: float
    sigma: float


def _positive_support_gcd(pmf) -> int:
    g = 0
    for k, p in enumerate(pmf):
        if k >= 1 and p > 0.0:
            g = math.gcd(g, k)
    return g


def validate_condition_A(offspring: DistributionSpec,
                         immigration: DistributionSpec) -> ModelParams:
    """Check the standing assumptions and derive (m, beta, gamma, sigma).

    Requirements: criticality |m - 1| <= 1e-10, p0 and h0 in (0,1), positive
    finite beta and gamma, aperiodic offspring support, and finite
    sum p_j j^2 log j plus finite second immigration moment. The moment sums
    are finite by construction for finite-support pmfs and hold analytically
    for the geometric and Poisson families.

    Raises CriticalityViolation, DegenerateLaw, or PeriodicSupport.
    """
    m = offspring.mean
    if abs(m - 1.0) > CRITICALITY_TOL:
        raise CriticalityViolation(f"offspring mean {m!r} is not 1 within {CRITICALITY_TOL}")

    p0 = offspring.mass_at_zero
    h0 = immigration.mass_at_zero
    if not 0.0 < p0 < 1.0:
        raise DegenerateLaw(f"offspring mass at zero {p0!r} must lie in (0,1)")
    if not 0.0 < h0 < 1.0:
        raise DegenerateLaw(f"immigration mass at zero {h0!r} must lie in (0,1)")

    gamma = offspring.second_factorial_moment / 2.0
    if gamma <= 0.0 or not math.isfinite(gamma):
        raise DegenerateLaw("offspring second factorial moment must be positive and finite")

    beta = immigration.mean
    if beta <= 0.0 or not math.isfinite(beta):
        raise DegenerateLaw("immigration mean must be positive and finite")

    if offspring.kind is DistributionKind.EXPLICIT:
        if _positive_support_gcd(offspring.pmf) != 1:
            raise PeriodicSupport("gcd of positive offspring support exceeds 1")
        # Finite-support sums; checked for completeness, cannot be infinite.
        xlogx = sum(p * k * k * math.log(k) for k, p in enumerate(offspring.pmf) if k >= 2)
        if not math.isfinite(xlogx):  # pragma: no cover
            raise DegenerateLaw("offspring j^2 log j moment is not finite")
    if immigration.kind is DistributionKind.EXPLICIT:
        second = sum(p * k * k for k, p in enumerate(immigration.pmf))
        if not math.isfinite(second):  # pragma: no cover
            raise DegenerateLaw("immigration second moment is not finite")

    return ModelParams(offspring=offspring, immigration=immigration,
                       m=m, beta=beta, gamma=gamma, sigma=beta / gamma)


def pgf_coefficients(spec: DistributionSpec, K: int) -> TruncatedSeries:
    """Expand a law to its pmf coefficients c_0..c_K.

    The tail mass 1 - sum(c_j) is available as ``TruncatedSeries.tail_mass``.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    if spec.kind is DistributionKind.GEOMETRIC:
        q = spec.param
        coeffs = q * (1.0 - q) ** np.arange(K + 1, dtype=np.float64)
    elif spec.kind is DistributionKind.POISSON:
        lam = spec.param
        coeffs = np.empty(K + 1)
        coeffs[0] = math.exp(-lam)
        for k in range(1, K + 1):
            coeffs[k] = coeffs[k - 1] * lam / k
    else:
        coeffs = np.zeros(K + 1)
        upto = min(K + 1, len(spec.pmf))
        coeffs[:upto] = spec.pmf[:upto]
    return TruncatedSeries(coeffs)
