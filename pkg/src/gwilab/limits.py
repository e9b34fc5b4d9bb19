"""Limit constants, scaling sequences, regime classification, and the limit law.

The harmonic-moment limit I(r, sigma) has three branches split by r against
sigma. Below sigma it reduces to a beta integral with the closed form
gamma^{-r} Gamma(sigma - r) / Gamma(sigma); at sigma it is
gamma^{-sigma} / Gamma(sigma); above sigma it involves the limit profile
U(x) = lim n^sigma H_n(x), which is only computable by extrapolating the
finite-n scaled pgf, so that branch needs a model.

The normalized-sum limit law has characteristic function equal to a gamma
scale mixture of centered normals, so sampling reduces to

    Y ~ Gamma(shape sigma, scale gamma),   value = sigma0 * N / sqrt(Y).

Classification of the decay regimes follows the comparison of the epsilon
sequence against the boundary exponent rho = (1+sigma-alpha)/(2sigma-alpha)
(power-law epsilon), against the critical tail index alpha = 1 + sigma
(log-law epsilon), or against alpha alone (fixed epsilon).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
from scipy import integrate

from .rng import rng_from_seed
from .series import log_pgf_of_Zn, pgf_of_Zn

if TYPE_CHECKING:  # pragma: no cover
    from .model import ModelParams

#: Branch equality (r vs sigma, e vs rho, alpha vs 1+sigma) is decided at
#: this absolute tolerance.
EQUALITY_TOL = 1e-12

#: Default large n at which the limit profile U is extrapolated.
DEFAULT_N_STAR = 1024


class ModelRequired(ValueError):
    """The r > sigma branch needs a model to approximate U."""


class OutOfScope(ValueError):
    """Parameters outside the admissible classification range."""


class QuadratureFailure(ArithmeticError):
    """Adaptive quadrature could not reach tolerance."""


class MomentCondition(str, Enum):
    """How the increment law controls its upper tail."""

    FINITE = "finite_plus_moment"  # E (X+)^{1+sigma} < inf, tail lighter than any power
    TAIL = "tail_index"            # P(X+ >= x) ~ a x^{-alpha}


class Regime(str, Enum):
    A_GAUSSIAN = "a_gaussian"
    B_HEAVY_TAIL = "b_heavy_tail"
    C_BOUNDARY = "c_boundary"
    CRIT_A = "crit_a"
    CRIT_B = "crit_b"
    CRIT_C = "crit_c"
    FIXED_EPS_A = "fixed_eps_a"
    FIXED_EPS_B = "fixed_eps_b"
    FIXED_EPS_C = "fixed_eps_c"


@dataclass(frozen=True)
class LimitConstants:
    """Model and increment constants entering the limit statements."""

    sigma: float
    gamma: float
    sigma0_sq: float
    alpha: float | None = None
    a: float | None = None

    def __post_init__(self) -> None:
        if self.sigma0_sq <= 0.0:
            raise ValueError("sigma0_sq must be positive")
        if self.sigma <= 0.0 or self.gamma <= 0.0:
            raise ValueError("sigma and gamma must be positive")
        if (self.alpha is None) != (self.a is None):
            raise ValueError("tail index and tail constant come as a pair")

    @property
    def rho(self) -> float | None:
        """Boundary exponent, defined only for tail index in (2, 1+sigma)."""
        if self.alpha is None or not 2.0 < self.alpha < 1.0 + self.sigma:
            return None
        return (1.0 + self.sigma - self.alpha) / (2.0 * self.sigma - self.alpha)

    @staticmethod
    def from_model_and_law(model: "ModelParams", law) -> "LimitConstants":
        """Combine a validated model with an increment law (duck-typed)."""
        return LimitConstants(sigma=model.sigma, gamma=model.gamma,
                              sigma0_sq=law.sigma0_sq,
                              alpha=getattr(law, "alpha", None),
                              a=getattr(law, "a", None))


@dataclass(frozen=True)
class EpsilonSpec:
    """Threshold sequence: power law c n^{-e}, log law c (log n)^{-p}, or fixed.

    Power exponents must lie in (0, 1/2), so that eps_n -> 0 and
    n eps_n^2 -> inf. The log-law form exists because at the critical tail
    index the sub-regimes are separated by eps_n^{sigma-1} log n, which no
    power sequence can hold at a finite limit.
    """

    kind: str  # "power" | "log" | "fixed"
    coeff: float
    exponent: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("power", "log", "fixed"):
            raise ValueError("kind must be power, log, or fixed")
        if self.coeff <= 0.0:
            raise ValueError("coefficient must be positive")
        if self.kind != "fixed":
            if self.exponent is None or self.exponent <= 0.0:
                raise ValueError("power/log form requires a positive exponent")

    @staticmethod
    def power(exponent: float, coeff: float = 1.0) -> "EpsilonSpec":
        return EpsilonSpec("power", coeff=coeff, exponent=exponent)

    @staticmethod
    def log_law(exponent: float, coeff: float = 1.0) -> "EpsilonSpec":
        return EpsilonSpec("log", coeff=coeff, exponent=exponent)

    @staticmethod
    def fixed(value: float) -> "EpsilonSpec":
        return EpsilonSpec("fixed", coeff=value)

    def value(self, n: int) -> float:
        if self.kind == "power":
            return self.coeff * n ** -self.exponent
        if self.kind == "log":
            return self.coeff * math.log(n) ** -self.exponent
        return self.coeff


@dataclass(frozen=True)
class RegimeReport:
    """Outcome of classification: regime, scaling description, and the limit."""

    regime: Regime
    tau: float | None
    scaling: str
    limit_value: float

    def __post_init__(self) -> None:
        if not (self.limit_value > 0.0 and math.isfinite(self.limit_value)):
            raise ValueError("limit_value must be positive and finite")


def scaling_A(n: int, r: float, sigma: float) -> float:
    """Harmonic-moment normalization: n^sigma, n^sigma/log n, or n^r."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if r <= 0.0 or sigma <= 0.0:
        raise ValueError("r and sigma must be positive")
    if abs(r - sigma) <= EQUALITY_TOL:
        return n**sigma / math.log(n)
    if r > sigma:
        return float(n**sigma)
    return float(n**r)


def _quad(fn, a, b, limit=400, epsrel=1e-10):
    value, _abserr, info, *msg = integrate.quad(fn, a, b, epsabs=0.0,
                                                epsrel=epsrel, limit=limit,
                                                full_output=1)
    if msg:
        raise QuadratureFailure(str(msg[0]))
    return value


def extrapolated_limit_profile(model: "ModelParams", x,
                               n_star: int = DEFAULT_N_STAR):
    """U(x) estimated by Richardson extrapolation of n^sigma H_n(x).

    Uses the pair (n_star/2, n_star) under the first-order 1/n correction
    assumed throughout: 2 v(n_star) - v(n_star/2) for a doubled grid.
    """
    if n_star < 4 or n_star % 2:
        raise ValueError("n_star must be an even integer >= 4")
    sigma = model.sigma
    half = n_star // 2
    v2 = n_star**sigma * pgf_of_Zn(model, n_star, x)
    v1 = half**sigma * pgf_of_Zn(model, half, x)
    return 2.0 * v2 - v1


def _profile_difference_fn(model: "ModelParams", n_star: int):
    """t -> U(e^{-t}) - U(0) for the extrapolated profile.

    Each finite-n difference is formed through expm1 on the log scale, which
    keeps relative accuracy deep in the tail where the plain subtraction
    would cancel.
    """
    if n_star < 4 or n_star % 2:
        raise ValueError("n_star must be an even integer >= 4")
    sigma = model.sigma
    half = n_star // 2
    log0_full = log_pgf_of_Zn(model, n_star, 0.0)
    log0_half = log_pgf_of_Zn(model, half, 0.0)
    scale_full = n_star**sigma * math.exp(log0_full)
    scale_half = half**sigma * math.exp(log0_half)

    def diff(t: float) -> float:
        x = math.exp(-t)
        d_full = scale_full * math.expm1(log_pgf_of_Zn(model, n_star, x) - log0_full)
        d_half = scale_half * math.expm1(log_pgf_of_Zn(model, half, x) - log0_half)
        return 2.0 * d_full - d_half

    return diff


def I_constant(r: float, sigma: float, gamma: float,
               model: "ModelParams | None" = None,
               n_star: int = DEFAULT_N_STAR) -> float:
    """The harmonic-moment limit I(r, sigma), by its three branches.

    r < sigma uses the closed beta-integral form; r = sigma is elementary;
    r > sigma integrates the extrapolated limit profile and therefore
    requires ``model``.
    """
    if r <= 0.0:
        raise ValueError("r must be positive")
    if sigma <= 0.0 or gamma <= 0.0:
        raise ValueError("sigma and gamma must be positive")
    if abs(r - sigma) <= EQUALITY_TOL:
        return gamma**-sigma / math.gamma(sigma)
    if r < sigma:
        return gamma**-r * math.gamma(sigma - r) / math.gamma(sigma)
    if model is None:
        raise ModelRequired("the r > sigma branch needs a model to approximate U")
    diff = _profile_difference_fn(model, n_star)

    def integrand(t: float) -> float:
        return diff(t) * t ** (r - 1.0)

    # The extrapolated profile is itself only O(1/n_star) accurate, so the
    # quadrature tolerance is relaxed accordingly and the upper limit is cut
    # where the integrand sinks below that accuracy (remainder ~ e^{-T}).
    upper = 40.0 + 2.0 * r
    value = (_quad(integrand, 0.0, 1.0, epsrel=1e-7)
             + _quad(integrand, 1.0, upper, epsrel=1e-7))
    return value / math.gamma(r)


def i_constant_quadrature(r: float, sigma: float, gamma: float) -> float:
    """Quadrature cross-check of the r < sigma branch (beta identity)."""
    if not 0.0 < r < sigma:
        raise ValueError("quadrature cross-check applies to 0 < r < sigma")

    def integrand(s: float) -> float:
        return (1.0 + gamma * s) ** -sigma * s ** (r - 1.0)

    if r >= 1.0:
        value = _quad(integrand, 0.0, 1.0) + _quad(integrand, 1.0, np.inf)
    else:
        # Remove the integrable singularity at 0 with s = u^{1/r}.
        inner = _quad(lambda u: (1.0 + gamma * u ** (1.0 / r)) ** -sigma, 0.0, 1.0) / r
        value = inner + _quad(integrand, 1.0, np.inf)
    return value / math.gamma(r)


def upsilon(sigma: float, sigma0_sq: float, gamma: float) -> float:
    """Gaussian-regime limit constant (closed form)."""
    if sigma <= 1.0:
        raise ValueError("sigma must exceed 1")
    if sigma0_sq <= 0.0 or gamma <= 0.0:
        raise ValueError("sigma0_sq and gamma must be positive")
    return (2.0 ** (sigma - 1.0) * math.gamma(sigma + 0.5) * sigma0_sq**sigma
            / (math.gamma(sigma) * gamma**sigma * sigma * math.sqrt(math.pi)))


def normal_upper_tail(x: float) -> float:
    """P(N > x) for a standard normal."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def upsilon_quadrature(sigma: float, sigma0_sq: float, gamma: float) -> float:
    """Gaussian-window quadrature identity for the same constant.

    (1/(Gamma(sigma) gamma^sigma)) int_0^inf u^{sigma-1} P(N > sqrt(u)/sigma0) du
    """
    sigma0 = math.sqrt(sigma0_sq)

    def integrand(u: float) -> float:
        return u ** (sigma - 1.0) * normal_upper_tail(math.sqrt(u) / sigma0)

    value = _quad(integrand, 0.0, 1.0) + _quad(integrand, 1.0, np.inf)
    return value / (math.gamma(sigma) * gamma**sigma)


def classify_regime(consts: LimitConstants, eps: EpsilonSpec,
                    moment_condition: MomentCondition,
                    q_value: float | None = None) -> RegimeReport:
    """Map an epsilon sequence and increment-tail behavior to its decay regime.

    ``q_value`` supplies the fixed-epsilon series limit (it depends on the
    whole model, not on the constants here) and is required only when the
    classification lands in the fixed-epsilon light-tail regime.
    """
    sigma, gamma = consts.sigma, consts.gamma
    if sigma <= 1.0:
        raise OutOfScope("classification requires sigma > 1")
    alpha = consts.alpha if moment_condition is MomentCondition.TAIL else None
    if moment_condition is MomentCondition.TAIL:
        if alpha is None:
            raise OutOfScope("tail condition requires a tail index")
        if alpha <= 2.0:
            raise OutOfScope("tail index must exceed 2")
    ups = upsilon(sigma, consts.sigma0_sq, gamma)

    if eps.kind == "fixed":
        eps0 = eps.coeff
        if alpha is None or alpha > 1.0 + sigma + EQUALITY_TOL:
            if q_value is None:
                raise ValueError("fixed-eps light-tail regime requires q_value")
            return RegimeReport(Regime.FIXED_EPS_A, tau=None,
                                scaling="n^sigma", limit_value=q_value)
        if abs(alpha - (1.0 + sigma)) <= EQUALITY_TOL:
            limit = eps0 ** -(sigma + 1.0) * consts.a * I_constant(sigma, sigma, gamma)
            return RegimeReport(Regime.FIXED_EPS_B, tau=None,
                                scaling="n^sigma / log n", limit_value=limit)
        limit = eps0**-alpha * consts.a * I_constant(alpha - 1.0, sigma, gamma)
        return RegimeReport(Regime.FIXED_EPS_C, tau=None,
                            scaling="n^(alpha-1)", limit_value=limit)

    if eps.kind == "power":
        e = eps.exponent
        if not 0.0 < e < 0.5:
            raise OutOfScope("power exponent must lie in (0, 1/2)")
        if alpha is None or alpha > 1.0 + sigma + EQUALITY_TOL:
            return RegimeReport(Regime.A_GAUSSIAN, tau=None,
                                scaling="eps_n^(2 sigma) n^sigma", limit_value=ups)
        if abs(alpha - (1.0 + sigma)) <= EQUALITY_TOL:
            # eps_n^{sigma-1} log n -> 0 for every power sequence.
            return RegimeReport(Regime.CRIT_A, tau=None,
                                scaling="eps_n^(2 sigma) n^sigma", limit_value=ups)
        rho = consts.rho
        heavy = consts.a * I_constant(alpha - 1.0, sigma, gamma)
        if abs(e - rho) <= EQUALITY_TOL:
            tau = eps.coeff
            limit = tau ** (-2.0 * sigma) * ups + tau**-alpha * heavy
            return RegimeReport(Regime.C_BOUNDARY, tau=tau,
                                scaling="n^(sigma (alpha-2)/(2 sigma - alpha))",
                                limit_value=limit)
        if e > rho:
            return RegimeReport(Regime.A_GAUSSIAN, tau=None,
                                scaling="eps_n^(2 sigma) n^sigma", limit_value=ups)
        return RegimeReport(Regime.B_HEAVY_TAIL, tau=None,
                            scaling="eps_n^alpha n^(alpha-1)", limit_value=heavy)

    # Log-law epsilon.
    p = eps.exponent
    if alpha is None or alpha > 1.0 + sigma + EQUALITY_TOL:
        return RegimeReport(Regime.A_GAUSSIAN, tau=None,
                            scaling="eps_n^(2 sigma) n^sigma", limit_value=ups)
    if abs(alpha - (1.0 + sigma)) <= EQUALITY_TOL:
        crit_p = 1.0 / (sigma - 1.0)
        heavy = consts.a * I_constant(sigma, sigma, gamma)
        if abs(p - crit_p) <= EQUALITY_TOL:
            tau = eps.coeff ** (sigma - 1.0)
            return RegimeReport(Regime.CRIT_C, tau=tau,
                                scaling="eps_n^(2 sigma) n^sigma",
                                limit_value=ups + tau * heavy)
        if p > crit_p:
            return RegimeReport(Regime.CRIT_A, tau=None,
                                scaling="eps_n^(2 sigma) n^sigma", limit_value=ups)
        return RegimeReport(Regime.CRIT_B, tau=None,
                            scaling="eps_n^(sigma+1) n^sigma / log n",
                            limit_value=heavy)
    # Below the critical index a log-law sequence always lands heavy-tailed.
    heavy = consts.a * I_constant(alpha - 1.0, sigma, gamma)
    return RegimeReport(Regime.B_HEAVY_TAIL, tau=None,
                        scaling="eps_n^alpha n^(alpha-1)", limit_value=heavy)


def normalization_factor(regime: Regime, consts: LimitConstants, n: int,
                         eps_n: float) -> float:
    """Numeric value of the regime's normalizing sequence at (n, eps_n)."""
    sigma, alpha = consts.sigma, consts.alpha
    if regime in (Regime.A_GAUSSIAN, Regime.CRIT_A, Regime.CRIT_C):
        return eps_n ** (2.0 * sigma) * n**sigma
    if regime is Regime.B_HEAVY_TAIL:
        return eps_n**alpha * n ** (alpha - 1.0)
    if regime is Regime.C_BOUNDARY:
        return n ** (sigma * (alpha - 2.0) / (2.0 * sigma - alpha))
    if regime is Regime.CRIT_B:
        return eps_n ** (sigma + 1.0) * n**sigma / math.log(n)
    if regime is Regime.FIXED_EPS_A:
        return float(n**sigma)
    if regime is Regime.FIXED_EPS_B:
        return n**sigma / math.log(n)
    if regime is Regime.FIXED_EPS_C:
        return float(n ** (alpha - 1.0))
    raise ValueError(f"unknown regime {regime}")  # pragma: no cover


def sample_limit_law(sigma: float, gamma: float, sigma0_sq: float,
                     count: int, seed: int) -> np.ndarray:
    """Draws from the limit law via its gamma scale-mixture representation.

    Y ~ Gamma(shape sigma, scale gamma), value = sigma0 N / sqrt(Y) with N
    standard normal. Deterministic given the seed; shard by deriving
    disjoint seeds with the documented splitting rule in ``gwilab.rng``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = rng_from_seed(seed)
    y = rng.gamma(shape=sigma, scale=gamma, size=count)
    normals = rng.standard_normal(count)
    return math.sqrt(sigma0_sq) * normals / np.sqrt(y)


def write_constants_csv(rows, path) -> None:
    """Rows (name, sigma, gamma, sigma0_sq, alpha, value); alpha may be blank."""
    with open(path, "w", newline="\n") as fh:
        fh.write("name,sigma,gamma,sigma0_sq,alpha,value\n")
        for name, sigma, gamma, s0sq, alpha, value in rows:
            alpha_txt = "" if alpha is None else repr(float(alpha))
            fh.write(f"{name},{float(sigma)!r},{float(gamma)!r},{float(s0sq)!r},"
                     f"{alpha_txt},{float(value)!r}\n")
