"""Truncated power-series arithmetic for generating-function iteration.

The population after n steps has pgf

    H_n(x) = prod_{k=0}^{n-1} h(f_k(x)),    f_0(x) = x,  f_{k+1} = f(f_k),

so its law is read off the coefficients of H_n. Coefficients through order K
of a product or composition depend only on coefficients through order K of
the inputs, hence arrays of length K+1 carry P(Z_n = j), j <= K, exactly up
to round-off, independent of how much mass lies beyond K.

Composition with a named-family outer pgf is done through the family's
closed form (series reciprocal for geometric, series exponential for
Poisson), which is exact in the outer function and costs O(K^2) per step.
The generic ``compose`` runs Horner over series arithmetic and is the
reference path for explicit (finite-support) outers.

For evaluation at a point, ``pgf_of_Zn`` iterates scalars instead of
coefficient arrays; it is exact for any n and is the workhorse behind the
Laplace-transform route to harmonic moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np
from numpy.polynomial import polynomial as _poly

if TYPE_CHECKING:  # pragma: no cover
    from .model import DistributionSpec, ModelParams

#: Intermediate coefficients above this magnitude signal invalid inputs.
OVERFLOW_LIMIT = 1e6

#: Round-off floor: computed pgf coefficients in [-NEG_FLOOR, 0) clamp to 0,
#: anything more negative is genuine arithmetic breakdown.
NEG_FLOOR = 1e-12


class TruncationOverflow(ArithmeticError):
    """Series arithmetic produced coefficients beyond the sanity bound."""


class NegativeCoefficient(ArithmeticError):
    """A pgf coefficient fell below the round-off floor."""


@dataclass(frozen=True, eq=False)
class TruncatedSeries:
    """Power-series coefficients c_0..c_K, truncated at order K."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.coeffs, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("coeffs must be a non-empty 1-d sequence")
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def K(self) -> int:
        return int(self.coeffs.size - 1)

    @property
    def tail_mass(self) -> float:
        """1 - sum of coefficients, floored at 0 (meaningful for pgfs)."""
        return max(0.0, 1.0 - float(self.coeffs.sum()))

    @staticmethod
    def identity(K: int) -> "TruncatedSeries":
        c = np.zeros(K + 1)
        if K >= 1:
            c[1] = 1.0
        return TruncatedSeries(c)

    @staticmethod
    def constant(value: float, K: int) -> "TruncatedSeries":
        c = np.zeros(K + 1)
        c[0] = value
        return TruncatedSeries(c)


@dataclass(frozen=True)
class IterationTrace:
    """Record of an n-step pgf iteration: f_k(0) for k <= n, and H_n."""

    n: int
    f_at_zero: np.ndarray
    H_n: TruncatedSeries

    def __post_init__(self) -> None:
        fz = np.asarray(self.f_at_zero, dtype=np.float64)
        if fz.shape != (self.n + 1,):
            raise ValueError("f_at_zero must have length n+1")
        if np.any(fz < 0.0) or np.any(fz >= 1.0):
            raise ValueError("f_k(0) must lie in [0, 1)")
        if np.any(np.diff(fz) < -1e-12):
            raise ValueError("f_k(0) must be nondecreasing in k")
        coeffs = self.H_n.coeffs
        if np.any(coeffs < 0.0) or np.any(coeffs > 1.0 + 1e-9):
            raise ValueError("H_n coefficients must lie in [0, 1]")
        fz.flags.writeable = False
        object.__setattr__(self, "f_at_zero", fz)


def _mul_trunc(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    return np.convolve(a, b)[: K + 1]


def _reciprocal(u: np.ndarray, K: int) -> np.ndarray:
    """Coefficients of 1/u through order K by Newton iteration; u[0] != 0."""
    r = np.array([1.0 / u[0]])
    m = 1
    while m < K + 1:
        m = min(2 * m, K + 1)
        ur = np.convolve(u[:m], r)[:m]
        rr = np.convolve(r, ur)[:m]
        doubled = np.zeros(m)
        doubled[: r.size] = 2.0 * r
        r = doubled - rr
    return r


def _exp_shifted(w: np.ndarray, K: int) -> np.ndarray:
    """exp of a series, via exp(w0) * exp(w - w0) with the standard recurrence."""
    scale = math.exp(w[0])
    e = np.zeros(K + 1)
    e[0] = 1.0
    jw = np.arange(K + 1) * w
    for m in range(1, K + 1):
        e[m] = np.dot(jw[1 : m + 1], e[m - 1 :: -1]) / m
    return scale * e


def apply_pgf(spec: "DistributionSpec", inner: np.ndarray, K: int) -> np.ndarray:
    """Coefficients of spec's pgf composed with the series ``inner``.

    Exact in the outer function for the named families; Horner over the
    finite support for explicit pmfs. Requires inner[0] in [0, 1).
    """
    if not 0.0 <= inner[0] < 1.0:
        raise ValueError("inner constant term must lie in [0, 1)")
    kind = spec.kind
    if kind == "geometric":
        q = spec.param
        u = -(1.0 - q) * inner
        u = u.copy()
        u[0] += 1.0
        return q * _reciprocal(u, K)
    if kind == "poisson":
        lam = spec.param
        w = lam * inner
        w = w.copy()
        w[0] -= lam
        return _exp_shifted(w, K)
    # Explicit: Horner over p_0..p_d.
    res = np.zeros(K + 1)
    for c in spec.pmf[::-1]:
        res = _mul_trunc(res, inner, K)
        res[0] += c
    return res


def compose(outer: TruncatedSeries, inner: TruncatedSeries) -> TruncatedSeries:
    """Coefficients of outer(inner(x)) through order K, by Horner.

    Both series must share the truncation order and inner must have constant
    term in [0, 1). When the outer series is itself a truncation of an
    infinite pgf, the result inherits the outer's tail error; the
    family-aware ``apply_pgf`` avoids that.
    """
    K = outer.K
    if inner.K != K:
        raise ValueError("outer and inner must share the truncation order")
    if not 0.0 <= inner.coeffs[0] < 1.0:
        raise ValueError("inner constant term must lie in [0, 1)")
    res = np.zeros(K + 1)
    for c in outer.coeffs[::-1]:
        res = _mul_trunc(res, inner.coeffs, K)
        res[0] += c
        if np.abs(res).max() > OVERFLOW_LIMIT:
            raise TruncationOverflow("intermediate coefficient exceeded 1e6")
    return TruncatedSeries(res)


def _finalize_pgf_coeffs(coeffs: np.ndarray) -> np.ndarray:
    worst = float(coeffs.min())
    if worst < -NEG_FLOOR:
        raise NegativeCoefficient(f"coefficient {worst!r} below round-off floor")
    return np.where(coeffs < 0.0, 0.0, coeffs)


def iterate_pgf(model: "ModelParams", n: int, K: int) -> IterationTrace:
    """Run the n-step iteration and return f_k(0) plus the coefficients of H_n.

    H_0 is the constant series 1 (empty product: the population starts
    empty). Each step multiplies the running product by h(f_k) and advances
    f_k by one composition with the offspring pgf.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if K < 1:
        raise ValueError("K must be at least 1")
    g = np.zeros(K + 1)
    g[1] = 1.0
    H = np.zeros(K + 1)
    H[0] = 1.0
    f_at_zero = np.empty(n + 1)
    f_at_zero[0] = 0.0
    for k in range(n):
        step = apply_pgf(model.immigration, g, K)
        H = _mul_trunc(H, step, K)
        g = apply_pgf(model.offspring, g, K)
        f_at_zero[k + 1] = g[0]
    H = _finalize_pgf_coeffs(H)
    return IterationTrace(n=n, f_at_zero=f_at_zero, H_n=TruncatedSeries(H))


def linear_fractional_oracle(gamma: float, n: int, s: float) -> float:
    """Closed-form n-fold offspring iterate for the linear-fractional family.

    For the critical geometric-type pgf with curvature constant gamma the
    iteration is exact:  1 - f_n(s) = (1 - s) / (1 + gamma n (1 - s)).
    Ground truth for ``iterate_pgf`` (gamma = 1 is the plain geometric with
    success parameter 1/2).
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    if n < 0:
        raise ValueError("n must be non-negative")
    if not 0.0 <= s < 1.0:
        raise ValueError("s must lie in [0, 1)")
    if n == 0:
        return s
    u = 1.0 - s
    return 1.0 - u / (1.0 + gamma * n * u)


def evaluate(series: TruncatedSeries, x: float) -> float:
    """Horner evaluation of the series at |x| <= 1."""
    if abs(x) > 1.0:
        raise ValueError("|x| must not exceed 1")
    return float(_poly.polyval(x, series.coeffs))


def _scalar_pgf(spec: "DistributionSpec") -> Callable[[float], float]:
    """Fast float-only pgf evaluator for tight scalar loops."""
    kind = spec.kind
    if kind == "geometric":
        q = spec.param
        b = 1.0 - q
        return lambda x: q / (1.0 - b * x)
    if kind == "poisson":
        lam = spec.param
        return lambda x: math.exp(lam * (x - 1.0))
    rev = spec.pmf[::-1]

    def horner(x: float) -> float:
        acc = 0.0
        for c in rev:
            acc = acc * x + c
        return acc

    return horner


def log_pgf_of_Zn(model: "ModelParams", n: int, x) -> float | np.ndarray:
    """log H_n(x) = sum_{k<n} log h(f_k(x)), for scalar x or an array of x.

    Scalar inputs run a pure-float loop (hot path for quadrature); array
    inputs iterate vectorized over the grid.
    """
    if np.ndim(x) == 0:
        xv = float(x)
        if not 0.0 <= xv <= 1.0:
            raise ValueError("x must lie in [0, 1]")
        f = _scalar_pgf(model.offspring)
        h = _scalar_pgf(model.immigration)
        acc = 0.0
        for _ in range(n):
            acc += math.log(h(xv))
            xv = f(xv)
        return acc
    xs = np.asarray(x, dtype=np.float64)
    if np.any(xs < 0.0) or np.any(xs > 1.0):
        raise ValueError("x must lie in [0, 1]")
    from .model import DistributionKind

    def vec(spec):
        if spec.kind is DistributionKind.GEOMETRIC:
            q = spec.param
            return lambda v: q / (1.0 - (1.0 - q) * v)
        if spec.kind is DistributionKind.POISSON:
            lam = spec.param
            return lambda v: np.exp(lam * (v - 1.0))
        rev = spec.pmf[::-1]

        def horner(v):
            acc = np.zeros_like(v)
            for c in rev:
                acc = acc * v + c
            return acc

        return horner

    f = vec(model.offspring)
    h = vec(model.immigration)
    acc = np.zeros_like(xs)
    cur = xs.copy()
    for _ in range(n):
        acc += np.log(h(cur))
        cur = f(cur)
    return acc


def pgf_of_Zn(model: "ModelParams", n: int, x) -> float | np.ndarray:
    """H_n(x) by scalar (or vectorized) iteration, exact up to round-off."""
    return np.exp(log_pgf_of_Zn(model, n, x))


def series_to_csv(series: TruncatedSeries, path, *, n: int | None = None) -> None:
    """Write rows (j, coeff) with a header carrying n, K, and tail mass."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# n={n},K={series.K},tail_mass={series.tail_mass!r}\n")
        fh.write("j,coeff\n")
        for j, c in enumerate(series.coeffs):
            fh.write(f"{j},{float(c)!r}\n")
