"""Monte Carlo engine: population paths, heavy-tailed increments, tail bounds.

Population paths follow the recursion Z_m = sum of Z_{m-1} offspring draws
plus one immigration draw, starting from 0. Offspring sums collapse to a
single draw for the named families (negative binomial for geometric sums,
additive for Poisson), which is exact and removes the O(Z) inner loop;
explicit pmfs sample each individual through an alias table, with an opt-in
normal approximation for parent counts beyond 10^6.

The large-deviation estimator targets P(L_n >= eps) for the normalized sum
L_n = S_{Z_n}/Z_n on the survival event. Work is split into shards with
independent counter-based streams (see ``gwilab.rng``); the reduction is an
ordered integer sum of hit counts, so results are bit-identical for a fixed
(seed, shard count) regardless of the worker pool.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

from .model import DistributionKind, ModelParams
from .rng import rng_from_seed, shard_seed

#: Default shard size; the shard count is derived from it deterministically.
SHARD_PATHS = 1 << 18

#: Above this parent count the explicit-pmf normal approximation may kick in
#: (only when explicitly allowed).
NORMAL_APPROX_PARENTS = 10**6

#: Cap on the flat buffer of per-individual draws handled at once.
_CHUNK_DRAWS = 1 << 22


class IncrementKind(str, Enum):
    SHIFTED_PARETO = "shifted-pareto"
    TRUNCATED_DISCRETE = "truncated-discrete"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class IncrementLaw:
    """Zero-mean increment law with optional polynomial upper tail.

    shifted-pareto: X = W - alpha x_m/(alpha-1) with W Pareto(alpha, x_m);
    requires alpha > 2 so the variance is finite. Then a = x_m^alpha and
    sigma0_sq = alpha x_m^2 / ((alpha-1)^2 (alpha-2)).

    truncated-discrete: X = V - E V with V drawn from a finite pmf on
    {0,...,d}; all moments finite, no polynomial tail.

    gaussian: X ~ N(0, sigma0_sq); no polynomial tail.
    """

    kind: IncrementKind
    sigma0_sq: float
    alpha: float | None = None
    x_m: float | None = None
    a: float | None = None
    mean_shift: float = 0.0
    pmf: tuple[float, ...] | None = None

    @staticmethod
    def shifted_pareto(alpha: float, x_m: float = 1.0) -> "IncrementLaw":
        if alpha <= 2.0:
            raise ValueError("tail index must exceed 2 for a finite variance")
        if x_m <= 0.0:
            raise ValueError("scale must be positive")
        shift = alpha * x_m / (alpha - 1.0)
        var = alpha * x_m**2 / ((alpha - 1.0) ** 2 * (alpha - 2.0))
        return IncrementLaw(IncrementKind.SHIFTED_PARETO, sigma0_sq=var,
                            alpha=alpha, x_m=x_m, a=x_m**alpha, mean_shift=shift)

    @staticmethod
    def gaussian(sigma0_sq: float = 1.0) -> "IncrementLaw":
        if sigma0_sq <= 0.0:
            raise ValueError("variance must be positive")
        return IncrementLaw(IncrementKind.GAUSSIAN, sigma0_sq=sigma0_sq)

    @staticmethod
    def truncated_discrete(pmf) -> "IncrementLaw":
        arr = tuple(float(p) for p in pmf)
        if not arr or any(p < 0.0 for p in arr) or abs(sum(arr) - 1.0) > 1e-12:
            raise ValueError("pmf must be non-negative and sum to 1")
        values = np.arange(len(arr), dtype=np.float64)
        probs = np.asarray(arr)
        mean = float(values @ probs)
        var = float((values - mean) ** 2 @ probs)
        if var <= 0.0:
            raise ValueError("degenerate increment law")
        return IncrementLaw(IncrementKind.TRUNCATED_DISCRETE, sigma0_sq=var,
                            mean_shift=mean, pmf=arr)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.kind is IncrementKind.GAUSSIAN:
            return rng.normal(0.0, math.sqrt(self.sigma0_sq), count)
        if self.kind is IncrementKind.SHIFTED_PARETO:
            # Inverse CDF on 1-U in (0,1] keeps the draw finite.
            u = 1.0 - rng.random(count)
            return self.x_m * u ** (-1.0 / self.alpha) - self.mean_shift
        table = AliasTable(self.pmf)
        return table.sample(rng, count).astype(np.float64) - self.mean_shift

    def tail(self, x: float) -> float:
        """P(X >= x), exact."""
        if self.kind is IncrementKind.GAUSSIAN:
            return 0.5 * math.erfc(x / math.sqrt(2.0 * self.sigma0_sq))
        if self.kind is IncrementKind.SHIFTED_PARETO:
            w = x + self.mean_shift
            if w <= self.x_m:
                return 1.0
            return (self.x_m / w) ** self.alpha
        total = 0.0
        for v, p in enumerate(self.pmf):
            if v - self.mean_shift >= x:
                total += p
        return total

    def truncated_moment(self, t: float, upper: float) -> float:
        """E[X^t ; 0 <= X <= upper].

        Closed form for the shifted Pareto at integer t (binomial expansion
        over Pareto partial moments); numeric quadrature otherwise.
        """
        if upper <= 0.0:
            return 0.0
        if self.kind is IncrementKind.TRUNCATED_DISCRETE:
            return sum(p * (v - self.mean_shift) ** t
                       for v, p in enumerate(self.pmf)
                       if 0.0 <= v - self.mean_shift <= upper)
        if self.kind is IncrementKind.SHIFTED_PARETO and float(t).is_integer():
            ti = int(t)
            s, alpha, xm = self.mean_shift, self.alpha, self.x_m
            w1, w2 = max(s, xm), upper + s
            if w2 <= w1:
                return 0.0
            total = 0.0
            for j in range(ti + 1):
                if abs(j - alpha) < 1e-12:
                    part = alpha * xm**alpha * math.log(w2 / w1)
                else:
                    part = (alpha * xm**alpha * (w2 ** (j - alpha) - w1 ** (j - alpha))
                            / (j - alpha))
                total += math.comb(ti, j) * (-s) ** (ti - j) * part
            return max(0.0, total)
        if self.kind is IncrementKind.SHIFTED_PARETO:
            s, alpha, xm = self.mean_shift, self.alpha, self.x_m
            lo = max(s, xm)

            def dens(w: float) -> float:
                return (w - s) ** t * alpha * xm**alpha * w ** (-alpha - 1.0)

            value, _ = integrate.quad(dens, lo, upper + s, epsabs=0.0,
                                      epsrel=1e-10, limit=200)
            return value
        sigma0 = math.sqrt(self.sigma0_sq)

        def gdens(x: float) -> float:
            return x**t * math.exp(-0.5 * (x / sigma0) ** 2) / (sigma0 * math.sqrt(2 * math.pi))

        value, _ = integrate.quad(gdens, 0.0, upper, epsabs=0.0, epsrel=1e-10,
                                  limit=200)
        return value


class AliasTable:
    """Walker alias method for O(1) draws from a finite pmf."""

    def __init__(self, pmf) -> None:
        probs = np.asarray(pmf, dtype=np.float64)
        probs = probs / probs.sum()
        n = probs.size
        scaled = probs * n
        self.cutoff = np.ones(n)
        self.alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            self.cutoff[s] = scaled[s]
            self.alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        self.n = n

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.integers(0, self.n, size)
        keep = rng.random(size) < self.cutoff[idx]
        return np.where(keep, idx, self.alias[idx])


def _offspring_sum(spec, counts: np.ndarray, rng: np.random.Generator,
                   allow_normal_approx: bool) -> np.ndarray:
    """Vector of offspring totals for the given parent counts."""
    out = np.zeros(counts.size, dtype=np.int64)
    pos = np.flatnonzero(counts > 0)
    if pos.size == 0:
        return out
    parents = counts[pos]
    if spec.kind is DistributionKind.GEOMETRIC:
        out[pos] = rng.negative_binomial(parents, spec.param)
        return out
    if spec.kind is DistributionKind.POISSON:
        out[pos] = rng.poisson(spec.param * parents)
        return out
    table = AliasTable(spec.pmf)
    remaining = pos
    if allow_normal_approx:
        big = remaining[counts[remaining] > NORMAL_APPROX_PARENTS]
        if big.size:
            z = counts[big].astype(np.float64)
            mu, var = spec.mean, spec.variance
            approx = np.rint(rng.normal(z * mu, np.sqrt(z * var)))
            out[big] = np.maximum(approx, 0.0).astype(np.int64)
            remaining = remaining[counts[remaining] <= NORMAL_APPROX_PARENTS]
    start = 0
    while start < remaining.size:
        stop = start
        total = 0
        while stop < remaining.size and total + counts[remaining[stop]] <= _CHUNK_DRAWS:
            total += counts[remaining[stop]]
            stop += 1
        stop = max(stop, start + 1)
        block = remaining[start:stop]
        sizes = counts[block]
        draws = table.sample(rng, int(sizes.sum()))
        edges = np.concatenate(([0], np.cumsum(sizes)[:-1]))
        out[block] = np.add.reduceat(draws, edges)
        start = stop
    return out


def _immigration(spec, size: int, rng: np.random.Generator) -> np.ndarray:
    if spec.kind is DistributionKind.GEOMETRIC:
        return rng.geometric(spec.param, size) - 1
    if spec.kind is DistributionKind.POISSON:
        return rng.poisson(spec.param, size)
    return AliasTable(spec.pmf).sample(rng, size).astype(np.int64)


def simulate_Zn_batch(model: ModelParams, n: int, size: int,
                      rng: np.random.Generator,
                      allow_normal_approx: bool = False) -> np.ndarray:
    """Vector of ``size`` independent draws of Z_n."""
    z = np.zeros(size, dtype=np.int64)
    for _ in range(n):
        z = _offspring_sum(model.offspring, z, rng, allow_normal_approx)
        z += _immigration(model.immigration, size, rng)
    return z


def simulate_Zn_path(model: ModelParams, n: int, seed: int) -> int:
    """One draw of Z_n, deterministic given the seed."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return int(simulate_Zn_batch(model, n, 1, rng_from_seed(seed))[0])


def sample_increments(law: IncrementLaw, count: int, seed: int) -> np.ndarray:
    """i.i.d. increment draws, deterministic given the seed."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return law.sample(rng_from_seed(seed), count)


@dataclass(frozen=True)
class MCEstimate:
    """Plain Monte Carlo estimate of a probability."""

    probability: float
    std_error: float
    paths: int
    seed: int
    hits: int


def _sum_over_counts(law: IncrementLaw, counts: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
    """S_k for each k in ``counts``: per-entry sums of i.i.d. increments."""
    out = np.empty(counts.size)
    start = 0
    while start < counts.size:
        stop = start
        total = 0
        while stop < counts.size and total + counts[stop] <= _CHUNK_DRAWS:
            total += counts[stop]
            stop += 1
        stop = max(stop, start + 1)
        sizes = counts[start:stop]
        draws = law.sample(rng, int(sizes.sum()))
        edges = np.concatenate(([0], np.cumsum(sizes)[:-1]))
        out[start:stop] = np.add.reduceat(draws, edges)
        start = stop
    return out


def _shard_hits(model: ModelParams, law: IncrementLaw, n: int, eps: float,
                size: int, seed: int, allow_normal_approx: bool) -> int:
    rng = rng_from_seed(seed)
    z = simulate_Zn_batch(model, n, size, rng, allow_normal_approx)
    alive = z[z > 0]
    if alive.size == 0:
        return 0
    if law.kind is IncrementKind.GAUSSIAN:
        # Exact shortcut: S_k ~ N(0, k sigma0^2).
        sums = rng.standard_normal(alive.size) * np.sqrt(law.sigma0_sq * alive)
    else:
        sums = _sum_over_counts(law, alive, rng)
    return int(np.count_nonzero(sums >= eps * alive))


def estimate_large_deviation(model: ModelParams, law: IncrementLaw, n: int,
                             eps: float, paths: int, seed: int,
                             shards: int | None = None,
                             allow_normal_approx: bool = False) -> MCEstimate:
    """Plain-MC estimate of P(L_n >= eps); deterministic per (seed, shards).

    Paths are split into shards with independent streams; hit counts reduce
    by an ordered integer sum. GWI_THREADS > 1 runs shards on a thread pool
    without changing the result.
    """
    if paths < 10**3:
        raise ValueError("paths must be at least 10^3")
    if shards is None:
        shards = max(1, -(-paths // SHARD_PATHS))
    base, extra = divmod(paths, shards)
    sizes = [base + (1 if i < extra else 0) for i in range(shards)]
    seeds = [shard_seed(seed, i) for i in range(shards)]
    workers = int(os.environ.get("GWI_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(
                lambda args: _shard_hits(model, law, n, eps, *args,
                                         allow_normal_approx),
                zip(sizes, seeds)))
    else:
        counts = [_shard_hits(model, law, n, eps, sz, sd, allow_normal_approx)
                  for sz, sd in zip(sizes, seeds)]
    hits = 0
    for c in counts:  # ordered reduction
        hits += c
    p = hits / paths
    return MCEstimate(probability=p,
                      std_error=math.sqrt(p * (1.0 - p) / paths),
                      paths=paths, seed=seed, hits=hits)


def fuk_nagaev_polynomial(law: IncrementLaw, k: int, eps: float,
                          r: float) -> float:
    """Tail bound with polynomial second term:

    k P(X >= eps k / r) + (e r sigma0^2)^r eps^{-2r} k^{-r}.
    """
    return (k * law.tail(eps * k / r)
            + (math.e * r * law.sigma0_sq) ** r * eps ** (-2.0 * r) * k ** -r)


def fuk_nagaev_exponential(law: IncrementLaw, k: int, eps: float, r: float,
                           t: float) -> float:
    """Tail bound with exponential and truncated-moment terms."""
    trunc = law.truncated_moment(t, eps * k)
    expo = math.exp(-2.0 * eps**2 * k / ((t + 2.0) ** 2 * math.e**t * law.sigma0_sq))
    moment_term = ((t + 2.0) * r ** (t - 1.0) * trunc
                   / (t * eps**t * k ** (t - 1.0))) ** (t * r / (t + 2.0))
    return k * law.tail(eps * k / r) + expo + moment_term


def fuk_nagaev_bound(law: IncrementLaw, k: int, eps: float, r: float,
                     t: float) -> float:
    """Minimum of the two displayed tail bounds for P(S_k >= eps k)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if r <= 1.0:
        raise ValueError("r must exceed 1")
    if t < 2.0:
        raise ValueError("t must be at least 2")
    return min(fuk_nagaev_polynomial(law, k, eps, r),
               fuk_nagaev_exponential(law, k, eps, r, t))


def sum_tail_curve(law: IncrementLaw, eps: float, j_max: int, paths: int,
                   seed: int) -> np.ndarray:
    """P(S_j >= eps j) for j = 0..j_max.

    Exact for gaussian (normal tail) and truncated-discrete (iterated
    convolution); Monte Carlo with shared cumulative sums for the shifted
    Pareto. Index 0 is the trivial P(0 >= 0) = 1.
    """
    out = np.empty(j_max + 1)
    out[0] = 1.0
    js = np.arange(1, j_max + 1, dtype=np.float64)
    if law.kind is IncrementKind.GAUSSIAN:
        sigma0 = math.sqrt(law.sigma0_sq)
        z = eps * np.sqrt(js) / sigma0
        out[1:] = 0.5 * np.vectorize(math.erfc)(z / math.sqrt(2.0))
        return out
    if law.kind is IncrementKind.TRUNCATED_DISCRETE:
        base = np.asarray(law.pmf)
        conv = np.array([1.0])
        for j in range(1, j_max + 1):
            conv = np.convolve(conv, base)
            values = np.arange(conv.size) - j * law.mean_shift
            out[j] = float(conv[values >= eps * j - 1e-12].sum())
        return out
    rng = rng_from_seed(seed)
    hits = np.zeros(j_max)
    done = 0
    chunk = max(1, min(paths, _CHUNK_DRAWS // max(1, j_max)))
    thresholds = eps * js
    while done < paths:
        m = min(chunk, paths - done)
        draws = law.sample(rng, m * j_max).reshape(m, j_max)
        sums = np.cumsum(draws, axis=1)
        hits += (sums >= thresholds).sum(axis=0)
        done += m
    out[1:] = hits / paths
    return out


def write_mc_csv(rows, path) -> None:
    """Rows (n, eps, paths, hits, p_hat, std_err, seed)."""
    with open(path, "w", newline="\n") as fh:
        fh.write("n,eps,paths,hits,p_hat,std_err,seed\n")
        for n, eps, paths, hits, p_hat, std_err, seed in rows:
            fh.write(f"{n},{float(eps)!r},{paths},{hits},{float(p_hat)!r},"
                     f"{float(std_err)!r},{seed}\n")
