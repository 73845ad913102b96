"""Monte-Carlo harness for random equal-weight cubatures on [-1, 1]^d.

Estimates the probability that the empirical multi-moment vector of n IID
uniform cube samples lands within eps/sqrt(n) of the true moment vector
(sup norm), plus an empirical probe of the density of the normalized
moment deviation near zero.  All randomness comes from the counter-based
Philox generator with per-chunk jumped substreams, so results are
reproducible bit-for-bit from the seed alone, independent of chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .momentmap import MultiIndexBasis, poly_dim

__all__ = [
    "SmallBallEstimate",
    "DensityProbe",
    "cube_multimoments",
    "sample_moment_vector",
    "small_ball_probability",
    "empirical_density_probe",
    "wilson_interval",
]

RNG_ALGORITHM = "philox"
_CHUNK = 4096
_Z95 = 1.959963984540054


def _substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for chunk `index`: Philox jumped streams."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(index))


def cube_multimoments(k: int, d: int) -> np.ndarray:
    """Moments of the uniform measure on [-1,1]^d for all monomials of
    total degree 1..k in graded order: product of 1/(a+1) over even
    exponents, zero if any exponent is odd."""
    if k < 1 or d < 1:
        raise ValueError("k and d must be >= 1")
    basis = MultiIndexBasis(k, d)
    out = np.zeros(len(basis.indices))
    for i, alpha in enumerate(basis.indices):
        if all(a % 2 == 0 for a in alpha):
            value = 1.0
            for a in alpha:
                value /= a + 1
            out[i] = value
    return out


def _monomials(points: np.ndarray, basis: MultiIndexBasis) -> np.ndarray:
    """(len(points), D) matrix of monomial values."""
    out = np.ones((len(points), len(basis.indices)))
    for i, alpha in enumerate(basis.indices):
        for t, a in enumerate(alpha):
            if a:
                out[:, i] *= points[:, t] ** a
    return out


def sample_moment_vector(
    n: int, k: int, d: int, rng: np.random.Generator
) -> np.ndarray:
    """Empirical multi-moment vector of n IID uniform cube samples."""
    if n < 1:
        raise ValueError("n must be >= 1")
    basis = MultiIndexBasis(k, d)
    points = rng.uniform(-1.0, 1.0, size=(n, d))
    return _monomials(points, basis).mean(axis=0)


def wilson_interval(hits: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = hits / trials
    denom = 1.0 + z**2 / trials
    center = (phat + z**2 / (2 * trials)) / denom
    half = (
        z * math.sqrt(phat * (1 - phat) / trials + z**2 / (4 * trials**2)) / denom
    )
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class SmallBallEstimate:
    """Monte-Carlo frequency of the sup-norm moment small-ball event."""

    n: int
    k: int
    d: int
    eps: float
    repetitions: int
    hit_count: int
    ci_low: float
    ci_high: float
    seed: int
    nearest_miss: float  # smallest sup-norm deviation among the misses
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def estimate(self) -> float:
        return self.hit_count / self.repetitions

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "n": self.n,
            "k": self.k,
            "d": self.d,
            "eps": self.eps,
            "repetitions": self.repetitions,
            "hit_count": self.hit_count,
            "estimate": self.estimate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "seed": self.seed,
            "nearest_miss": self.nearest_miss,
            "rng_algorithm": self.rng_algorithm,
        }


def _deviation_chunks(n: int, k: int, d: int, reps: int, seed: int):
    """Yield (chunk_index, sup_norm_deviations) over fixed-size chunks."""
    basis = MultiIndexBasis(k, d)
    target = cube_multimoments(k, d)
    done = 0
    index = 0
    while done < reps:
        count = min(_CHUNK, reps - done)
        rng = _substream(seed, index)
        points = rng.uniform(-1.0, 1.0, size=(count * n, d))
        vals = _monomials(points, basis).reshape(count, n, -1).mean(axis=1)
        yield index, np.max(np.abs(vals - target), axis=1)
        done += count
        index += 1


def small_ball_probability(
    n: int, k: int, d: int, eps: float, reps: int, seed: int
) -> SmallBallEstimate:
    """Estimate P(sup-norm moment deviation <= eps / sqrt(n))."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    radius = eps / math.sqrt(n)
    hits = 0
    nearest = math.inf
    for _, dev in _deviation_chunks(n, k, d, reps, seed):
        inside = dev <= radius
        hits += int(np.count_nonzero(inside))
        misses = dev[~inside]
        if len(misses):
            nearest = min(nearest, float(np.min(misses)))
    lo, hi = wilson_interval(hits, reps)
    return SmallBallEstimate(n, k, d, eps, reps, hits, lo, hi, seed, nearest)


@dataclass(frozen=True)
class DensityProbe:
    """Empirical density of the normalized moment deviation near zero."""

    n: int
    k: int
    d: int
    bin_radius: float
    repetitions: int
    hit_count: int
    estimate: float
    ci_low: float
    ci_high: float
    seed: int


def _ball_volume(dim: int, radius: float) -> float:
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0) * radius**dim


def empirical_density_probe(
    n: int, k: int, d: int, reps: int, bin_radius: float, seed: int
) -> DensityProbe:
    """Fraction of reps with |sqrt(n) * (M_k(sample) - M_k)|_2 <= bin_radius,
    divided by the Euclidean ball volume in dimension D(k, d).

    The bin radius trades bias (large bins average the density over the
    bin) against variance (small bins see few hits); it is caller-chosen.
    """
    if bin_radius <= 0:
        raise ValueError("bin_radius must be positive")
    basis = MultiIndexBasis(k, d)
    target = cube_multimoments(k, d)
    dim = poly_dim(k, d)
    hits = 0
    done = 0
    index = 0
    root_n = math.sqrt(n)
    while done < reps:
        count = min(_CHUNK, reps - done)
        rng = _substream(seed, index)
        points = rng.uniform(-1.0, 1.0, size=(count * n, d))
        vals = _monomials(points, basis).reshape(count, n, -1).mean(axis=1)
        norms = np.linalg.norm(root_n * (vals - target), axis=1)
        hits += int(np.count_nonzero(norms <= bin_radius))
        done += count
        index += 1
    volume = _ball_volume(dim, bin_radius)
    lo, hi = wilson_interval(hits, reps)
    return DensityProbe(
        n, k, d, bin_radius, reps, hits, hits / reps / volume,
        lo / volume, hi / volume, seed,
    )
