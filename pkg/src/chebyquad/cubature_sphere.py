"""Local approximate equal-weight cubature on the unit sphere S^d.

The sphere is parametrized by spherical coordinates; the coordinate box
Omega_d is partitioned recursively into small boxes, and each box gets a
product node set built from one-dimensional equal-weight quadratures for
sine-power weights.  Per-box moment sums factorize, so node products are
never materialized unless explicitly requested.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._integrals import trig_power_integral
from .measure import Measure1D, SinPowPiece, uniform
from .momentmap import MultiIndexBasis
from .quadrature import ConstructionError, construct_quadrature

__all__ = [
    "AngleBox",
    "SpherePartition",
    "SphereCubature",
    "m0",
    "spherical_map",
    "partition_sphere",
    "sine_weight_quadrature",
    "sphere_cubature",
    "sphere_surface_area",
]


def m0(d: int, k: int, delta: float) -> int:
    """Smallest m >= 1 with (k e/(m+1))^(m+1) <= delta/(2 d 2^k)."""
    if d < 1 or k < 1:
        raise ValueError("d and k must be >= 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    log_rhs = math.log(delta) - math.log(2 * d) - k * math.log(2.0)
    m = 1
    while (m + 1) * (math.log(k) + 1.0 - math.log(m + 1)) > log_rhs:
        m += 1
    return m


def _degree_for_gamma(k: int, gamma: float) -> int:
    """Smallest m >= 1 with (k e/(m+1))^(m+1) <= gamma/2."""
    log_rhs = math.log(gamma / 2.0)
    m = 1
    while (m + 1) * (math.log(k) + 1.0 - math.log(m + 1)) > log_rhs:
        m += 1
    return m


def spherical_map(ang: np.ndarray) -> np.ndarray:
    """Map angles (phi, theta_1..theta_{d-1}) to a point of S^d in R^{d+1}.

    Vectorized over leading axes; the last axis holds the angles.
    """
    ang = np.asarray(ang, dtype=float)
    phi = ang[..., 0]
    out = [np.sin(phi), np.cos(phi)]
    d = ang.shape[-1]
    for j in range(1, d):
        theta = ang[..., j]
        s, c = np.sin(theta), np.cos(theta)
        out = [comp * s for comp in out]
        out.append(c)
    return np.stack(out, axis=-1)


@dataclass(frozen=True)
class AngleBox:
    """Product of a phi interval and theta_1..theta_{d-1} intervals.

    intervals[0] is within [0, 2pi]; the rest within [0, pi]; all sides
    shorter than 1.
    """

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        lo0, hi0 = self.intervals[0]
        if not (-1e-12 <= lo0 < hi0 <= 2 * math.pi + 1e-12):
            raise ValueError("phi interval must lie in [0, 2pi]")
        for lo, hi in self.intervals[1:]:
            if not (-1e-12 <= lo < hi <= math.pi + 1e-12):
                raise ValueError("theta intervals must lie in [0, pi]")
        if any(hi - lo >= 1.0 for lo, hi in self.intervals):
            raise ValueError("box side lengths must be < 1")

    @property
    def d(self) -> int:
        return len(self.intervals)

    def mass(self) -> float:
        """mu_d mass: phi length times the exact sine-power integrals."""
        total = self.intervals[0][1] - self.intervals[0][0]
        for q, (lo, hi) in enumerate(self.intervals[1:], start=1):
            total *= trig_power_integral(0, q, 0, lo, hi)
        return total

    def diameter_bound(self) -> float:
        """Recursive upper bound on diam of the spherical image."""
        lo, hi = self.intervals[0]
        length = hi - lo
        bound = 2.0 * math.sin(min(length, math.pi) / 2.0) if length < math.pi else 2.0
        for lo, hi in self.intervals[1:]:
            sin_max = _sin_max(lo, hi)
            bound = 2.0 * (hi - lo) + sin_max * bound
        return bound

    def sampled_diameter(self, per_side: int = 3) -> float:
        """Max pairwise distance over a coordinate grid of image points."""
        grids = [np.linspace(lo, hi, per_side) for lo, hi in self.intervals]
        ang = np.array(list(itertools.product(*grids)))
        pts = spherical_map(ang)
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff**2).sum(axis=-1)).max())

    def contains(self, ang: np.ndarray, tol: float = 1e-9) -> bool:
        return all(
            lo - tol <= a <= hi + tol for a, (lo, hi) in zip(ang, self.intervals)
        )


def _sin_max(lo: float, hi: float) -> float:
    if lo <= math.pi / 2.0 <= hi:
        return 1.0
    return max(math.sin(lo), math.sin(hi))


@dataclass(frozen=True)
class SpherePartition:
    """Partition of Omega_d into boxes with mass and diameter certificates."""

    d: int
    tau: float
    boxes: tuple[AngleBox, ...]
    masses: tuple[float, ...]
    diameter_bounds: tuple[float, ...]

    @property
    def K(self) -> int:
        return len(self.boxes)

    def total_mass(self) -> float:
        return math.fsum(self.masses)


def sphere_surface_area(d: int) -> float:
    """Surface area of S^d in R^{d+1}."""
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


def partition_sphere(d: int, tau: float) -> SpherePartition:
    """Recursive box partition: split the last theta range into equal
    intervals, recurse at scale tau' = min(tau/r, 1/2) with r the sine of
    the interval midpoint, and take products."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must be in (0, 1]")
    boxes = tuple(AngleBox(iv) for iv in _partition_intervals(d, tau))
    masses = tuple(b.mass() for b in boxes)
    diams = tuple(b.diameter_bound() for b in boxes)
    return SpherePartition(d, tau, boxes, masses, diams)


def _partition_intervals(d: int, tau: float) -> list[tuple[tuple[float, float], ...]]:
    if d == 1:
        count = math.ceil(2.0 * math.pi / tau)
        edges = np.linspace(0.0, 2.0 * math.pi, count + 1)
        return [((float(a), float(b)),) for a, b in zip(edges[:-1], edges[1:])]
    m = math.ceil(math.pi / tau)
    edges = np.linspace(0.0, math.pi, m + 1)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        r = math.sin((a + b) / 2.0)
        tau_sub = min(tau / r, 0.5)
        for sub in _partition_intervals(d - 1, tau_sub):
            out.append(sub + ((float(a), float(b)),))
    return out


# -- one-dimensional sine-weight quadratures ---------------------------------


def _sine_weight_measure(q: int, lo: float, hi: float) -> Measure1D:
    """sin^q weight on [lo, hi], normalized and rescaled to [0, 1]."""
    if q == 0:
        return uniform()
    total = trig_power_integral(0, q, 0, lo, hi)
    length = hi - lo
    # pushforward of sin^q(theta) dtheta / total under theta -> (theta-lo)/length
    piece = SinPowPiece(0.0, 1.0, length / total, q, lo, length)
    return Measure1D((0.0, 1.0), (), (piece,))


_FACTOR_CACHE: dict[tuple, np.ndarray | None] = {}


def sine_weight_quadrature(
    q: int, interval: tuple[float, float], k: int, gamma: float, n: int | None = None
) -> np.ndarray:
    """Equal-weight nodes on the interval matching the normalized moments of
    the sin^q weight up to the degree implied by (k, gamma).

    The degree m is the smallest with Taylor remainder (k e/(m+1))^(m+1)
    below gamma/2; matching power moments to degree m then controls every
    sin^(k1)*cos^(k2) average with k1 + k2 <= k within gamma.  When n is
    omitted the smallest accepted node count is found by doubling.
    """
    lo, hi = interval
    tau_q = 2.0 * math.pi if q == 0 else math.pi
    if not (0.0 <= lo < hi <= tau_q + 1e-12):
        raise ValueError(f"interval must lie in [0, {tau_q:.6g}]")
    if hi - lo > 1.0 + 1e-12:
        raise ValueError("interval length must be <= 1")
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must be in (0, 1]")
    m = _degree_for_gamma(k, gamma)
    if q == 0:
        # uniform weight: nodes translate, so solve on a canonical interval
        base = _factor_nodes(0, 0.0, hi - lo, m, n)
        return base + lo
    return _factor_nodes(q, lo, hi, m, n)


def _factor_nodes(
    q: int, lo: float, hi: float, m: int, n: int | None
) -> np.ndarray:
    key = (q, round(lo, 12), round(hi, 12), m, n)
    if key in _FACTOR_CACHE:
        cached = _FACTOR_CACHE[key]
        if cached is None:
            raise ConstructionError(f"factor quadrature failed (cached): {key}")
        return cached
    measure = _sine_weight_measure(q, lo, hi)
    length = hi - lo
    if m == 1:
        # single-moment matching: every node at the weighted mean
        nodes = np.full(n or 1, lo + length * measure.moment(1))
        _FACTOR_CACHE[key] = nodes
        return nodes
    if n is None:
        result = None
        trial = max(m * (m + 3), 512)
        while trial <= 2**21:
            try:
                result = construct_quadrature(measure, m, n=trial, mode="best_effort")
                break
            except ConstructionError:
                trial *= 2
        if result is None:
            raise ConstructionError(
                f"no node count up to 2^21 accepted for sine-weight factor "
                f"(q={q}, degree {m})"
            )
    else:
        try:
            result = construct_quadrature(measure, m, n=n, mode="best_effort")
        except ConstructionError:
            _FACTOR_CACHE[key] = None
            raise
    nodes = lo + length * result.nodes
    _FACTOR_CACHE[key] = nodes
    return nodes


def factor_minimal_n(q: int, interval: tuple[float, float], m: int) -> int:
    """Smallest power-of-two-scan node count accepted for this factor."""
    lo, hi = interval
    if q == 0:
        lo, hi = 0.0, hi - lo
    trial = max(m * (m + 3), 512)
    while trial <= 2**21:
        try:
            _factor_nodes(q, lo, hi, m, trial)
            return trial
        except ConstructionError:
            trial *= 2
    raise ConstructionError("no accepted node count up to 2^21")


# -- the product cubature -----------------------------------------------------


def _factor_exponents(alpha: tuple[int, ...]) -> list[tuple[int, int]]:
    """Per-factor (sin_pow, cos_pow) of the monomial z^alpha on S^d.

    Factor 0 is phi; factor q >= 1 is theta_q with weight sin^q.
    """
    d = len(alpha) - 1
    out = [(alpha[0], alpha[1])]
    for qf in range(1, d):
        out.append((sum(alpha[: qf + 1]), alpha[qf + 1]))
    return out


@dataclass(frozen=True)
class SphereCubature:
    """Product node sets per partition box, stored per angular factor.

    The full node set of box i is the Cartesian product of the factor
    angle lists mapped through spherical_map; per-box monomial averages
    factorize, so the product is only materialized on request.
    """

    partition: SpherePartition
    k: int
    delta: float
    n_factor: int
    factor_angles: tuple[tuple[np.ndarray, ...], ...]

    @property
    def d(self) -> int:
        return self.partition.d

    @property
    def nodes_per_box(self) -> int:
        return self.n_factor**self.d

    def box_nodes(self, i: int, limit: int = 2_000_000) -> np.ndarray:
        """Materialize the product node set of box i on the sphere."""
        if self.nodes_per_box > limit:
            raise ValueError(
                f"box holds {self.nodes_per_box} nodes; raise limit to "
                "materialize"
            )
        ang = np.array(list(itertools.product(*self.factor_angles[i])))
        return spherical_map(ang)

    def sample_box_nodes(self, i: int, count: int, rng) -> np.ndarray:
        """Uniform sample (with replacement) from box i's product node set."""
        cols = [
            angles[rng.integers(0, len(angles), size=count)]
            for angles in self.factor_angles[i]
        ]
        return spherical_map(np.stack(cols, axis=1))

    def monomial_average(self, i: int, alpha: tuple[int, ...]) -> float:
        """(1/N) sum of z^alpha over box i's product nodes, factorized."""
        value = 1.0
        for (sp, cp), angles in zip(_factor_exponents(alpha), self.factor_angles[i]):
            value *= float(np.mean(np.sin(angles) ** sp * np.cos(angles) ** cp))
        return value

    def monomial_integral(self, i: int, alpha: tuple[int, ...]) -> float:
        """Normalized integral of z^alpha over box i, via exact factors."""
        value = 1.0
        box = self.partition.boxes[i]
        for qf, ((sp, cp), (lo, hi)) in enumerate(
            zip(_factor_exponents(alpha), box.intervals)
        ):
            num = trig_power_integral(0, sp + qf, cp, lo, hi)
            den = trig_power_integral(0, qf, 0, lo, hi)
            value *= num / den
        return value

    def box_errors(self, i: int) -> dict[tuple[int, ...], float]:
        """Per-monomial |average - normalized integral| for |alpha| <= k."""
        basis = MultiIndexBasis(self.k, self.d + 1)
        return {
            alpha: abs(self.monomial_average(i, alpha) - self.monomial_integral(i, alpha))
            for alpha in basis.indices
        }

    def max_error(self) -> float:
        return max(
            err for i in range(self.partition.K) for err in self.box_errors(i).values()
        )

    def shifted_monomial_error(
        self, i: int, alpha: tuple[int, ...], w: np.ndarray
    ) -> float:
        """|average - integral| for (z - w)^alpha via binomial expansion."""
        d1 = self.d + 1
        ranges = [range(a + 1) for a in alpha]
        total = 0.0
        for beta in itertools.product(*ranges):
            coef = 1.0
            for j in range(d1):
                coef *= math.comb(alpha[j], beta[j]) * (-w[j]) ** (alpha[j] - beta[j])
            if all(b == 0 for b in beta):
                continue  # constant term cancels exactly
            gap = self.monomial_average(i, beta) - self.monomial_integral(i, beta)
            total += coef * gap
        return abs(total)

    def to_dict(self, node_limit: int = 100_000) -> dict:
        boxes = []
        for i, box in enumerate(self.partition.boxes):
            entry = {
                "angle_intervals": [list(iv) for iv in box.intervals],
                "mass": self.partition.masses[i],
                "diameter_bound": self.partition.diameter_bounds[i],
                "factor_angles": [list(map(float, a)) for a in self.factor_angles[i]],
            }
            if self.nodes_per_box <= node_limit:
                entry["nodes"] = self.box_nodes(i).tolist()
            boxes.append(entry)
        return {
            "format_version": 1,
            "d": self.d,
            "k": self.k,
            "tau": self.partition.tau,
            "delta": self.delta,
            "n_factor": self.n_factor,
            "nodes_per_box": self.nodes_per_box,
            "boxes": boxes,
        }


def sphere_cubature(d: int, k: int, tau: float, delta: float) -> SphereCubature:
    """Build the partition and per-box product node sets such that every
    box's equal-weight monomial averages match its normalized integrals
    within delta for all |alpha| <= k."""
    if d < 1 or k < 1:
        raise ValueError("d and k must be >= 1")
    if not (0.0 < tau <= 1.0 and 0.0 < delta < 1.0):
        raise ValueError("tau must be in (0, 1] and delta in (0, 1)")
    partition = partition_sphere(d, tau)
    gamma = delta / (d * 2.0**k)
    m = _degree_for_gamma(k, gamma)

    # every factor must use one common node count (per-box count is n^d);
    # find the largest minimal count over the distinct factors
    distinct: set[tuple] = set()
    for box in partition.boxes:
        for qf, (lo, hi) in enumerate(box.intervals):
            if qf == 0:
                distinct.add((0, 0.0, round(hi - lo, 12)))
            else:
                distinct.add((qf, round(lo, 12), round(hi, 12)))
    n_common = max(
        factor_minimal_n(qf, (lo, hi), m) for qf, lo, hi in sorted(distinct)
    )

    factor_angles = []
    for box in partition.boxes:
        angles = tuple(
            sine_weight_quadrature(qf, iv, k, gamma, n=n_common)
            for qf, iv in enumerate(box.intervals)
        )
        factor_angles.append(angles)
    return SphereCubature(partition, k, delta, n_common, tuple(factor_angles))
