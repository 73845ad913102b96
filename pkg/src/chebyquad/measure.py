"""Probability measures on a bounded interval: atoms plus piecewise densities.

A :class:`Measure1D` is a finite mixture of point masses and density pieces
(polynomial of degree <= 3, exponential, or a sine power).  All primitives
needed by the quadrature constructions are exposed: CDF, quantile, moments,
the inverse modulus of continuity, atom truncation, and affine rescaling.
Moments and CDFs are evaluated in closed form; nothing here is sampled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from ._integrals import (
    fsum,
    power_integral,
    power_negexp_integral,
    trig_expansion,
    trig_power_integral,
)

__all__ = [
    "Measure1D",
    "TruncationResult",
    "PolyPiece",
    "ExpPiece",
    "SinPowPiece",
    "MeasureValidationError",
    "parse_measure",
    "uniform",
    "two_interval_sigma0",
    "truncated_exponential_sigma_k",
    "atom_uniform_mixture",
]

MASS_TOL = 1e-12


class MeasureValidationError(ValueError):
    """A Measure1D invariant is violated; the message names the invariant."""


@dataclass(frozen=True)
class PolyPiece:
    """Density sum_t coeffs[t] * x^t on [lo, hi], degree <= 3."""

    lo: float
    hi: float
    coeffs: tuple[float, ...]

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t in range(len(self.coeffs) - 1, -1, -1):
            out = out * x + self.coeffs[t]
        return out

    def moment(self, j: int) -> float:
        return fsum(
            c * power_integral(j + t, self.lo, self.hi)
            for t, c in enumerate(self.coeffs)
        )

    def partial_mass(self, x):
        """Mass of [lo, min(x, hi)], vectorized, 0 left of the piece."""
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        out = np.zeros_like(x)
        lo_val = 0.0
        for t, c in enumerate(self.coeffs):
            out = out + c * x ** (t + 1) / (t + 1)
            lo_val += c * self.lo ** (t + 1) / (t + 1)
        return out - lo_val

    def min_density(self) -> float:
        return float(np.min(self.density(self._critical_points())))

    def max_density(self) -> float:
        return float(np.max(self.density(self._critical_points())))

    def _critical_points(self) -> np.ndarray:
        pts = [self.lo, self.hi]
        deriv = [t * c for t, c in enumerate(self.coeffs)][1:]
        if any(deriv):
            roots = np.roots(deriv[::-1])
            for r in roots:
                if abs(r.imag) < 1e-12 and self.lo < r.real < self.hi:
                    pts.append(float(r.real))
        return np.array(pts)

    def affine(self, shift: float, scale: float) -> "PolyPiece":
        # pushforward under y = shift + scale*x: density w((y-shift)/scale)/scale
        new = [0.0, 0.0, 0.0, 0.0]
        for t, c in enumerate(self.coeffs):
            # c * ((y - shift)/scale)^t / scale
            for m in range(t + 1):
                new[m] += (
                    c
                    / scale ** (t + 1)
                    * math.comb(t, m)
                    * (-shift) ** (t - m)
                )
        while len(new) > 1 and new[-1] == 0.0:
            new.pop()
        return PolyPiece(
            shift + scale * self.lo, shift + scale * self.hi, tuple(new)
        )


@dataclass(frozen=True)
class ExpPiece:
    """Density coef * exp(-lam * x) on [lo, hi] with lo >= 0, lam > 0."""

    lo: float
    hi: float
    coef: float
    lam: float

    def density(self, x):
        return self.coef * np.exp(-self.lam * np.asarray(x, dtype=float))

    def moment(self, j: int) -> float:
        return self.coef * power_negexp_integral(j, self.lam, self.lo, self.hi)

    def partial_mass(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        return (
            self.coef
            / self.lam
            * (math.exp(-self.lam * self.lo) - np.exp(-self.lam * x))
        )

    def min_density(self) -> float:
        return float(self.density(self.hi))

    def max_density(self) -> float:
        return float(self.density(self.lo))

    def affine(self, shift: float, scale: float) -> "ExpPiece":
        lo = shift + scale * self.lo
        if lo < 0:
            raise MeasureValidationError(
                "exponential piece cannot be rescaled to negative support"
            )
        return ExpPiece(
            lo,
            shift + scale * self.hi,
            self.coef / scale * math.exp(self.lam * shift / scale),
            self.lam / scale,
        )


@dataclass(frozen=True)
class SinPowPiece:
    """Density coef * sin(phase + scale*x)^q on [lo, hi], nonnegative there."""

    lo: float
    hi: float
    coef: float
    q: int
    phase: float = 0.0
    scale: float = 1.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return self.coef * np.sin(self.phase + self.scale * x) ** self.q

    def moment(self, j: int) -> float:
        return self.coef * trig_power_integral(
            j, self.q, 0, self.lo, self.hi, self.phase, self.scale
        )

    def partial_mass(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        # antiderivative of sin^q via the complex-exponential expansion:
        # the f=0 term is linear, the rest integrate to e^{if(phase+scale*x)}
        acc = np.zeros(x.shape, dtype=complex)
        for f, c in trig_expansion(self.q, 0):
            if f == 0:
                acc += c * (x - self.lo)
            else:
                rate = 1j * f * self.scale
                acc += (
                    c
                    / rate
                    * (
                        np.exp(1j * f * (self.phase + self.scale * x))
                        - np.exp(1j * f * (self.phase + self.scale * self.lo))
                    )
                )
        return self.coef * acc.real

    def min_density(self) -> float:
        return float(np.min(self.density(np.linspace(self.lo, self.hi, 257))))

    def max_density(self) -> float:
        return float(np.max(self.density(np.linspace(self.lo, self.hi, 257))))

    def affine(self, shift: float, scale: float) -> "SinPowPiece":
        return SinPowPiece(
            shift + scale * self.lo,
            shift + scale * self.hi,
            self.coef / scale,
            self.q,
            self.phase - self.scale * shift / scale,
            self.scale / scale,
        )


Piece = PolyPiece | ExpPiece | SinPowPiece


@dataclass(frozen=True)
class Measure1D:
    """Probability measure on [support[0], support[1]]: atoms + density pieces.

    Immutable; all operations are pure.
    """

    support: tuple[float, float]
    atoms: tuple[tuple[float, float], ...] = ()
    pieces: tuple[Piece, ...] = ()
    _segments: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self._validate()
        object.__setattr__(self, "_segments", self._build_segments())

    # -- validation ---------------------------------------------------------

    def _validate(self):
        a, b = self.support
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise MeasureValidationError("support must be a nondegenerate interval")
        locs = [x for x, _ in self.atoms]
        if any(m <= 0 for _, m in self.atoms):
            raise MeasureValidationError("atom masses must be positive")
        if locs != sorted(locs) or len(set(locs)) != len(locs):
            raise MeasureValidationError("atom locations must be strictly increasing")
        if any(x < a - MASS_TOL or x > b + MASS_TOL for x in locs):
            raise MeasureValidationError("atom outside support")
        prev_hi = a - MASS_TOL
        for p in self.pieces:
            if p.lo < prev_hi - MASS_TOL:
                raise MeasureValidationError("pieces overlap or are out of order")
            if p.hi <= p.lo:
                raise MeasureValidationError("piece interval is degenerate")
            if p.hi > b + MASS_TOL:
                raise MeasureValidationError("piece outside support")
            if p.min_density() < -1e-10:
                raise MeasureValidationError("negative density on a piece")
            prev_hi = p.hi
        total = self.total_mass()
        if abs(total - 1.0) > 1e-10:
            raise MeasureValidationError(
                f"total mass must be 1, got {total!r}"
            )

    def total_mass(self) -> float:
        return fsum(
            [m for _, m in self.atoms] + [p.moment(0) for p in self.pieces]
        )

    # -- segment structure for the quantile ---------------------------------

    def _build_segments(self):
        """Ordered (lo, hi, mass) segments; atoms are zero-width segments.

        Pieces are split at interior atom locations so that cumulative mass
        is strictly increasing through each segment.
        """
        events = []
        atom_locs = [x for x, _ in self.atoms]
        for p in self.pieces:
            cuts = [x for x in atom_locs if p.lo < x < p.hi]
            edges = [p.lo] + cuts + [p.hi]
            for lo, hi in zip(edges[:-1], edges[1:]):
                mass = float(p.partial_mass(hi) - p.partial_mass(lo))
                events.append((lo, 1, hi, mass, p))
        for x, m in self.atoms:
            events.append((x, 0, x, m, None))
        events.sort(key=lambda e: (e[0], e[1]))
        lo = np.array([e[0] for e in events])
        hi = np.array([e[2] for e in events])
        mass = np.array([e[3] for e in events])
        cum = np.cumsum(mass)
        return lo, hi, mass, cum

    # -- primitives ----------------------------------------------------------

    def cdf(self, x):
        """sigma([a, x]); includes an atom located exactly at x."""
        x_arr = np.asarray(x, dtype=float)
        out = np.zeros_like(x_arr, dtype=float)
        for p in self.pieces:
            out = out + p.partial_mass(x_arr)
        for loc, m in self.atoms:
            out = out + m * (x_arr >= loc)
        if np.isscalar(x) or x_arr.ndim == 0:
            return float(out)
        return out

    def cdf_left(self, x: float) -> float:
        """sigma([a, x)) = cdf(x) minus any atom exactly at x."""
        val = self.cdf(x)
        for loc, m in self.atoms:
            if loc == x:
                val -= m
        return float(val)

    def quantile(self, p):
        """min{ y : cdf(y) >= p } for p in (0, 1]."""
        scalar = np.isscalar(p)
        p_arr = np.atleast_1d(np.asarray(p, dtype=float))
        if np.any(p_arr <= 0) or np.any(p_arr > 1 + MASS_TOL):
            raise ValueError("quantile requires 0 < p <= 1")
        lo_s, hi_s, _, cum = self._segments
        p_arr = np.minimum(p_arr, cum[-1])
        idx = np.searchsorted(cum, p_arr, side="left")
        idx = np.minimum(idx, len(cum) - 1)
        lo = lo_s[idx].copy()
        hi = hi_s[idx].copy()
        # bisection on cdf within each segment (atoms have lo == hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < p_arr
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = hi
        if scalar:
            return float(out[0])
        return out

    def moment(self, j: int) -> float:
        """int x^j dsigma, exactly."""
        if j < 0:
            raise ValueError("moment order must be >= 0")
        return fsum(
            [m * x**j for x, m in self.atoms] + [p.moment(j) for p in self.pieces]
        )

    def moments(self, k: int) -> np.ndarray:
        """Moments of order 1..k."""
        return np.array([self.moment(j) for j in range(1, k + 1)])

    def inverse_modulus(self, delta: float) -> float:
        """R_sigma(delta): minimal length of a closed interval of mass >= delta."""
        if not 0 < delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if any(m >= delta for _, m in self.atoms):
            return 0.0

        def interval_length(x: float) -> float:
            need = delta + self.cdf_left(x)
            if need > 1.0 + MASS_TOL:
                return math.inf
            y = self.quantile(min(need, 1.0))
            return y - x

        # grid of left endpoints: piece/atom breakpoints plus a dense scan
        cands = [self.support[0]]
        for p in self.pieces:
            cands.extend(np.linspace(p.lo, p.hi, 513))
        for x, _ in self.atoms:
            cands.append(x)
        cands = np.unique(np.clip(cands, *self.support))
        need = delta + np.array([self.cdf_left(float(x)) for x in cands])
        ok = need <= 1.0 + MASS_TOL
        ys = np.full_like(cands, np.inf)
        if np.any(ok):
            ys[ok] = self.quantile(np.minimum(need[ok], 1.0))
        lengths = ys - cands
        i = int(np.argmin(lengths))
        best = float(lengths[i])
        # local refinement around the best grid candidate
        left = cands[max(i - 1, 0)]
        right = cands[min(i + 1, len(cands) - 1)]
        if right > left:
            res = minimize_scalar(
                interval_length,
                bounds=(float(left), float(right)),
                method="bounded",
                options={"xatol": 1e-13},
            )
            best = min(best, float(res.fun))
        return max(best, 0.0)

    def truncate_atoms(self, eps: float) -> "TruncationResult":
        """Cap every atom at mass eps and renormalize."""
        if not 0 < eps < 1:
            raise ValueError("eps must be in (0, 1)")
        removed = fsum(max(m - eps, 0.0) for _, m in self.atoms)
        truncated_mass = 1.0 - removed
        if removed == 0.0:
            return TruncationResult(truncated_mass, self)
        new_atoms = tuple((x, min(m, eps) / truncated_mass) for x, m in self.atoms)
        new_pieces = tuple(_scale_piece(p, 1.0 / truncated_mass) for p in self.pieces)
        normalized = Measure1D(self.support, new_atoms, new_pieces)
        return TruncationResult(truncated_mass, normalized)

    def affine_rescale(self, target: tuple[float, float]) -> "Measure1D":
        """Pushforward under the increasing affine map of support onto target."""
        c, d = target
        if not d > c:
            raise ValueError("target interval must be nondegenerate")
        a, b = self.support
        scale = (d - c) / (b - a)
        shift = c - a * scale
        atoms = tuple((shift + scale * x, m) for x, m in self.atoms)
        pieces = tuple(p.affine(shift, scale) for p in self.pieces)
        return Measure1D((c, d), atoms, pieces)

    def density_bound(self):
        """Essential sup of the density, or None if the measure has atoms."""
        if self.atoms or not self.pieces:
            return None
        return max(p.max_density() for p in self.pieces)

    def max_atom_mass(self) -> float:
        return max((m for _, m in self.atoms), default=0.0)

    def is_purely_atomic(self) -> bool:
        return not self.pieces

    def to_dict(self) -> dict:
        pieces = []
        for p in self.pieces:
            if isinstance(p, PolyPiece):
                pieces.append({"interval": [p.lo, p.hi], "coeffs": list(p.coeffs)})
            elif isinstance(p, ExpPiece):
                pieces.append(
                    {"interval": [p.lo, p.hi], "exp": {"coef": p.coef, "lam": p.lam}}
                )
            else:
                pieces.append(
                    {
                        "interval": [p.lo, p.hi],
                        "sinpow": {
                            "coef": p.coef,
                            "q": p.q,
                            "phase": p.phase,
                            "scale": p.scale,
                        },
                    }
                )
        return {
            "support": list(self.support),
            "atoms": [{"x": x, "mass": m} for x, m in self.atoms],
            "pieces": pieces,
        }


def _scale_piece(p: Piece, factor: float) -> Piece:
    if isinstance(p, PolyPiece):
        return replace(p, coeffs=tuple(c * factor for c in p.coeffs))
    return replace(p, coef=p.coef * factor)


@dataclass(frozen=True)
class TruncationResult:
    """Atom truncation: remaining mass and the renormalized measure."""

    truncated_mass: float
    normalized: Measure1D


# -- built-in families -------------------------------------------------------


def uniform(lo: float = 0.0, hi: float = 1.0) -> Measure1D:
    return Measure1D((lo, hi), (), (PolyPiece(lo, hi, (1.0 / (hi - lo),)),))


def two_interval_sigma0() -> Measure1D:
    """Uniform on [-1,-1/2] union [1/2,1]: density 1 on both intervals."""
    return Measure1D(
        (-1.0, 1.0),
        (),
        (PolyPiece(-1.0, -0.5, (1.0,)), PolyPiece(0.5, 1.0, (1.0,))),
    )


def truncated_exponential_sigma_k(k: int) -> Measure1D:
    """Exponential truncated to [0, 2k], rescaled to [0,1].

    Density 2k * c_k * exp(-2k x) with c_k = 1/(1 - exp(-2k)).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ck = 1.0 / (1.0 - math.exp(-2.0 * k))
    return Measure1D((0.0, 1.0), (), (ExpPiece(0.0, 1.0, 2.0 * k * ck, 2.0 * k),))


def atom_uniform_mixture(
    atoms: list[tuple[float, float]], support: tuple[float, float] = (0.0, 1.0)
) -> Measure1D:
    """Atoms plus a uniform density carrying the remaining mass."""
    atom_mass = fsum(m for _, m in atoms)
    w = (1.0 - atom_mass) / (support[1] - support[0])
    return Measure1D(
        support,
        tuple(sorted(atoms)),
        (PolyPiece(support[0], support[1], (w,)),),
    )


def sin_power_measure(q: int, interval: tuple[float, float]) -> Measure1D:
    """Normalized sin^q(theta) dtheta on the interval (uniform when q == 0)."""
    lo, hi = interval
    if q == 0:
        return uniform(lo, hi)
    raw = SinPowPiece(lo, hi, 1.0, q)
    mass = raw.moment(0)
    if mass <= 0:
        raise MeasureValidationError("sin^q weight has zero mass on interval")
    return Measure1D((lo, hi), (), (replace(raw, coef=1.0 / mass),))


# -- parsing -----------------------------------------------------------------

_BUILTINS = {
    "uniform",
    "two_interval_sigma0",
    "truncated_exponential_sigma_k",
    "mixture",
}


def parse_measure(spec) -> Measure1D:
    """Build a Measure1D from a JSON document (text, dict, or file path).

    Exactly one of "builtin" or explicit atoms/pieces must be present.
    """
    if isinstance(spec, str):
        text = spec
        if not spec.lstrip().startswith("{"):
            with open(spec) as fh:
                text = fh.read()
        spec = json.loads(text)
    if not isinstance(spec, dict):
        raise MeasureValidationError("measure spec must be a JSON object")

    builtin = spec.get("builtin")
    explicit = "atoms" in spec or "pieces" in spec
    if (builtin is None) == (not explicit):
        raise MeasureValidationError(
            "exactly one of 'builtin' or explicit atoms/pieces is required"
        )
    if builtin is not None:
        params = spec.get("params", {})
        if builtin not in _BUILTINS:
            raise MeasureValidationError(f"unknown builtin measure {builtin!r}")
        if builtin == "uniform":
            lo, hi = params.get("support", [0.0, 1.0])
            return uniform(lo, hi)
        if builtin == "two_interval_sigma0":
            return two_interval_sigma0()
        if builtin == "truncated_exponential_sigma_k":
            return truncated_exponential_sigma_k(int(params["k"]))
        atoms = [(float(a["x"]), float(a["mass"])) for a in params.get("atoms", [])]
        support = tuple(params.get("support", [0.0, 1.0]))
        return atom_uniform_mixture(atoms, support)

    support = tuple(float(v) for v in spec["support"])
    atoms = tuple(
        (float(a["x"]), float(a["mass"])) for a in spec.get("atoms", [])
    )
    pieces = []
    for p in spec.get("pieces", []):
        lo, hi = (float(v) for v in p["interval"])
        if "exp" in p:
            pieces.append(ExpPiece(lo, hi, float(p["exp"]["coef"]), float(p["exp"]["lam"])))
        elif "sinpow" in p:
            sp = p["sinpow"]
            pieces.append(
                SinPowPiece(
                    lo,
                    hi,
                    float(sp["coef"]),
                    int(sp["q"]),
                    float(sp.get("phase", 0.0)),
                    float(sp.get("scale", 1.0)),
                )
            )
        else:
            coeffs = tuple(float(c) for c in p["coeffs"])
            if len(coeffs) > 4:
                raise MeasureValidationError("polynomial pieces have degree <= 3")
            pieces.append(PolyPiece(lo, hi, coeffs))
    return Measure1D(support, atoms, tuple(pieces))
