"""Local approximate equal-weight cubature on a cylinder surface.

The cylinder measure is the product of a linear axis density and the
surface measure of the cross-section sphere.  Cells are products of
equal-mass axis intervals with sphere partition boxes; node sets are
products of an axis quadrature with the sphere cubature nodes.  The
construction is done at width W = 1 and rescaled.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .measure import Measure1D, PolyPiece
from .quadrature import ConstructionError, ParameterError, construct_quadrature
from .cubature_sphere import SphereCubature, sphere_cubature

__all__ = [
    "CylinderSpec",
    "CylinderCell",
    "CylinderCubature",
    "axis_density",
    "axis_intervals",
    "axis_quadrature",
    "cylinder_cubature",
]

# minimal axis half-length per dimension for the interval procedure to
# cover [-L, L]; overridden by the frozen-constants config when loaded
DEFAULT_MIN_L = {3: 2.0, 4: 2.0, 5: 2.0}


def axis_density(L: float, x) -> float | np.ndarray:
    """The axis weight 1 + (x + 2L)/(4L), taking values in [1, 2]."""
    return 1.0 + (np.asarray(x, dtype=float) + 2.0 * L) / (4.0 * L)


def _axis_antiderivative(L: float, x: float) -> float:
    return x + (x + 2.0 * L) ** 2 / (8.0 * L)


def axis_intervals(L: float, target_mass: float) -> list[tuple[float, float]]:
    """Consecutive intervals of exact axis mass target_mass, starting at
    -3L/2 and stopping at the last interval inside [-3L/2, 3L/2].

    The weight integrates to a quadratic, so each breakpoint is a closed
    form root.  Raises if the covered range does not reach past L.
    """
    if target_mass <= 0:
        raise ParameterError("target mass must be positive")
    lo, hi = -1.5 * L, 1.5 * L
    out = []
    a = lo
    while True:
        s = _axis_antiderivative(L, a) + target_mass + 2.0 * L
        u = 4.0 * L * (math.sqrt(1.0 + s / (2.0 * L)) - 1.0)
        b = u - 2.0 * L
        if b > hi + 1e-9 * L:
            break
        out.append((a, min(b, hi)))
        a = b
    if not out or out[-1][1] <= L:
        raise ParameterError(
            "L too small for tau: axis intervals stop before covering [-L, L]"
        )
    return out


def _axis_measure(interval: tuple[float, float], L: float) -> tuple[Measure1D, float, float]:
    """Normalized axis weight on the interval, rescaled to [0, 1].

    Returns (measure, shift, scale) with original x = shift + scale * t.
    """
    a, b = interval
    length = b - a
    mass = _axis_antiderivative(L, b) - _axis_antiderivative(L, a)
    # density in t: v(a + length * t) * length / mass, linear in t
    c0 = float(axis_density(L, a)) * length / mass
    c1 = length**2 / (4.0 * L) / mass
    piece = PolyPiece(0.0, 1.0, (c0, c1, 0.0, 0.0))
    return Measure1D((0.0, 1.0), (), (piece,)), a, length


def axis_moment(interval: tuple[float, float], L: float, r: int) -> float:
    """Normalized weighted moment: integral of x^r v(x) over the interval
    divided by the interval's v-mass; exact polynomial integration."""
    a, b = interval
    mass = _axis_antiderivative(L, b) - _axis_antiderivative(L, a)
    # integral of x^r (1 + (x+2L)/(4L)) = (3/2) x^r + x^(r+1)/(4L)
    num = 1.5 * (b ** (r + 1) - a ** (r + 1)) / (r + 1)
    num += (b ** (r + 2) - a ** (r + 2)) / ((r + 2) * 4.0 * L)
    return num / mass


def axis_quadrature(
    interval: tuple[float, float], L: float, k: int, n0: int | None = None
) -> np.ndarray:
    """Equal-weight nodes matching the normalized axis-weighted moments up
    to degree k on the interval.

    Degree 1 places every node at the weighted mean; higher degrees run
    the one-dimensional construction on the rescaled linear density.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if k == 1:
        return np.full(n0 or 1, axis_moment(interval, L, 1))
    measure, shift, scale = _axis_measure(interval, L)
    if n0 is None:
        trial = max(k * (k + 3), 64)
        while trial <= 2**22:
            try:
                result = construct_quadrature(measure, k, n=trial, mode="best_effort")
                return shift + scale * result.nodes
            except ConstructionError:
                trial *= 2
        raise ConstructionError("no accepted axis node count up to 2^22")
    result = construct_quadrature(measure, k, n=n0, mode="best_effort")
    return shift + scale * result.nodes


@dataclass(frozen=True)
class CylinderSpec:
    """Parameters of the cylinder construction.

    The cylinder is P_{L,W} = [-L, L] x W*S^(d-2) inside the larger
    P_{2L,W} carrying the axis weight; cells have exact weighted mass
    tau^(d-1).
    """

    d: int
    k: int
    L: float
    W: float
    tau: float
    delta: float

    def __post_init__(self):
        if self.d < 3:
            raise ParameterError("d must be >= 3")
        if self.k < 1:
            raise ParameterError("k must be >= 1")
        if self.W <= 0:
            raise ParameterError("W must be positive")
        if not 0 < self.tau < self.W:
            raise ParameterError("tau must be in (0, W)")
        if not 0 < self.delta < self.W**self.k:
            raise ParameterError("delta must be in (0, W^k)")
        min_l = _min_length(self.d)
        if self.L / self.W <= min_l:
            raise ParameterError(
                f"L/W must exceed {min_l} for d={self.d} (axis coverage)"
            )


def _min_length(d: int) -> float:
    try:
        from .config import frozen_constants

        return frozen_constants()["cylinder_min_L"].get(
            str(d), DEFAULT_MIN_L.get(d, 2.0)
        )
    except Exception:
        return DEFAULT_MIN_L.get(d, 2.0)


@dataclass(frozen=True)
class CylinderCell:
    """Product of an axis interval with a sphere partition box."""

    interval: tuple[float, float]
    sphere_box: int
    axis_nodes: np.ndarray
    mass: float
    diameter_bound: float


@dataclass(frozen=True)
class CylinderCubature:
    """Cells and factorized node sets for the W-rescaled construction."""

    spec: CylinderSpec
    sphere: SphereCubature  # built at width 1 in rescaled units
    cells: tuple[CylinderCell, ...]
    breakpoints: tuple[np.ndarray, ...]  # per sphere box, axis breakpoints

    @property
    def K(self) -> int:
        return len(self.cells)

    @property
    def nodes_per_cell(self) -> int:
        return len(self.cells[0].axis_nodes) * self.sphere.nodes_per_box

    def cell_nodes(self, j: int, limit: int = 2_000_000) -> np.ndarray:
        """Materialize the product node set of cell j."""
        cell = self.cells[j]
        if self.nodes_per_cell > limit:
            raise ValueError("cell too large to materialize; raise limit")
        sph = self.spec.W * self.sphere.box_nodes(cell.sphere_box, limit=limit)
        pairs = []
        for x in cell.axis_nodes:
            block = np.empty((len(sph), self.spec.d))
            block[:, 0] = x
            block[:, 1:] = sph
            pairs.append(block)
        return np.concatenate(pairs, axis=0)

    def locate(self, point: np.ndarray) -> int | None:
        """Index of the unique cell containing the point, or None."""
        x = point[0]
        ang = math.atan2(point[1], point[2]) % (2.0 * math.pi)
        box_i = None
        for i, box in enumerate(self.sphere.partition.boxes):
            lo, hi = box.intervals[0]
            if lo <= ang <= hi:
                box_i = i
                break
        if box_i is None:
            return None
        bp = self.breakpoints[box_i]
        pos = int(np.searchsorted(bp, x, side="right")) - 1
        if pos < 0 or pos >= len(bp) - 1:
            return None
        for j, cell in enumerate(self.cells):
            if cell.sphere_box == box_i and abs(cell.interval[0] - bp[pos]) < 1e-12:
                return j
        return None

    def cell_moment_gap(self, j: int, alpha: tuple[int, ...]) -> float:
        """Equal-weight average minus normalized integral of w^alpha."""
        cell = self.cells[j]
        w_scale = self.spec.W
        l1 = self.spec.L / w_scale
        # axis factor (in original units; nodes already in original units)
        ax_lhs = float(np.mean(cell.axis_nodes ** alpha[0]))
        a, b = cell.interval
        ax_rhs = axis_moment((a / w_scale, b / w_scale), l1, alpha[0])
        # rescale: axis_moment of the W=1 interval times W^alpha0
        ax_rhs *= w_scale ** alpha[0]
        tail = tuple(alpha[1:])
        if all(t == 0 for t in tail):
            sp_lhs = sp_rhs = 1.0
        else:
            sp_lhs = self.sphere.monomial_average(cell.sphere_box, tail)
            sp_rhs = self.sphere.monomial_integral(cell.sphere_box, tail)
            scale = w_scale ** sum(tail)
            sp_lhs *= scale
            sp_rhs *= scale
        return ax_lhs * sp_lhs - ax_rhs * sp_rhs

    def cell_error(self, j: int, alpha: tuple[int, ...]) -> float:
        return abs(self.cell_moment_gap(j, alpha))

    def shifted_cell_error(
        self, j: int, alpha: tuple[int, ...], y: np.ndarray
    ) -> float:
        """|average - integral| for (w - y)^alpha via binomial expansion."""
        ranges = [range(a + 1) for a in alpha]
        total = 0.0
        for beta in itertools.product(*ranges):
            coef = 1.0
            for t in range(len(alpha)):
                coef *= math.comb(alpha[t], beta[t]) * (-y[t]) ** (alpha[t] - beta[t])
            if any(beta):
                total += coef * self.cell_moment_gap(j, beta)
        return abs(total)

    def max_cell_error(self) -> float:
        from .momentmap import MultiIndexBasis

        basis = MultiIndexBasis(self.spec.k, self.spec.d)
        return max(
            self.cell_error(j, alpha)
            for j in range(self.K)
            for alpha in basis.indices
        )

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "spec": {
                "d": self.spec.d,
                "k": self.spec.k,
                "L": self.spec.L,
                "W": self.spec.W,
                "tau": self.spec.tau,
                "delta": self.spec.delta,
            },
            "K": self.K,
            "nodes_per_cell": self.nodes_per_cell,
            "cells": [
                {
                    "interval": list(c.interval),
                    "sphere_box": c.sphere_box,
                    "mass": c.mass,
                    "diameter_bound": c.diameter_bound,
                    "axis_nodes": [float(v) for v in c.axis_nodes],
                }
                for c in self.cells
            ],
        }


def cylinder_cubature(spec: CylinderSpec) -> CylinderCubature:
    """Build the cells and node sets: a width-1 construction at rescaled
    parameters, scaled back by W at the end."""
    w_scale = spec.W
    l1 = spec.L / w_scale
    tau1 = spec.tau / w_scale
    delta1 = spec.delta / w_scale**spec.k

    sphere = sphere_cubature(spec.d - 2, spec.k, tau1, delta1 / (4.0 * l1) ** spec.k)
    part = sphere.partition

    # one common axis node count: degree 1 repeats the mean to match the
    # sphere factor count, higher degrees search a common accepted count
    if spec.k == 1:
        n0 = sphere.nodes_per_box
    else:
        n0 = None  # resolved on the first interval, then reused

    cells = []
    breakpoints = []
    for i in range(part.K):
        target = tau1 ** (spec.d - 1) / part.masses[i]
        intervals = axis_intervals(l1, target)
        bp = np.array([intervals[0][0]] + [iv[1] for iv in intervals]) * w_scale
        breakpoints.append(bp)
        for a, b in intervals:
            if n0 is None:
                nodes = axis_quadrature((a, b), l1, spec.k)
                n0 = len(nodes)
            else:
                nodes = axis_quadrature((a, b), l1, spec.k, n0=n0)
            mass = (
                _axis_antiderivative(l1, b) - _axis_antiderivative(l1, a)
            ) * part.masses[i]
            diam = math.hypot(b - a, part.diameter_bounds[i]) * w_scale
            cells.append(
                CylinderCell(
                    (a * w_scale, b * w_scale),
                    i,
                    nodes * w_scale,
                    mass * w_scale ** (spec.d - 1),
                    diam,
                )
            )
    return CylinderCubature(spec, sphere, tuple(cells), tuple(breakpoints))
