"""Independent verification utilities.

Moment residuals of node sets against one-dimensional measures, a damped
Newton solver used to cross-check the moment flow, and reference
integration over sphere boxes and cylinder cells for cubature checks.
Every report carries content hashes so runs are auditable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .measure import Measure1D
from .momentmap import tk, u_matrix
from .cubature_sphere import AngleBox, spherical_map

__all__ = [
    "ResidualReport",
    "PrecisionError",
    "OracleFailure",
    "moment_residual",
    "newton_oracle",
    "reference_integral",
    "measure_fingerprint",
    "nodes_fingerprint",
]


class PrecisionError(RuntimeError):
    """Reference integration could not reach the requested tolerance."""


class OracleFailure(RuntimeError):
    """The Newton oracle failed to converge (test-infrastructure signal)."""


def measure_fingerprint(m: Measure1D) -> str:
    """sha256 of the canonical JSON serialization of the measure."""
    payload = json.dumps(m.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def nodes_fingerprint(nodes: np.ndarray) -> str:
    """sha256 of the full-precision decimal node list, one per line."""
    text = "\n".join(repr(float(x)) for x in np.asarray(nodes, dtype=float))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class ResidualReport:
    """Per-degree defects of the equal-weight moment identity."""

    residuals: tuple[float, ...]  # degrees 1..k
    max_residual: float
    measure_hash: str
    nodes_hash: str
    n: int

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "n": self.n,
            "residuals": list(self.residuals),
            "max_residual": self.max_residual,
            "measure_hash": self.measure_hash,
            "nodes_hash": self.nodes_hash,
        }


def moment_residual(nodes: np.ndarray, m: Measure1D, k: int) -> ResidualReport:
    """|(1/n) sum x_i^j - moment_j| for j = 1..k, in compensated summation."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    moments = m.moments(k)
    res = []
    power = np.ones_like(nodes)
    for j in range(1, k + 1):
        power = power * nodes
        avg = math.fsum(power) / n
        res.append(abs(avg - moments[j - 1]))
    return ResidualReport(
        tuple(res), max(res), measure_fingerprint(m), nodes_fingerprint(nodes), n
    )


def newton_oracle(z: np.ndarray, p: np.ndarray, max_iter: int = 100) -> np.ndarray:
    """Solve the power-sum equations T_k(w) = p by damped Newton from z.

    Each step solves U(w) dw = p - T_k(w) and halves the step until the
    residual decreases.  Raises OracleFailure after max_iter iterations
    without reaching 1e-13.
    """
    w = np.asarray(z, dtype=float).copy()
    p = np.asarray(p, dtype=float)
    k = len(p)
    resid = p - tk(w, k)
    norm = np.max(np.abs(resid))
    for _ in range(max_iter):
        if norm <= 1e-13:
            return w
        step = np.linalg.solve(u_matrix(w), resid)
        lam = 1.0
        while lam > 1e-12:
            trial = w + lam * step
            t_resid = p - tk(trial, k)
            t_norm = np.max(np.abs(t_resid))
            if t_norm < norm:
                w, resid, norm = trial, t_resid, t_norm
                break
            lam *= 0.5
        else:
            raise OracleFailure("Newton step rejected at minimal damping")
    if norm <= 1e-13:
        return w
    raise OracleFailure(f"no convergence in {max_iter} iterations (residual {norm:.3e})")


def _gl_points(interval: tuple[float, float], resolution: int):
    x, w = np.polynomial.legendre.leggauss(resolution)
    lo, hi = interval
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _sphere_box_integral(
    alpha: tuple[int, ...], intervals, resolution: int, shift=None
) -> float:
    """Integral of z^alpha (or (z-shift)^alpha) over the image of an angle
    box on the sphere, against surface measure: product Gauss-Legendre in
    the angles with the sin^q area factors in the integrand."""
    d = len(intervals)
    pts, wts = zip(*(_gl_points(iv, resolution) for iv in intervals))
    grids = np.meshgrid(*pts, indexing="ij")
    angles = np.stack([g.ravel() for g in grids], axis=-1)
    z = spherical_map(angles)
    weight = np.ones(len(angles))
    wg = np.meshgrid(*wts, indexing="ij")
    for q in range(d):
        weight = weight * wg[q].ravel()
        if q >= 1:
            weight = weight * np.sin(angles[:, q]) ** q
    if shift is not None:
        z = z - np.asarray(shift, dtype=float)
    vals = np.ones(len(angles))
    for t, a in enumerate(alpha):
        if a:
            vals = vals * z[:, t] ** a
    return float(np.sum(vals * weight))


def _cylinder_cell_integral(
    alpha: tuple[int, ...],
    interval: tuple[float, float],
    box: AngleBox,
    L: float,
    W: float,
    resolution: int,
    shift=None,
) -> float:
    """Integral of w^alpha over an axis-interval x sphere-box cell against
    the axis weight times the width-W sphere surface measure.

    The interval is in original units; the axis weight is defined in
    width-1 units, so it is evaluated at x/W.  The sphere box lives on the
    unit sphere; its image scales by W (surface measure by W^(d_sphere))."""
    from .cubature_cylinder import axis_density

    xs, xw = _gl_points(interval, resolution)
    d_sph = len(box.intervals)
    if shift is None:
        ax = math.fsum(
            w * x ** alpha[0] * axis_density(L, x / W) for x, w in zip(xs, xw)
        )
        sph = _sphere_box_integral(tuple(alpha[1:]), box.intervals, resolution)
        sph *= W ** (sum(alpha[1:]) + d_sph)
        return ax * sph
    # shifted monomials do not factorize; expand binomially
    total = 0.0
    y = np.asarray(shift, dtype=float)
    import itertools

    for beta in itertools.product(*(range(a + 1) for a in alpha)):
        coef = 1.0
        for t in range(len(alpha)):
            coef *= math.comb(alpha[t], beta[t]) * (-y[t]) ** (alpha[t] - beta[t])
        total += coef * _cylinder_cell_integral(beta, interval, box, L, W, resolution)
    return total


def reference_integral(
    alpha: tuple[int, ...],
    region,
    resolution: int = 16,
    shift=None,
    tolerance: float | None = None,
    cylinder=None,
) -> tuple[float, float]:
    """Reference value of the (shifted) monomial integral over a sphere box
    or cylinder cell, with a two-resolution Richardson error estimate.

    region: an AngleBox (or a raw tuple of angle intervals), or a
    CylinderCell (then pass the owning CylinderCubature as `cylinder`).
    Returns (value, error_estimate); if a tolerance is given and the
    estimate exceeds it, raises PrecisionError.
    """
    if resolution < 16:
        raise ValueError("resolution must be >= 16 points per factor")
    if isinstance(region, AngleBox) or isinstance(region, tuple):
        intervals = region.intervals if isinstance(region, AngleBox) else region
        coarse = _sphere_box_integral(alpha, intervals, resolution, shift)
        fine = _sphere_box_integral(alpha, intervals, 2 * resolution, shift)
    else:
        if cylinder is None:
            raise ValueError("cylinder cell integration needs the owning cubature")
        spec = cylinder.spec
        box = cylinder.sphere.partition.boxes[region.sphere_box]
        l1 = spec.L / spec.W
        coarse = _cylinder_cell_integral(
            alpha, region.interval, box, l1, spec.W, resolution, shift
        )
        fine = _cylinder_cell_integral(
            alpha, region.interval, box, l1, spec.W, 2 * resolution, shift
        )
    err = abs(fine - coarse)
    if tolerance is not None and err > tolerance:
        raise PrecisionError(
            f"error estimate {err:.3e} exceeds tolerance {tolerance:.3e}"
        )
    return fine, err
