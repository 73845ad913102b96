"""Gaussian quadrature engine.

Three-term recurrence coefficients are computed from a measure by the
Stieltjes procedure with inner products evaluated on an exact (or
near-machine-exact) discretization; nodes and weights then come from the
symmetric tridiagonal Jacobi matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .measure import ExpPiece, Measure1D, PolyPiece, SinPowPiece

__all__ = [
    "RecurrenceCoefficients",
    "GaussRule",
    "OrthopolyError",
    "recurrence_from_measure",
    "gauss_rule",
    "gauss_rule_for_measure",
    "MAX_ORDER",
]

MAX_ORDER = 12


class OrthopolyError(RuntimeError):
    """Degenerate or ill-conditioned recurrence computation."""


@dataclass(frozen=True)
class RecurrenceCoefficients:
    """Monic recurrence p_{i+1} = (x - a_i) p_i - b_i p_{i-1}.

    b[0] is the total mass; b[i] > 0 for 0 < i < order.
    """

    a: tuple[float, ...]
    b: tuple[float, ...]
    order: int
    support: tuple[float, float]

    def __post_init__(self):
        if len(self.a) != self.order or len(self.b) != self.order:
            raise ValueError("coefficient length must equal order")
        if any(bi <= 1e-14 for bi in self.b[1:]):
            raise OrthopolyError(
                "recurrence coefficient b_i <= 1e-14: moment sequence "
                "degenerate or order too high for double precision"
            )


@dataclass(frozen=True)
class GaussRule:
    """Nodes and positive weights; exact for degrees <= 2m - 1."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise OrthopolyError("Gauss nodes failed to be strictly increasing")
        if np.any(self.weights <= 0):
            raise OrthopolyError("Gauss weights must be positive")

    @property
    def m(self) -> int:
        return len(self.nodes)

    def integrate_power(self, j: int) -> float:
        return float(np.sum(self.weights * self.nodes**j))


def _discretize(m: Measure1D) -> tuple[np.ndarray, np.ndarray]:
    """Point masses whose inner products reproduce the measure's to machine
    precision for polynomials up to degree ~2*MAX_ORDER."""
    xs, ws = [], []
    npts = 32
    glx, glw = np.polynomial.legendre.leggauss(npts)
    for pc in m.pieces:
        if isinstance(pc, PolyPiece):
            rate = 1.0
        elif isinstance(pc, ExpPiece):
            rate = pc.lam
        elif isinstance(pc, SinPowPiece):
            rate = abs(pc.scale) * max(1, pc.q)
        else:  # pragma: no cover - no other piece kinds exist
            raise TypeError(f"unknown piece type {type(pc)!r}")
        panels = max(1, math.ceil((pc.hi - pc.lo) * rate / 4.0))
        edges = np.linspace(pc.lo, pc.hi, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            x = 0.5 * (lo + hi) + half * glx
            xs.append(x)
            ws.append(half * glw * pc.density(x))
    for x, mass in m.atoms:
        xs.append(np.array([x]))
        ws.append(np.array([mass]))
    return np.concatenate(xs), np.concatenate(ws)


def recurrence_from_measure(m: Measure1D, order: int) -> RecurrenceCoefficients:
    """Stieltjes procedure: a_i, b_i from inner products of the running
    orthogonal polynomials, evaluated on an exact discretization."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if order > MAX_ORDER:
        raise OrthopolyError(
            f"order {order} exceeds the double-precision cap {MAX_ORDER}"
        )
    if m.is_purely_atomic() and len(m.atoms) < order:
        raise ValueError(
            f"purely atomic measure with {len(m.atoms)} atoms supports "
            f"recurrence order at most {len(m.atoms)}"
        )
    x, w = _discretize(m)
    a, b = [], []
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    norm_prev = 0.0
    for i in range(order):
        norm = float(np.sum(w * p * p))
        if norm <= 1e-14:
            raise OrthopolyError(
                f"degenerate inner product at step {i}: norm {norm:.3e}"
            )
        a_i = float(np.sum(w * x * p * p)) / norm
        b_i = norm if i == 0 else norm / norm_prev
        a.append(a_i)
        b.append(b_i)
        p_next = (x - a_i) * p - (0.0 if i == 0 else b_i) * p_prev
        p_prev, p = p, p_next
        norm_prev = norm
    return RecurrenceCoefficients(tuple(a), tuple(b), order, m.support)


def gauss_rule(coeffs: RecurrenceCoefficients, m: int) -> GaussRule:
    """Golub-Welsch: nodes are eigenvalues of the m x m Jacobi matrix,
    weights the scaled squared first eigenvector components."""
    if m < 1 or m > coeffs.order:
        raise ValueError(f"m must be in 1..{coeffs.order}")
    diag = np.array(coeffs.a[:m])
    off = np.sqrt(np.array(coeffs.b[1:m]))
    try:
        vals, vecs = eigh_tridiagonal(diag, off)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise OrthopolyError(f"Jacobi eigen-iteration failed: {exc}") from exc
    weights = coeffs.b[0] * vecs[0, :] ** 2
    order_ix = np.argsort(vals)
    nodes, weights = vals[order_ix], weights[order_ix]
    lo, hi = coeffs.support
    tol = 1e-10 * max(1.0, abs(lo), abs(hi))
    if nodes[0] < lo - tol or nodes[-1] > hi + tol:
        raise OrthopolyError("Gauss nodes left the support's convex hull")
    if abs(weights.sum() - coeffs.b[0]) > 1e-12 * max(1.0, coeffs.b[0]):
        raise OrthopolyError("Gauss weights failed the mass check")
    return GaussRule(nodes, weights)


def gauss_rule_for_measure(m: Measure1D, order: int) -> GaussRule:
    """Convenience wrapper: recurrence at the requested order, then the rule."""
    return gauss_rule(recurrence_from_measure(m, order), order)
