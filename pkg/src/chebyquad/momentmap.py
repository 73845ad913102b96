"""Moment-vector algebra: power-sum map, its Jacobian, Vandermonde norms,
and the multidimensional monomial moment map."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

__all__ = [
    "tk",
    "u_matrix",
    "vandermonde_matrix",
    "vandermonde_inverse_norm",
    "u_inverse_norm_bound",
    "MultiIndexBasis",
    "multimoment_map",
    "poly_dim",
]


def tk(z: np.ndarray, k: int | None = None) -> np.ndarray:
    """Raw power sums: entry j = sum_i z_i^j for j = 1..k.

    Symmetric in the entries of z; k defaults to len(z).
    """
    z = np.asarray(z, dtype=float)
    if k is None:
        k = len(z)
    return np.array([np.sum(z**j) for j in range(1, k + 1)])


def u_matrix(w: np.ndarray) -> np.ndarray:
    """Jacobian of tk: row j has entries j * w_i^(j-1), j = 1..k."""
    w = np.asarray(w, dtype=float)
    k = len(w)
    j = np.arange(1, k + 1)[:, None]
    return j * w[None, :] ** (j - 1)


def vandermonde_matrix(w: np.ndarray) -> np.ndarray:
    """Rows 1, w, w^2, ..., w^(k-1)."""
    w = np.asarray(w, dtype=float)
    k = len(w)
    return w[None, :] ** np.arange(k)[:, None]


def vandermonde_inverse_norm(w: np.ndarray) -> float:
    """||V(w)^{-1}||_inf by Gautschi's formula:
    max_i prod_{j != i} (1 + w_j) / |w_i - w_j|.

    Requires nonnegative, pairwise-distinct nodes.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("nodes must be nonnegative")
    if len(np.unique(w)) != len(w):
        raise ValueError("nodes must be pairwise distinct")
    best = 0.0
    for i in range(len(w)):
        prod = 1.0
        for j in range(len(w)):
            if j != i:
                prod *= (1.0 + w[j]) / abs(w[i] - w[j])
        best = max(best, prod)
    return best


def u_inverse_norm_bound(k: int, sep: float) -> float:
    """Upper bound (1/k) * (4e/sep)^(k-1) on ||U(w)^{-1}||_inf for nodes
    in [0,1] with pairwise gaps >= sep/(k-1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < sep <= 1:
        raise ValueError("sep must be in (0, 1]")
    return (1.0 / k) * (4.0 * math.e / sep) ** (k - 1)


def poly_dim(k: int, d: int) -> int:
    """Number of monomials x^alpha with 0 < |alpha| <= k."""
    return math.comb(k + d, d) - 1


@dataclass(frozen=True)
class MultiIndexBasis:
    """All multi-indices 0 < |alpha| <= k in d variables, graded then
    lexicographic within each grade.  This order is frozen: it defines the
    column order of every emitted moment file."""

    k: int
    d: int

    @property
    def indices(self) -> tuple[tuple[int, ...], ...]:
        out = []
        for grade in range(1, self.k + 1):
            grade_block = []
            for combo in combinations_with_replacement(range(self.d), grade):
                alpha = [0] * self.d
                for pos in combo:
                    alpha[pos] += 1
                grade_block.append(tuple(alpha))
            grade_block.sort(reverse=True)
            out.extend(grade_block)
        return tuple(out)

    def __len__(self) -> int:
        return poly_dim(self.k, self.d)


def multimoment_map(x: np.ndarray, k: int) -> np.ndarray:
    """P_k^d(x): monomials x^alpha in MultiIndexBasis order."""
    x = np.asarray(x, dtype=float)
    basis = MultiIndexBasis(k, len(x))
    return np.array([np.prod(x**np.array(alpha)) for alpha in basis.indices])
