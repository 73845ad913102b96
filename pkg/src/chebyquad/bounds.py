"""Closed-form node-count bounds for equal-weight quadrature.

Upper bounds come from the separation scale rho and moment radius r (plus
a density-only variant); lower bounds come from a moment ratio and from
the extreme Gaussian-quadrature weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import Measure1D
from .orthopoly import OrthopolyError, gauss_rule_for_measure
from .quadrature import rho_to_r

__all__ = [
    "UpperBoundReport",
    "LowerBoundReport",
    "upper_bound",
    "lower_bound_moments",
    "lower_bound_bernstein",
    "lower_bound_report",
    "gaussian_weight_check",
    "density_bound_count",
]


@dataclass(frozen=True)
class UpperBoundReport:
    """Guaranteed node counts: rho/r machinery plus optional closed forms."""

    k: int
    rho: float
    r: float | None
    n_guaranteed: int | None
    density_bound: int | None = None
    beta_bound: int | None = None
    large_atom_referral: bool = False

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "rho": self.rho,
            "r": self.r,
            "n_guaranteed": self.n_guaranteed,
            "density_bound": self.density_bound,
            "beta_bound": self.beta_bound,
            "large_atom_referral": self.large_atom_referral,
        }


@dataclass(frozen=True)
class LowerBoundReport:
    """Lower bounds on the minimal equal-weight node count."""

    moment_bound: float
    bernstein_bound: float | None = None
    m: int | None = None

    def to_dict(self) -> dict:
        return {
            "moment_bound": self.moment_bound,
            "bernstein_bound": self.bernstein_bound,
            "m": self.m,
        }


def density_bound_count(k: int, density_max: float) -> int:
    """ceil(75 e^4 k M (12 e M)^(k-1)) for a density bounded by M."""
    return math.ceil(
        75.0 * math.e**4 * k * density_max * (12.0 * math.e * density_max) ** (k - 1)
    )


def upper_bound(
    m: Measure1D,
    k: int,
    density_max: float | None = None,
    modulus_power_bound: tuple[float, float] | None = None,
) -> UpperBoundReport:
    """Evaluate the guaranteed node counts for matching k moments.

    density_max defaults to the measure's own essential density bound when
    available.  modulus_power_bound = (c, beta) asserts R(delta) >= c*delta^beta
    and yields an additional closed-form count.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if m.support[0] < -1e-12 or m.support[1] > 1.0 + 1e-12:
        raise ValueError("upper bound requires support within [0, 1]")
    rho = (k - 1) * m.inverse_modulus(1.0 / (k + 3))
    if density_max is None:
        density_max = m.density_bound()
    dens = density_bound_count(k, density_max) if density_max is not None else None
    beta_count = None
    if modulus_power_bound is not None:
        c, beta = modulus_power_bound
        if not (c > 0 and beta >= 1):
            raise ValueError("modulus power bound needs c > 0 and beta >= 1")
        rho_cb = (k - 1) * c * (k + 3.0) ** (-beta)
        beta_count = math.ceil(1.0 / rho_to_r(min(rho_cb, 1.0), k))
    if rho <= 0.0:
        # an atom carries mass >= 1/(k+3): the ordinary pipeline cannot
        # separate subsets; the large-atom construction applies instead
        return UpperBoundReport(k, 0.0, None, None, dens, beta_count, True)
    r = rho_to_r(rho, k)
    return UpperBoundReport(k, rho, r, math.ceil(1.0 / r), dens, beta_count)


def lower_bound_moments(m: Measure1D, k: int, shifts=None) -> float:
    """max(1, |m_k|^(k-1) / m_(k-1)^k) for odd k >= 3; the sign of m_k is
    handled by reflecting the measure through 0, which leaves the bound's
    value unchanged in this form.

    shifts: optional iterable of translation amounts t; the bound is then
    maximized over the translated measures (moments shift by the binomial
    formula).  Default: no translation.
    """
    if k < 3 or k % 2 == 0:
        raise ValueError("k must be an odd integer >= 3")
    moments = np.concatenate([[1.0], m.moments(k)])  # m_0 .. m_k
    if moments[k - 1] <= 0.0:
        raise ValueError("measure concentrated at 0 has no finite bound")
    best = _moment_ratio(moments, k)
    for t in shifts or ():
        shifted = np.array(
            [
                sum(math.comb(j, i) * t ** (j - i) * moments[i] for i in range(j + 1))
                for j in range(k + 1)
            ]
        )
        if shifted[k - 1] > 0:
            best = max(best, _moment_ratio(shifted, k))
    return best


def _moment_ratio(moments: np.ndarray, k: int) -> float:
    mk = moments[k]
    if mk == 0.0:
        return 1.0
    return max(1.0, abs(mk) ** (k - 1) / moments[k - 1] ** k)


def lower_bound_bernstein(m: Measure1D, mth: int) -> float:
    """1 / min(first, last) Gaussian weight at order mth; a lower bound on
    the node count needed to match the first 2*mth - 1 moments."""
    if mth < 1:
        raise ValueError("mth must be >= 1")
    try:
        rule = gauss_rule_for_measure(m, mth)
    except OrthopolyError as exc:
        raise OrthopolyError(
            f"Gaussian quadrature failed at order {mth}; "
            "try a smaller order (cap 12)"
        ) from exc
    return 1.0 / min(rule.weights[0], rule.weights[-1])


def lower_bound_report(m: Measure1D, k: int, mth: int | None = None) -> LowerBoundReport:
    """Moment bound for odd k, plus the Gaussian-weight bound at order
    mth (default (k+1)/2)."""
    moment = lower_bound_moments(m, k)
    if mth is None:
        mth = (k + 1) // 2
    try:
        bern = lower_bound_bernstein(m, mth)
    except (OrthopolyError, ValueError):
        return LowerBoundReport(moment)
    return LowerBoundReport(moment, bern, mth)


def gaussian_weight_check(
    m: Measure1D, mth: int, density_max: float | None = None
) -> tuple[bool, float, float]:
    """Check lambda_1 >= 1 / ceil(75 e^4 (2m-1) M (12 e M)^(2m-2)).

    Returns (holds, smallest_weight, right_hand_side).
    """
    if density_max is None:
        density_max = m.density_bound()
    if density_max is None:
        raise ValueError("measure has no density bound (atoms present)")
    rule = gauss_rule_for_measure(m, mth)
    lam1 = float(np.min(rule.weights))
    rhs = 1.0 / density_bound_count(2 * mth - 1, density_max)
    return lam1 >= rhs, lam1, rhs
