"""Closed-form integrals of x^s * exp(mu*x) and x^s * sin^b * cos^a.

These are the primitives behind exact moments and CDFs of the density
pieces used throughout the package.  Everything here reduces to

    int_a^b x^s exp(mu*x) dx

for complex mu: trigonometric weights expand into complex exponentials,
and real-exponential densities use the incomplete-gamma form directly.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammainc


def power_integral(s: int, a: float, b: float) -> float:
    """int_a^b x^s dx."""
    return (b ** (s + 1) - a ** (s + 1)) / (s + 1)


def power_exp_integral(s: int, mu: complex, a: float, b: float) -> complex:
    """int_a^b x^s exp(mu*x) dx for complex mu.

    Uses a shifted power series on panels with |mu|*len <= 1, which avoids
    both the cancellation of the naive series and the instability of the
    boundary-term recurrence at small |mu|.
    """
    if s < 0:
        raise ValueError("power s must be >= 0")
    if mu == 0:
        return complex(power_integral(s, a, b))
    n_panels = max(1, math.ceil(abs(mu) * (b - a)))
    total = 0.0 + 0.0j
    edges = np.linspace(a, b, n_panels + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += _panel_power_exp(s, mu, lo, hi - lo)
    return total


def _panel_power_exp(s: int, mu: complex, a: float, length: float) -> complex:
    # int_a^{a+L} x^s e^{mu x} dx = e^{mu a} * sum_t C(s,t) a^{s-t} S_t(mu, L)
    acc = 0.0 + 0.0j
    for t in range(s + 1):
        acc += math.comb(s, t) * a ** (s - t) * _small_arg_series(t, mu, length)
    return np.exp(mu * a) * acc


def _small_arg_series(t: int, mu: complex, length: float) -> complex:
    # int_0^L u^t e^{mu u} du = L^{t+1} sum_j (mu L)^j / (j! (t+j+1)), |mu L| <= 1
    z = mu * length
    term = 1.0 + 0.0j
    acc = 1.0 / (t + 1)
    for j in range(1, 60):
        term *= z / j
        contrib = term / (t + j + 1)
        acc += contrib
        if abs(contrib) < 1e-20 * max(1.0, abs(acc)):
            break
    return length ** (t + 1) * acc


def power_negexp_integral(s: int, lam: float, a: float, b: float) -> float:
    """int_a^b x^s exp(-lam*x) dx for lam > 0 and 0 <= a <= b.

    Closed form via the regularized lower incomplete gamma function.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if a < 0:
        raise ValueError("requires a >= 0")
    g = gammainc(s + 1, lam * b) - gammainc(s + 1, lam * a)
    return float(math.gamma(s + 1) / lam ** (s + 1) * g)


@lru_cache(maxsize=None)
def trig_expansion(sin_pow: int, cos_pow: int) -> tuple[tuple[int, complex], ...]:
    """Expand sin^b(x) cos^a(x) as sum_f c_f e^{i f x}.

    Returns (frequency, coefficient) pairs; the sum is real for real x.
    """
    # Laurent polynomial in u = e^{ix}: sin = (u - 1/u)/(2i), cos = (u + 1/u)/2.
    coeffs = {0: 1.0 + 0.0j}
    for _ in range(sin_pow):
        coeffs = _laurent_mul(coeffs, {1: 1 / 2j, -1: -1 / 2j})
    for _ in range(cos_pow):
        coeffs = _laurent_mul(coeffs, {1: 0.5 + 0j, -1: 0.5 + 0j})
    return tuple(sorted(coeffs.items()))


def _laurent_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for f1, c1 in p.items():
        for f2, c2 in q.items():
            f = f1 + f2
            out[f] = out.get(f, 0.0 + 0.0j) + c1 * c2
    return out


def trig_power_integral(
    s: int,
    sin_pow: int,
    cos_pow: int,
    a: float,
    b: float,
    phase: float = 0.0,
    scale: float = 1.0,
) -> float:
    """int_a^b x^s sin^b(phase + scale*x) cos^a(phase + scale*x) dx, exactly."""
    if a == b:
        return 0.0
    acc = 0.0 + 0.0j
    for f, c in trig_expansion(sin_pow, cos_pow):
        mu = 1j * f * scale
        acc += c * np.exp(1j * f * phase) * power_exp_integral(s, mu, a, b)
    return float(acc.real)


def fsum(values) -> float:
    """Compensated sum (exact rounding via math.fsum)."""
    return math.fsum(values)
