import json
import math

import numpy as np
import pytest

from chebyquad.measure import (
    Measure1D,
    MeasureValidationError,
    PolyPiece,
    SinPowPiece,
    atom_uniform_mixture,
    parse_measure,
    sin_power_measure,
    truncated_exponential_sigma_k,
    two_interval_sigma0,
    uniform,
)


def test_uniform_moments():
    m = uniform()
    for j in range(1, 8):
        assert m.moment(j) == pytest.approx(1.0 / (j + 1), abs=1e-15)
    assert m.total_mass() == pytest.approx(1.0, abs=1e-15)


def test_uniform_quantile_and_cdf():
    m = uniform()
    p = np.linspace(0.1, 1.0, 10)
    assert np.allclose(m.quantile(p), p, atol=1e-12)
    assert np.allclose(m.cdf(p), p, atol=1e-12)
    with pytest.raises(ValueError):
        m.quantile(0.0)


def test_two_interval_sigma0():
    m = two_interval_sigma0()
    assert m.total_mass() == pytest.approx(1.0, abs=1e-14)
    # symmetric: odd moments vanish
    assert m.moment(1) == pytest.approx(0.0, abs=1e-15)
    assert m.moment(3) == pytest.approx(0.0, abs=1e-15)
    # m2 = 2 * int_{1/2}^{1} x^2 = 2*(1/3 - 1/24) = 7/12
    assert m.moment(2) == pytest.approx(7.0 / 12.0, abs=1e-14)
    assert m.cdf(0.0) == pytest.approx(0.5, abs=1e-14)


def test_truncated_exponential_mass_and_density():
    for k in (1, 3, 15):
        m = truncated_exponential_sigma_k(k)
        assert m.total_mass() == pytest.approx(1.0, abs=1e-12)
        ck = 1.0 / (1.0 - math.exp(-2.0 * k))
        # first moment of the rescaled truncated exponential, closed form
        lam = 2.0 * k
        m1 = ck * (1.0 - (1.0 + lam) * math.exp(-lam)) / lam
        assert m.moment(1) == pytest.approx(m1, rel=1e-12)


def test_atom_mixture_quantile():
    m = atom_uniform_mixture([(0.0, 0.5)])
    assert m.quantile(0.25) == pytest.approx(0.0, abs=1e-12)
    # mass 0.75 needs the atom plus uniform mass 0.25 -> x = 0.5
    assert m.quantile(0.75) == pytest.approx(0.5, abs=1e-12)


def test_inverse_modulus_uniform():
    m = uniform()
    for delta in (0.1, 0.2, 0.5, 0.9):
        assert m.inverse_modulus(delta) == pytest.approx(delta, abs=1e-9)


def test_inverse_modulus_atom_mixture():
    # half an atom at 0 plus half uniform: an interval [0, x] has mass
    # 0.5 + 0.5 x, so R(0.7) solves 0.5 + 0.5 x = 0.7, giving 0.4
    m = atom_uniform_mixture([(0.0, 0.5)])
    assert m.inverse_modulus(0.7) == pytest.approx(0.4, abs=1e-9)
    # any delta at most the atom mass is absorbed by the atom alone
    assert m.inverse_modulus(0.5) == 0.0
    assert m.inverse_modulus(0.3) == 0.0


def test_inverse_modulus_two_interval():
    m = two_interval_sigma0()
    # mass 1/2 is exactly one component, length 1/2
    assert m.inverse_modulus(0.5) == pytest.approx(0.5, abs=1e-6)
    # more than 1/2 must bridge the central gap: length = 1 + mass
    assert m.inverse_modulus(0.6) == pytest.approx(1.6, abs=1e-6)


def test_truncate_atoms():
    m = atom_uniform_mixture([(0.3, 0.5)])
    trunc = m.truncate_atoms(0.1)
    assert trunc.truncated_mass == pytest.approx(0.6, abs=1e-14)
    assert trunc.normalized.total_mass() == pytest.approx(1.0, abs=1e-12)
    # the capped atom carries mass 0.1/0.6 in the normalized measure
    [(x, mass)] = trunc.normalized.atoms
    assert x == 0.3
    assert mass == pytest.approx(0.1 / 0.6, abs=1e-14)


def test_affine_rescale():
    m = two_interval_sigma0().affine_rescale((0.0, 1.0))
    assert m.support == (0.0, 1.0)
    assert m.total_mass() == pytest.approx(1.0, abs=1e-12)
    # midpoint image of x=0 splits the mass in half
    assert m.cdf(0.5) == pytest.approx(0.5, abs=1e-12)


def test_sin_power_partial_mass_matches_quadrature():
    piece = SinPowPiece(0.0, 1.0, 1.3, 3, 0.2, 2.0)
    xs, ws = np.polynomial.legendre.leggauss(60)
    for x in (0.2, 0.5, 1.0):
        t = 0.5 * x * (xs + 1.0)
        ref = 0.5 * x * np.sum(ws * piece.density(t))
        assert piece.partial_mass(x) == pytest.approx(ref, abs=1e-12)


def test_sin_power_measure_normalized():
    m = sin_power_measure(2, (0.3, 1.1))
    assert m.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert sin_power_measure(0, (0.0, 1.0)).density_bound() == pytest.approx(1.0)


def test_parse_measure_builtin_and_explicit():
    assert parse_measure({"builtin": "uniform"}).moment(1) == pytest.approx(0.5)
    doc = {
        "support": [0.0, 1.0],
        "atoms": [{"x": 0.25, "mass": 0.5}],
        "pieces": [{"interval": [0.0, 1.0], "coeffs": [0.5]}],
    }
    m = parse_measure(json.dumps(doc))
    assert m.total_mass() == pytest.approx(1.0, abs=1e-14)
    assert m.moment(1) == pytest.approx(0.25 * 0.5 + 0.5 * 0.5, abs=1e-14)


def test_parse_measure_rejects_ambiguous_spec():
    with pytest.raises(MeasureValidationError):
        parse_measure({"builtin": "uniform", "atoms": []})
    with pytest.raises(MeasureValidationError):
        parse_measure({"builtin": "no_such_measure"})


def test_measure_validation():
    with pytest.raises(MeasureValidationError):
        # total mass far from 1
        Measure1D((0.0, 1.0), (), (PolyPiece(0.0, 1.0, (2.0,)),))
    with pytest.raises(MeasureValidationError):
        # negative atom mass
        Measure1D((0.0, 1.0), ((0.5, -0.1),), (PolyPiece(0.0, 1.0, (1.1,)),))
