import math

import numpy as np
import pytest

from chebyquad.measure import Measure1D, uniform
from chebyquad.momentmap import tk
from chebyquad.quadrature import perturb_to_moments, rho_to_r, simple_approximation
from chebyquad.verify import (
    OracleFailure,
    PrecisionError,
    moment_residual,
    newton_oracle,
    reference_integral,
)


def test_equal_weight_gauss_pair():
    nodes = np.array([0.5 - 1 / (2 * math.sqrt(3)), 0.5 + 1 / (2 * math.sqrt(3))])
    report = moment_residual(nodes, uniform(), 3)
    assert report.max_residual <= 1e-15


def test_simple_approximation_residuals():
    nodes = simple_approximation(uniform(), 100)
    report = moment_residual(nodes, uniform(), 5)
    assert report.max_residual <= 1.0 / 100


def test_two_atom_exact():
    m = Measure1D((0.0, 1.0), ((0.0, 0.5), (1.0, 0.5)), ())
    report = moment_residual(np.array([0.0, 1.0]), m, 6)
    assert report.max_residual == 0.0


def test_report_hashes_reproducible():
    nodes = np.array([0.1, 0.9])
    a = moment_residual(nodes, uniform(), 2)
    b = moment_residual(nodes.copy(), uniform(), 2)
    assert a.measure_hash == b.measure_hash
    assert a.nodes_hash == b.nodes_hash
    assert a.max_residual == max(a.residuals)
    c = moment_residual(np.array([0.1, 0.8999]), uniform(), 2)
    assert c.nodes_hash != a.nodes_hash


def test_newton_fixed_point():
    z = np.array([0.2, 0.5, 0.9])
    assert np.allclose(newton_oracle(z, tk(z)), z, atol=1e-12)


def test_newton_matches_quadratic_roots():
    z = np.array([0.25, 0.75])
    p = tk(z) + np.array([0.002, 0.001])
    w = np.sort(newton_oracle(z, p))
    s1, s2 = p
    disc = math.sqrt(2 * s2 - s1**2)
    roots = np.array([(s1 - disc) / 2, (s1 + disc) / 2])
    assert np.allclose(w, roots, atol=1e-12)


def test_newton_matches_flow():
    rng = np.random.default_rng(7)
    for _ in range(20):
        k = int(rng.integers(2, 7))
        z = np.sort(rng.uniform(0, 1, k))
        while np.min(np.diff(z)) < 0.05:
            z = np.sort(rng.uniform(0, 1, k))
        rho = (k - 1) * np.min(np.diff(z)) * 0.9
        p = tk(z, k) + rng.uniform(-1, 1, k) * rho_to_r(rho, k) * 0.5
        w_flow, _ = perturb_to_moments(z, p, rho)
        w_newton = newton_oracle(z, p)
        assert np.max(np.abs(np.sort(w_flow) - np.sort(w_newton))) <= 1e-9


def test_newton_failure_signal():
    # unreachable target: power sums of [0,1] nodes are bounded by k
    with pytest.raises(OracleFailure):
        newton_oracle(np.array([0.2, 0.8]), np.array([50.0, -3.0]), max_iter=5)


def test_reference_integral_circle():
    value, err = reference_integral((1, 0), ((0.0, 2 * math.pi),))
    assert abs(value) <= 1e-12
    value, _ = reference_integral((0, 0), ((0.0, 2 * math.pi),))
    assert value == pytest.approx(2 * math.pi, abs=1e-10)


def test_reference_integral_octant():
    octant = ((0.0, math.pi / 2), (0.0, math.pi / 2))
    value, err = reference_integral((0, 0, 1), octant, tolerance=1e-10)
    assert value == pytest.approx(math.pi / 4.0, abs=1e-10)
    assert err <= 1e-10


def test_reference_integral_sphere_area():
    from chebyquad.cubature_sphere import partition_sphere

    part = partition_sphere(2, 1.0)
    total = sum(reference_integral((0, 0, 0), b)[0] for b in part.boxes)
    assert total == pytest.approx(4 * math.pi, abs=1e-10)


def test_reference_integral_resolution_floor():
    with pytest.raises(ValueError):
        reference_integral((0, 0), ((0.0, 1.0),), resolution=8)
