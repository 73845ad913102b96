import numpy as np
import pytest

from chebyquad.momentmap import (
    MultiIndexBasis,
    multimoment_map,
    poly_dim,
    tk,
    u_inverse_norm_bound,
    u_matrix,
    vandermonde_inverse_norm,
    vandermonde_matrix,
)


def test_tk_values():
    z = np.array([0.25, 0.75])
    assert np.allclose(tk(z), [1.0, 0.625], atol=1e-15)
    assert np.allclose(tk(z, 3), [1.0, 0.625, 0.4375], atol=1e-15)


def test_u_matrix_is_jacobian():
    rng = np.random.default_rng(1)
    w = rng.uniform(0.1, 0.9, 4)
    jac = u_matrix(w)
    eps = 1e-7
    for i in range(4):
        bumped = w.copy()
        bumped[i] += eps
        fd = (tk(bumped) - tk(w)) / eps
        assert np.allclose(jac[:, i], fd, atol=1e-5)


def test_vandermonde_inverse_norm_examples():
    assert vandermonde_inverse_norm(np.array([0.0, 1.0])) == pytest.approx(2.0)
    assert vandermonde_inverse_norm(np.array([0.0, 0.5, 1.0])) == pytest.approx(8.0)


def test_vandermonde_inverse_norm_matches_direct():
    rng = np.random.default_rng(2)
    for _ in range(200):
        k = int(rng.integers(2, 7))
        w = np.sort(rng.uniform(0.0, 1.0, k))
        while np.min(np.diff(w)) < 0.05:
            w = np.sort(rng.uniform(0.0, 1.0, k))
        direct = np.max(np.abs(np.linalg.inv(vandermonde_matrix(w))).sum(axis=1))
        formula = vandermonde_inverse_norm(w)
        assert formula == pytest.approx(direct, rel=1e-8)


def test_vandermonde_inverse_norm_validation():
    with pytest.raises(ValueError):
        vandermonde_inverse_norm(np.array([-0.1, 0.5]))
    with pytest.raises(ValueError):
        vandermonde_inverse_norm(np.array([0.3, 0.3]))


def test_u_inverse_norm_bound_dominates():
    rng = np.random.default_rng(3)
    for _ in range(100):
        k = int(rng.integers(2, 6))
        sep = 0.3
        w = np.sort(rng.uniform(0.0, 1.0, k))
        while np.min(np.diff(w)) < sep / (k - 1):
            w = np.sort(rng.uniform(0.0, 1.0, k))
        actual = np.max(np.abs(np.linalg.inv(u_matrix(w))).sum(axis=1))
        assert u_inverse_norm_bound(k, sep) >= actual


def test_poly_dim():
    assert poly_dim(2, 1) == 2
    assert poly_dim(2, 2) == 5
    assert poly_dim(3, 3) == 19


def test_basis_order_and_multimoment():
    basis = MultiIndexBasis(2, 2)
    assert basis.indices == ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert np.allclose(multimoment_map(np.array([2.0, 3.0]), 2), [2, 3, 4, 6, 9])


def test_basis_graded():
    basis = MultiIndexBasis(3, 2)
    degrees = [sum(a) for a in basis.indices]
    assert degrees == sorted(degrees)
    assert len(basis.indices) == poly_dim(3, 2)
