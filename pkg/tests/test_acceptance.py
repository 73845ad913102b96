"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line; failures also fail the test.
"""

import math
from contextlib import contextmanager

import numpy as np
import pytest

from chebyquad.measure import (
    atom_uniform_mixture,
    truncated_exponential_sigma_k,
    two_interval_sigma0,
    uniform,
)
from chebyquad.momentmap import tk, vandermonde_inverse_norm, vandermonde_matrix
from chebyquad.quadrature import (
    ConstructionError,
    ParameterError,
    construct_quadrature,
    construct_quadrature_large_atoms,
    large_atom_parameters,
    perturb_to_moments,
    rho_r_values,
    rho_to_r,
    simple_approximation,
)


@contextmanager
def criterion(num: int, name: str):
    try:
        yield
    except BaseException:
        print(f"criterion {num:2d} ({name}): FAIL")
        raise
    print(f"criterion {num:2d} ({name}): PASS")


def test_criterion_01_simple_approximation_bound():
    with criterion(1, "simple approximation bound"):
        measures = [
            uniform(),
            two_interval_sigma0().affine_rescale((0.0, 1.0)),
            truncated_exponential_sigma_k(1),
            truncated_exponential_sigma_k(15),
            atom_uniform_mixture([(0.3, 0.5)]),
        ]
        for m in measures:
            for n in (2, 7, 100, 10**4):
                nodes = simple_approximation(m, n)
                gap = max(
                    abs(np.mean(nodes**j) - m.moment(j)) for j in range(1, 11)
                )
                assert gap <= 1.0 / n + 1e-14


def test_criterion_02_inverse_norm_formula():
    with criterion(2, "Vandermonde inverse-norm formula"):
        rng = np.random.default_rng(12)
        for _ in range(200):
            k = int(rng.integers(2, 7))
            w = np.sort(rng.uniform(0.0, 1.0, k))
            while np.min(np.diff(w)) < 0.05:
                w = np.sort(rng.uniform(0.0, 1.0, k))
            direct = np.max(
                np.abs(np.linalg.inv(vandermonde_matrix(w))).sum(axis=1)
            )
            assert vandermonde_inverse_norm(w) == pytest.approx(direct, rel=1e-8)


def test_criterion_03_moment_perturbation_flow():
    from chebyquad.verify import newton_oracle

    with criterion(3, "moment perturbation flow"):
        rng = np.random.default_rng(7)
        for _ in range(50):
            k = int(rng.integers(2, 7))
            z = np.sort(rng.uniform(0, 1, k))
            while np.min(np.diff(z)) < 0.05:
                z = np.sort(rng.uniform(0, 1, k))
            rho = (k - 1) * np.min(np.diff(z)) * 0.9
            p = tk(z, k) + rng.uniform(-1, 1, k) * rho_to_r(rho, k) * 0.5
            # a fine step keeps the integrator error well below the 1e-6
            # tolerance of the decay-identity check
            w, checkpoints = perturb_to_moments(z, p, rho, record=True, step=0.01)
            assert np.max(np.abs(tk(w, k) - p)) <= 1e-12
            assert np.max(np.abs(w - z)) <= rho / (3.0 * (k - 1)) + 1e-12
            w_newton = newton_oracle(z, p)
            assert np.max(np.abs(np.sort(w) - np.sort(w_newton))) <= 1e-9
            if k == 2:
                s1, s2 = p
                disc = math.sqrt(2 * s2 - s1**2)
                roots = np.array([(s1 - disc) / 2, (s1 + disc) / 2])
                assert np.max(np.abs(np.sort(w) - roots)) <= 1e-12
            # exponential residual decay along the flow
            ts = np.array([t for t, _ in checkpoints[:10]])
            rs = np.array([r for _, r in checkpoints[:10]])
            # only checkpoints well above the rounding floor of the
            # residual evaluation carry the identity to 1e-6 relative
            keep = rs[:-1] > 1e-8 * max(1.0, float(np.max(np.abs(p))))
            ratios = (rs[1:] / rs[:-1])[keep]
            expected = np.exp(-np.diff(ts))[keep]
            assert np.allclose(ratios, expected, rtol=1e-6)


def test_criterion_04_guaranteed_construction_k2():
    with criterion(4, "guaranteed construction, k=2"):
        m = uniform()
        rho, r = rho_r_values(m, 2)
        assert rho == pytest.approx(0.2, abs=1e-9)
        n = math.ceil(1.0 / r)
        assert 2.0e4 < n < 3.0e4  # the formula's value, not assumed
        result = construct_quadrature(m, 2, n=n, mode="guaranteed")
        assert len(result.nodes) == n
        assert np.all((result.nodes >= 0.0) & (result.nodes <= 1.0))
        assert result.residual <= 1e-9
        for sign in (+1.0, -1.0):
            p = m.moments(2) + sign * r
            shifted = construct_quadrature(m, 2, n=n, p=p, mode="guaranteed")
            assert shifted.residual <= 1e-9


@pytest.mark.slow
def test_criterion_04_guaranteed_construction_k3():
    with criterion(4, "guaranteed construction, k=3 (slow tier)"):
        m = uniform()
        rho, r = rho_r_values(m, 3)
        n = math.ceil(1.0 / r)
        assert 1e6 < n < 2e6
        result = construct_quadrature(m, 3, n=n, mode="guaranteed")
        assert result.residual <= 1e-9
        p = m.moments(3) - r
        shifted = construct_quadrature(m, 3, n=n, p=p, mode="guaranteed")
        assert shifted.residual <= 1e-9


def test_criterion_05_large_atom_path():
    with criterion(5, "large-atom construction"):
        m = atom_uniform_mixture([(0.3, 0.5)])
        params = large_atom_parameters(m, 2, 0.1)
        assert 0.1 / params["truncated_mass"] == pytest.approx(1.0 / 6.0, abs=1e-12)
        assert 1.0 / 6.0 < 2.0 / 11.0
        result = construct_quadrature_large_atoms(m, 2, 0.1)
        assert result.residual <= 1e-9
        q = result.diagnostics["q"]
        n = len(result.nodes)
        assert abs(q * n - round(q * n)) <= 1e-6


def test_criterion_06_lower_bounds():
    from chebyquad.bounds import lower_bound_bernstein, lower_bound_moments

    with criterion(6, "lower bounds"):
        assert lower_bound_moments(uniform(), 3) == pytest.approx(
            27.0 / 16.0, abs=1e-14
        )
        assert lower_bound_bernstein(uniform(), 2) == pytest.approx(2.0, abs=1e-10)
        assert lower_bound_bernstein(uniform(), 3) == pytest.approx(3.6, abs=1e-10)
        # exponential growth of the truncated-exponential bound at k = 15;
        # the asymptotic guarantee starts at an unspecified degree, so this
        # records that the inequality already holds here
        value = lower_bound_moments(truncated_exponential_sigma_k(15), 15)
        assert value >= (math.e / 2.0) ** 15 / (2.0 * math.sqrt(15))


def test_criterion_07_sandwich_consistency():
    from chebyquad.bounds import lower_bound_bernstein, lower_bound_moments

    with criterion(7, "bound sandwich"):
        m = uniform()
        for k in (3, 5):
            moment = lower_bound_moments(m, k)
            bern = lower_bound_bernstein(m, (k + 1) // 2)
            assert moment <= bern + 1e-9
            n = math.ceil(bern)
            smallest = None
            while smallest is None:
                try:
                    construct_quadrature(m, k, n=n, mode="best_effort")
                    smallest = n
                except (ConstructionError, ParameterError):
                    n += 1
            _, r = rho_r_values(m, k)
            n_guaranteed = math.ceil(1.0 / r)
            assert bern <= smallest <= n_guaranteed


def test_criterion_08_gaussian_weight_inequality():
    from chebyquad.bounds import density_bound_count, gaussian_weight_check

    with criterion(8, "Gaussian-weight inequality"):
        for mth in range(1, 6):
            holds, lam1, rhs = gaussian_weight_check(uniform(), mth, density_max=1.0)
            assert holds
            # both sides recomputed independently
            x, w = np.polynomial.legendre.leggauss(mth)
            assert lam1 == pytest.approx(0.5 * np.min(w), abs=1e-12)
            assert rhs == pytest.approx(
                1.0 / density_bound_count(2 * mth - 1, 1.0), rel=1e-15
            )
            assert 0.5 * np.min(w) >= rhs


def test_criterion_09_gauss_engine():
    from chebyquad.orthopoly import gauss_rule_for_measure

    with criterion(9, "Gauss engine exactness"):
        for m in (uniform(), two_interval_sigma0()):
            for order in range(1, 7):
                rule = gauss_rule_for_measure(m, order)
                for j in range(2 * order):
                    assert rule.integrate_power(j) == pytest.approx(
                        m.moment(j), abs=1e-10
                    )
                gap = abs(rule.integrate_power(2 * order) - m.moment(2 * order))
                assert gap > 1e-8


def test_criterion_10_sphere_cubature():
    from chebyquad.cubature_sphere import sphere_cubature, spherical_map
    from chebyquad.momentmap import MultiIndexBasis
    from chebyquad.verify import reference_integral

    with criterion(10, "sphere cubature"):
        cub = sphere_cubature(2, 2, 0.5, 0.1)
        part = cub.partition
        assert sum(part.masses) == pytest.approx(4 * math.pi, abs=1e-10)
        basis = MultiIndexBasis(2, 3)
        for i, box in enumerate(part.boxes):
            for alpha in basis.indices:
                ref, _ = reference_integral(alpha, box, tolerance=1e-10)
                avg = cub.monomial_average(i, alpha)
                assert abs(avg - ref / part.masses[i]) <= 0.1
        rng = np.random.default_rng(3)
        for _ in range(20):
            i = int(rng.integers(part.K))
            box = part.boxes[i]
            alpha = tuple(basis.indices[int(rng.integers(len(basis.indices)))])
            ang = np.array(
                [rng.uniform(lo, hi) for lo, hi in box.intervals]
            )
            y = spherical_map(ang)
            ref, _ = reference_integral(alpha, box, shift=y, tolerance=1e-10)
            err = cub.shifted_monomial_error(i, alpha, y)
            direct = abs(
                _shifted_average(cub, i, alpha, y) - ref / part.masses[i]
            )
            assert direct <= 0.1
            assert err == pytest.approx(direct, abs=1e-9)


def _shifted_average(cub, i, alpha, y):
    """Equal-weight average of (z - y)^alpha via the binomial expansion of
    the factorized per-box monomial averages."""
    import itertools

    total = 0.0
    for beta in itertools.product(*(range(a + 1) for a in alpha)):
        coef = 1.0
        for t in range(len(alpha)):
            coef *= math.comb(alpha[t], beta[t]) * (-y[t]) ** (alpha[t] - beta[t])
        total += coef * (cub.monomial_average(i, beta) if any(beta) else 1.0)
    return total


def test_criterion_11_cylinder_cubature():
    from chebyquad.config import frozen_constants
    from chebyquad.cubature_cylinder import CylinderSpec, cylinder_cubature

    with criterion(11, "cylinder cubature"):
        spec = CylinderSpec(3, 1, 10.0, 1.0, 0.5, 0.1)
        cub = cylinder_cubature(spec)
        # (I) coverage and disjointness by brute-force membership
        rng = np.random.default_rng(8)
        intervals = np.array([c.interval for c in cub.cells])
        arc = np.array(
            [cub.sphere.partition.boxes[c.sphere_box].intervals[0]
             for c in cub.cells]
        )
        for _ in range(1000):
            x = rng.uniform(-10.0, 10.0)
            phi = rng.uniform(0.0, 2 * math.pi)
            inside = (
                (intervals[:, 0] <= x) & (x < intervals[:, 1])
                & (arc[:, 0] <= phi) & (phi < arc[:, 1])
            )
            assert int(np.count_nonzero(inside)) == 1
            assert cub.locate(
                np.array([x, math.sin(phi), math.cos(phi)])
            ) == int(np.flatnonzero(inside)[0])
        # (II) exact masses and the cell-count bound
        masses = np.array([c.mass for c in cub.cells])
        assert np.abs(masses - 0.25).max() <= 1e-10
        kcoef = frozen_constants()["cylinder_Kcoef"]["3"]
        assert cub.K <= kcoef * spec.L / spec.tau**2
        # (III) per-cell moment errors
        assert cub.max_cell_error() <= spec.delta
        # W-rescaling identity: the width-2 construction is the width-1
        # construction scaled by 2, exactly
        spec2 = CylinderSpec(3, 1, 20.0, 2.0, 1.0, 0.2)
        cub2 = cylinder_cubature(spec2)
        assert cub2.K == cub.K
        for a, b in zip(cub.cells, cub2.cells):
            assert b.interval == (2.0 * a.interval[0], 2.0 * a.interval[1])
            assert np.array_equal(b.axis_nodes, 2.0 * a.axis_nodes)


def test_criterion_12_random_cubature():
    from chebyquad.random_cubature import (
        cube_multimoments,
        sample_moment_vector,
        small_ball_probability,
    )

    with criterion(12, "random cubature harness"):
        est = small_ball_probability(1, 1, 1, 0.3, 10**5, seed=42)
        assert est.ci_low <= 0.3 <= est.ci_high
        rerun = small_ball_probability(1, 1, 1, 0.3, 10**5, seed=42)
        assert est.to_dict() == rerun.to_dict()
        # unbiasedness within 4 standard errors per coordinate
        rng = np.random.default_rng(11)
        reps = 10**4
        samples = np.array(
            [sample_moment_vector(10, 2, 1, rng) for _ in range(reps)]
        )
        target = cube_multimoments(2, 1)
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(reps)
        assert np.all(np.abs(samples.mean(axis=0) - target) <= 4.0 * stderr)
        # 1/sqrt(n) scaling of the deviation between n = 10^3 and 4*10^3
        devs = {}
        for n in (1000, 4000):
            vals = np.array(
                [sample_moment_vector(n, 2, 1, rng) for _ in range(2000)]
            )
            devs[n] = (vals - target).std(axis=0)
        ratio = devs[1000] / devs[4000]
        assert np.all(np.abs(ratio - 2.0) <= 0.1 * 2.0)
