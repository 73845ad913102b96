"""Equal-weight quadrature construction.

Pipeline: quantile seeding, selection of well-separated k-node subsets,
and an ODE moment-correction flow applied subset by subset.  A separate
path handles measures with large atoms by splitting off the atom excess
as exact multiples of 1/n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._integrals import fsum
from .measure import Measure1D
from .momentmap import tk, u_matrix

__all__ = [
    "QuadratureResult",
    "SubsetSelection",
    "ConstructionError",
    "ParameterError",
    "UnsupportedMeasureError",
    "rho_r_values",
    "simple_approximation",
    "select_subsets",
    "perturb_to_moments",
    "construct_quadrature",
    "construct_quadrature_large_atoms",
]

RESIDUAL_TOL = 1e-9
RAW_FLOW_TOL = 1e-13


class ConstructionError(RuntimeError):
    """The construction could not proceed (e.g. separation failure)."""


class ParameterError(ValueError):
    """Parameters violate a stated precondition; message reports the fix."""


class UnsupportedMeasureError(ValueError):
    """No parameter choice makes the construction applicable."""


def rho_r_values(m: Measure1D, k: int, delta: float | None = None) -> tuple[float, float]:
    """The separation scale rho = (k-1) R(delta) and the moment radius
    r = (rho / (6(k+3))) * (rho / 12e)^(k-1).  delta defaults to 1/(k+3)."""
    if delta is None:
        delta = 1.0 / (k + 3)
    rho = (k - 1) * m.inverse_modulus(delta)
    r = rho_to_r(rho, k)
    return rho, r


def rho_to_r(rho: float, k: int) -> float:
    return rho / (6.0 * (k + 3)) * (rho / (12.0 * math.e)) ** (k - 1)


def simple_approximation(m: Measure1D, n: int) -> np.ndarray:
    """Quantile seeding y_i = quantile(i/n); every moment gap is <= 1/n."""
    _require_unit_support(m)
    if n < 1:
        raise ParameterError("n must be >= 1")
    return np.atleast_1d(m.quantile(np.arange(1, n + 1) / n))


@dataclass(frozen=True)
class SubsetSelection:
    """Disjoint k-node index groups into a node list, with separation rho."""

    indices: np.ndarray  # shape (s, k)
    rho: float

    @property
    def s(self) -> int:
        return self.indices.shape[0]


def select_subsets(y: np.ndarray, k: int, m: Measure1D) -> SubsetSelection:
    """Pick ceil(n/(k+3)) disjoint arithmetic-stride subsets of the seeded
    nodes, each of size k, separated at scale rho = (k-1) R(1/(k+3))."""
    n = len(y)
    if k < 2:
        raise ParameterError("k must be >= 2")
    if n < k * (k + 3):
        raise ParameterError(f"need n >= k(k+3) = {k * (k + 3)}, got {n}")
    rho = (k - 1) * m.inverse_modulus(1.0 / (k + 3))
    if rho <= 0.0:
        raise ConstructionError(
            "separation failed: an atom has mass >= 1/(k+3); "
            "use the large-atom construction instead"
        )
    i0 = math.ceil(n / (k + 3))
    s = i0
    r_idx = np.arange(1, s + 1)[:, None]
    j_idx = np.arange(1, k + 1)[None, :]
    indices = j_idx * i0 + r_idx - 2  # 0-based into y
    sel = SubsetSelection(indices, rho)
    _check_separation(y, sel, k)
    return sel


def _check_separation(y: np.ndarray, sel: SubsetSelection, k: int) -> None:
    # numerical slack: rho comes from a root-finding computation of R
    tol = 1e-9
    margin = sel.rho / (3.0 * (k - 1))
    gap = sel.rho / (k - 1)
    z = y[sel.indices]
    if np.any(z < margin - tol) or np.any(z > 1.0 - margin + tol):
        raise ConstructionError("subset node outside the separation margin")
    diffs = np.diff(np.sort(z, axis=1), axis=1)
    if np.any(diffs < gap - tol):
        raise ConstructionError("subset nodes closer than rho/(k-1)")


# -- the ODE moment-correction flow ------------------------------------------


def _flow_field(w: np.ndarray, p: np.ndarray) -> np.ndarray:
    """G(w) = U(w)^{-1} (p - T_k(w)) for a batch of subsets; w, p: (s, k)."""
    s, k = w.shape
    if k == 2:
        a, b = w[:, 0], w[:, 1]
        r1 = p[:, 0] - (a + b)
        r2 = p[:, 1] - (a * a + b * b)
        det = 2.0 * (b - a)
        return np.stack([(2.0 * b * r1 - r2) / det, (r2 - 2.0 * a * r1) / det], axis=1)
    if k == 3:
        a, b, c = w[:, 0], w[:, 1], w[:, 2]
        r1 = p[:, 0] - (a + b + c)
        r2 = p[:, 1] - (a * a + b * b + c * c)
        r3 = p[:, 2] - (a**3 + b**3 + c**3)
        # Cramer's rule on rows (1,1,1), 2(a,b,c), 3(a^2,b^2,c^2)
        det = 6.0 * (b - a) * (c - a) * (c - b)
        m11 = 6.0 * b * c * (c - b)
        m12 = -3.0 * (c - b) * (c + b)
        m13 = 2.0 * (c - b)
        m21 = -6.0 * a * c * (c - a)
        m22 = 3.0 * (c - a) * (c + a)
        m23 = -2.0 * (c - a)
        m31 = 6.0 * a * b * (b - a)
        m32 = -3.0 * (b - a) * (b + a)
        m33 = 2.0 * (b - a)
        return np.stack(
            [
                (m11 * r1 + m12 * r2 + m13 * r3) / det,
                (m21 * r1 + m22 * r2 + m23 * r3) / det,
                (m31 * r1 + m32 * r2 + m33 * r3) / det,
            ],
            axis=1,
        )
    u = np.empty((s, k, k))
    t = np.empty((s, k))
    power = np.ones_like(w)
    for j in range(1, k + 1):
        u[:, j - 1, :] = j * power
        power = power * w
        t[:, j - 1] = power.sum(axis=1)
    try:
        return np.linalg.solve(u, (p - t)[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise ConstructionError(f"singular Jacobian in moment flow: {exc}") from exc


def _batched_power_sums(w: np.ndarray, k: int) -> np.ndarray:
    out = np.empty((w.shape[0], k))
    power = w.copy()
    out[:, 0] = power.sum(axis=1)
    for j in range(1, k):
        power = power * w
        out[:, j] = power.sum(axis=1)
    return out


def _run_flow(
    w0: np.ndarray,
    p: np.ndarray,
    h: float = 0.1,
    tol: float = RAW_FLOW_TOL,
    t_max: float = 200.0,
    ball_center: np.ndarray | None = None,
    ball_radius: float | None = None,
    record: bool = False,
):
    """Integrate w' = U(w)^{-1}(p - T_k(w)) by classical RK4 until the raw
    residual |T_k(w) - p|_inf drops below tol (per subset)."""
    w = w0.copy()
    k = w.shape[1]
    h_max = h
    checkpoints = []
    t = 0.0
    scale = max(1.0, float(np.max(np.abs(p))))
    steps = 0
    best = math.inf
    t_best = 0.0
    damped_streak = 0
    while t < t_max and steps < 50000:
        resid = np.max(np.abs(_batched_power_sums(w, k) - p))
        if record:
            checkpoints.append((t, resid))
        if resid <= tol * scale:
            return w, steps, checkpoints
        if resid < 0.5 * best:
            best, t_best = resid, t
        elif t - t_best > 2.0:
            # the exact flow contracts the residual by e^{-2} over this span
            raise ConstructionError(
                f"moment flow stagnated at residual {resid:.3e}; "
                "the displacement likely exceeds the admissible ball "
                "(increase n)"
            )
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = _flow_field(w, p)
            h_cur = h
            while True:
                k2 = _flow_field(w + 0.5 * h_cur * k1, p)
                k3 = _flow_field(w + 0.5 * h_cur * k2, p)
                k4 = _flow_field(w + h_cur * k3, p)
                w_new = w + (h_cur / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                if np.all(np.isfinite(w_new)):
                    new_resid = np.max(np.abs(_batched_power_sums(w_new, k) - p))
                    # the exact flow contracts the residual monotonically,
                    # so a non-decreasing residual means the step overshot
                    if new_resid < resid:
                        break
                h_cur *= 0.5
                if h_cur < 1e-6:
                    raise ConstructionError(
                        "moment flow diverged (no stable step size)"
                    )
        h = min(h_max, h_cur * 2.0)
        # a persistently collapsed step size means the flow is fighting a
        # near-singular Jacobian and will not reach the tolerance
        damped_streak = damped_streak + 1 if h_cur < h_max / 8.0 else 0
        if damped_streak > 100:
            raise ConstructionError(
                "moment flow diverged (step size collapsed); increase n"
            )
        w = w_new
        t += h_cur
        steps += 1
        if ball_radius is not None:
            drift = np.max(np.abs(w - ball_center))
            if drift > ball_radius * (1.0 + 1e-9):
                raise ConstructionError(
                    "flow left the admissible ball; the starting point "
                    "violates the separation/closeness preconditions"
                )
    raise ConstructionError("moment flow did not converge within t_max")


def perturb_to_moments(
    z: np.ndarray,
    p: np.ndarray,
    rho: float,
    enforce_ball: bool = True,
    record: bool = False,
    step: float = 0.1,
):
    """Move the k nodes z to w with raw power sums T_k(w) = p.

    The correction stays within |w - z|_inf <= rho/(3(k-1)) whenever the
    separation and closeness preconditions hold.  Returns (w, checkpoints);
    checkpoints are (t, residual) pairs along the flow when requested.
    """
    z = np.asarray(z, dtype=float)
    p = np.asarray(p, dtype=float)
    k = len(z)
    if k < 2:
        raise ParameterError("k must be >= 2")
    radius = rho / (3.0 * (k - 1)) if enforce_ball else None
    w, _, checkpoints = _run_flow(
        z[None, :],
        p[None, :],
        h=step,
        ball_center=z[None, :] if enforce_ball else None,
        ball_radius=radius,
        record=record,
    )
    w = w[0]
    # polish the flow limit to machine precision in node space
    scale = max(1.0, float(np.max(np.abs(p))))
    for _ in range(3):
        resid = p - tk(w, k)
        if np.max(np.abs(resid)) <= 1e-15 * scale:
            break
        try:
            w = w + np.linalg.solve(u_matrix(w), resid)
        except np.linalg.LinAlgError:
            break
    return w, checkpoints


# -- full construction --------------------------------------------------------


@dataclass(frozen=True)
class QuadratureResult:
    """Equal-weight node set with achieved moment residual and diagnostics."""

    nodes: np.ndarray
    k: int
    target: np.ndarray  # normalized moments, orders 1..k
    residual: float
    mode: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "n": self.n,
            "k": self.k,
            "target_moments": [float(v) for v in self.target],
            "residual": self.residual,
            "mode": self.mode,
            "diagnostics": self.diagnostics,
            "nodes": [float(v) for v in self.nodes],
        }


def _require_unit_support(m: Measure1D) -> None:
    if m.support[0] < -1e-12 or m.support[1] > 1.0 + 1e-12:
        raise ParameterError("measure support must be contained in [0, 1]")


def achieved_residual(nodes: np.ndarray, target: np.ndarray, k: int) -> float:
    n = len(nodes)
    return max(
        abs(fsum(nodes**j) / n - target[j - 1]) for j in range(1, k + 1)
    )


def construct_quadrature(
    m: Measure1D,
    k: int,
    n: int | None = None,
    p: np.ndarray | None = None,
    mode: str = "guaranteed",
) -> QuadratureResult:
    """Build n equal-weight nodes in [0,1] matching the first k normalized
    moments p (default: the moments of m).

    guaranteed mode enforces n >= ceil(1/r) and |p - moments| <= r, in which
    case success is certain; best_effort runs the same pipeline at any
    n >= k(k+3) and reports the achieved residual.
    """
    _require_unit_support(m)
    if k < 2:
        raise ParameterError("k must be >= 2")
    if mode not in ("guaranteed", "best_effort"):
        raise ParameterError("mode must be 'guaranteed' or 'best_effort'")
    exact = m.moments(k)
    if p is None:
        p = exact
    p = np.asarray(p, dtype=float)

    rho, r = rho_r_values(m, k)
    if mode == "guaranteed":
        if rho <= 0.0:
            raise ConstructionError(
                "an atom has mass >= 1/(k+3); use construct_quadrature_large_atoms"
            )
        n_req = math.ceil(1.0 / r)
        if n is None:
            n = n_req
        if n < n_req:
            raise ParameterError(
                f"guaranteed mode needs n >= ceil(1/r) = {n_req}, got {n}"
            )
        if np.max(np.abs(p - exact)) > r * (1.0 + 1e-9):
            raise ParameterError(
                f"target moments deviate more than r = {r} from the measure's"
            )
    else:
        if n is None:
            raise ParameterError("best_effort mode requires an explicit n")
        if n < k * (k + 3):
            raise ParameterError(f"pipeline needs n >= k(k+3) = {k * (k + 3)}")

    if mode == "guaranteed":
        y = simple_approximation(m, n)
    else:
        # midpoint variant of the quantile seed: same per-cell placement
        # guarantee, but the systematic edge bias cancels, leaving a far
        # smaller displacement for the correction flow to absorb
        y = np.atleast_1d(m.quantile((np.arange(n) + 0.5) / n))
    sel = select_subsets(y, k, m)
    s = sel.s

    total = np.array([fsum(y**j) for j in range(1, k + 1)])
    displacement = n * p - total
    delta = displacement / s

    if mode == "guaranteed":
        radius = (rho / 3.0) * (rho / (12.0 * math.e)) ** (k - 1)
        if np.max(np.abs(delta)) > radius * (1.0 + 1e-9):
            raise ParameterError(
                "per-subset displacement exceeds the admissible radius; "
                "preconditions violated"
            )

    w0 = y[sel.indices]
    targets = _batched_power_sums(w0, k) + delta[None, :]
    ball_radius = sel.rho / (3.0 * (k - 1)) if mode == "guaranteed" else None
    w, steps, _ = _run_flow(
        w0,
        targets,
        ball_center=w0 if mode == "guaranteed" else None,
        ball_radius=ball_radius,
    )

    nodes = y.copy()
    nodes[sel.indices.ravel()] = w.ravel()
    if np.any(nodes < -1e-12) or np.any(nodes > 1.0 + 1e-12):
        raise ConstructionError("corrected nodes left [0, 1]")
    nodes = np.sort(np.clip(nodes, 0.0, 1.0))

    residual = achieved_residual(nodes, p, k)
    if mode == "best_effort" and residual > RESIDUAL_TOL:
        raise ConstructionError(
            f"best_effort construction achieved residual {residual:.3e} > 1e-9"
        )
    return QuadratureResult(
        nodes,
        k,
        p,
        residual,
        mode,
        {"rho": rho, "r": r, "subsets": s, "flow_steps": steps},
    )


def large_atom_parameters(m: Measure1D, k: int, eps: float) -> dict:
    """Check the eps condition and derive rho, r, and the minimal n for the
    large-atom construction."""
    trunc = m.truncate_atoms(eps)
    st_mass = trunc.truncated_mass
    bound = 2.0 / (2 * k + 7)
    if eps / st_mass >= bound:
        raise ParameterError(
            f"eps condition fails: eps/truncated_mass = {eps / st_mass:.6g} "
            f">= 2/(2k+7) = {bound:.6g}"
        )
    rho = (k - 1) * trunc.normalized.inverse_modulus(bound)
    r = rho_to_r(rho, k)
    n_min = max(math.ceil(1.0 / (r * st_mass)), math.ceil((2 * k + 6) / eps))
    return {
        "truncation": trunc,
        "rho": rho,
        "r": r,
        "n_min": n_min,
        "truncated_mass": st_mass,
    }


def construct_quadrature_large_atoms(
    m: Measure1D, k: int, eps: float, n: int | None = None
) -> QuadratureResult:
    """Quadrature for measures with large atoms: atom excess is emitted as
    exact multiples of 1/n, the remainder goes through the standard pipeline.
    """
    _require_unit_support(m)
    if k < 2:
        raise ParameterError("k must be >= 2")
    if m.is_purely_atomic() and len(m.atoms) <= k + 3:
        raise UnsupportedMeasureError(
            "purely atomic measure with <= k+3 atoms: no eps satisfies the "
            "truncation condition"
        )
    params = large_atom_parameters(m, k, eps)
    if n is None:
        n = params["n_min"]
    if n < params["n_min"]:
        raise ParameterError(
            f"large-atom construction needs n >= {params['n_min']}, got {n}"
        )

    thresh = (2 * k + 7) / (2 * k + 6) * eps
    heavy = [(x, mass) for x, mass in m.atoms if mass > thresh]
    sigma2 = [(x, math.floor(n * (mass - eps)) / n) for x, mass in heavy]
    sigma2 = [(x, mm) for x, mm in sigma2 if mm > 0]
    sigma2_mass = fsum(mm for _, mm in sigma2)
    q = 1.0 - sigma2_mass
    qn = round(q * n)
    if abs(qn - q * n) > 1e-6:
        raise ConstructionError("q*n failed to be an integer")

    # sigma_1' = (m - sigma_2) / q
    reduced = dict(m.atoms)
    for x, mm in sigma2:
        reduced[x] = reduced[x] - mm
    atoms1 = tuple(
        (x, mass / q) for x, mass in sorted(reduced.items()) if mass > 1e-15
    )
    from .measure import _scale_piece  # local import to avoid cycle noise

    pieces1 = tuple(_scale_piece(pc, 1.0 / q) for pc in m.pieces)
    sigma1 = Measure1D(m.support, atoms1, pieces1)

    inner = construct_quadrature(sigma1, k, n=qn, mode="guaranteed")

    atom_nodes = np.repeat(
        np.array([x for x, _ in sigma2]),
        np.array([round(n * mm) for _, mm in sigma2]).astype(int),
    )
    nodes = np.sort(np.concatenate([atom_nodes, inner.nodes]))
    if len(nodes) != n:
        raise ConstructionError(
            f"merged node count {len(nodes)} != n = {n}"
        )
    target = m.moments(k)
    residual = achieved_residual(nodes, target, k)
    diag = {
        "rho": params["rho"],
        "r": params["r"],
        "eps": eps,
        "q": q,
        "qn": qn,
        "sigma2_atoms": [[x, mm] for x, mm in sigma2],
        "inner_flow_steps": inner.diagnostics["flow_steps"],
    }
    return QuadratureResult(nodes, k, target, residual, "large_atom", diag)
