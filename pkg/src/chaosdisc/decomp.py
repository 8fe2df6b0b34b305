"""Rank-two Gaussian decomposition on a truncated trigonometric basis.

Everything here works in coefficient space: a field with covariance
kernel C + g corresponds to a random coefficient vector with covariance
matrix C + A, where C = diag(0, 1, 1, 1/2, 1/2, ...) and A is the matrix
of g in the basis 1, sin t, cos t, sin 2t, cos 2t, ... The goal is a pair
of trigonometric polynomials f1, f2 with no common zero such that
C + A - (eps1/2) f1 f1^T - (eps2/2) f2 f2^T stays positive semidefinite,
which splits the field into two scalar Gaussian directions plus an
independent residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chaos import ChaosMeasure
from .errors import (
    AmbiguousDeficiencyError,
    CommonZeroError,
    ConsistencyError,
    DegreeTooSmallError,
    InvalidKernelError,
    ParameterError,
)
from .field import (
    PSD_RTOL,
    TWO_PI,
    FieldSample,
    GridSpec,
    KernelSpec,
    _canonical_cov_row,
    _clip_factor,
    g_on_grid,
    trig_basis,
)

DEFICIENCY_TOL = 1e-6  # relative window for detecting eigenvalue -1
ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class TrigPoly:
    """Real trig polynomial in the basis 1, sin t, cos t, sin 2t, cos 2t, ..."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    @property
    def degree(self) -> int:
        return len(self.coeffs) // 2

    def __call__(self, thetas):
        thetas = np.asarray(thetas, dtype=float)
        return self.coeffs @ trig_basis(thetas.ravel(), len(self.coeffs))


@dataclass(frozen=True)
class OperatorGrid:
    """Truncated operators C, C1 = C + P, A and T = C1^{-1/2} A C1^{-1/2}."""

    dimension: int
    C: np.ndarray
    C1: np.ndarray
    A: np.ndarray
    T: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class PerturbFunctions:
    """Unit-norm pair f1, f2 with admissible weights eps1, eps2.

    The field decomposition uses the scaled functions sqrt(eps_i/2) f_i;
    A_inf is the grid minimum of f1^2 + f2^2 for the unit-norm pair.
    """

    f1: TrigPoly
    f2: TrigPoly
    eps1: float
    eps2: float
    A_inf: float

    def scaled_f1(self) -> TrigPoly:
        return TrigPoly(math.sqrt(self.eps1 / 2.0) * self.f1.coeffs)

    def scaled_f2(self) -> TrigPoly:
        return TrigPoly(math.sqrt(self.eps2 / 2.0) * self.f2.coeffs)


def _c_diagonal(dim: int) -> np.ndarray:
    d = np.empty(dim)
    d[0] = 0.0
    for j in range(1, dim):
        d[j] = 1.0 / ((j + 1) // 2)
    return d


def build_operators(g_fourier, cutoff: int) -> OperatorGrid:
    """Assemble C, C1, A and T at basis cutoff degree D (dimension 2D+1)."""
    g = np.asarray(g_fourier, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ParameterError("g_fourier must be a square matrix")
    if not np.allclose(g, g.T, atol=1e-12):
        raise ParameterError("g_fourier must be symmetric")
    g_degree = (g.shape[0] - 1 + 1) // 2
    if cutoff < g_degree + 2:
        raise ParameterError(f"cutoff {cutoff} must be at least deg(g) + 2 = {g_degree + 2}")
    dim = 2 * cutoff + 1
    A = np.zeros((dim, dim))
    A[: g.shape[0], : g.shape[0]] = g
    c = _c_diagonal(dim)
    C = np.diag(c)
    c1 = c.copy()
    c1[0] = 1.0
    C1 = np.diag(c1)
    lam_ca = np.linalg.eigvalsh(C + A)
    if lam_ca[0] < -PSD_RTOL * max(lam_ca[-1], 1e-300):
        raise InvalidKernelError(
            f"C + A is indefinite: min eigenvalue {lam_ca[0]:.3e}"
        )
    inv_sqrt = 1.0 / np.sqrt(c1)
    T = inv_sqrt[:, None] * A * inv_sqrt[None, :]
    T = 0.5 * (T + T.T)
    eigenvalues, eigenvectors = np.linalg.eigh(T)
    return OperatorGrid(dim, C, C1, A, T, eigenvalues, eigenvectors)


def deficiency_constraints(op: OperatorGrid, tol_eig: float = DEFICIENCY_TOL):
    """Constraint vectors psi_j = C1^{-1/2} phi_j for eigenvalues of T at -1.

    Eigenvalues inside the window |lam + 1| <= tol_eig count; any eigenvalue
    in the surrounding ring (tol_eig, 10 tol_eig] makes the deficiency
    ambiguous and is reported as an error.
    """
    dist = np.abs(op.eigenvalues + 1.0)
    inside = dist <= tol_eig
    ring = (dist > tol_eig) & (dist <= 10.0 * tol_eig)
    if np.any(ring):
        raise AmbiguousDeficiencyError(
            "eigenvalues straddle the deficiency window: "
            + ", ".join(f"{v:.3e}" for v in op.eigenvalues[ring])
        )
    inv_sqrt = 1.0 / np.sqrt(np.diag(op.C1))
    out = []
    for j in np.nonzero(inside)[0]:
        psi = inv_sqrt * op.eigenvectors[:, j]
        out.append(psi / np.linalg.norm(psi))
    return out


def _kernel_constraints(op: OperatorGrid) -> list[np.ndarray]:
    """Null directions of C + A; any admissible f must vanish against them."""
    K = op.C + op.A
    lam, vec = np.linalg.eigh(K)
    tol = max(lam[-1], 1.0) * 1e-12
    return [vec[:, j] for j in np.nonzero(lam <= tol)[0]]


def _max_admissible_eps(K: np.ndarray, f: np.ndarray) -> float:
    """Largest eps with K - eps f f^T still PSD, by bisection."""
    tol = PSD_RTOL * max(float(np.linalg.eigvalsh(K)[-1]), 1e-300)

    def ok(eps):
        return float(np.linalg.eigvalsh(K - eps * np.outer(f, f))[0]) >= -tol

    hi = 1.0
    if not ok(0.0):
        return 0.0
    while ok(hi):
        hi *= 2.0
        if hi > 2.0**40:
            return hi
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def find_f1_f2(
    op: OperatorGrid,
    constraints,
    degree: int,
    grid_size: int = 4096,
    restarts: int = 8,
    seed: int = 0,
) -> PerturbFunctions:
    """Construct the admissible pair within trig polynomials of given degree.

    f1 is a fixed unit-norm element of the constraint null space; f2 is the
    null-space element maximizing the grid minimum of f1^2 + f2^2, found by
    random-restart hill climbing over null-space coordinates. The weights
    eps_i are bisected to the PSD boundary of K - eps f_i f_i^T; halving
    them in the residual keeps the convex combination PSD.
    """
    dim = 2 * degree + 1
    if dim > op.dimension:
        raise ParameterError("degree exceeds the operator cutoff")
    K = (op.C + op.A)[:dim, :dim]
    rows = [np.asarray(c, dtype=float)[:dim] for c in constraints]
    rows += [np.asarray(c, dtype=float)[:dim] for c in _kernel_constraints(op) if np.linalg.norm(c[:dim]) > 1e-12]
    if rows:
        Psi = np.vstack(rows)
        _, s, vh = np.linalg.svd(Psi)
        rank = int(np.sum(s > 1e-10 * s[0])) if s.size else 0
        null = vh[rank:]
    else:
        null = np.eye(dim)
    if null.shape[0] == 0:
        raise DegreeTooSmallError(f"no admissible polynomial at degree {degree}")

    thetas = TWO_PI * np.arange(grid_size) / grid_size
    profiles = null @ trig_basis(thetas, dim)  # null-space basis evaluated on the grid
    f1_coord = np.zeros(null.shape[0])
    f1_coord[0] = 1.0
    f1_vals = profiles[0]

    def objective(coord):
        vals = coord @ profiles
        return float(np.min(f1_vals**2 + vals**2))

    rng = np.random.default_rng(seed)
    best_coord, best_val = None, -1.0
    for _ in range(restarts):
        coord = rng.standard_normal(null.shape[0])
        coord /= np.linalg.norm(coord)
        cur = objective(coord)
        scale = 1.0
        for _ in range(120):
            prop = coord + scale * rng.standard_normal(null.shape[0])
            prop /= np.linalg.norm(prop)
            val = objective(prop)
            if val > cur:
                coord, cur = prop, val
            else:
                scale *= 0.9
        if cur > best_val:
            best_coord, best_val = coord, cur
    if best_val <= 1e-8:
        raise CommonZeroError(
            f"could not separate zeros at degree {degree}: grid minimum {best_val:.3e}"
        )

    f1 = f1_coord @ null
    f2 = best_coord @ null
    eps1 = _max_admissible_eps(K, f1)
    eps2 = _max_admissible_eps(K, f2)
    if min(eps1, eps2) <= 1e-9:
        raise DegreeTooSmallError(
            "an admissible direction has vanishing weight; the constraint "
            "set is incomplete at this degree"
        )
    pf = PerturbFunctions(TrigPoly(f1), TrigPoly(f2), eps1, eps2, best_val)
    _validate_pair(op, constraints, pf, dim)
    return pf


def _validate_pair(op, constraints, pf, dim):
    for f in (pf.f1.coeffs, pf.f2.coeffs):
        for psi in constraints:
            if abs(float(f @ np.asarray(psi)[:dim])) > ORTHO_TOL:
                raise ConsistencyError("constraint orthogonality violated")
    K = (op.C + op.A)[:dim, :dim]
    resid = (
        K
        - 0.5 * pf.eps1 * np.outer(pf.f1.coeffs, pf.f1.coeffs)
        - 0.5 * pf.eps2 * np.outer(pf.f2.coeffs, pf.f2.coeffs)
    )
    lam = np.linalg.eigvalsh(resid)
    if lam[0] < -PSD_RTOL * max(lam[-1], 1e-300):
        raise ConsistencyError(f"residual kernel indefinite: {lam[0]:.3e}")


def rank_two_decomposition(
    g_fourier, degree: int, max_retries: int = 3, grid_size: int = 4096, seed: int = 0
):
    """Convenience driver: operators, constraints, pair; retries degree + 1."""
    g = np.asarray(g_fourier, dtype=float)
    g_degree = g.shape[0] // 2
    last = None
    for d in range(degree, degree + max_retries + 1):
        op = build_operators(g, max(d, g_degree + 2))
        constraints = deficiency_constraints(op)
        try:
            return op, constraints, find_f1_f2(op, constraints, d, grid_size, seed=seed)
        except (CommonZeroError, DegreeTooSmallError) as exc:
            last = exc
    raise last


def residual_kernel_matrix(kernel: KernelSpec, pf: PerturbFunctions, N: int, grid: GridSpec):
    """Grid covariance of the residual field X - V1 s1 - V2 s2."""
    thetas = grid.points()
    row = _canonical_cov_row(N, grid.M)
    idx = (np.arange(grid.M)[:, None] - np.arange(grid.M)[None, :]) % grid.M
    K = row[idx]
    if kernel.kind == "perturbed":
        K = K + g_on_grid(kernel.g_fourier, thetas)
    elif kernel.kind != "canonical":
        raise ParameterError("residual sampling needs a circle kernel")
    s1 = pf.scaled_f1()(thetas)
    s2 = pf.scaled_f2()(thetas)
    return K - np.outer(s1, s1) - np.outer(s2, s2)


def residual_field_sampler(kernel: KernelSpec, pf: PerturbFunctions, N: int, grid: GridSpec):
    """One-time factorization; returns rng -> FieldSample for the residual."""
    S, diag = _clip_factor(residual_kernel_matrix(kernel, pf, N, grid))

    def sample(rng) -> FieldSample:
        return FieldSample(grid, S @ rng.standard_normal(grid.M), N, diag.copy(), kernel)

    return sample


class TiltedPoissonSum:
    """u(y1, y2): Poisson-weighted chaos mass tilted by two directions.

    u(y) = sum_j w_j P_z(t_j) exp(g1_j y1 + g2_j y2 - (g1_j^2 + g2_j^2)/2)
    with g_i = gamma f_i(t_j). Gradient and Hessian come from term-wise
    differentiation and are exact.
    """

    def __init__(self, measure: ChaosMeasure, z: complex, pf: PerturbFunctions, gamma: float):
        if abs(z) > 1.0 - 1e-12:
            raise ParameterError("z must lie inside the evaluation guard radius")
        thetas = measure.grid.points()
        self.g1 = gamma * pf.f1(thetas)
        self.g2 = gamma * pf.f2(thetas)
        unit = np.exp(1j * thetas)
        poisson = (1.0 - abs(z) ** 2) / np.abs(z - unit) ** 2
        self.base = (
            measure.weights * poisson * np.exp(-0.5 * (self.g1**2 + self.g2**2))
        )
        self.gamma = gamma

    def value(self, y1: float, y2: float) -> float:
        return float(np.sum(self.base * np.exp(self.g1 * y1 + self.g2 * y2)))

    def gradient(self, y1: float, y2: float) -> np.ndarray:
        t = self.base * np.exp(self.g1 * y1 + self.g2 * y2)
        return np.array([np.sum(t * self.g1), np.sum(t * self.g2)])

    def hessian(self, y1: float, y2: float) -> np.ndarray:
        t = self.base * np.exp(self.g1 * y1 + self.g2 * y2)
        h11 = np.sum(t * self.g1 * self.g1)
        h12 = np.sum(t * self.g1 * self.g2)
        h22 = np.sum(t * self.g2 * self.g2)
        return np.array([[h11, h12], [h12, h22]])

    def batch(self, ys: np.ndarray):
        """Values, gradients, Hessian entries at an (n, 2) array of points."""
        ys = np.asarray(ys, dtype=float).reshape(-1, 2)
        out_v = np.empty(len(ys))
        out_g = np.empty((len(ys), 2))
        out_h = np.empty((len(ys), 3))
        block = max(1, (1 << 21) // max(1, self.base.size))
        for i in range(0, len(ys), block):
            tilt = np.exp(
                np.clip(
                    ys[i : i + block, 0:1] * self.g1[None, :]
                    + ys[i : i + block, 1:2] * self.g2[None, :],
                    -700,
                    700,
                )
            ) * self.base[None, :]
            out_v[i : i + block] = tilt.sum(axis=1)
            out_g[i : i + block, 0] = (tilt * self.g1).sum(axis=1)
            out_g[i : i + block, 1] = (tilt * self.g2).sum(axis=1)
            out_h[i : i + block, 0] = (tilt * self.g1 * self.g1).sum(axis=1)
            out_h[i : i + block, 1] = (tilt * self.g1 * self.g2).sum(axis=1)
            out_h[i : i + block, 2] = (tilt * self.g2 * self.g2).sum(axis=1)
        return out_v, out_g, out_h


def build_u(measure: ChaosMeasure, z: complex, pf: PerturbFunctions, gamma: float) -> TiltedPoissonSum:
    return TiltedPoissonSum(measure, z, pf, gamma)


def hypothesis_bounds(pf: PerturbFunctions, gamma: float, grid_size: int = 4096):
    """(kappa, grad bound K) for the convexity/growth hypotheses on u."""
    thetas = TWO_PI * np.arange(grid_size) / grid_size
    sq = pf.f1(thetas) ** 2 + pf.f2(thetas) ** 2
    return gamma * gamma * float(np.min(sq)), gamma * float(np.sqrt(np.max(sq)))


@dataclass
class HypothesisReport:
    """Outcome of the convexity / growth / ball checks on u."""

    passed: bool
    violations: list
    checked_points: int
    checked_balls: int


def check_hypotheses(
    u: TiltedPoissonSum,
    kappa: float,
    grad_bound: float,
    box: float = 3.0,
    grid_n: int = 21,
    n_balls: int = 50,
    rng: np.random.Generator | None = None,
    slack: float = 1e-8,
) -> HypothesisReport:
    """Verify on a grid over [-box, box]^2 plus random balls:

    (a) Hessian PSD within -slack * trace,
    (b) laplacian(u) >= kappa u - slack,
    (c) |grad u| <= grad_bound * u + slack,
    (d) max over a ball >= (1 + kappa r^2 / 4) * min, for random balls.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    axis = np.linspace(-box, box, grid_n)
    pts = np.array([(a, b) for a in axis for b in axis])
    vals, grads, hess = u.batch(pts)
    violations = []
    tr = hess[:, 0] + hess[:, 2]
    det = hess[:, 0] * hess[:, 2] - hess[:, 1] ** 2
    min_eig = 0.5 * (tr - np.sqrt(np.maximum(tr**2 - 4.0 * det, 0.0)))
    for i in np.nonzero(min_eig < -slack * np.maximum(tr, 1.0))[0]:
        violations.append(("hessian_psd", tuple(pts[i]), float(min_eig[i])))
    lap_margin = tr - kappa * vals
    for i in np.nonzero(lap_margin < -slack * np.maximum(1.0, kappa * vals))[0]:
        violations.append(("laplacian_lower", tuple(pts[i]), float(lap_margin[i])))
    gnorm = np.hypot(grads[:, 0], grads[:, 1])
    g_margin = grad_bound * vals - gnorm
    for i in np.nonzero(g_margin < -slack * np.maximum(1.0, grad_bound * vals))[0]:
        violations.append(("gradient_upper", tuple(pts[i]), float(g_margin[i])))

    n_ring, n_inner = 64, 6
    for _ in range(n_balls):
        center = rng.uniform(-box, box, size=2)
        radius = rng.uniform(0.05, 1.0)
        angles = TWO_PI * np.arange(n_ring) / n_ring
        ring = center[None, :] + radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        rr = radius * np.sqrt((np.arange(1, n_inner + 1)) / n_inner)
        inner = np.concatenate(
            [center[None, :]]
            + [
                center[None, :] + r * np.stack([np.cos(angles[::4]), np.sin(angles[::4])], axis=1)
                for r in rr[:-1]
            ]
        )
        bvals, _, _ = u.batch(np.concatenate([ring, inner]))
        m_max = float(bvals.max())
        m_min = float(bvals.min())
        needed = (1.0 + kappa * radius * radius / 4.0) * m_min
        if m_max < needed - slack * max(1.0, needed):
            violations.append(("ball_growth", (tuple(center), radius), m_max - needed))
    return HypothesisReport(not violations, violations, len(pts), n_balls)


def singular_integral(u: TiltedPoissonSum, gamma: float, half_width: float = 6.0, n: int = 161) -> float:
    """Gaussian-weighted integral of log(1 + 4u/(u-1)^2) over a square."""
    axis = (np.arange(n) + 0.5) / n * (2 * half_width) - half_width
    cell = (2 * half_width / n) ** 2
    pts = np.array([(a, b) for a in axis for b in axis])
    vals, _, _ = u.batch(pts)
    denom = np.maximum((vals - 1.0) ** 2, 1e-300)
    integrand = np.log1p(4.0 * vals / denom) * np.exp(
        -0.5 * gamma * gamma * (pts[:, 0] ** 2 + pts[:, 1] ** 2)
    )
    return float(integrand.sum() * cell / TWO_PI)
