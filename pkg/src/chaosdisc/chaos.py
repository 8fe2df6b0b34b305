"""Atomic approximation of the multiplicative chaos measure and mass queries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError, ResolutionError
from .field import TWO_PI, FieldSample, GridSpec, KernelSpec, sample_canonical, sample_perturbed

GAMMA_CRITICAL = math.sqrt(2.0)
_CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class ChaosMeasure:
    """Nonnegative atom masses on the field grid."""

    grid: GridSpec
    weights: np.ndarray
    gamma: float
    mode: str  # "subcritical" | "critical"
    truncation_N: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ParameterError("weights must be finite and nonnegative")
        if not w.sum() > 0:
            raise ParameterError("total mass must be positive")

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())


def default_mode(gamma: float) -> str:
    return "critical" if abs(gamma - GAMMA_CRITICAL) <= _CRITICAL_TOL else "subcritical"


def build_measure(field: FieldSample, gamma: float, mode: str | None = None) -> ChaosMeasure:
    """Renormalized exponential of the field, one atom per grid point.

    Weight j is exp(gamma X_j - gamma^2/2 E[X_j^2]) times the grid spacing,
    so each weight has expectation equal to its Lebesgue share. Critical
    mode additionally multiplies by sqrt(E[X_j^2]), the truncation proxy
    for the sqrt(log 1/eps) renormalization.
    """
    if mode is None:
        mode = default_mode(gamma)
    if not 0 < gamma <= GAMMA_CRITICAL + _CRITICAL_TOL:
        raise ParameterError(
            f"gamma must lie in (0, sqrt(2)]; gamma={gamma} is in the degenerate regime"
        )
    if mode == "critical":
        if abs(gamma - GAMMA_CRITICAL) > _CRITICAL_TOL:
            raise ParameterError("critical mode requires gamma = sqrt(2)")
    elif mode == "subcritical":
        if gamma >= GAMMA_CRITICAL - _CRITICAL_TOL:
            raise ParameterError("subcritical mode requires gamma < sqrt(2)")
    else:
        raise ParameterError(f"unknown mode {mode!r}")
    var = np.asarray(field.variance, dtype=float)
    weights = np.exp(gamma * field.values - 0.5 * gamma * gamma * var) * field.grid.spacing
    if mode == "critical":
        weights = weights * np.sqrt(var)
    weights = np.broadcast_to(weights, (field.grid.M,)).copy()
    return ChaosMeasure(field.grid, weights, gamma, mode, field.truncation_N)


def arc_masses(mu: ChaosMeasure, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized interval masses over half-open arcs (a, b].

    On the circle the arc is taken mod 2 pi; an atom at t is counted when
    t + 2 pi k lands in (a, b] for some integer k, so complementary arcs
    partition the total mass exactly.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    thetas = mu.grid.points()
    if mu.grid.domain == "interval":
        inside = (thetas[None, :] > a[..., None]) & (thetas[None, :] <= b[..., None])
        return inside @ mu.weights
    length = np.minimum(b - a, TWO_PI)
    s = np.mod(thetas[None, :] - a[..., None], TWO_PI)
    inside = (s > 0) & (s <= length[..., None])
    inside |= (s == 0) & (length[..., None] >= TWO_PI)
    return inside @ mu.weights


def interval_mass(mu: ChaosMeasure, a: float, b: float) -> float:
    """Mass of the arc (a, b]; empty arcs give 0."""
    if b <= a:
        return 0.0
    return float(arc_masses(mu, np.asarray([a]), np.asarray([b]))[0])


def average(mu: ChaosMeasure, theta: float, eps: float) -> float:
    """Mass of (theta - eps, theta + eps] divided by 2 eps."""
    if eps < mu.grid.spacing:
        raise ResolutionError(f"eps {eps} is below the grid spacing {mu.grid.spacing}")
    return interval_mass(mu, theta - eps, theta + eps) / (2.0 * eps)


def jackknife_se(values: np.ndarray) -> float:
    """Leave-one-out jackknife standard error of the sample mean."""
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 2:
        return 0.0
    loo = (x.sum() - x) / (n - 1)
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


class MomentEstimate(NamedTuple):
    estimate: float
    stderr: float
    replicas: int


def mass_moment_mc(
    gamma: float,
    p: float,
    eps: float,
    N: int,
    replicas: int,
    rng: np.random.Generator,
    M: int | None = None,
    kernel: KernelSpec | None = None,
) -> MomentEstimate:
    """Monte Carlo estimate of E[mu((-eps, eps])^p] for the circle measure.

    Refuses p >= 2/gamma^2, where the moment does not exist.
    """
    if p >= 2.0 / (gamma * gamma):
        raise ParameterError(f"moment of order p={p} does not exist for gamma={gamma}")
    if replicas < 100:
        raise ParameterError("need at least 100 replicas")
    grid = GridSpec(M if M is not None else 4 * N, "circle")
    mode = default_mode(gamma)
    samples = np.empty(replicas)
    for i in range(replicas):
        if kernel is None or kernel.kind == "canonical":
            fld = sample_canonical(N, grid, rng)
        else:
            fld = sample_perturbed(kernel, N, grid, rng)
        mu = build_measure(fld, gamma, mode)
        samples[i] = interval_mass(mu, -eps, eps) ** p
    return MomentEstimate(float(samples.mean()), jackknife_se(samples), replicas)
