"""Herglotz transform and inner-function evaluation for atomic measures.

An ``AtomicInnerFunction`` bundles a positive atomic measure on the circle
with evaluators for h, phi = (h-1)/(h+1), the Poisson parts x and y,
log|phi| and phi'. All evaluators accept scalars or complex arrays and are
exact sums over atoms, so phi is analytic and the argument principle
applies to the computed function itself.
"""

from __future__ import annotations

import numpy as np

from .chaos import ChaosMeasure
from .errors import ParameterError

# Points with |z| beyond this guard lose kernel precision in double arithmetic.
DISC_GUARD = 1.0 - 1e-12

# Cap on atoms x points per evaluation block.
_BLOCK = 1 << 21


class AtomicInnerFunction:
    """Evaluator for the inner function attached to a positive atomic measure."""

    def __init__(self, thetas, masses, angular_resolution: float | None = None):
        thetas = np.asarray(thetas, dtype=float).ravel()
        masses = np.asarray(masses, dtype=float).ravel()
        if thetas.shape != masses.shape:
            raise ParameterError("thetas and masses must have equal length")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ParameterError("masses must be finite and nonnegative")
        total = float(masses.sum())
        if not total > 0:
            raise ParameterError("total mass must be positive")
        keep = masses > 0
        self.thetas = thetas[keep]
        self.masses = masses[keep]
        self.total_mass = total
        self.unit = np.exp(1j * self.thetas)
        self._mass_unit = self.masses * self.unit
        self.angular_resolution = angular_resolution

    @classmethod
    def from_measure(cls, mu: ChaosMeasure) -> "AtomicInnerFunction":
        if mu.grid.domain != "circle":
            raise ParameterError("inner functions need a measure on the circle")
        return cls(mu.grid.points(), mu.weights, angular_resolution=mu.grid.spacing)

    @classmethod
    def from_atoms(cls, thetas, masses) -> "AtomicInnerFunction":
        return cls(thetas, masses)

    # -- internal -----------------------------------------------------------

    def _prepare(self, z):
        arr = np.asarray(z, dtype=complex)
        scalar = arr.ndim == 0
        flat = arr.ravel()
        if np.any(np.abs(flat) > DISC_GUARD):
            raise ParameterError(f"evaluation points must satisfy |z| <= {DISC_GUARD}")
        return arr, flat, scalar

    def _blocks(self, n_points: int):
        step = max(1, _BLOCK // max(1, self.masses.size))
        for i in range(0, n_points, step):
            yield i, min(i + step, n_points)

    def _finish(self, arr, out, scalar):
        res = out.reshape(arr.shape)
        return res.item() if scalar else res

    # -- evaluators ----------------------------------------------------------

    def herglotz(self, z):
        """h(z) = sum_k m_k (u_k + z)/(u_k - z), Re h > 0 on the disc."""
        arr, flat, scalar = self._prepare(z)
        out = np.empty(flat.shape, dtype=complex)
        for i, j in self._blocks(flat.size):
            out[i:j] = (self._mass_unit / (self.unit - flat[i:j, None])).sum(axis=1)
        out = 2.0 * out - self.total_mass
        return self._finish(arr, out, scalar)

    def phi(self, z):
        h = self.herglotz(z)
        return (h - 1.0) / (h + 1.0)

    def poisson_x(self, z):
        """x(z) = sum_k m_k (1 - |z|^2) / |z - u_k|^2, computed from the kernel."""
        arr, flat, scalar = self._prepare(z)
        out = np.empty(flat.shape, dtype=float)
        one_minus = 1.0 - np.abs(flat) ** 2
        for i, j in self._blocks(flat.size):
            d = flat[i:j, None] - self.unit
            out[i:j] = ((d.real**2 + d.imag**2) ** -1 * self.masses).sum(axis=1)
        out *= one_minus
        return self._finish(arr, out, scalar)

    def conj_poisson_y(self, z):
        """y(z) = sum_k m_k (-2|z| sin(theta_k - arg z)) / |z - u_k|^2."""
        arr, flat, scalar = self._prepare(z)
        out = np.empty(flat.shape, dtype=float)
        radius = np.abs(flat)
        argz = np.where(radius > 0, np.angle(np.where(flat == 0, 1.0, flat)), 0.0)
        for i, j in self._blocks(flat.size):
            d = flat[i:j, None] - self.unit
            kern = np.sin(self.thetas - argz[i:j, None]) / (d.real**2 + d.imag**2)
            out[i:j] = (kern * self.masses).sum(axis=1)
        out *= -2.0 * radius
        return self._finish(arr, out, scalar)

    def log_abs_phi(self, z):
        """log|phi(z)| via -1/2 log1p(4x / ((x-1)^2 + y^2)).

        Stable when |phi| is close to 1; returns -inf at an exact zero.
        """
        x = np.asarray(self.poisson_x(z), dtype=float)
        y = np.asarray(self.conj_poisson_y(z), dtype=float)
        denom = (x - 1.0) ** 2 + y * y
        with np.errstate(divide="ignore"):
            out = np.where(denom > 0, -0.5 * np.log1p(4.0 * x / np.where(denom > 0, denom, 1.0)), -np.inf)
        return out.item() if np.ndim(z) == 0 else out

    def phi_derivative(self, z):
        """phi'(z) = 2 h'(z) / (h(z) + 1)^2 with h' summed term by term."""
        arr, flat, scalar = self._prepare(z)
        hp = np.empty(flat.shape, dtype=complex)
        h = np.empty(flat.shape, dtype=complex)
        for i, j in self._blocks(flat.size):
            d = self.unit - flat[i:j, None]
            h[i:j] = (self._mass_unit / d).sum(axis=1)
            hp[i:j] = (self._mass_unit / (d * d)).sum(axis=1)
        h = 2.0 * h - self.total_mass
        out = 4.0 * hp / (h + 1.0) ** 2
        return self._finish(arr, out, scalar)
