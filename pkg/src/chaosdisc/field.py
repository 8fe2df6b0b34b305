"""Log-correlated Gaussian field samplers on the circle and on [-1/2, 1/2].

The canonical field is synthesized directly from its random Fourier
coefficients, so its truncated variance is known exactly. Perturbed and
exactly scaling kernels go through a dense symmetric eigendecomposition of
the grid covariance with small negative eigenvalues clipped to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

from .errors import (
    AliasingError,
    InvalidKernelError,
    ParameterError,
    ResolutionError,
    SingularityError,
)

TWO_PI = 2.0 * math.pi

# Grid covariances are clipped to PSD; eigenvalues below -PSD_RTOL * max_eig
# mean the kernel is genuinely indefinite and are rejected.
PSD_RTOL = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid: M points on the circle, or M cell centres on [-1/2, 1/2]."""

    M: int
    domain: str = "circle"

    def __post_init__(self):
        if self.M < 8 or self.M & (self.M - 1):
            raise ParameterError(f"grid size must be a power of two >= 8, got {self.M}")
        if self.domain not in ("circle", "interval"):
            raise ParameterError(f"unknown domain {self.domain!r}")

    @property
    def spacing(self) -> float:
        return TWO_PI / self.M if self.domain == "circle" else 1.0 / self.M

    def points(self) -> np.ndarray:
        if self.domain == "circle":
            return TWO_PI * np.arange(self.M) / self.M
        return -0.5 + (np.arange(self.M) + 0.5) / self.M


@dataclass(frozen=True)
class KernelSpec:
    """Covariance kernel identity.

    ``g_fourier`` parametrizes the continuous perturbation g(t, s) as a real
    symmetric matrix G in the trigonometric basis 1, sin t, cos t, sin 2t, ...:
    g(t, s) = sum_jk G[j, k] e_j(t) e_k(s). Only kind="perturbed" carries it.
    """

    kind: str
    g_fourier: np.ndarray | None = dc_field(default=None)

    def __post_init__(self):
        if self.kind not in ("canonical", "perturbed", "exact_scaling"):
            raise ParameterError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "perturbed":
            g = np.asarray(self.g_fourier, dtype=float)
            if g.ndim != 2 or g.shape[0] != g.shape[1]:
                raise ParameterError("g_fourier must be a square matrix")
            if not np.allclose(g, g.T, atol=1e-12):
                raise ParameterError("g_fourier must be symmetric")
            object.__setattr__(self, "g_fourier", g)
        elif self.g_fourier is not None:
            raise ParameterError("g_fourier is only meaningful for kind='perturbed'")


CANONICAL = KernelSpec("canonical")
EXACT_SCALING = KernelSpec("exact_scaling")


@dataclass(frozen=True)
class FieldSample:
    """One realization of a truncated field on a grid.

    ``variance`` is the exact per-point E[X^2] of the sampler that produced
    the values: a scalar for the canonical field (the harmonic partial sum),
    an array for kernels realized through eigendecomposition or after a
    Fourier mode has been split off.
    """

    grid: GridSpec
    values: np.ndarray
    truncation_N: int
    variance: float | np.ndarray
    kernel: KernelSpec

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("field values must be finite")
        if np.any(np.asarray(self.variance) < 0):
            raise ParameterError("variance must be nonnegative")

    def variance_at_points(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.variance, dtype=float), (self.grid.M,))

    def to_text_row(self) -> str:
        head = f"{self.grid.M} {self.truncation_N} {self.kernel.kind}"
        return head + " " + " ".join(repr(v) for v in self.values)


def harmonic_number(N: int) -> float:
    if N < 0:
        raise ParameterError("truncation must be nonnegative")
    return math.fsum(1.0 / n for n in range(1, N + 1))


def covariance_canonical(delta: float, N: int | None = None) -> float:
    """Truncated canonical covariance at angular lag delta.

    Finite N: sum_{n<=N} cos(n delta)/n. N=None (or inf) gives the closed
    form -log|e^{i delta} - 1|, which is singular at delta = 0 mod 2 pi.
    """
    if N is None or N == math.inf:
        r = math.remainder(delta, TWO_PI)
        if abs(r) < 1e-15:
            raise SingularityError("canonical covariance diverges at zero lag")
        return -math.log(2.0 * abs(math.sin(delta / 2.0)))
    N = int(N)
    if N < 1:
        raise ParameterError("truncation must be >= 1 (or None for the limit kernel)")
    n = np.arange(1, N + 1)
    return float(np.sum(np.cos(n * delta) / n))


def trig_basis(thetas: np.ndarray, dim: int) -> np.ndarray:
    """Rows e_0 = 1, e_{2j-1} = sin(j t), e_{2j} = cos(j t), evaluated on thetas."""
    thetas = np.asarray(thetas, dtype=float)
    out = np.empty((dim, thetas.size))
    out[0] = 1.0
    for j in range(1, dim):
        freq = (j + 1) // 2
        out[j] = np.sin(freq * thetas) if j % 2 else np.cos(freq * thetas)
    return out


def g_on_grid(g_fourier: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    basis = trig_basis(thetas, g_fourier.shape[0])
    return basis.T @ g_fourier @ basis


def zero_field(grid: GridSpec) -> FieldSample:
    """Degenerate N=0 field: identically zero with zero variance."""
    return FieldSample(grid, np.zeros(grid.M), 0, 0.0, CANONICAL)


def sample_canonical(N: int, grid: GridSpec, rng: np.random.Generator) -> FieldSample:
    """Truncated random Fourier series on the circle grid.

    Draws the 2N coefficient Gaussians in interleaved order (A_1, B_1,
    A_2, B_2, ...) so the first two values of the stream are the n=1 pair.
    """
    if grid.domain != "circle":
        raise ParameterError("canonical field lives on the circle")
    if N < 1:
        raise ParameterError("truncation must be >= 1")
    if N > grid.M // 2:
        raise AliasingError(f"truncation {N} exceeds Nyquist limit {grid.M // 2}")
    gauss = rng.standard_normal(2 * N)
    a, b = gauss[0::2], gauss[1::2]
    scale = 1.0 / np.sqrt(np.arange(1, N + 1))
    spectrum = np.zeros(grid.M, dtype=complex)
    spectrum[1 : N + 1] = scale * (a - 1j * b)
    # sum_n Re[(A_n - i B_n) e^{i n t}] = sum_n A_n cos(n t) + B_n sin(n t)
    values = grid.M * np.fft.ifft(spectrum).real
    return FieldSample(grid, values, N, harmonic_number(N), CANONICAL)


def _clip_factor(K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """PSD square root of K with negative eigenvalues clipped.

    Returns (S, diag) with S S^T equal to the clipped kernel and diag its
    exact diagonal. Raises if K is indefinite beyond tolerance.
    """
    lam, Q = np.linalg.eigh(K)
    lmax = max(float(lam[-1]), 0.0)
    if float(lam[0]) < -PSD_RTOL * max(lmax, 1e-300):
        raise InvalidKernelError(
            f"kernel is indefinite: min eigenvalue {lam[0]:.3e} vs max {lmax:.3e}"
        )
    lam = np.clip(lam, 0.0, None)
    S = Q * np.sqrt(lam)
    diag = np.einsum("ij,j,ij->i", Q, lam, Q)
    return S, diag


def _canonical_cov_row(N: int, M: int) -> np.ndarray:
    coef = np.zeros(M, dtype=complex)
    n = np.arange(1, N + 1)
    coef[1 : N + 1] = 1.0 / n
    # row_j = sum_n cos(n theta_j)/n via one inverse FFT
    return (M * np.fft.ifft(coef)).real


@lru_cache(maxsize=8)
def _perturbed_factor(g_bytes: bytes, g_dim: int, N: int, M: int):
    thetas = TWO_PI * np.arange(M) / M
    row = _canonical_cov_row(N, M)
    idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    K = row[idx]
    if g_dim:
        g = np.frombuffer(g_bytes, dtype=float).reshape(g_dim, g_dim)
        K = K + g_on_grid(g, thetas)
    return _clip_factor(K)


def sample_perturbed(
    kernel: KernelSpec, N: int, grid: GridSpec, rng: np.random.Generator
) -> FieldSample:
    """Centered Gaussian sample whose grid covariance is C_N + g."""
    if kernel.kind != "perturbed":
        raise ParameterError("kernel.kind must be 'perturbed'")
    if grid.domain != "circle":
        raise ParameterError("perturbed kernels live on the circle")
    if N < 1:
        raise ParameterError("truncation must be >= 1")
    if N > grid.M // 2:
        raise AliasingError(f"truncation {N} exceeds Nyquist limit {grid.M // 2}")
    g = kernel.g_fourier
    S, diag = _perturbed_factor(g.tobytes(), g.shape[0], N, grid.M)
    values = S @ rng.standard_normal(grid.M)
    return FieldSample(grid, values, N, diag.copy(), kernel)


@lru_cache(maxsize=8)
def _exact_scaling_factor(eps: float, M: int):
    thetas = -0.5 + (np.arange(M) + 0.5) / M
    dist = np.abs(thetas[:, None] - thetas[None, :])
    K = np.log(1.0 / np.maximum(dist, eps))
    return _clip_factor(K)


def sample_exact_scaling(
    eps: float, grid: GridSpec, rng: np.random.Generator
) -> FieldSample:
    """Field on [-1/2, 1/2] with kernel log(1/max(|t-s|, eps)), PSD-clipped."""
    if grid.domain != "interval":
        raise ParameterError("the exactly scaling field lives on the interval")
    if eps < grid.spacing:
        raise ResolutionError(f"eps {eps} is below the grid spacing {grid.spacing}")
    S, diag = _exact_scaling_factor(float(eps), grid.M)
    values = S @ rng.standard_normal(grid.M)
    return FieldSample(grid, values, max(1, round(1.0 / eps)), diag.copy(), EXACT_SCALING)


def split_mode(sample: FieldSample, mode: tuple[int, str]) -> tuple[float, FieldSample]:
    """Extract one Fourier mode's standard Gaussian and the residual field.

    The residual variance becomes pointwise: the removed mode contributed
    basis(t)^2 / n to E[X(t)^2].
    """
    n, kind = mode
    if sample.kernel.kind != "canonical":
        raise ParameterError("split_mode expects a canonical-kernel sample")
    if kind not in ("sin", "cos"):
        raise ParameterError(f"mode kind must be 'sin' or 'cos', got {kind!r}")
    if not 1 <= n <= sample.truncation_N:
        raise ParameterError(f"mode {n} beyond truncation {sample.truncation_N}")
    M = sample.grid.M
    thetas = sample.grid.points()
    if 2 * n == M and kind == "sin":
        raise ParameterError("the Nyquist sine mode vanishes on the grid")
    basis = np.sin(n * thetas) if kind == "sin" else np.cos(n * thetas)
    norm = M if 2 * n == M else M / 2.0
    amplitude = float(basis @ sample.values) / norm  # equals n^{-1/2} * coefficient
    coefficient = amplitude * math.sqrt(n)
    residual = sample.values - amplitude * basis
    var = sample.variance_at_points() - basis * basis / n
    return coefficient, FieldSample(
        sample.grid, residual, sample.truncation_N, var, sample.kernel
    )


def recombine_mode(
    residual: FieldSample, coefficient: float, mode: tuple[int, str]
) -> FieldSample:
    """Inverse of split_mode, optionally with a perturbed coefficient."""
    n, kind = mode
    thetas = residual.grid.points()
    basis = np.sin(n * thetas) if kind == "sin" else np.cos(n * thetas)
    values = residual.values + coefficient / math.sqrt(n) * basis
    var = residual.variance_at_points() + basis * basis / n
    return FieldSample(residual.grid, values, residual.truncation_N, var, residual.kernel)
