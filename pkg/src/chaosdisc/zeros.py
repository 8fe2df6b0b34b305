"""Zero location by the argument principle, beta sums, and the area functional.

Zeros of an analytic self-map of the disc are counted by adaptive phase
tracking along contours and located by recursive subdivision of the disc
into annular-sector cells, each isolated zero polished by Newton steps.
Works for any evaluator exposing ``phi`` and ``phi_derivative`` over
complex arrays (chaos-measure evaluators and synthetic Blaschke products).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    ConsistencyError,
    ContourDegenerateError,
    ParameterError,
    PrecisionError,
    QuadratureError,
)

TWO_PI = 2.0 * math.pi
PHASE_TOL = math.pi / 4.0  # refine until successive phase increments are below this
MIN_DIAMETER = 1e-6  # cells with more than one zero stop splitting here
MERGE_TOL = 1e-8  # zeros closer than this are merged with multiplicities summed
POLISH_TARGET = 1e-12
TOP_FLOOR = 1e-6  # |phi| floor demanded of the outermost counting contour
INTERNAL_FLOOR = 1e-12  # below this, phases are numerical noise
NUDGE = 1e-4
MAX_NUDGES = 8
_SPLIT_FRACS = (0.5, 0.44, 0.56, 0.37, 0.63, 0.29, 0.71, 0.21)
_MAX_SEGMENT_POINTS = 300_000


class _NearZero(Exception):
    """Internal: contour passed too close to a zero for reliable phases."""


class _BudgetOut(Exception):
    """Internal: resolution budget exhausted."""


# ---------------------------------------------------------------------------
# synthetic Blaschke oracle
# ---------------------------------------------------------------------------


class BlaschkeProduct:
    """Finite Blaschke product with prescribed zeros; test oracle evaluator."""

    def __init__(self, zero_list):
        zs = np.asarray(list(zero_list), dtype=complex)
        if np.any(np.abs(zs) >= 1.0):
            raise ParameterError("Blaschke zeros must lie strictly inside the disc")
        self.zero_list = zs
        self._origin = np.abs(zs) < 1e-15
        self.angular_resolution = None

    def phi(self, z):
        arr = np.asarray(z, dtype=complex)
        out = np.ones(arr.shape, dtype=complex)
        for a, at0 in zip(self.zero_list, self._origin):
            out = out * self._factor(a, at0, arr)
        return out.item() if arr.ndim == 0 else out

    @staticmethod
    def _factor(a, at_origin, z):
        if at_origin:
            return z
        return (np.conj(a) / abs(a)) * (a - z) / (1.0 - np.conj(a) * z)

    @staticmethod
    def _factor_derivative(a, at_origin, z):
        if at_origin:
            return np.ones_like(z)
        return (np.conj(a) / abs(a)) * (abs(a) ** 2 - 1.0) / (1.0 - np.conj(a) * z) ** 2

    def phi_derivative(self, z):
        arr = np.asarray(z, dtype=complex)
        n = self.zero_list.size
        factors = np.empty((n,) + arr.shape, dtype=complex)
        derivs = np.empty_like(factors)
        for k, (a, at0) in enumerate(zip(self.zero_list, self._origin)):
            factors[k] = self._factor(a, at0, arr)
            derivs[k] = self._factor_derivative(a, at0, arr)
        out = np.zeros(arr.shape, dtype=complex)
        for k in range(n):
            rest = np.ones(arr.shape, dtype=complex)
            for m in range(n):
                if m != k:
                    rest = rest * factors[m]
            out = out + derivs[k] * rest
        return out.item() if arr.ndim == 0 else out


def make_blaschke(zero_list) -> BlaschkeProduct:
    return BlaschkeProduct(zero_list)


# ---------------------------------------------------------------------------
# phase tracking
# ---------------------------------------------------------------------------


def _segment_phase(f, seg_fn, n0: int, floor: float):
    """Total phase change of phi along one parametric segment.

    The t-grid is refined until every increment is below PHASE_TOL. Raises
    _NearZero if any sampled |phi| drops below ``floor``.
    """
    ts = np.linspace(0.0, 1.0, n0)
    vals = np.asarray(f.phi(seg_fn(ts)), dtype=complex)
    if np.min(np.abs(vals)) < floor:
        raise _NearZero
    while True:
        dphi = np.angle(vals[1:] * np.conj(vals[:-1]))
        bad = np.nonzero(np.abs(dphi) >= PHASE_TOL)[0]
        if bad.size == 0:
            return float(dphi.sum())
        if ts.size > _MAX_SEGMENT_POINTS:
            raise PrecisionError("phase tracking did not converge on a segment")
        mids = 0.5 * (ts[bad] + ts[bad + 1])
        mvals = np.asarray(f.phi(seg_fn(mids)), dtype=complex)
        if np.min(np.abs(mvals)) < floor:
            raise _NearZero
        pos = np.searchsorted(ts, mids)
        ts = np.insert(ts, pos, mids)
        vals = np.insert(vals, pos, mvals)


def _arc_fn(r, a0, a1):
    return lambda t: r * np.exp(1j * (a0 + t * (a1 - a0)))


def _radial_fn(a, r0, r1):
    u = cmath.exp(1j * a)
    return lambda t: (r0 + t * (r1 - r0)) * u


def _closed_winding(f, segments, floor: float) -> int:
    total = 0.0
    for seg_fn, n0 in segments:
        total += _segment_phase(f, seg_fn, n0, floor)
    w = total / TWO_PI
    wi = round(w)
    if abs(w - wi) > 0.1:
        raise PrecisionError(f"non-integer winding {w:.4f} after refinement")
    return int(wi)


def _circle_candidates(r):
    yield r
    for k in range(1, MAX_NUDGES):
        step = NUDGE * ((k + 1) // 2)
        cand = r + step if k % 2 else r - step
        if 0.0 < cand < 1.0 - 1e-12:
            yield cand


def _count_on_circle(f, r, floor):
    for rr in _circle_candidates(r):
        try:
            w = _closed_winding(f, [(_arc_fn(rr, 0.0, TWO_PI), 65)], floor)
            return w, rr
        except _NearZero:
            continue
    raise ContourDegenerateError(
        f"could not move the contour |z|={r} off a zero after {MAX_NUDGES} nudges"
    )


def count_zeros(f, r: float) -> int:
    """Number of zeros of phi in |z| < r, by the argument principle.

    The radius is nudged by multiples of 1e-4 (up to 8 attempts) when the
    contour passes too close to a zero.
    """
    if not 0.0 < r < 1.0:
        raise ParameterError("contour radius must lie in (0, 1)")
    w, _ = _count_on_circle(f, r, TOP_FLOOR)
    return w


# ---------------------------------------------------------------------------
# subdivision cells
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Cell:
    r_lo: float
    r_hi: float
    a_lo: float
    a_hi: float

    @property
    def is_disc(self) -> bool:
        return self.r_lo == 0.0

    @property
    def diameter(self) -> float:
        if self.is_disc:
            return 2.0 * self.r_hi
        return math.hypot(self.r_hi - self.r_lo, self.r_hi * (self.a_hi - self.a_lo))

    @property
    def center(self) -> complex:
        if self.is_disc:
            return 0.0 + 0.0j
        rm = 0.5 * (self.r_lo + self.r_hi)
        am = 0.5 * (self.a_lo + self.a_hi)
        return rm * cmath.exp(1j * am)

    def segments(self):
        if self.is_disc:
            return [(_arc_fn(self.r_hi, 0.0, TWO_PI), 33)]
        return [
            (_radial_fn(self.a_lo, self.r_lo, self.r_hi), 9),
            (_arc_fn(self.r_hi, self.a_lo, self.a_hi), 17),
            (_radial_fn(self.a_hi, self.r_hi, self.r_lo), 9),
            (_arc_fn(self.r_lo, self.a_hi, self.a_lo), 17),
        ]

    def split(self, frac: float, alternate: bool):
        if self.is_disc:
            rm = frac * self.r_hi
            a0 = TWO_PI * (frac - 0.5)  # jitter rotates the angular cut as well
            return [
                _Cell(0.0, rm, 0.0, TWO_PI),
                _Cell(rm, self.r_hi, a0, a0 + math.pi),
                _Cell(rm, self.r_hi, a0 + math.pi, a0 + TWO_PI),
            ]
        angular_first = self.r_hi * (self.a_hi - self.a_lo) >= (self.r_hi - self.r_lo)
        if alternate:
            angular_first = not angular_first
        if angular_first:
            am = self.a_lo + frac * (self.a_hi - self.a_lo)
            return [
                _Cell(self.r_lo, self.r_hi, self.a_lo, am),
                _Cell(self.r_lo, self.r_hi, am, self.a_hi),
            ]
        rm = self.r_lo + frac * (self.r_hi - self.r_lo)
        return [
            _Cell(self.r_lo, rm, self.a_lo, self.a_hi),
            _Cell(rm, self.r_hi, self.a_lo, self.a_hi),
        ]

    def contains(self, z: complex, slack: float = 1e-9) -> bool:
        r = abs(z)
        if self.is_disc:
            return r <= self.r_hi + slack
        if not (self.r_lo - slack <= r <= self.r_hi + slack):
            return False
        ang = (cmath.phase(z) - self.a_lo) % TWO_PI
        return ang <= (self.a_hi - self.a_lo) + slack / max(r, slack)


@dataclass
class ZeroSet:
    """Located zeros with multiplicities inside |z| <= r_max."""

    zeros: list
    r_max: float
    annulus_counts: list
    complete: bool = True
    total_count: int = dc_field(default=0)

    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.zeros)


def beta_sum(zs: ZeroSet, beta: float) -> float:
    """sum over zeros of multiplicity * (1 - |z|)^beta."""
    if not 0.0 < beta <= 1.0:
        raise ParameterError("beta must lie in (0, 1]")
    return float(sum(m * (1.0 - abs(z)) ** beta for z, m in zs.zeros))


def _annulus_counts(zeros):
    counts: dict[int, int] = {}
    for z, m in zeros:
        gap = 1.0 - abs(z)
        k = 0 if gap >= 1.0 else int(math.floor(-math.log2(gap)))
        counts[k] = counts.get(k, 0) + m
    return sorted(counts.items())


def _newton_polish(f, cell: _Cell, mult: int):
    """Newton iteration from points inside the cell; returns best (z, |phi|)."""
    starts = [cell.center]
    if not cell.is_disc:
        rm = 0.5 * (cell.r_lo + cell.r_hi)
        am = 0.5 * (cell.a_lo + cell.a_hi)
        da = cell.a_hi - cell.a_lo
        dr = cell.r_hi - cell.r_lo
        starts += [
            (rm + 0.25 * dr) * cmath.exp(1j * am),
            (rm - 0.25 * dr) * cmath.exp(1j * am),
            rm * cmath.exp(1j * (am + 0.25 * da)),
            rm * cmath.exp(1j * (am - 0.25 * da)),
        ]
    clamp = 1.5 * cell.diameter + 1e-12
    best_z, best_a = None, math.inf
    for z in starts:
        for _ in range(60):
            val = complex(f.phi(z))
            a = abs(val)
            if a < best_a:
                best_z, best_a = z, a
            if a < POLISH_TARGET:
                return z, a
            der = complex(f.phi_derivative(z))
            if der == 0 or not np.isfinite(der):
                break
            step = mult * val / der
            sa = abs(step)
            if sa > clamp:
                step *= clamp / sa
            z = z - step
            if abs(z) > 1.0 - 1e-12:
                z *= (1.0 - 1e-9) / abs(z)
    return best_z, best_a


def locate_zeros(f, r_max: float, resolution_budget: int = 20000) -> ZeroSet:
    """Locate all zeros of phi in |z| <= r_max with multiplicities.

    Recursive subdivision into annular-sector cells: a cell is split while
    its argument-principle count exceeds one and its diameter exceeds
    MIN_DIAMETER; isolated zeros are Newton-polished. Cells whose contours
    cannot be jittered off a zero are recorded as clusters at their
    (multiplicity-accelerated) Newton limit. Total multiplicity is checked
    against the boundary count.
    """
    if not 0.0 < r_max < 1.0:
        raise ParameterError("r_max must lie in (0, 1)")
    res = getattr(f, "angular_resolution", None)
    if res is not None and r_max > 1.0 - 4.0 * res:
        raise ParameterError(
            f"r_max {r_max} exceeds the trustworthy radius {1.0 - 4.0 * res}"
        )
    n_total, r_used = _count_on_circle(f, r_max, TOP_FLOOR)
    budget = resolution_budget
    found: list[tuple[complex, int]] = []
    incomplete = False
    stack: list[tuple[_Cell, int]] = [(_Cell(0.0, r_used, 0.0, TWO_PI), n_total)]

    def cell_winding(cell):
        nonlocal budget
        if budget <= 0:
            raise _BudgetOut
        budget -= 1
        return _closed_winding(f, cell.segments(), INTERNAL_FLOOR)

    def split_counted(cell, count):
        """Children with windings, or None when every jittered cut hits a zero."""
        for i, frac in enumerate(_SPLIT_FRACS):
            children = cell.split(frac, alternate=bool(i % 2))
            try:
                ws = [cell_winding(c) for c in children]
            except _NearZero:
                continue
            except PrecisionError:
                continue
            if sum(ws) != count:
                continue  # a zero sits near a cut; jitter and retry
            return list(zip(children, ws))
        return None

    try:
        while stack:
            cell, count = stack.pop()
            if count == 0:
                continue
            if count == 1 or cell.diameter <= MIN_DIAMETER:
                z, a = _newton_polish(f, cell, count)
                threshold = POLISH_TARGET if count == 1 else 1e-8
                if z is not None and a <= threshold and (count > 1 or cell.contains(z)):
                    found.append((z, count))
                    continue
                if cell.diameter <= 1e-10:
                    raise PrecisionError("unresolvable cell below minimum diameter")
            pieces = split_counted(cell, count)
            if pieces is None:
                # every candidate cut passes through the zero set: a tight
                # cluster; record its accelerated Newton limit
                z, a = _newton_polish(f, cell, count)
                if z is None or a > 1e-8:
                    raise PrecisionError("cluster polish failed")
                found.append((z, count))
                continue
            stack.extend(pieces)
    except _BudgetOut:
        incomplete = True

    merged: list[tuple[complex, int]] = []
    for z, m in sorted(found, key=lambda t: (t[0].real, t[0].imag)):
        for i, (zi, mi) in enumerate(merged):
            if abs(z - zi) < MERGE_TOL:
                merged[i] = (zi, mi + m)
                break
        else:
            merged.append((z, m))

    if not incomplete and sum(m for _, m in merged) != n_total:
        raise ConsistencyError(
            f"located multiplicities {sum(m for _, m in merged)} "
            f"!= boundary count {n_total}"
        )
    return ZeroSet(merged, r_used, _annulus_counts(merged), not incomplete, n_total)


# ---------------------------------------------------------------------------
# area functional
# ---------------------------------------------------------------------------


def area_functional(
    f,
    beta: float,
    r_max: float,
    n_panels: int = 24,
    gauss_deg: int = 8,
    n_angular: int = 256,
) -> float:
    """Quadrature of (1-|z|^2)^(beta-2) log(1/|phi(z)|) over |z| <= r_max.

    Radial panels refine geometrically toward r_max where the weight is
    steep. A node landing on an exact zero of phi contributes the analytic
    cell average of the log singularity instead of the infinite node value.
    """
    if not 0.0 < beta < 1.0:
        raise ParameterError("beta must lie in (0, 1)")
    if not 0.0 < r_max < 1.0:
        raise ParameterError("r_max must lie in (0, 1)")
    edges = 1.0 - (1.0 - r_max) ** (np.arange(n_panels + 1) / n_panels)
    nodes, weights = np.polynomial.legendre.leggauss(gauss_deg)
    r_vals, r_wts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        r_vals.append(0.5 * (hi + lo) + half * nodes)
        r_wts.append(half * weights)
    r_vals = np.concatenate(r_vals)
    r_wts = np.concatenate(r_wts)
    ang = TWO_PI * (np.arange(n_angular) + 0.5) / n_angular
    dang = TWO_PI / n_angular

    Z = r_vals[:, None] * np.exp(1j * ang[None, :])
    if hasattr(f, "log_abs_phi"):
        log_inv = -np.asarray(f.log_abs_phi(Z), dtype=float)
    else:
        vals = np.abs(np.asarray(f.phi(Z), dtype=complex))
        with np.errstate(divide="ignore"):
            log_inv = -np.log(vals)

    bad = ~np.isfinite(log_inv)
    if np.any(bad):
        for i, j in zip(*np.nonzero(bad)):
            cell_area = r_wts[i] * r_vals[i] * dang
            rho = math.sqrt(cell_area / math.pi)
            z0, amp = _newton_polish(
                f, _Cell(max(r_vals[i] - rho, 0.0), r_vals[i] + rho, ang[j] - dang, ang[j] + dang), 1
            )
            der = abs(complex(f.phi_derivative(z0)))
            if der <= 0 or not math.isfinite(der):
                raise QuadratureError("cannot regularize a quadrature node on a zero")
            # mean of log(1/|z - z0|) over an equal-area disc, plus the regular part
            log_inv[i, j] = math.log(1.0 / rho) + 0.5 + math.log(1.0 / der)
    if not np.all(np.isfinite(log_inv)):
        raise QuadratureError("non-finite quadrature values")

    weight = (1.0 - r_vals**2) ** (beta - 2.0) * r_vals * r_wts
    return float((weight[:, None] * log_inv).sum() * dang)
