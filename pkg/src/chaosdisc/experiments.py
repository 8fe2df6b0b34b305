"""Monte Carlo drivers for every scaling exponent, with regression tables.

Each experiment derives one generator per replica from the master seed via
``seeds.derived_rng(master, tag, index)``, so estimates are identical for
any worker count. Drivers return an ExperimentResult holding CSV-ready
table rows, JSONL result rows, and a summary with fitted slopes.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .chaos import arc_masses, build_measure, default_mode, jackknife_se
from .clark import AtomicInnerFunction
from .errors import ChaosDiscError, ParameterError
from .field import TWO_PI, GridSpec, sample_canonical, sample_exact_scaling
from .seeds import derived_rng
from .zeros import beta_sum, locate_zeros

LOG_PHI_ANGLES = 16  # fixed angle averaging for the boundary-decay experiment


@dataclass(frozen=True)
class ExperimentConfig:
    gamma: float = 1.0
    N_schedule: tuple = (1024,)
    M: int = 4096
    replicas: int = 500
    master_seed: int = 20260809
    radii: tuple = ()
    p: float = 0.5
    beta_list: tuple = (0.8, 0.95, 1.0)
    s_list: tuple = (1.1, 1.4)
    delta: float = 0.1
    workers: int = 1

    def __post_init__(self):
        if self.M < 4 * max(self.N_schedule):
            raise ParameterError("grid size must be at least 4x the largest truncation")
        if any(not 0.0 < r < 1.0 for r in self.radii):
            raise ParameterError("radii / eps values must lie in (0, 1)")

    @property
    def N(self) -> int:
        return max(self.N_schedule)

    def require_moment_exists(self):
        if self.p >= 2.0 / (self.gamma * self.gamma):
            raise ParameterError(
                f"moment order p={self.p} does not exist for gamma={self.gamma}"
            )


@dataclass
class ResultRow:
    experiment: str
    params: dict
    estimate: float
    stderr: float
    replicas: int
    seed: int
    wall_time: float

    def to_json_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "replicas": self.replicas,
            "seed": self.seed,
            "wall_time": self.wall_time,
        }


@dataclass
class ExperimentResult:
    name: str
    table: list
    rows: list
    summary: dict
    aux_tables: dict = dc_field(default_factory=dict)


# ---------------------------------------------------------------------------
# slope fitting
# ---------------------------------------------------------------------------


def fit_slope(points) -> tuple[float, float]:
    """Weighted least-squares slope through (log x, log y, se of log y).

    Points with zero/missing standard errors fall back to ordinary least
    squares with a residual-based slope error.
    """
    pts = [(float(x), float(y), float(s)) for x, y, s in points]
    if len(pts) < 3:
        raise ParameterError("need at least 3 points to fit a slope")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    se = np.array([p[2] for p in pts])
    if np.ptp(x) <= 0:
        raise ParameterError("degenerate abscissas")
    if np.all(se > 0):
        w = 1.0 / se**2
        xbar = np.average(x, weights=w)
        ybar = np.average(y, weights=w)
        sxx = np.sum(w * (x - xbar) ** 2)
        slope = np.sum(w * (x - xbar) * (y - ybar)) / sxx
        return float(slope), float(math.sqrt(1.0 / sxx))
    xbar, ybar = x.mean(), y.mean()
    sxx = np.sum((x - xbar) ** 2)
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    resid = y - ybar - slope * (x - xbar)
    dof = max(len(pts) - 2, 1)
    return slope, float(math.sqrt(np.sum(resid**2) / dof / sxx))


def _mean_se_columns(samples: np.ndarray):
    est = samples.mean(axis=0)
    se = np.array([jackknife_se(samples[:, j]) for j in range(samples.shape[1])])
    return est, se


def _log_points(xs, est, se):
    pts = []
    for x, e, s in zip(xs, est, se):
        if e > 0:
            pts.append((math.log(x), math.log(e), s / e))
    return pts


# ---------------------------------------------------------------------------
# replica plumbing
# ---------------------------------------------------------------------------


def _call_replica(arg):
    fn, cfg, master, tag, idx = arg
    return fn(cfg, master, tag, idx)


def map_replicas(fn, cfg: ExperimentConfig, tag: str) -> np.ndarray:
    args = [(fn, cfg, cfg.master_seed, tag, i) for i in range(cfg.replicas)]
    if cfg.workers <= 1:
        out = [_call_replica(a) for a in args]
    else:
        chunk = max(1, cfg.replicas // (cfg.workers * 8))
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            out = list(pool.map(_call_replica, args, chunksize=chunk))
    return np.stack(out)


def _canonical_measure(cfg: ExperimentConfig, rng, N=None, M=None):
    grid = GridSpec(M if M is not None else cfg.M, "circle")
    fld = sample_canonical(N if N is not None else cfg.N, grid, rng)
    return build_measure(fld, cfg.gamma, default_mode(cfg.gamma))


# ---------------------------------------------------------------------------
# Poisson-part moment exponent: E[x(r)^p] ~ (1-r)^{p(1-p) gamma^2 / 2}
# ---------------------------------------------------------------------------


def _rep_x_moment(cfg, master, tag, idx):
    rng = derived_rng(master, tag, idx)
    mu = _canonical_measure(cfg, rng)
    f = AtomicInnerFunction.from_measure(mu)
    x = np.asarray(f.poisson_x(np.asarray(cfg.radii, dtype=complex)))
    return x**cfg.p


def exp_x_moment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.require_moment_exists()
    t0 = time.perf_counter()
    tag = "x-moment"
    samples = map_replicas(_rep_x_moment, cfg, tag)
    est, se = _mean_se_columns(samples)
    slope, slope_se = fit_slope(_log_points([1.0 - r for r in cfg.radii], est, se))
    wall = time.perf_counter() - t0
    expected = cfg.p * (1.0 - cfg.p) * cfg.gamma**2 / 2.0
    table, rows = [], []
    for r, e, s in zip(cfg.radii, est, se):
        table.append({"r": r, "estimate": e, "se": s, "replicas": cfg.replicas})
        rows.append(ResultRow(tag, {"r": r, "p": cfg.p, "gamma": cfg.gamma}, e, s,
                              cfg.replicas, cfg.master_seed, wall))
    summary = {"slope": slope, "slope_se": slope_se, "expected_slope": expected}
    rows.append(ResultRow(tag, {"quantity": "slope"}, slope, slope_se,
                          cfg.replicas, cfg.master_seed, wall))
    return ExperimentResult(tag, table, rows, summary)


# ---------------------------------------------------------------------------
# boundary decay of log(1/|phi|): slope gamma^2 / 8
# ---------------------------------------------------------------------------


def _rep_log_phi(cfg, master, tag, idx):
    rng = derived_rng(master, tag, idx)
    mu = _canonical_measure(cfg, rng)
    f = AtomicInnerFunction.from_measure(mu)
    angles = TWO_PI * np.arange(LOG_PHI_ANGLES) / LOG_PHI_ANGLES
    z = np.asarray(cfg.radii)[:, None] * np.exp(1j * angles[None, :])
    vals = -np.asarray(f.log_abs_phi(z))
    return vals.mean(axis=1)


def exp_log_phi(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    tag = "log-phi"
    samples = map_replicas(_rep_log_phi, cfg, tag)
    est, se = _mean_se_columns(samples)
    slope, slope_se = fit_slope(_log_points([1.0 - r for r in cfg.radii], est, se))
    wall = time.perf_counter() - t0
    table, rows = [], []
    for r, e, s in zip(cfg.radii, est, se):
        table.append({"r": r, "estimate": e, "se": s, "replicas": cfg.replicas})
        rows.append(ResultRow(tag, {"r": r, "gamma": cfg.gamma}, e, s,
                              cfg.replicas, cfg.master_seed, wall))
    summary = {"slope": slope, "slope_se": slope_se,
               "expected_slope": cfg.gamma**2 / 8.0}
    rows.append(ResultRow(tag, {"quantity": "slope"}, slope, slope_se,
                          cfg.replicas, cfg.master_seed, wall))
    return ExperimentResult(tag, table, rows, summary)


# ---------------------------------------------------------------------------
# zero-density tables S_beta(r_max)
# ---------------------------------------------------------------------------


def _rep_zero_density(cfg, master, tag, idx):
    rng = derived_rng(master, tag, idx)
    out = np.full((len(cfg.beta_list) + 1, len(cfg.radii)), np.nan)
    try:
        mu = _canonical_measure(cfg, rng)
        f = AtomicInnerFunction.from_measure(mu)
        zs = locate_zeros(f, max(cfg.radii))
    except ChaosDiscError:
        return out
    radii_mult = [(abs(z), m) for z, m in zs.zeros]
    for j, r in enumerate(sorted(cfg.radii)):
        kept = [(rr, m) for rr, m in radii_mult if rr <= r]
        for i, beta in enumerate(cfg.beta_list):
            out[i, j] = sum(m * (1.0 - rr) ** beta for rr, m in kept)
        out[-1, j] = sum(m for _, m in kept)
    return out


def exp_zero_density(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    tag = "zero-density"
    samples = map_replicas(_rep_zero_density, cfg, tag)
    ok = ~np.isnan(samples[:, 0, 0])
    failures = int((~ok).sum())
    good = samples[ok]
    medians = np.median(good, axis=0)
    wall = time.perf_counter() - t0
    radii = sorted(cfg.radii)
    ks = [int(round(-math.log2(1.0 - r))) for r in radii]
    table, rows = [], []
    for i, beta in enumerate(cfg.beta_list):
        for j, (k, r) in enumerate(zip(ks, radii)):
            table.append({"beta": beta, "k": k, "r_max": r,
                          "median_beta_sum": medians[i, j], "replicas": int(ok.sum())})
            rows.append(ResultRow(tag, {"beta": beta, "k": k, "gamma": cfg.gamma},
                                  float(medians[i, j]), 0.0, int(ok.sum()),
                                  cfg.master_seed, wall))
    ratios = {beta: [float(medians[i, j + 1] / medians[i, j])
                     for j in range(len(radii) - 1) if medians[i, j] > 0]
              for i, beta in enumerate(cfg.beta_list)}
    summary = {
        "beta_star": 1.0 - cfg.gamma**2 / 8.0,
        "successive_ratios": ratios,
        "median_counts": [float(c) for c in medians[-1]],
        "failures": failures,
    }
    return ExperimentResult(tag, table, rows, summary)


# ---------------------------------------------------------------------------
# singular-weight moment threshold s(p) = 1 + gamma^2 (1-p)/2
# ---------------------------------------------------------------------------


def _rep_seiberg(cfg, master, tag, idx):
    out = np.empty((len(cfg.s_list), len(cfg.N_schedule)))
    mode = default_mode(cfg.gamma)
    for j, N in enumerate(cfg.N_schedule):
        # identical stream per N couples the shared low Fourier modes
        rng = derived_rng(master, tag, idx)
        grid = GridSpec(4 * N, "circle")
        fld = sample_canonical(N, grid, rng)
        mu = build_measure(fld, cfg.gamma, mode)
        # singular point offset half a spacing keeps every atom distance positive
        target = np.exp(1j * math.pi / grid.M)
        dist = np.abs(target - np.exp(1j * grid.points()))
        for i, s in enumerate(cfg.s_list):
            out[i, j] = float(np.sum(mu.weights * dist ** (-s))) ** cfg.p
    return out


def exp_seiberg(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.require_moment_exists()
    t0 = time.perf_counter()
    tag = "seiberg"
    samples = map_replicas(_rep_seiberg, cfg, tag)  # (R, s, N)
    wall = time.perf_counter() - t0
    s_threshold = 1.0 + cfg.gamma**2 * (1.0 - cfg.p) / 2.0
    table, rows, classification = [], [], {}
    for i, s in enumerate(cfg.s_list):
        est = samples[:, i, :].mean(axis=0)
        se = np.array([jackknife_se(samples[:, i, j]) for j in range(len(cfg.N_schedule))])
        for j, N in enumerate(cfg.N_schedule):
            table.append({"s": s, "N": N, "estimate": est[j], "se": se[j],
                          "replicas": cfg.replicas})
            rows.append(ResultRow(tag, {"s": s, "N": N, "p": cfg.p}, float(est[j]),
                                  float(se[j]), cfg.replicas, cfg.master_seed, wall))
        steps = est[1:] / est[:-1]
        last_change = abs(est[-1] - est[-2]) / est[-2]
        if last_change < 0.10:
            label = "stabilizes"
        elif np.all(steps >= 1.25):
            label = "diverges"
        elif np.all(steps > 1.0):
            label = "grows"
        else:
            label = "undetermined"
        classification[s] = {
            "label": label,
            "step_ratios": [float(v) for v in steps],
            "last_change": float(last_change),
        }
    summary = {"s_threshold": s_threshold, "classification": classification}
    return ExperimentResult(tag, table, rows, summary)


# ---------------------------------------------------------------------------
# multifractal box counting: slope 1 - gamma^2 / 8
# ---------------------------------------------------------------------------


def _rep_multifractal(cfg, master, tag, idx):
    rng = derived_rng(master, tag, idx)
    mu = _canonical_measure(cfg, rng)
    counts = np.empty(len(cfg.radii))
    for j, eps in enumerate(cfg.radii):
        centers = np.arange(int(math.floor(TWO_PI / eps))) * eps
        avg = arc_masses(mu, centers - eps, centers + eps) / (2.0 * eps)
        lo, hi = eps**cfg.delta, eps**(-cfg.delta)
        counts[j] = int(np.sum((avg > lo) & (avg < hi)))
    return counts


def exp_multifractal(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    tag = "multifractal"
    if min(cfg.radii) < GridSpec(cfg.M, "circle").spacing:
        raise ParameterError("smallest eps is below the measure resolution")
    samples = map_replicas(_rep_multifractal, cfg, tag)
    est, se = _mean_se_columns(samples)
    slope, slope_se = fit_slope(_log_points([1.0 / eps for eps in cfg.radii], est, se))
    wall = time.perf_counter() - t0
    table, rows = [], []
    for eps, e, s in zip(cfg.radii, est, se):
        table.append({"eps": eps, "count_mean": e, "se": s, "replicas": cfg.replicas})
        rows.append(ResultRow(tag, {"eps": eps, "delta": cfg.delta}, float(e), float(s),
                              cfg.replicas, cfg.master_seed, wall))
    summary = {"slope": slope, "slope_se": slope_se,
               "expected_slope": 1.0 - cfg.gamma**2 / 8.0}
    rows.append(ResultRow(tag, {"quantity": "slope"}, slope, slope_se, cfg.replicas,
                          cfg.master_seed, wall))
    return ExperimentResult(tag, table, rows, summary)


# ---------------------------------------------------------------------------
# interval-mass moments and the dyadic-shell ratio of the exact scaling field
# ---------------------------------------------------------------------------

_SHELL_OUTER = 0.25  # outer half-width of the coarsest dyadic shell
_N_SHELLS = 4
_INTERVAL_M = 1024
_INTERVAL_EPS = 1.0 / 256.0


def _rep_mass_arcs(cfg, master, tag, idx):
    rng = derived_rng(master, tag, idx)
    mu = _canonical_measure(cfg, rng)
    eps = np.asarray(cfg.radii)
    return arc_masses(mu, -eps, eps) ** cfg.p


def _rep_mass_shells(cfg, master, tag, idx):
    rng = derived_rng(master, tag, idx)
    grid = GridSpec(_INTERVAL_M, "interval")
    fld = sample_exact_scaling(_INTERVAL_EPS, grid, rng)
    mu = build_measure(fld, cfg.gamma, default_mode(cfg.gamma))
    pts = np.abs(grid.points())
    out = np.empty((len(cfg.s_list), _N_SHELLS))
    for k in range(_N_SHELLS):
        hi, lo = _SHELL_OUTER * 2.0**-k, _SHELL_OUTER * 2.0 ** -(k + 1)
        sel = (pts > lo) & (pts <= hi)
        for i, s in enumerate(cfg.s_list):
            with np.errstate(divide="ignore"):
                w = np.where(sel, mu.weights * pts ** (-s), 0.0)
            out[i, k] = w.sum() ** cfg.p
    return out


def exp_mass_scaling(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.require_moment_exists()
    t0 = time.perf_counter()
    tag = "mass-scaling"
    arcs = map_replicas(_rep_mass_arcs, cfg, tag + "/arcs")
    est, se = _mean_se_columns(arcs)
    slope, slope_se = fit_slope(_log_points(cfg.radii, est, se))
    shells = map_replicas(_rep_mass_shells, cfg, tag + "/shells")  # (R, s, k)
    wall = time.perf_counter() - t0
    table, rows = [], []
    for eps, e, s in zip(cfg.radii, est, se):
        table.append({"eps": eps, "estimate": e, "se": s, "replicas": cfg.replicas})
        rows.append(ResultRow(tag, {"eps": eps, "p": cfg.p}, float(e), float(s),
                              cfg.replicas, cfg.master_seed, wall))
    q = cfg.p * (1.0 + cfg.gamma**2 * (1.0 - cfg.p) / 2.0)
    ratio_rows = []
    ratio_summary = {}
    for i, s in enumerate(cfg.s_list):
        means = shells[:, i, :].mean(axis=0)
        expected = 2.0 ** (
            s * cfg.p - cfg.p * (1.0 + cfg.gamma**2 / 2.0) + cfg.p**2 * cfg.gamma**2 / 2.0
        )
        ratios = means[1:] / means[:-1]
        for k, val in enumerate(ratios):
            ratio_rows.append({"s": s, "k": k, "ratio": float(val), "expected": expected})
            rows.append(ResultRow(tag, {"s": s, "shell": k, "quantity": "dyadic_ratio"},
                                  float(val), 0.0, cfg.replicas, cfg.master_seed, wall))
        ratio_summary[s] = {"ratios": [float(v) for v in ratios], "expected": expected}
    summary = {"slope": slope, "slope_se": slope_se, "expected_slope": q,
               "dyadic_ratios": ratio_summary}
    rows.append(ResultRow(tag, {"quantity": "slope"}, slope, slope_se, cfg.replicas,
                          cfg.master_seed, wall))
    return ExperimentResult(tag, table, rows, summary,
                            aux_tables={"ratios": ratio_rows})


# ---------------------------------------------------------------------------
# uniform boundedness of E[|Im h(r)|^{-p}]
# ---------------------------------------------------------------------------


def _rep_imag_bound(cfg, master, tag, idx):
    rng = derived_rng(master, tag, idx)
    mu = _canonical_measure(cfg, rng)
    f = AtomicInnerFunction.from_measure(mu)
    y = np.asarray(f.conj_poisson_y(np.asarray(cfg.radii, dtype=complex)))
    return np.abs(y) ** (-cfg.p)


def exp_imag_bound(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    tag = "imag-bound"
    samples = map_replicas(_rep_imag_bound, cfg, tag)
    est, se = _mean_se_columns(samples)
    wall = time.perf_counter() - t0
    table, rows = [], []
    for r, e, s in zip(cfg.radii, est, se):
        table.append({"r": r, "estimate": e, "se": s, "replicas": cfg.replicas})
        rows.append(ResultRow(tag, {"r": r, "p": cfg.p}, float(e), float(s),
                              cfg.replicas, cfg.master_seed, wall))
    ratio = float(est.max() / est.min())
    summary = {"max_over_min": ratio}
    rows.append(ResultRow(tag, {"quantity": "max_over_min"}, ratio, 0.0, cfg.replicas,
                          cfg.master_seed, wall))
    return ExperimentResult(tag, table, rows, summary)


# ---------------------------------------------------------------------------
# registry and desk-scale defaults
# ---------------------------------------------------------------------------

EXPERIMENTS = {
    "x-moment": exp_x_moment,
    "log-phi": exp_log_phi,
    "zero-density": exp_zero_density,
    "seiberg": exp_seiberg,
    "multifractal": exp_multifractal,
    "mass-scaling": exp_mass_scaling,
    "imag-bound": exp_imag_bound,
}


def default_config(name: str, master_seed: int = 20260809, workers: int = 1) -> ExperimentConfig:
    common = dict(gamma=1.0, master_seed=master_seed, workers=workers)
    if name == "x-moment":
        return ExperimentConfig(N_schedule=(1024,), M=4096, replicas=2000,
                                radii=tuple(1.0 - 2.0**-k for k in range(3, 8)),
                                p=0.5, **common)
    if name == "log-phi":
        return ExperimentConfig(N_schedule=(1024,), M=4096, replicas=2000,
                                radii=tuple(1.0 - 2.0**-k for k in range(3, 8)),
                                **common)
    if name == "zero-density":
        return ExperimentConfig(N_schedule=(1024,), M=4096, replicas=200,
                                radii=tuple(1.0 - 2.0**-k for k in range(4, 8)),
                                beta_list=(0.8, 0.95, 1.0), **common)
    if name == "seiberg":
        return ExperimentConfig(N_schedule=(256, 512, 1024, 2048, 4096), M=16384,
                                replicas=1000, s_list=(1.1, 1.4), p=0.5, **common)
    if name == "multifractal":
        return ExperimentConfig(N_schedule=(1024,), M=4096, replicas=500,
                                radii=tuple(2.0**-k for k in range(4, 10)),
                                delta=0.1, **common)
    if name == "mass-scaling":
        return ExperimentConfig(N_schedule=(1024,), M=4096, replicas=2000,
                                radii=tuple(2.0**-k for k in range(3, 8)),
                                p=0.5, s_list=(0.0, 1.0), **common)
    if name == "imag-bound":
        return ExperimentConfig(N_schedule=(1024,), M=4096, replicas=1000,
                                radii=(0.9, 0.99, 0.999), p=0.5, **common)
    raise ParameterError(f"unknown experiment {name!r}")


def run_experiment(name: str, cfg: ExperimentConfig) -> ExperimentResult:
    if name not in EXPERIMENTS:
        raise ParameterError(f"unknown experiment {name!r}")
    return EXPERIMENTS[name](cfg)
