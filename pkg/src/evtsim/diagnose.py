"""Empirical verification experiments for the process-level identities.

Each operation estimates a probability curve (spectral df, tail ratio, domain
of attraction deviation, survivor bound, convergence rate, ...) and reports
estimates with standard errors next to the model values they should match.
Assertion logic lives in the callers (tests, CLI pass rules); this module only
measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import count_above, count_below, weighted_sup
from .dnorm import DNormEstimate, ProbabilityEstimate, dnorm_mc, inf_functional
from .generator import generator_constant, sample_paths
from .gridfun import EFunction, Grid, constant_function, sup_norm
from .simulate import (
    StoppingRule,
    simulate_copula_paths,
    simulate_gpp_paths,
    simulate_msp_paths,
)


@dataclass(frozen=True, eq=False)
class MspProcess:
    """Standard max-stable paths eta."""

    gen: object
    rule: StoppingRule = field(default_factory=StoppingRule)
    kind: str = "msp"

    def shifted_paths(self, grid: Grid, n: int, seed: int) -> np.ndarray:
        return simulate_msp_paths(self.gen, grid, self.rule, n, seed).eta


@dataclass(frozen=True, eq=False)
class GppProcess:
    """Standard generalized Pareto paths V."""

    gen: object
    kind: str = "gpp"

    def shifted_paths(self, grid: Grid, n: int, seed: int) -> np.ndarray:
        return simulate_gpp_paths(self.gen, grid, n, seed).v


@dataclass(frozen=True, eq=False)
class CopulaProcess:
    """Copula paths exp(eta), shifted to U - 1 for threshold comparisons."""

    gen: object
    rule: StoppingRule = field(default_factory=StoppingRule)
    kind: str = "copula"

    def shifted_paths(self, grid: Grid, n: int, seed: int) -> np.ndarray:
        return simulate_copula_paths(self.gen, grid, self.rule, n, seed) - 1.0


def _as_matrix(paths, grid: Grid) -> np.ndarray:
    """Accept an (n, grid) array or an iterable of PathSample on one grid."""
    if isinstance(paths, np.ndarray):
        if paths.ndim != 2 or paths.shape[1] != grid.size:
            raise ValueError("paths do not match the grid")
        return paths
    rows = []
    for sample in paths:
        if not sample.grid.matches(grid):
            raise ValueError("path sample grid does not match the function grid")
        rows.append(sample.values)
    return np.asarray(rows)


def _binom(count: int, n: int) -> ProbabilityEstimate:
    p = count / n
    return ProbabilityEstimate(p, math.sqrt(p * (1.0 - p) / n), n)


def empirical_df(paths, f: EFunction, strict: bool = False) -> ProbabilityEstimate:
    """Fraction of paths pointwise below f (overrides included), binomial SE."""
    matrix = _as_matrix(paths, f.grid)
    if matrix.shape[0] < 100:
        raise ValueError("empirical df needs at least 100 paths")
    count = count_below(matrix, f.values, strict)
    return _binom(count, matrix.shape[0])


@dataclass(frozen=True, eq=False)
class SpectralCurve:
    """Estimated univariate spectral df along direction f with model column."""

    fid: str
    s_values: np.ndarray
    estimates: np.ndarray
    ses: np.ndarray
    model: np.ndarray
    valid: np.ndarray
    norm_est: DNormEstimate
    constant_est: DNormEstimate


def spectral_df(process, f: EFunction, s_values, n: int, seed: int = 0) -> SpectralCurve:
    """Empirical df of the shifted process at thresholds s|f|, s <= 0.

    One shared path set serves every s. For GPD processes rows outside
    |s| * sup|f| <= 1/m are flagged invalid rather than rejected.
    """
    s = np.asarray(list(s_values), dtype=float)
    if s.size == 0 or np.any(s > 0):
        raise ValueError("s values must be nonpositive")
    if np.any(np.diff(s) <= 0):
        raise ValueError("s values must be strictly increasing")
    grid = f.grid
    paths = process.shifted_paths(grid, n, seed)
    norm_est = dnorm_mc(f, process.gen, grid, n=n, seed=seed)
    constant_est = generator_constant(process.gen, grid, n, seed=seed)

    abs_f = f.abs_values()
    estimates = np.empty(s.size)
    ses = np.empty(s.size)
    for i, si in enumerate(s):
        est = _binom(count_below(paths, si * abs_f, False), n)
        estimates[i], ses[i] = est.value, est.se
    model = 1.0 + s * norm_est.value
    if process.kind == "gpp":
        valid = np.abs(s) * sup_norm(f) <= 1.0 / constant_est.value
    else:
        valid = np.ones(s.size, dtype=bool)
    return SpectralCurve(f.fid, s, estimates, ses, model, valid, norm_est, constant_est)


@dataclass(frozen=True, eq=False)
class TailReport:
    """Empirical tail over model tail |s|*norm per s."""

    fid: str
    s_values: np.ndarray
    ratios: np.ndarray
    ses: np.ndarray
    tails: np.ndarray
    tail_ses: np.ndarray
    norm_est: DNormEstimate


def tail_equivalence(process, f: EFunction, s_values, n: int, seed: int = 0) -> TailReport:
    """Ratio of the empirical spectral tail to the model tail, per s < 0."""
    s = np.asarray(list(s_values), dtype=float)
    if s.size == 0 or np.any(s >= 0):
        raise ValueError("tail equivalence needs strictly negative s values")
    grid = f.grid
    norm_est = dnorm_mc(f, process.gen, grid, n=n, seed=seed)
    if norm_est.value <= 0:
        raise ValueError("the norm estimate vanishes; tail ratios are undefined")
    paths = process.shifted_paths(grid, n, seed)
    abs_f = f.abs_values()
    ratios = np.empty(s.size)
    ses = np.empty(s.size)
    tails = np.empty(s.size)
    tail_ses = np.empty(s.size)
    for i, si in enumerate(s):
        below = _binom(count_below(paths, si * abs_f, False), n)
        tail = 1.0 - below.value
        denom = abs(si) * norm_est.value
        ratio = tail / denom
        # Binomial noise in the tail plus delta-method noise from the norm.
        se = math.hypot(below.se / denom, ratio * norm_est.se / norm_est.value)
        tails[i], tail_ses[i] = tail, below.se
        ratios[i], ses[i] = ratio, se
    return TailReport(f.fid, s, ratios, ses, tails, tail_ses, norm_est)


@dataclass(frozen=True, eq=False)
class DoaReport:
    """Per-n deviation of the rescaled-maximum df from the limit df."""

    fid: str
    n_values: np.ndarray
    deviations: np.ndarray
    deviations_strict: np.ndarray
    ses: np.ndarray
    reference: ProbabilityEstimate


def doa_curve(
    process,
    f: EFunction,
    n_values,
    replicates: int,
    seed: int = 0,
    ref_n: int = 200_000,
    a_fn=lambda n: 1.0 / n,
    b_fn=lambda n: 0.0,
) -> DoaReport:
    """|P((Y - b_n)/a_n <= f)^n - limit df| per n, with a strict companion."""
    if np.any(f.values > 0):
        raise ValueError("f must be nonpositive")
    ns = np.asarray(list(n_values), dtype=int)
    if ns.size == 0 or np.any(ns < 1):
        raise ValueError("n values must be positive integers")
    grid = f.grid
    reference = ProbabilityEstimate(*_exp_neg(dnorm_mc(f, process.gen, grid, n=ref_n, seed=seed)), ref_n)
    deviations = np.empty(ns.size)
    deviations_strict = np.empty(ns.size)
    ses = np.empty(ns.size)
    for i, n in enumerate(ns):
        paths = process.shifted_paths(grid, replicates, _shift_seed(seed, int(n)))
        threshold = a_fn(n) * f.values + b_fn(n)
        le = _binom(count_below(paths, threshold, False), replicates)
        lt = _binom(count_below(paths, threshold, True), replicates)
        deviations[i] = abs(le.value**n - reference.value)
        deviations_strict[i] = abs(lt.value**n - reference.value)
        ses[i] = n * le.value ** max(n - 1, 0) * le.se
    return DoaReport(f.fid, ns, deviations, deviations_strict, ses, reference)


def _exp_neg(est: DNormEstimate) -> tuple[float, float]:
    if not math.isfinite(est.value):
        return 0.0, 0.0
    p = math.exp(-est.value)
    return p, p * est.se


def _shift_seed(seed: int, offset: int) -> int:
    return (int(seed) * 1_000_003 + offset) % (2**63 - 1)


def block_max_df(paths, intervals, thresholds, grid: Grid) -> ProbabilityEstimate:
    """P(max over each interval union strictly below its threshold, jointly).

    ``intervals`` is a sequence of unions; a union is a sequence of (lo, hi)
    pairs in [0,1]. Unions must contain at least one grid point.
    """
    thresholds = np.asarray(list(thresholds), dtype=float)
    intervals = list(intervals)
    if len(intervals) != thresholds.size or not intervals:
        raise ValueError("need one threshold per interval union")
    if not np.all(np.isfinite(thresholds)):
        raise ValueError("thresholds must be finite")
    matrix = _as_matrix(paths, grid)
    ok = np.ones(matrix.shape[0], dtype=bool)
    for union, threshold in zip(intervals, thresholds):
        mask = np.zeros(grid.size, dtype=bool)
        for lo, hi in union:
            mask |= (grid.points >= lo) & (grid.points <= hi)
        if not mask.any():
            raise ValueError("interval union contains no grid points")
        ok &= matrix[:, mask].max(axis=1) < threshold
    return _binom(int(ok.sum()), matrix.shape[0])


@dataclass(frozen=True, eq=False)
class RateReport:
    """Sup deviation over a function bank per n with a log-log slope fit."""

    n_values: np.ndarray
    deviations: np.ndarray
    ses: np.ndarray
    kept: np.ndarray
    slope: float | None
    intercept: float | None
    note: str


def rate_fit(process, f_bank, n_values, replicates: int, seed: int = 0) -> RateReport:
    """Per-n sup over the bank of |P(Y <= f/n)^n - exp(-norm f)| and its slope.

    The per-n dfs are evaluated conditionally on one shared generator-path
    stream (the uniform factor is integrated out analytically), so the
    deviations isolate the finite-n effect instead of Monte Carlo noise.
    """
    f_bank = list(f_bank)
    if not f_bank:
        raise ValueError("the function bank is empty")
    for f in f_bank:
        if np.any(f.values > 0):
            raise ValueError("bank functions must be nonpositive")
    ns = np.asarray(list(n_values), dtype=int)
    if ns.size < 4:
        raise ValueError("rate fitting needs at least 4 n values")
    if np.any(np.diff(ns) <= 0) or ns[0] < 1:
        raise ValueError("n values must be positive and strictly increasing")

    grid = f_bank[0].grid
    zpaths = sample_paths(process.gen, grid, replicates, seed)
    sups = [weighted_sup(zpaths, f.abs_values()) for f in f_bank]
    xhats = [float(s.mean()) for s in sups]
    m = replicates

    deviations = np.empty(ns.size)
    ses = np.empty(ns.size)
    for i, n in enumerate(ns):
        best_dev = -1.0
        best_se = 0.0
        for f, sup, xhat in zip(f_bank, sups, xhats):
            ref = math.exp(-xhat)
            if process.kind == "gpp":
                scaled = np.minimum(sup / n, 1.0)
                p = 1.0 - float(scaled.mean())
                p_pow = p**n
                influence = -n * p ** (n - 1) * (scaled - (1.0 - p)) + ref * (sup - xhat)
                se = float(influence.std(ddof=1) / math.sqrt(m))
            elif process.kind == "copula":
                shrunk = f.values / n
                inside = shrunk > -1.0
                weights_n = np.where(inside, -np.log1p(np.where(inside, shrunk, 0.0)), np.inf)
                sup_n = weighted_sup(zpaths, weights_n)
                if not np.all(np.isfinite(sup_n)):
                    p_pow, se = 0.0, 0.0
                else:
                    xn = float(sup_n.mean())
                    p_pow = math.exp(-n * xn)
                    influence = -n * p_pow * (sup_n - xn) + ref * (sup - xhat)
                    se = float(influence.std(ddof=1) / math.sqrt(m))
            else:  # msp: the df oracle is exact at every n, deviations vanish
                p_pow = ref
                se = 0.0
            dev = abs(p_pow - ref)
            if dev > best_dev:
                best_dev, best_se = dev, se
        deviations[i] = best_dev
        ses[i] = best_se

    kept = deviations > 3.0 * ses
    note = ""
    if not kept.all():
        note = "noise-dominated points dropped from the fit"
    if kept.sum() >= 2:
        coeffs = np.polyfit(np.log(ns[kept]), np.log(deviations[kept]), 1)
        slope, intercept = float(coeffs[0]), float(coeffs[1])
    else:
        slope = intercept = None
        note = "deviations within noise everywhere; no slope reported"
    return RateReport(ns, deviations, ses, kept, slope, intercept, note)


@dataclass(frozen=True, eq=False)
class SurvivorReport:
    """Survivor probabilities of eta above shrinking thresholds s|f|."""

    fid: str
    s_values: np.ndarray
    probabilities: np.ndarray
    ses: np.ndarray
    bounds: np.ndarray
    slopes: np.ndarray
    slope_ses: np.ndarray
    inf_est: DNormEstimate


def survivor_check(
    gen,
    f: EFunction,
    s_values,
    n: int,
    seed: int = 0,
    rule: StoppingRule | None = None,
) -> SurvivorReport:
    """Empirical P(eta above s|f| everywhere) with lower bound and slope columns.

    s < 0 indexes the threshold s*|f| <= 0 shrinking to zero as s -> 0; the
    bound column is 1 - exp(-|s| E inf |f|Z) and the slope column P/|s|
    converges to E inf |f|Z.
    """
    if np.any(f.values > 0):
        raise ValueError("f must be nonpositive")
    s = np.asarray(list(s_values), dtype=float)
    if s.size == 0 or np.any(s >= 0):
        raise ValueError("survivor thresholds need strictly negative s values")
    grid = f.grid
    rule = rule or StoppingRule()
    eta = simulate_msp_paths(gen, grid, rule, n, seed).eta
    inf_est = inf_functional(f, gen, grid, n=n, seed=seed)
    abs_f = f.abs_values()
    probs = np.empty(s.size)
    ses = np.empty(s.size)
    for i, si in enumerate(s):
        est = _binom(count_above(eta, si * abs_f, True), n)
        probs[i], ses[i] = est.value, est.se
    bounds = 1.0 - np.exp(-np.abs(s) * inf_est.value)
    slopes = probs / np.abs(s)
    slope_ses = ses / np.abs(s)
    return SurvivorReport(f.fid, s, probs, ses, bounds, slopes, slope_ses, inf_est)


def triangle_raster(grid: Grid, peaks: np.ndarray, n: int) -> np.ndarray:
    """Grid raster of unit-height triangles of half-width 2^-n centered at peaks.

    Below grid resolution the triangle collapses to the nearest grid point
    (the documented resolution limit of the counterexample).
    """
    width = 2.0**-n
    peaks = np.atleast_1d(np.asarray(peaks, dtype=float))
    if width >= grid.spacing():
        raster = np.maximum(0.0, 1.0 - np.abs(grid.points[None, :] - peaks[:, None]) / width)
    else:
        raster = np.zeros((peaks.size, grid.size))
        nearest = np.argmin(np.abs(grid.points[None, :] - peaks[:, None]), axis=1)
        raster[np.arange(peaks.size), nearest] = 1.0
    return raster


@dataclass(frozen=True, eq=False)
class CounterexampleReport:
    """df convergence of eta - triangle against failure of open-set mass."""

    n_values: np.ndarray
    df_deviations: np.ndarray
    df_ses: np.ndarray
    p_perturbed: np.ndarray
    p_perturbed_ses: np.ndarray
    p_eta: ProbabilityEstimate
    upper_bound: float
    lower_bound: float
    separated: np.ndarray
    c: float
    min_z_est: DNormEstimate


def counterexample_run(
    gen,
    f_bank,
    c: float,
    n_values,
    replicates: int,
    seed: int = 0,
    rule: StoppingRule | None = None,
    ref_n: int = 200_000,
) -> CounterexampleReport:
    """df convergence without weak convergence for eta_n = eta - triangle.

    Requires E(min Z) > 0 and c in (-2,-1) with c (1 - E min Z) > -1. The df
    of eta_n converges to the df of eta over the bank, while the open-set mass
    P(eta_n > c) stays boundedly below P(eta > c).
    """
    if not -2.0 < c < -1.0:
        raise ValueError("c must lie in (-2, -1)")
    f_bank = list(f_bank)
    if not f_bank:
        raise ValueError("the function bank is empty")
    grid = f_bank[0].grid
    rule = rule or StoppingRule()

    one = constant_function(grid, -1.0, fid="const_1")
    min_z = inf_functional(one, gen, grid, n=max(replicates, 10_000), seed=seed)
    if min_z.value <= 3.0 * min_z.se:
        raise ValueError(
            f"generator has E(min Z) = {min_z.value:.4g} +- {min_z.se:.2g}; "
            "the counterexample needs a strictly positive pathwise minimum"
        )
    if c * (1.0 - min_z.value) <= -1.0:
        raise ValueError(
            f"c = {c} violates c (1 - E min Z) > -1 for E min Z = {min_z.value:.4g}"
        )

    ns = np.asarray(list(n_values), dtype=int)
    if ns.size == 0 or np.any(ns < 1):
        raise ValueError("n values must be positive integers")

    eta = simulate_msp_paths(gen, grid, rule, replicates, seed).eta
    peaks = _uniform_peaks(seed, replicates)
    refs = [
        ProbabilityEstimate(*_exp_neg(dnorm_mc(f, gen, grid, n=ref_n, seed=seed)), ref_n)
        for f in f_bank
    ]
    c_line = np.full(grid.size, c)
    p_eta = _binom(count_above(eta, c_line, True), replicates)

    df_devs = np.empty(ns.size)
    df_ses = np.empty(ns.size)
    p_pert = np.empty(ns.size)
    p_pert_ses = np.empty(ns.size)
    for i, n in enumerate(ns):
        perturbed = eta - triangle_raster(grid, peaks, int(n))
        worst = 0.0
        worst_se = 0.0
        for f, ref in zip(f_bank, refs):
            est = _binom(count_below(perturbed, f.values, False), replicates)
            dev = abs(est.value - ref.value)
            if dev > worst:
                worst, worst_se = dev, math.hypot(est.se, ref.se)
        df_devs[i], df_ses[i] = worst, worst_se
        pn = _binom(count_above(perturbed, c_line, True), replicates)
        p_pert[i], p_pert_ses[i] = pn.value, pn.se

    separated = (p_pert + 3.0 * p_pert_ses) < (p_eta.value - 3.0 * p_eta.se)
    return CounterexampleReport(
        n_values=ns,
        df_deviations=df_devs,
        df_ses=df_ses,
        p_perturbed=p_pert,
        p_perturbed_ses=p_pert_ses,
        p_eta=p_eta,
        upper_bound=1.0 - math.exp(c + 1.0),
        lower_bound=1.0 - math.exp(c * min_z.value),
        separated=separated,
        c=float(c),
        min_z_est=min_z,
    )


def _uniform_peaks(seed: int, n: int) -> np.ndarray:
    from . import rng as rnglib

    out = np.empty(n)
    for start, stop in rnglib.chunk_bounds(n):
        r = rnglib.substream(seed, "counterexample", "peaks", start)
        out[start:stop] = r.random(stop - start)
    return out


@dataclass(frozen=True, eq=False)
class VonMisesReport:
    """Hazard-style remainder r_f(c) estimated by central finite differences."""

    fid: str
    c_values: np.ndarray
    remainders: np.ndarray
    flagged: np.ndarray
    fd_noise_ok: np.ndarray
    shrinking: bool


def von_mises_diagnostic(process, f: EFunction, c_values, n: int, seed: int = 0) -> VonMisesReport:
    """Estimate r_f(c) = -c h_f(c)/(1 - H_f(c)) - 1 on an interior c grid.

    f must lie on the unit sphere (sup|f| = 1); c values are strictly negative
    and increasing toward 0. Rows with a nonpositive tail estimate are flagged;
    fd_noise_ok records whether the difference-quotient noise stays below 10%
    of the estimate.
    """
    if abs(sup_norm(f) - 1.0) > 1e-12:
        raise ValueError("f must lie on the unit sphere (sup-norm 1)")
    c = np.asarray(list(c_values), dtype=float)
    if c.size < 3 or np.any(c >= 0):
        raise ValueError("need at least three strictly negative c values")
    if np.any(np.diff(c) <= 0):
        raise ValueError("c values must be strictly increasing")
    grid = f.grid
    paths = process.shifted_paths(grid, n, seed)
    abs_f = f.abs_values()
    h_counts = np.array([count_below(paths, ci * abs_f, False) for ci in c], dtype=float)
    big_h = h_counts / n

    interior = slice(1, c.size - 1)
    spacing = c[2:] - c[:-2]
    h_small = (big_h[2:] - big_h[:-2]) / spacing
    tail = 1.0 - big_h[interior]
    flagged = tail <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        remainders = np.where(flagged, np.nan, -c[interior] * h_small / tail - 1.0)

    slab = np.maximum(big_h[2:] - big_h[:-2], 0.0)
    slab_se = np.sqrt(slab * (1.0 - slab) / n) / spacing
    with np.errstate(divide="ignore", invalid="ignore"):
        fd_noise_ok = 2.0 * slab_se <= 0.1 * np.abs(h_small)

    valid = ~flagged & np.isfinite(remainders)
    shrinking = False
    if valid.sum() >= 2:
        third = max(valid.sum() // 3, 1)
        ordered = np.abs(remainders[valid])
        shrinking = bool(ordered[-third:].max() <= ordered[:third].max())
    return VonMisesReport(f.fid, c[interior], remainders, flagged, fd_noise_ok, shrinking)
