"""Simulation of max-stable, generalized Pareto, and copula processes.

Standard max-stable paths come from a Poisson superposition: with unit-rate
arrival times G_1 < G_2 < ... and iid generator paths Z_i, the running maximum
of Z_i(t)/G_i is a simple max-stable path. For generators bounded by M almost
surely, stopping at the first k with M/G_{k+1} below the current pointwise
minimum leaves the result unchanged, so the sampled grid values are exact in
distribution. The standard path is eta = -1/xi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rnglib
from ._kernels import scaled_max_update
from .dnorm import ProbabilityEstimate, msp_cdf
from .generator import ALMOST_SURE, PathSample
from .gridfun import NONPOSITIVE, EFunction, Grid

EXACT_BOUND = "exact-bound"
FIXED_K = "fixed-K"

# |gamma| at or below this uses the logarithmic margin branch; the power
# branch loses roughly gamma-many digits near zero, this keeps relative
# error below 1e-7 at double precision.
GAMMA_ZERO_TOL = 1e-8

_MAX_ROUNDS = 100_000


@dataclass(frozen=True)
class StoppingRule:
    """Superposition stopping: exact for a.s.-bounded generators, else fixed-K."""

    mode: str = EXACT_BOUND
    bound: float | None = None
    max_terms: int = 512

    def __post_init__(self):
        if self.mode not in (EXACT_BOUND, FIXED_K):
            raise ValueError(f"unknown stopping mode {self.mode!r}")
        if self.mode == FIXED_K and self.max_terms < 1:
            raise ValueError("fixed-K stopping needs at least one term")
        if self.bound is not None and self.bound <= 0:
            raise ValueError("an almost-sure bound must be positive")

    @classmethod
    def exact(cls, bound: float | None = None) -> "StoppingRule":
        return cls(mode=EXACT_BOUND, bound=bound)

    @classmethod
    def fixed(cls, k: int = 512) -> "StoppingRule":
        return cls(mode=FIXED_K, max_terms=int(k))


@dataclass(frozen=True, eq=False)
class MspBatch:
    """Paired standard/simple max-stable paths with stopping diagnostics."""

    eta: np.ndarray
    xi: np.ndarray
    n_terms: np.ndarray
    residual: np.ndarray
    approximate: np.ndarray

    @property
    def mean_terms(self) -> float:
        return float(self.n_terms.mean())


def _resolve_bound(gen, rule: StoppingRule) -> float | None:
    if rule.bound is not None:
        return rule.bound
    return gen.bound()


def simulate_msp_paths(gen, grid: Grid, rule: StoppingRule, n: int, seed: int = 0) -> MspBatch:
    """n independent (eta, xi) path pairs on the grid."""
    if n < 1:
        raise ValueError("need at least one path")
    bound = _resolve_bound(gen, rule)
    if rule.mode == EXACT_BOUND:
        if gen.declared != ALMOST_SURE or bound is None:
            raise ValueError(
                "exact-bound stopping requires a generator with a declared "
                "almost-sure bound"
            )

    g = grid.size
    xi = np.empty((n, g))
    n_terms = np.empty(n, dtype=np.int64)
    residual = np.empty(n)
    for start, stop in rnglib.chunk_bounds(n):
        r = rnglib.substream(seed, "msp", gen.name, start)
        block = stop - start
        xi_blk = np.zeros((block, g))
        gam = r.standard_exponential(block)
        terms = np.zeros(block, dtype=np.int64)
        active = np.ones(block, dtype=bool)
        rounds = 0
        while active.any():
            rounds += 1
            if rounds > _MAX_ROUNDS:
                raise RuntimeError("superposition failed to terminate")
            k = int(active.sum())
            z = gen.sample_block(r, k, grid)
            sub = xi_blk[active]
            scaled_max_update(sub, z, 1.0 / gam[active])
            xi_blk[active] = sub
            terms[active] += 1
            gam_next = gam[active] + r.standard_exponential(k)
            gam[active] = gam_next
            if rule.mode == EXACT_BOUND:
                keep_going = bound / gam_next >= sub.min(axis=1)
            else:
                keep_going = terms[active] < rule.max_terms
            idx = np.flatnonzero(active)
            active[idx] = keep_going
        xi[start:stop] = xi_blk
        n_terms[start:stop] = terms
        if bound is not None:
            residual[start:stop] = bound / gam
        else:
            residual[start:stop] = np.nan

    if rule.mode == EXACT_BOUND:
        approximate = np.zeros(n, dtype=bool)
    else:
        # Residual mass above the current minimum could still change the path.
        row_min = xi.min(axis=1)
        with np.errstate(invalid="ignore"):
            approximate = ~(residual < row_min)
    with np.errstate(divide="ignore"):
        eta = -1.0 / xi
    return MspBatch(eta=eta, xi=xi, n_terms=n_terms, residual=residual, approximate=approximate)


def simulate_msp(gen, grid: Grid, rule: StoppingRule, seed: int = 0) -> tuple[PathSample, PathSample]:
    """One (eta standard, xi simple) pair; deterministic in (gen, grid, rule, seed)."""
    batch = simulate_msp_paths(gen, grid, rule, 1, seed)
    eta = PathSample(grid, batch.eta[0], gen.name, int(seed), 0)
    xi = PathSample(grid, batch.xi[0], gen.name, int(seed), 0)
    return eta, xi


@dataclass(frozen=True, eq=False)
class GppBatch:
    """Pareto-scale paths Y = Z/U and standard-scale paths V = -U/Z."""

    y: np.ndarray
    v: np.ndarray
    u: np.ndarray


def simulate_gpp_paths(gen, grid: Grid, n: int, seed: int = 0) -> GppBatch:
    """n independent GPD-process paths; V carries a -inf sentinel where Z = 0."""
    if n < 1:
        raise ValueError("need at least one path")
    g = grid.size
    y = np.empty((n, g))
    v = np.empty((n, g))
    u_all = np.empty(n)
    for start, stop in rnglib.chunk_bounds(n):
        r = rnglib.substream(seed, "gpp", gen.name, start)
        block = stop - start
        z = gen.sample_block(r, block, grid)
        u = r.random(block)
        u = np.maximum(u, np.finfo(float).tiny)
        with np.errstate(divide="ignore"):
            y[start:stop] = z / u[:, None]
            v[start:stop] = -u[:, None] / z
        u_all[start:stop] = u
    return GppBatch(y=y, v=v, u=u_all)


def simulate_gpp(gen, grid: Grid, seed: int = 0) -> tuple[PathSample, PathSample]:
    batch = simulate_gpp_paths(gen, grid, 1, seed)
    y = PathSample(grid, batch.y[0], gen.name, int(seed), 0)
    v = PathSample(grid, batch.v[0], gen.name, int(seed), 0)
    return y, v


def simulate_copula_paths(gen, grid: Grid, rule: StoppingRule, n: int, seed: int = 0) -> np.ndarray:
    """Uniform-margin paths exp(eta); values lie in (0,1) under exact stopping."""
    return np.exp(simulate_msp_paths(gen, grid, rule, n, seed).eta)


def simulate_copula(gen, grid: Grid, rule: StoppingRule, seed: int = 0) -> PathSample:
    values = simulate_copula_paths(gen, grid, rule, 1, seed)[0]
    return PathSample(grid, values, gen.name, int(seed), 0)


@dataclass(frozen=True, eq=False)
class MarginParams:
    """Pointwise scale/location/shape triple (a, b, gamma) with a > 0."""

    a: np.ndarray
    b: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        gamma = np.array(self.gamma, dtype=float)
        if not (a.shape == b.shape == gamma.shape) or a.ndim != 1:
            raise ValueError("a, b, gamma must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(gamma))):
            raise ValueError("margin parameters must be finite")
        if np.any(a <= 0):
            raise ValueError("the scale function a must be positive")
        for arr in (a, b, gamma):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def constant(cls, grid: Grid, a: float = 1.0, b: float = 0.0, gamma: float = 0.0) -> "MarginParams":
        g = grid.size
        return cls(np.full(g, float(a)), np.full(g, float(b)), np.full(g, float(gamma)))


def apply_margins(standard, mp: MarginParams):
    """Map standard-margin paths to von Mises margins (a, b, gamma).

    Accepts a PathSample or an array whose last axis runs over grid points;
    the standard input must be strictly negative.
    """
    if isinstance(standard, PathSample):
        values = apply_margins(standard.values, mp)
        return PathSample(standard.grid, values, standard.family, standard.seed, standard.replicate)
    eta = np.asarray(standard, dtype=float)
    if eta.shape[-1] != mp.a.size:
        raise ValueError("path and margin parameters must share one grid")
    if np.any(eta >= 0):
        raise ValueError("standard paths must be strictly negative")
    log_branch = np.abs(mp.gamma) <= GAMMA_ZERO_TOL
    gamma_safe = np.where(log_branch, 1.0, mp.gamma)
    with np.errstate(over="ignore"):
        power = -(mp.a / gamma_safe) * (1.0 - (-eta) ** (-gamma_safe)) + mp.b
    logarithmic = -mp.a * np.log(-eta) + mp.b
    return np.where(log_branch, logarithmic, power)


def standardize_function(f: EFunction, mp: MarginParams) -> EFunction:
    """Map a threshold function to the standard cone (values <= 0).

    Where 1 + (gamma/a)(f - b) <= 0 the value is clamped: 0 for gamma < 0
    (above the upper endpoint, the constraint is void) and -inf for gamma > 0
    (below the lower endpoint, the probability is zero).
    """
    if f.grid.size != mp.a.size:
        raise ValueError("function and margin parameters must share one grid")
    x = f.values
    log_branch = np.abs(mp.gamma) <= GAMMA_ZERO_TOL
    gamma_safe = np.where(log_branch, 1.0, mp.gamma)
    arg = 1.0 + (gamma_safe / mp.a) * (x - mp.b)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        power = -np.power(arg, -1.0 / gamma_safe, where=arg > 0, out=np.full_like(arg, np.nan))
    power = np.where(arg > 0, power, np.where(mp.gamma < 0, 0.0, -np.inf))
    with np.errstate(over="ignore"):
        logarithmic = -np.exp(-(x - mp.b) / mp.a)
    out = np.where(log_branch, logarithmic, power)
    return EFunction(
        f.grid,
        out,
        sign=NONPOSITIVE,
        fid=f"std({f.fid})" if f.fid else "",
        allow_infinite=bool(np.any(np.isinf(out))),
    )


def general_msp_cdf(
    f: EFunction,
    mp: MarginParams,
    gen,
    grid: Grid,
    n: int = 10_000,
    seed: int = 0,
    paths: np.ndarray | None = None,
) -> ProbabilityEstimate:
    """df of the margin-transformed max-stable process at threshold f."""
    return msp_cdf(standardize_function(f, mp), gen, grid, n=n, seed=seed, paths=paths)
