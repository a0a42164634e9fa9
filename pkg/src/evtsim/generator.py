"""Generator-process families: nonnegative continuous paths with unit means.

Each family draws independent paths Z on a grid with E(Z_t) = 1 at every grid
point. Sampling is a pure function of (spec, grid, seed); replicate batches
are drawn in fixed-width blocks with per-block sub-streams (see ``rng``), so
batch output never depends on how the blocks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import rng as rnglib
from .gridfun import Grid

ALMOST_SURE = "almost-sure"
INTEGRABLE_ONLY = "integrable-max-only"


class GeneratorNotReadyError(RuntimeError):
    """Sampling was requested from a family that is not calibrated yet."""


@dataclass(frozen=True, eq=False)
class PathSample:
    """One realized process path on a grid, with provenance."""

    grid: Grid
    values: np.ndarray
    family: str
    seed: int
    replicate: int = 0


@dataclass(frozen=True)
class DNormEstimate:
    """Monte Carlo estimate of a D-norm-type functional."""

    value: float
    se: float
    n: int
    generator: str = ""
    fid: str = ""


@dataclass(frozen=True, eq=False)
class ConstantGenerator:
    """Z identically one; the induced functional norm is the sup-norm."""

    name: str = "constant"
    declared: str = ALMOST_SURE

    def bound(self) -> float:
        return 1.0

    def sample_block(self, r: np.random.Generator, count: int, grid: Grid) -> np.ndarray:
        return np.ones((count, grid.size))


@dataclass(frozen=True, eq=False)
class FiniteSpectralGenerator:
    """Z equals atom h_i with probability p_i.

    Mean-one requires sum_i p_i h_i(t) = 1 at every grid point; construction
    does not enforce it so that deliberate violations can be fed to
    :func:`validate_generator`.
    """

    atoms: np.ndarray
    probs: np.ndarray
    name: str = "finite-spectral"
    declared: str = ALMOST_SURE

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        probs = np.array(self.probs, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise ValueError("atoms must be a (k, grid size) array with k >= 1")
        if probs.shape != (atoms.shape[0],):
            raise ValueError("need one probability per atom")
        if np.any(atoms < 0):
            raise ValueError("atoms must be nonnegative")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("atom probabilities must be nonnegative and sum to 1")
        atoms.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    def bound(self) -> float | None:
        if self.declared != ALMOST_SURE:
            return None
        return float(self.atoms.max())

    def sample_block(self, r: np.random.Generator, count: int, grid: Grid) -> np.ndarray:
        if self.atoms.shape[1] != grid.size:
            raise ValueError("generator atoms do not match the grid")
        u = r.random(count)
        idx = np.searchsorted(np.cumsum(self.probs), u, side="right")
        idx = np.minimum(idx, self.atoms.shape[0] - 1)
        return self.atoms[idx]


def two_ramp_generator(grid: Grid) -> FiniteSpectralGenerator:
    """Atoms 2t and 2(1-t), each with probability 1/2 (generator constant 2)."""
    t = grid.points
    return FiniteSpectralGenerator(
        np.stack([2.0 * t, 2.0 * (1.0 - t)]), np.array([0.5, 0.5]), name="g2"
    )


def shifted_ramp_generator(grid: Grid) -> FiniteSpectralGenerator:
    """Atoms 1/2+t and 3/2-t, each with probability 1/2 (generator constant 3/2)."""
    t = grid.points
    return FiniteSpectralGenerator(
        np.stack([0.5 + t, 1.5 - t]), np.array([0.5, 0.5]), name="g3"
    )


@dataclass(frozen=True, eq=False)
class CappedLogGaussianGenerator:
    """exp(sigma*W - sigma^2/2) capped at ``cap`` and rescaled to unit means.

    W is a stationary AR(1) Gaussian path on the grid with lag correlation
    exp(-dt / corr_length), so the uncapped path has mean one at every point.
    Capping (needed for an almost-sure bound) pulls the means below one; the
    calibration pass estimates the capped mean per grid point and sampling
    divides it out. The almost-sure bound is cap / min(calibration).
    """

    sigma: float = 0.5
    cap: float = 3.0
    corr_length: float = 0.5
    mean_tolerance: float = 0.01
    calibration: np.ndarray | None = None
    name: str = "capped-log-gaussian"
    declared: str = ALMOST_SURE

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.cap <= 1.0:
            raise ValueError("cap must exceed 1 to leave room for unit means")
        if self.corr_length <= 0:
            raise ValueError("corr_length must be positive")
        if self.calibration is not None:
            cal = np.array(self.calibration, dtype=float)
            if np.any(cal <= 0):
                raise ValueError("calibration factors must be positive")
            cal.setflags(write=False)
            object.__setattr__(self, "calibration", cal)

    def bound(self) -> float | None:
        if self.declared != ALMOST_SURE or self.calibration is None:
            return None
        return float(self.cap / self.calibration.min())

    def _capped_raw_block(self, r: np.random.Generator, count: int, grid: Grid) -> np.ndarray:
        eps = r.standard_normal((count, grid.size))
        w = np.empty_like(eps)
        w[:, 0] = eps[:, 0]
        lag = np.exp(-np.diff(grid.points) / self.corr_length)
        innov = np.sqrt(1.0 - lag**2)
        for j in range(1, grid.size):
            w[:, j] = lag[j - 1] * w[:, j - 1] + innov[j - 1] * eps[:, j]
        raw = np.exp(self.sigma * w - 0.5 * self.sigma**2)
        return np.minimum(raw, self.cap)

    def calibrate(self, grid: Grid, n: int = 200_000, seed: int = 0) -> "CappedLogGaussianGenerator":
        """Return a copy whose per-point factors restore E(Z_t) = 1."""
        if n < 100_000:
            raise ValueError("calibration needs at least 1e5 samples")
        total = np.zeros(grid.size)
        for start, stop in rnglib.chunk_bounds(n):
            r = rnglib.substream(seed, self.name, "calibrate", start)
            total += self._capped_raw_block(r, stop - start, grid).sum(axis=0)
        return replace(self, calibration=total / n)

    def sample_block(self, r: np.random.Generator, count: int, grid: Grid) -> np.ndarray:
        if self.calibration is None:
            raise GeneratorNotReadyError(
                "capped log-Gaussian generator must be calibrated before sampling"
            )
        if self.calibration.shape != (grid.size,):
            raise ValueError("calibration does not match the grid")
        return self._capped_raw_block(r, count, grid) / self.calibration


def sample_path(gen, grid: Grid, seed: int, replicate: int = 0) -> PathSample:
    """One independent realization of Z; a pure function of (gen, grid, seed)."""
    r = rnglib.substream(seed, gen.name, "path", replicate)
    values = gen.sample_block(r, 1, grid)[0]
    return PathSample(grid, values, gen.name, int(seed), int(replicate))


def sample_paths(gen, grid: Grid, n: int, seed: int = 0) -> np.ndarray:
    """n independent generator paths, one row per replicate."""
    if n < 1:
        raise ValueError("need at least one path")
    out = np.empty((n, grid.size))
    for start, stop in rnglib.chunk_bounds(n):
        r = rnglib.substream(seed, gen.name, "paths", start)
        out[start:stop] = gen.sample_block(r, stop - start, grid)
    return out


@dataclass(frozen=True, eq=False)
class GeneratorValidation:
    """Pointwise mean-one check plus sign and bound diagnostics."""

    means: np.ndarray
    ses: np.ndarray
    mean_ok: np.ndarray
    min_value: float
    max_path_max: float
    mean_path_max: float
    bound: float | None
    declared: str
    n: int
    note: str = (
        "mean-one checked at 3*SE per grid point with no multiple-testing "
        "correction; the check is diagnostic, not inferential"
    )

    @property
    def passed(self) -> bool:
        return bool(self.mean_ok.all()) and self.min_value >= 0.0


def validate_generator(gen, grid: Grid, n: int, seed: int = 0) -> GeneratorValidation:
    """Sample n paths and check nonnegativity and pointwise unit means."""
    if n < 1000:
        raise ValueError("validation needs at least 1000 samples")
    total = np.zeros(grid.size)
    total_sq = np.zeros(grid.size)
    min_value = np.inf
    max_path_max = -np.inf
    sum_path_max = 0.0
    for start, stop in rnglib.chunk_bounds(n):
        r = rnglib.substream(seed, gen.name, "validate", start)
        block = gen.sample_block(r, stop - start, grid)
        total += block.sum(axis=0)
        total_sq += (block**2).sum(axis=0)
        min_value = min(min_value, float(block.min()))
        row_max = block.max(axis=1)
        max_path_max = max(max_path_max, float(row_max.max()))
        sum_path_max += float(row_max.sum())
    means = total / n
    variances = np.maximum(total_sq - n * means**2, 0.0) / (n - 1)
    ses = np.sqrt(variances / n)
    mean_ok = np.abs(means - 1.0) <= 3.0 * ses
    return GeneratorValidation(
        means=means,
        ses=ses,
        mean_ok=mean_ok,
        min_value=min_value,
        max_path_max=max_path_max,
        mean_path_max=sum_path_max / n,
        bound=gen.bound(),
        declared=gen.declared,
        n=int(n),
    )


def mean_se(samples: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error; exact (x, 0) for degenerate samples."""
    if not np.all(np.isfinite(samples)):
        return math.inf, math.inf
    first = float(samples.flat[0])
    if np.all(samples == first):
        return first, 0.0
    n = samples.size
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n))


def generator_constant(gen, grid: Grid, n: int, seed: int = 0, paths: np.ndarray | None = None) -> DNormEstimate:
    """Monte Carlo mean of per-path maxima, i.e. E(max_t Z_t)."""
    if paths is None:
        paths = sample_paths(gen, grid, n, seed)
    row_max = paths.max(axis=1)
    value, se = mean_se(row_max)
    return DNormEstimate(value, se, row_max.size, gen.name, "max")
