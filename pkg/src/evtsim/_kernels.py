"""Hot array kernels, numba-compiled with a pure-numpy fallback.

The Monte Carlo estimators spend almost all of their time in the per-path
reductions below. When numba is importable they are compiled with ``@njit``;
setting ``EVTSIM_NO_NUMBA=1`` (or running without numba installed) selects the
numpy implementations instead. ``benchmarks/bench_kernels.py`` compares both.

Path values are nonnegative; weights are nonnegative and may contain +inf
(lower-endpoint sentinels). The product convention is ``0 * inf = 0``: a grid
point where the path vanishes contributes nothing to the weighted extremes.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "weighted_sup",
    "weighted_inf",
    "count_below",
    "count_above",
    "scaled_max_update",
]


def weighted_sup_numpy(paths: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-path max over grid points of weights[j] * paths[i, j]."""
    with np.errstate(invalid="ignore"):
        prod = paths * weights[None, :]
    bad = ~np.isfinite(prod)
    if bad.any():
        # 0 * inf: contributes 0 where the path vanishes, inf where it does not.
        prod[bad] = np.where(paths[bad] > 0.0, np.inf, 0.0)
    return prod.max(axis=1)


def weighted_inf_numpy(paths: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-path min over grid points of weights[j] * paths[i, j]."""
    with np.errstate(invalid="ignore"):
        prod = paths * weights[None, :]
    bad = ~np.isfinite(prod)
    if bad.any():
        prod[bad] = np.where(paths[bad] > 0.0, np.inf, 0.0)
    return prod.min(axis=1)


def count_below_numpy(paths: np.ndarray, bound: np.ndarray, strict: bool) -> int:
    if strict:
        return int(np.count_nonzero(np.all(paths < bound[None, :], axis=1)))
    return int(np.count_nonzero(np.all(paths <= bound[None, :], axis=1)))


def count_above_numpy(paths: np.ndarray, bound: np.ndarray, strict: bool) -> int:
    if strict:
        return int(np.count_nonzero(np.all(paths > bound[None, :], axis=1)))
    return int(np.count_nonzero(np.all(paths >= bound[None, :], axis=1)))


def scaled_max_update_numpy(acc: np.ndarray, paths: np.ndarray, scale: np.ndarray) -> None:
    """In place: acc[i, j] = max(acc[i, j], scale[i] * paths[i, j])."""
    np.maximum(acc, paths * scale[:, None], out=acc)


def _numba_enabled() -> bool:
    flag = os.environ.get("EVTSIM_NO_NUMBA", "").strip().lower()
    if flag in {"1", "true", "yes", "on"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


if _numba_enabled():
    from numba import njit

    @njit(cache=True)
    def _nb_weighted_sup(paths, weights):
        n, g = paths.shape
        out = np.empty(n)
        for i in range(n):
            best = 0.0
            for j in range(g):
                v = paths[i, j]
                if v > 0.0:
                    x = weights[j] * v
                    if x > best:
                        best = x
            out[i] = best
        return out

    @njit(cache=True)
    def _nb_weighted_inf(paths, weights):
        n, g = paths.shape
        out = np.empty(n)
        for i in range(n):
            best = np.inf
            for j in range(g):
                v = paths[i, j]
                x = weights[j] * v if v > 0.0 else 0.0
                if x < best:
                    best = x
            out[i] = best
        return out

    @njit(cache=True)
    def _nb_count_below(paths, bound, strict):
        n, g = paths.shape
        count = 0
        for i in range(n):
            ok = True
            for j in range(g):
                v = paths[i, j]
                if strict:
                    if not v < bound[j]:
                        ok = False
                        break
                elif not v <= bound[j]:
                    ok = False
                    break
            if ok:
                count += 1
        return count

    @njit(cache=True)
    def _nb_count_above(paths, bound, strict):
        n, g = paths.shape
        count = 0
        for i in range(n):
            ok = True
            for j in range(g):
                v = paths[i, j]
                if strict:
                    if not v > bound[j]:
                        ok = False
                        break
                elif not v >= bound[j]:
                    ok = False
                    break
            if ok:
                count += 1
        return count

    @njit(cache=True)
    def _nb_scaled_max_update(acc, paths, scale):
        n, g = acc.shape
        for i in range(n):
            s = scale[i]
            for j in range(g):
                x = paths[i, j] * s
                if x > acc[i, j]:
                    acc[i, j] = x

    def count_below(paths, bound, strict=False):
        return int(_nb_count_below(paths, bound, bool(strict)))

    def count_above(paths, bound, strict=False):
        return int(_nb_count_above(paths, bound, bool(strict)))

    weighted_sup = _nb_weighted_sup
    weighted_inf = _nb_weighted_inf
    scaled_max_update = _nb_scaled_max_update
    BACKEND = "numba"
else:
    def count_below(paths, bound, strict=False):
        return count_below_numpy(paths, bound, bool(strict))

    def count_above(paths, bound, strict=False):
        return count_above_numpy(paths, bound, bool(strict))

    weighted_sup = weighted_sup_numpy
    weighted_inf = weighted_inf_numpy
    scaled_max_update = scaled_max_update_numpy
    BACKEND = "numpy"
