"""Grids on [0,1] and bounded functions with finitely many point discontinuities.

Functions are represented by their values at the grid points plus a finite
list of point overrides (one override per isolated discontinuity). Suprema
and infima over [0,1] are taken as max/min over grid points, overrides
included; all provided generator families are continuous, so the grid error
vanishes with resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_GRID_SIZE = 201

NONPOSITIVE = "nonpositive"
UNRESTRICTED = "unrestricted"


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing points t_0 = 0 < ... < t_{n-1} = 1."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if pts[0] != 0.0 or pts[-1] != 1.0:
            raise ValueError("grid must start at 0 and end at 1")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.size

    def spacing(self) -> float:
        return float(np.min(np.diff(self.points)))

    def nearest_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.points - t)))

    def matches(self, other: "Grid") -> bool:
        return self.points.size == other.points.size and bool(
            np.array_equal(self.points, other.points)
        )


def make_grid(n: int) -> Grid:
    """Equally spaced grid of n points including both endpoints."""
    if n < 2:
        raise ValueError(f"grid size must be at least 2, got {n}")
    return Grid(np.linspace(0.0, 1.0, int(n)))


@dataclass(frozen=True, eq=False)
class EFunction:
    """Grid-sampled base values plus finitely many point overrides.

    ``sign=NONPOSITIVE`` asserts every value (overrides included) is <= 0.
    ``allow_infinite`` admits the -inf sentinel used for values below a
    distribution's lower endpoint; ordinary functions are finite.
    """

    grid: Grid
    base: np.ndarray
    overrides: tuple[tuple[int, float], ...] = ()
    sign: str = UNRESTRICTED
    fid: str = ""
    allow_infinite: bool = False

    def __post_init__(self):
        base = np.array(self.base, dtype=float)
        if base.shape != (self.grid.size,):
            raise ValueError("base values must have one entry per grid point")
        base.setflags(write=False)
        object.__setattr__(self, "base", base)

        overrides = tuple((int(i), float(v)) for i, v in self.overrides)
        if len(overrides) > self.grid.size:
            raise ValueError("more overrides than grid points")
        indices = [i for i, _ in overrides]
        if len(set(indices)) != len(indices):
            raise ValueError("override indices must be distinct")
        object.__setattr__(self, "overrides", overrides)

        values = base.copy()
        for i, v in overrides:
            if not 0 <= i < self.grid.size:
                raise IndexError(f"override index {i} is outside the grid")
            values[i] = v
        if self.allow_infinite:
            if np.any(np.isnan(values)) or np.any(values == np.inf):
                raise ValueError("only the -inf sentinel is permitted")
        elif not np.all(np.isfinite(values)):
            raise ValueError("function values must be finite")
        if self.sign == NONPOSITIVE:
            if np.any(values > 0):
                raise ValueError("nonpositive function has a positive value")
        elif self.sign != UNRESTRICTED:
            raise ValueError(f"unknown sign tag {self.sign!r}")
        values.setflags(write=False)
        object.__setattr__(self, "_values", values)

    @property
    def values(self) -> np.ndarray:
        """Per-grid-point values with overrides applied."""
        return self._values

    def value_at(self, i: int) -> float:
        """Override value at index i if present, else the base value."""
        if not 0 <= i < self.grid.size:
            raise IndexError(f"index {i} is outside the grid")
        return float(self._values[i])

    def abs_values(self) -> np.ndarray:
        return np.abs(self._values)

    def scaled(self, c: float) -> "EFunction":
        """Pointwise multiple c*f; the nonpositive tag survives only for c >= 0."""
        sign = self.sign if c >= 0 else UNRESTRICTED
        fid = f"{self.fid}*{c:g}" if self.fid else ""
        return EFunction(
            self.grid,
            c * self.base,
            tuple((i, c * v) for i, v in self.overrides),
            sign=sign,
            fid=fid,
            allow_infinite=self.allow_infinite,
        )


def sup_norm(f: EFunction) -> float:
    """Maximum of |f| over all grid points, overrides included."""
    return float(np.max(np.abs(f.values)))


def constant_function(grid: Grid, c: float, fid: str = "") -> EFunction:
    sign = NONPOSITIVE if c <= 0 else UNRESTRICTED
    return EFunction(grid, np.full(grid.size, float(c)), sign=sign, fid=fid)


def from_callable(grid: Grid, fn, fid: str = "", sign: str = UNRESTRICTED) -> EFunction:
    return EFunction(grid, np.asarray([fn(t) for t in grid.points], dtype=float), sign=sign, fid=fid)


def _step(grid: Grid, left: float, right: float, t0: float) -> np.ndarray:
    return np.where(grid.points < t0, left, right)


def default_bank(grid: Grid) -> list[EFunction]:
    """The canonical 20-function bank of nonpositive test functions.

    Constants, linear ramps, sinusoid-modulated negatives, two-block steps,
    smooth bumps, and point-mass-augmented variants. Override positions are
    resolved to the nearest grid point so the bank exists on any grid.
    """
    t = grid.points
    specs: list[tuple[str, np.ndarray, tuple[tuple[int, float], ...]]] = [
        ("const_1", np.full(grid.size, -1.0), ()),
        ("const_half", np.full(grid.size, -0.5), ()),
        ("const_3_2", np.full(grid.size, -1.5), ()),
        ("ramp_down", -t, ()),
        ("ramp_up", -(1.0 - t), ()),
        ("ramp_offset", -(0.2 + 0.8 * t), ()),
        ("ramp_mid", -(1.0 + t) / 2.0, ()),
        ("sine_1", -(0.6 + 0.4 * np.sin(2.0 * np.pi * t)), ()),
        ("cosine_1", -(0.75 + 0.25 * np.cos(4.0 * np.pi * t)), ()),
        ("sine_2", -(0.55 + 0.45 * np.sin(3.0 * np.pi * t)), ()),
        ("sine_3", -(0.5 + 0.3 * np.sin(5.0 * np.pi * t)), ()),
        ("step_shallow_deep", _step(grid, -0.3, -1.0, 0.5), ()),
        ("step_deep_shallow", _step(grid, -1.0, -0.4, 0.25), ()),
        ("step_late", _step(grid, -0.8, -0.2, 0.6), ()),
        ("step_early", _step(grid, -0.5, -1.0, 0.3), ()),
        ("parabola", -(0.3 + 0.7 * (2.0 * t - 1.0) ** 2), ()),
        ("exp_decay", -np.exp(-t), ()),
        ("spike_low", np.full(grid.size, -0.6), ((grid.nearest_index(1.0 / 3.0), -1.5),)),
        ("spike_on_ramp", -t, ((grid.nearest_index(0.5), -1.2),)),
        ("notch", np.full(grid.size, -1.0), ((grid.nearest_index(0.7), -0.25),)),
    ]
    return [
        EFunction(grid, base, overrides, sign=NONPOSITIVE, fid=fid)
        for fid, base, overrides in specs
    ]


def save_bank(functions: list[EFunction], table_path, overrides_path=None) -> None:
    """Write a bank as a plain-text table plus an override sidecar.

    Table: header row of ids, then one row per grid point with the t value in
    the first column and one base-value column per function. Sidecar: one line
    per override, "fid<TAB>index<TAB>value".
    """
    if not functions:
        raise ValueError("cannot save an empty bank")
    grid = functions[0].grid
    for f in functions:
        if not f.grid.matches(grid):
            raise ValueError("all bank functions must share one grid")
    header = "t\t" + "\t".join(f.fid for f in functions)
    lines = [header]
    for j in range(grid.size):
        row = [f"{grid.points[j]:.17g}"] + [f"{f.base[j]:.17g}" for f in functions]
        lines.append("\t".join(row))
    Path(table_path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    if overrides_path is not None:
        ov_lines = []
        for f in functions:
            for i, v in f.overrides:
                ov_lines.append(f"{f.fid}\t{i}\t{v:.17g}")
        Path(overrides_path).write_text("\n".join(ov_lines) + "\n", encoding="utf-8")


def load_bank(table_path, overrides_path=None) -> list[EFunction]:
    """Read a bank saved by :func:`save_bank`; sign tags are inferred."""
    text = Path(table_path).read_text(encoding="utf-8")
    rows = [line.split("\t") for line in text.splitlines() if line.strip()]
    if len(rows) < 3:
        raise ValueError("bank table needs a header and at least two grid rows")
    header = rows[0]
    if header[0] != "t":
        raise ValueError("bank table must start with a 't' column")
    fids = header[1:]
    data = np.asarray([[float(x) for x in row] for row in rows[1:]], dtype=float)
    grid = Grid(data[:, 0])

    overrides: dict[str, list[tuple[int, float]]] = {fid: [] for fid in fids}
    if overrides_path is not None and Path(overrides_path).exists():
        for line in Path(overrides_path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fid, idx, value = line.split("\t")
            if fid not in overrides:
                raise ValueError(f"override references unknown function id {fid!r}")
            overrides[fid].append((int(idx), float(value)))

    bank = []
    for k, fid in enumerate(fids):
        base = data[:, k + 1]
        ov = tuple(overrides[fid])
        values = base.copy()
        for i, v in ov:
            values[i] = v
        sign = NONPOSITIVE if np.all(values <= 0) else UNRESTRICTED
        bank.append(EFunction(grid, base, ov, sign=sign, fid=fid))
    return bank
