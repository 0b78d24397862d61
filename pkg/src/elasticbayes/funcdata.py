"""Grids, sampled functions, interpolation, quadrature and dataset ingestion.

Every curve in the library is a set of samples on a strictly increasing grid
in [0, 1], evaluated elsewhere by linear interpolation.  Quadrature is
trapezoidal throughout, which keeps all operators O(n) and consistent with
the piecewise-linear warping representation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid


class ValidationError(ValueError):
    """Input data violates a format or domain contract."""


def _float_1d(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise ValueError("expected a one-dimensional sequence")
    return a


@dataclass(frozen=True)
class Grid:
    """Strictly increasing sample points in [0, 1]."""

    points: np.ndarray

    def __post_init__(self):
        pts = _float_1d(self.points).copy()
        if pts.size < 2:
            raise ValueError("grid needs at least 2 points")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError("grid must lie within [0, 1]")
        if not np.all(np.diff(pts) > 0.0):
            raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and np.array_equal(self.points, other.points)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])


def uniform_grid(n: int) -> Grid:
    """Uniform grid of n points on [0, 1]."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return Grid(np.linspace(0.0, 1.0, n))


@dataclass(frozen=True)
class SampledFunction:
    """Real-valued function sampled on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _float_1d(self.values).copy()
        if vals.size != len(self.grid):
            raise ValueError("values and grid must have the same length")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __call__(self, t):
        return interp_linear(self, t)


@dataclass(frozen=True)
class Subject:
    subject_id: str
    observation: SampledFunction
    group_id: str | None = None


@dataclass(frozen=True)
class Dataset:
    subjects: list[Subject] = field(default_factory=list)

    def __post_init__(self):
        ids = [s.subject_id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("subject ids must be unique")

    def __len__(self) -> int:
        return len(self.subjects)

    def __iter__(self):
        return iter(self.subjects)


def interp_linear(f: SampledFunction, t):
    """Piecewise-linear interpolation of f at scalar or array t.

    Raises for points outside the span of f's grid; exact at grid points.
    """
    t_arr = np.asarray(t, dtype=float)
    lo, hi = f.grid.span
    if np.any(t_arr < lo) or np.any(t_arr > hi):
        raise ValueError(f"t outside the grid span [{lo}, {hi}]")
    out = np.interp(t_arr, f.grid.points, f.values)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def cumtrapz(f: SampledFunction) -> SampledFunction:
    """Trapezoidal cumulative integral on the same grid; first value 0."""
    vals = cumulative_trapezoid(f.values, f.grid.points, initial=0.0)
    return SampledFunction(f.grid, vals)


def resample(f: SampledFunction, g: Grid) -> SampledFunction:
    """Linearly interpolate f onto the grid g (g must lie within f's span)."""
    return SampledFunction(g, interp_linear(f, g.points))


def load_dataset(path, format: str = "long_csv") -> Dataset:
    """Read a long-format CSV (``subject_id,t,y[,group_id]``) into a Dataset."""
    if format != "long_csv":
        raise ValueError(f"unknown format: {format!r}")
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")

    by_subject: dict[str, list[tuple[float, float]]] = {}
    groups: dict[str, str | None] = {}
    order: list[str] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["subject_id", "t", "y"]:
            raise ValidationError(f"{path}: expected header 'subject_id,t,y[,group_id]'")
        has_group = len(header) >= 4 and header[3].strip() == "group_id"
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                raise ValidationError(f"{path}, line {lineno}: expected at least 3 columns")
            sid = row[0].strip()
            try:
                t = float(row[1])
                y = float(row[2])
            except ValueError as exc:
                raise ValidationError(f"{path}, line {lineno}: non-numeric t or y") from exc
            if not 0.0 <= t <= 1.0:
                raise ValidationError(f"{path}, line {lineno}: t={row[1]} outside [0, 1]")
            if not np.isfinite(y):
                raise ValidationError(f"{path}, line {lineno}: non-finite y")
            gid = row[3].strip() if has_group and len(row) > 3 and row[3].strip() else None
            if sid not in by_subject:
                by_subject[sid] = []
                groups[sid] = gid
                order.append(sid)
            elif gid is not None and groups[sid] is not None and gid != groups[sid]:
                raise ValidationError(
                    f"{path}, line {lineno}: conflicting group_id for subject {sid!r}"
                )
            elif groups[sid] is None:
                groups[sid] = gid
            by_subject[sid].append((t, y))

    subjects = []
    for sid in order:
        rows = sorted(by_subject[sid])
        ts = np.array([r[0] for r in rows])
        if np.any(np.diff(ts) == 0.0):
            dup = ts[np.flatnonzero(np.diff(ts) == 0.0)[0]]
            raise ValidationError(f"{path}: duplicate time t={dup:g} for subject {sid!r}")
        ys = np.array([r[1] for r in rows])
        subjects.append(Subject(sid, SampledFunction(Grid(ts), ys), groups[sid]))
    return Dataset(subjects)


def save_dataset(dataset: Dataset, path, format: str = "long_csv") -> None:
    """Write a Dataset to long-format CSV with 17 significant digits."""
    if format != "long_csv":
        raise ValueError(f"unknown format: {format!r}")
    has_group = any(s.group_id is not None for s in dataset)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["subject_id", "t", "y"] + (["group_id"] if has_group else [])
        writer.writerow(header)
        for s in dataset:
            for t, y in zip(s.observation.grid.points, s.observation.values):
                row = [s.subject_id, f"{t:.17g}", f"{y:.17g}"]
                if has_group:
                    row.append(s.group_id or "")
                writer.writerow(row)
