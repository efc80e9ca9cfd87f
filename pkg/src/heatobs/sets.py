"""Set descriptions, rasterization onto a grid, and the thickness analyzer.

A set E is gamma-thick at scale L when every cube of side L meets E in
measure at least gamma * L^n.  On the grid the infimum over cube positions
is replaced by a minimum over grid-aligned windows with periodic wrap,
computed from prefix sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .errors import ConfigError, GridMismatch, ScaleTooCoarse, ScaleTooFine
from .grid import TorusGrid, _as_point, _frozen


class SetSpec:
    """Base class; subclasses implement ``contains(coords)``.

    ``coords`` is a list of n arrays that broadcast against each other
    (one per axis).
    """

    kind = "abstract"

    def contains(self, coords) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class FullSpace(SetSpec):
    kind = "full"

    def contains(self, coords):
        return np.ones(np.broadcast_shapes(*[c.shape for c in coords]), dtype=bool)

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Ball(SetSpec):
    """Open Euclidean ball ``|x - center| < radius``."""

    center: Tuple[float, ...]
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        _positive("radius", self.radius)

    def contains(self, coords):
        c = _as_point(self.center, len(coords))
        d2 = sum((x - c[i]) ** 2 for i, x in enumerate(coords))
        return d2 < self.radius ** 2

    def to_dict(self):
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box(SetSpec):
    """Half-open box ``corner <= x < corner + sides``."""

    corner: Tuple[float, ...]
    sides: Tuple[float, ...]
    kind = "box"

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(float(c) for c in np.atleast_1d(self.corner)))
        object.__setattr__(self, "sides", tuple(float(s) for s in np.atleast_1d(self.sides)))
        for s in self.sides:
            _positive("box side", s)

    def contains(self, coords):
        n = len(coords)
        lo = _as_point(self.corner, n)
        sides = np.broadcast_to(np.asarray(self.sides), (n,))
        inside = True
        for i, x in enumerate(coords):
            inside = inside & (x >= lo[i]) & (x < lo[i] + sides[i])
        return np.asarray(inside)

    def to_dict(self):
        return {"kind": self.kind, "corner": list(self.corner), "sides": list(self.sides)}


@dataclass(frozen=True)
class PeriodicStripes(SetSpec):
    """Points with ``(x[axis] - phase) mod period < width``."""

    axis: int = 0
    width: float = 0.5
    period: float = 1.0
    phase: float = 0.0
    kind = "stripes"

    def __post_init__(self):
        _positive("width", self.width)
        _positive("period", self.period)
        if self.width > self.period:
            raise ValueError("stripe width cannot exceed the period")
        if self.axis < 0:
            raise ValueError("axis must be nonnegative")

    def contains(self, coords):
        x = coords[self.axis]
        inside = np.mod(x - self.phase, self.period) < self.width
        return np.broadcast_to(inside, np.broadcast_shapes(*[c.shape for c in coords]))

    def to_dict(self):
        return {"kind": self.kind, "axis": self.axis, "width": self.width,
                "period": self.period, "phase": self.phase}


@dataclass(frozen=True)
class PeriodicPattern(SetSpec):
    """Repeat ``cell`` (described on [0, period)^n) periodically."""

    cell: SetSpec
    period: float
    kind = "pattern"

    def __post_init__(self):
        _positive("period", self.period)

    def contains(self, coords):
        reduced = [np.mod(x, self.period) for x in coords]
        return self.cell.contains(reduced)

    def to_dict(self):
        return {"kind": self.kind, "cell": self.cell.to_dict(), "period": self.period}


@dataclass(frozen=True)
class Union(SetSpec):
    parts: Tuple[SetSpec, ...]
    kind = "union"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains(self, coords):
        out = np.zeros(np.broadcast_shapes(*[c.shape for c in coords]), dtype=bool)
        for p in self.parts:
            out = out | p.contains(coords)
        return out

    def to_dict(self):
        return {"kind": self.kind, "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True)
class Intersection(SetSpec):
    parts: Tuple[SetSpec, ...]
    kind = "intersection"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains(self, coords):
        out = np.ones(np.broadcast_shapes(*[c.shape for c in coords]), dtype=bool)
        for p in self.parts:
            out = out & p.contains(coords)
        return out

    def to_dict(self):
        return {"kind": self.kind, "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True)
class Complement(SetSpec):
    spec: SetSpec
    kind = "complement"

    def contains(self, coords):
        return ~np.asarray(self.spec.contains(coords), dtype=bool)

    def to_dict(self):
        return {"kind": self.kind, "spec": self.spec.to_dict()}


_FIELDS = {
    "full": (FullSpace, set()),
    "ball": (Ball, {"center", "radius"}),
    "box": (Box, {"corner", "sides"}),
    "stripes": (PeriodicStripes, {"axis", "width", "period", "phase"}),
    "pattern": (PeriodicPattern, {"cell", "period"}),
    "union": (Union, {"parts"}),
    "intersection": (Intersection, {"parts"}),
    "complement": (Complement, {"spec"}),
}


def spec_from_dict(data: dict, path: str = "set") -> SetSpec:
    """Parse the structured form produced by ``SetSpec.to_dict``.

    Unknown keys raise :class:`ConfigError` naming the offending field.
    """
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError(f"{path}: expected a mapping with a 'kind' entry")
    kind = data["kind"]
    if kind not in _FIELDS:
        raise ConfigError(f"{path}.kind: unknown set kind {kind!r}")
    cls, allowed = _FIELDS[kind]
    extra = set(data) - allowed - {"kind"}
    if extra:
        raise ConfigError(f"{path}: unknown key(s) {sorted(extra)}")
    args = {k: v for k, v in data.items() if k != "kind"}
    try:
        if kind in ("union", "intersection"):
            args["parts"] = [spec_from_dict(p, f"{path}.parts[{i}]") for i, p in enumerate(args.get("parts", []))]
        elif kind == "complement":
            args["spec"] = spec_from_dict(args["spec"], f"{path}.spec")
        elif kind == "pattern":
            args["cell"] = spec_from_dict(args["cell"], f"{path}.cell")
        return cls(**args)
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True, eq=False)
class IndicatorMask:
    """Boolean flag per grid cell."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=bool)
        if vals.size != self.grid.size:
            raise GridMismatch(f"mask has {vals.size} cells, grid has {self.grid.size}")
        object.__setattr__(self, "values", _frozen(vals.reshape(self.grid.shape)))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.values))

    def measure(self) -> float:
        return self.count * self.grid.cell_volume

    def is_empty(self) -> bool:
        return self.count == 0

    def complement(self) -> "IndicatorMask":
        return IndicatorMask(self.grid, ~self.values)

    def _other(self, other):
        if self.grid != other.grid:
            raise GridMismatch("masks live on different grids")
        return other.values

    def __and__(self, other):
        return IndicatorMask(self.grid, self.values & self._other(other))

    def __or__(self, other):
        return IndicatorMask(self.grid, self.values | self._other(other))

    def __eq__(self, other):
        return isinstance(other, IndicatorMask) and self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None


def rasterize(spec: SetSpec, grid: TorusGrid) -> IndicatorMask:
    """Cell is in the mask iff its center belongs to ``spec``."""
    coords = [grid.coordinate(ax) for ax in range(grid.n)]
    vals = np.broadcast_to(spec.contains(coords), grid.shape)
    return IndicatorMask(grid, vals)


def window_cells(grid: TorusGrid, L: float) -> int:
    """Number of cells per axis of a side-L window; validates the scale."""
    h = grid.spacing
    if L < 2 * h * (1 - 1e-12):
        raise ScaleTooFine(f"L = {L} is below two cells (h = {h})")
    if L > grid.side_length * (1 + 1e-12):
        raise ScaleTooCoarse(f"L = {L} exceeds the torus side {grid.side_length}")
    return max(2, min(grid.samples, int(round(L / h))))


def window_counts(values: np.ndarray, w: int) -> np.ndarray:
    """Count of true cells in every periodic w^n window.

    Entry ``idx`` is the window whose lowest corner cell is ``idx``.  One
    cumulative sum per axis, so the cost is O(M^n) independent of w.
    """
    acc = np.asarray(values, dtype=np.int64)
    for ax in range(acc.ndim):
        m = acc.shape[ax]
        ext = np.concatenate([acc, np.take(acc, np.arange(w - 1), axis=ax)], axis=ax) if w > 1 else acc
        cs = np.cumsum(ext, axis=ax)
        zero = np.zeros_like(np.take(cs, [0], axis=ax))
        cs = np.concatenate([zero, cs], axis=ax)
        acc = np.take(cs, np.arange(w, w + m), axis=ax) - np.take(cs, np.arange(m), axis=ax)
    return acc


@dataclass(frozen=True)
class ThicknessReport:
    L: float
    gamma_min: float
    gamma_uncertainty: float
    argmin_offset: Tuple[int, ...]
    window_cells: int
    gamma_max: float
    gamma_mean: float
    histogram: Tuple[Tuple[float, int], ...] = field(default=())

    @property
    def argmin_corner(self):
        """Alias kept for readability in reports."""
        return self.argmin_offset


def thickness_profile(mask: IndicatorMask, L: float, bins: int = 10) -> ThicknessReport:
    """Minimum window density of ``mask`` at scale ``L`` over all grid offsets.

    Raises
    ------
    ScaleTooFine, ScaleTooCoarse
    """
    g = mask.grid
    w = window_cells(g, L)
    counts = window_counts(mask.values, w)
    scale = g.cell_volume / L ** g.n
    dens = np.clip(counts * scale, 0.0, 1.0)
    idx = int(np.argmin(counts))
    hist, edges = np.histogram(dens, bins=bins, range=(0.0, 1.0))
    return ThicknessReport(
        L=float(L),
        gamma_min=float(dens.flat[idx]),
        gamma_uncertainty=g.n * 2.0 * g.spacing / L,
        argmin_offset=tuple(int(i) for i in np.unravel_index(idx, counts.shape)),
        window_cells=w,
        gamma_max=float(dens.max()),
        gamma_mean=float(dens.mean()),
        histogram=tuple((float(e), int(c)) for e, c in zip(edges[:-1], hist)),
    )


def is_thick(mask: IndicatorMask, gamma: float, L: float, tol: float = 0.0) -> bool:
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return thickness_profile(mask, L).gamma_min >= gamma - tol
