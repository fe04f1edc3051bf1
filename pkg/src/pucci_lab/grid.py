"""Closed-form planar domains, uniform lattices and grid-aligned scalar fields.

Domains are predicates evaluated per node. A lattice is anchored at the lower
left corner of the domain's bounding box and padded by one node on every side,
so every interior node has its eight stencil neighbours inside the array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EmptyInterior, EmptyMask, NonFinite, SpecError

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2

# predicates are evaluated with an absolute slack of _REL_TOL * h
_REL_TOL = 1e-9


class DomainSpec:
    """Base class for closed-form domains.

    ``inside`` is the open set (with slack ``tol`` pulled inwards), ``closed``
    the closure (with slack pushed outwards).
    """

    kind: str = "abstract"

    def bbox(self) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def inside(self, x, y, tol=0.0):
        raise NotImplementedError

    def closed(self, x, y, tol=0.0):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __and__(self, other):
        return Intersection(self, other)

    def __or__(self, other):
        return Union(self, other)

    def __sub__(self, other):
        return Difference(self, other)


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise SpecError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Rectangle(DomainSpec):
    x0: float
    x1: float
    y0: float
    y1: float
    kind = "rectangle"

    def __post_init__(self):
        _positive("rectangle width", self.x1 - self.x0)
        _positive("rectangle height", self.y1 - self.y0)

    def bbox(self):
        return (self.x0, self.x1, self.y0, self.y1)

    def inside(self, x, y, tol=0.0):
        return (x > self.x0 + tol) & (x < self.x1 - tol) & (y > self.y0 + tol) & (y < self.y1 - tol)

    def closed(self, x, y, tol=0.0):
        return (x >= self.x0 - tol) & (x <= self.x1 + tol) & (y >= self.y0 - tol) & (y <= self.y1 + tol)

    def to_dict(self):
        return {"kind": self.kind, "x": [self.x0, self.x1], "y": [self.y0, self.y1]}


@dataclass(frozen=True)
class Disc(DomainSpec):
    cx: float
    cy: float
    radius: float
    kind = "disc"

    def __post_init__(self):
        _positive("radius", self.radius)

    def bbox(self):
        r = self.radius
        return (self.cx - r, self.cx + r, self.cy - r, self.cy + r)

    def _gap(self, x, y):
        return self.radius - np.hypot(np.asarray(x) - self.cx, np.asarray(y) - self.cy)

    def inside(self, x, y, tol=0.0):
        return self._gap(x, y) > tol

    def closed(self, x, y, tol=0.0):
        return self._gap(x, y) >= -tol

    def to_dict(self):
        return {"kind": self.kind, "center": [self.cx, self.cy], "radius": self.radius}


@dataclass(frozen=True, init=False)
class StripTruncated(Rectangle):
    """The strip [0, M] x R cut to [0, M] x [-L/2, L/2]."""

    kind = "strip_truncated"

    def __init__(self, M: float, L: float):
        _positive("strip width M", M)
        _positive("strip length L", L)
        object.__setattr__(self, "x0", 0.0)
        object.__setattr__(self, "x1", float(M))
        object.__setattr__(self, "y0", -0.5 * L)
        object.__setattr__(self, "y1", 0.5 * L)

    @property
    def M(self):
        return self.x1

    @property
    def L(self):
        return self.y1 - self.y0

    def to_dict(self):
        return {"kind": self.kind, "M": self.M, "L": self.L}


@dataclass(frozen=True)
class EllipseSegment(DomainSpec):
    """Part of the ellipse sigma^2 <= 1 beyond the half-axis cut.

    ``b`` and ``c`` are the semi-axes along x1 and x2. The cut keeps the points
    with ``side * (x_axis - center_axis) > semi_axis / 2``.
    """

    cx: float
    cy: float
    b: float
    c: float
    axis: int = 0
    side: int = 1
    kind = "ellipse_segment"

    def __post_init__(self):
        _positive("b", self.b)
        _positive("c", self.c)
        if self.axis not in (0, 1) or self.side not in (1, -1):
            raise SpecError("ellipse cut needs axis in {0, 1} and side in {+1, -1}")

    def bbox(self):
        x0, x1 = self.cx - self.b, self.cx + self.b
        y0, y1 = self.cy - self.c, self.cy + self.c
        if self.axis == 0:
            if self.side > 0:
                x0 = self.cx + 0.5 * self.b
            else:
                x1 = self.cx - 0.5 * self.b
        else:
            if self.side > 0:
                y0 = self.cy + 0.5 * self.c
            else:
                y1 = self.cy - 0.5 * self.c
        return (x0, x1, y0, y1)

    def sigma2(self, x, y):
        return ((np.asarray(x) - self.cx) / self.b) ** 2 + ((np.asarray(y) - self.cy) / self.c) ** 2

    def _cut_gap(self, x, y):
        if self.axis == 0:
            return self.side * (np.asarray(x) - self.cx) - 0.5 * self.b
        return self.side * (np.asarray(y) - self.cy) - 0.5 * self.c

    def _ellipse_gap(self, x, y):
        # approximate distance to the ellipse, good enough for a slack test
        return 0.5 * (1.0 - self.sigma2(x, y)) * min(self.b, self.c)

    def inside(self, x, y, tol=0.0):
        return (self._ellipse_gap(x, y) > tol) & (self._cut_gap(x, y) > tol)

    def closed(self, x, y, tol=0.0):
        return (self._ellipse_gap(x, y) >= -tol) & (self._cut_gap(x, y) >= -tol)

    def to_dict(self):
        return {
            "kind": self.kind,
            "center": [self.cx, self.cy],
            "b": self.b,
            "c": self.c,
            "axis": self.axis,
            "side": self.side,
        }


@dataclass(frozen=True)
class Union(DomainSpec):
    left: DomainSpec
    right: DomainSpec
    kind = "union"

    def bbox(self):
        a, b = self.left.bbox(), self.right.bbox()
        return (min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), max(a[3], b[3]))

    def inside(self, x, y, tol=0.0):
        return self.left.inside(x, y, tol) | self.right.inside(x, y, tol)

    def closed(self, x, y, tol=0.0):
        return self.left.closed(x, y, tol) | self.right.closed(x, y, tol)

    def to_dict(self):
        return {"kind": self.kind, "parts": [self.left.to_dict(), self.right.to_dict()]}


@dataclass(frozen=True)
class Intersection(DomainSpec):
    left: DomainSpec
    right: DomainSpec
    kind = "intersection"

    def bbox(self):
        a, b = self.left.bbox(), self.right.bbox()
        box = (max(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), min(a[3], b[3]))
        if box[0] >= box[1] or box[2] >= box[3]:
            raise SpecError("intersection has empty bounding box")
        return box

    def inside(self, x, y, tol=0.0):
        return self.left.inside(x, y, tol) & self.right.inside(x, y, tol)

    def closed(self, x, y, tol=0.0):
        return self.left.closed(x, y, tol) & self.right.closed(x, y, tol)

    def to_dict(self):
        return {"kind": self.kind, "parts": [self.left.to_dict(), self.right.to_dict()]}


@dataclass(frozen=True)
class Difference(DomainSpec):
    left: DomainSpec
    right: DomainSpec
    kind = "difference"

    def bbox(self):
        return self.left.bbox()

    def inside(self, x, y, tol=0.0):
        return self.left.inside(x, y, tol) & ~self.right.closed(x, y, tol)

    def closed(self, x, y, tol=0.0):
        return self.left.closed(x, y, tol) & ~self.right.inside(x, y, tol)

    def to_dict(self):
        return {"kind": self.kind, "parts": [self.left.to_dict(), self.right.to_dict()]}


def domain_from_dict(d: dict) -> DomainSpec:
    """Inverse of ``DomainSpec.to_dict``; raises SpecError on malformed input."""
    try:
        kind = d["kind"]
        if kind == "rectangle":
            (x0, x1), (y0, y1) = d["x"], d["y"]
            return Rectangle(float(x0), float(x1), float(y0), float(y1))
        if kind == "disc":
            cx, cy = d.get("center", (0.0, 0.0))
            return Disc(float(cx), float(cy), float(d["radius"]))
        if kind == "strip_truncated":
            return StripTruncated(float(d["M"]), float(d["L"]))
        if kind == "ellipse_segment":
            cx, cy = d.get("center", (0.0, 0.0))
            return EllipseSegment(
                float(cx), float(cy), float(d["b"]), float(d["c"]),
                int(d.get("axis", 0)), int(d.get("side", 1)),
            )
        if kind in ("union", "intersection", "difference"):
            left, right = (domain_from_dict(p) for p in d["parts"])
            return {"union": Union, "intersection": Intersection, "difference": Difference}[kind](left, right)
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"malformed domain block {d!r}: {exc}") from exc
    raise SpecError(f"unknown domain kind {kind!r}")


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice with a per-node class label (exterior/boundary/interior).

    Arrays are indexed ``[iy, ix]``; node (iy, ix) sits at
    ``origin + (ix * h, iy * h)``.
    """

    h: float
    nx: int
    ny: int
    origin: tuple[float, float]
    point_class: np.ndarray
    domain: DomainSpec | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def xs(self):
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def ys(self):
        return self.origin[1] + self.h * np.arange(self.ny)

    @property
    def X(self):
        if "X" not in self._cache:
            X, Y = np.meshgrid(self.xs, self.ys)
            X.flags.writeable = False
            Y.flags.writeable = False
            self._cache["X"], self._cache["Y"] = X, Y
        return self._cache["X"]

    @property
    def Y(self):
        self.X
        return self._cache["Y"]

    @property
    def interior(self):
        return self.point_class == INTERIOR

    @property
    def boundary(self):
        return self.point_class == BOUNDARY

    @property
    def active(self):
        """Interior and boundary nodes: where fields carry meaningful values."""
        return self.point_class != EXTERIOR

    @property
    def n_interior(self):
        return int(np.count_nonzero(self.interior))

    def position(self, iy, ix):
        return (self.origin[0] + ix * self.h, self.origin[1] + iy * self.h)

    def nearest_interior(self, point) -> tuple[int, int]:
        """Interior node closest to ``point``."""
        d2 = (self.X - point[0]) ** 2 + (self.Y - point[1]) ** 2
        d2 = np.where(self.interior, d2, np.inf)
        iy, ix = np.unravel_index(np.argmin(d2), d2.shape)
        return int(iy), int(ix)


def build_grid(domain: DomainSpec, h: float) -> Grid:
    if not (h > 0 and math.isfinite(h)):
        raise SpecError(f"grid spacing must be positive, got {h!r}")
    x0, x1, y0, y1 = domain.bbox()
    if not all(math.isfinite(v) for v in (x0, x1, y0, y1)):
        raise SpecError("domain bounding box must be finite")
    nx = int(math.ceil((x1 - x0) / h - 1e-9)) + 3
    ny = int(math.ceil((y1 - y0) / h - 1e-9)) + 3
    xs = x0 + h * (np.arange(nx) - 1)
    ys = y0 + h * (np.arange(ny) - 1)
    X, Y = np.meshgrid(xs, ys)
    tol = _REL_TOL * h

    inside = domain.inside(X, Y, tol)
    closed = domain.closed(X, Y, tol)
    interior = inside.copy()
    interior[:, 1:] &= closed[:, :-1]
    interior[:, :-1] &= closed[:, 1:]
    interior[1:, :] &= closed[:-1, :]
    interior[:-1, :] &= closed[1:, :]
    # the padding ring can never hold interior nodes
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    if not interior.any():
        raise EmptyInterior(f"no interior lattice point for h={h}")

    near = np.zeros_like(interior)
    padded = np.pad(interior, 1)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            near |= padded[1 + dy:1 + dy + ny, 1 + dx:1 + dx + nx]
    point_class = np.full((ny, nx), EXTERIOR, dtype=np.int8)
    point_class[near] = BOUNDARY
    point_class[interior] = INTERIOR
    point_class.flags.writeable = False
    return Grid(h=float(h), nx=nx, ny=ny, origin=(float(xs[0]), float(ys[0])),
                point_class=point_class, domain=domain)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != self.grid.shape:
            raise SpecError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        v[~self.grid.active] = 0.0
        if not np.all(np.isfinite(v[self.grid.active])):
            raise NonFinite("field has non-finite values at active nodes")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def interior_values(self):
        return self.values[self.grid.interior]

    def sup_norm(self, where="active"):
        mask = self.grid.interior if where == "interior" else self.grid.active
        return float(np.max(np.abs(self.values[mask])))

    def scaled(self, t: float) -> "ScalarField":
        return ScalarField(self.grid, t * self.values)

    def at(self, point) -> float:
        ix = int(round((point[0] - self.grid.origin[0]) / self.grid.h))
        iy = int(round((point[1] - self.grid.origin[1]) / self.grid.h))
        return float(self.values[iy, ix])


def _evaluate(fn, X, Y):
    try:
        out = fn(X, Y)
        out = np.broadcast_to(np.asarray(out, dtype=float), X.shape)
    except (TypeError, ValueError):
        out = np.vectorize(lambda a, b: float(fn(a, b)))(X, Y)
    return np.array(out, dtype=float)


def sample_field(grid: Grid, fn: Callable | float) -> ScalarField:
    """Evaluate ``fn(x1, x2)`` at interior and boundary nodes.

    ``fn`` may be a constant. Exterior nodes are set to zero and never read.
    """
    mask = grid.active
    values = np.zeros(grid.shape)
    if callable(fn):
        vals = _evaluate(fn, grid.X[mask], grid.Y[mask])
    else:
        vals = np.full(np.count_nonzero(mask), float(fn))
    if not np.all(np.isfinite(vals)):
        bad = np.flatnonzero(~np.isfinite(vals))[0]
        x, y = grid.X[mask][bad], grid.Y[mask][bad]
        raise NonFinite(f"function is not finite at node ({x:.6g}, {y:.6g})")
    values[mask] = vals
    return ScalarField(grid, values)


def mask_nodes(grid: Grid, mask: DomainSpec) -> np.ndarray:
    """Boolean array of active nodes lying in the closed mask."""
    return grid.active & mask.closed(grid.X, grid.Y, _REL_TOL * grid.h)


def sup_inf(field: ScalarField, mask: DomainSpec) -> tuple[float, float]:
    sel = mask_nodes(field.grid, mask)
    if not sel.any():
        raise EmptyMask("no grid node lies in the mask")
    vals = field.values[sel]
    return float(vals.max()), float(vals.min())


def scale_domain(domain: DomainSpec, R: float) -> DomainSpec:
    """The image of ``domain`` under x -> R x."""
    _positive("scale factor", R)
    if isinstance(domain, StripTruncated):
        return StripTruncated(R * domain.M, R * domain.L)
    if isinstance(domain, Rectangle):
        return Rectangle(R * domain.x0, R * domain.x1, R * domain.y0, R * domain.y1)
    if isinstance(domain, Disc):
        return Disc(R * domain.cx, R * domain.cy, R * domain.radius)
    if isinstance(domain, EllipseSegment):
        return EllipseSegment(R * domain.cx, R * domain.cy, R * domain.b, R * domain.c, domain.axis, domain.side)
    if isinstance(domain, (Union, Intersection, Difference)):
        return type(domain)(scale_domain(domain.left, R), scale_domain(domain.right, R))
    raise SpecError(f"cannot scale domain of kind {getattr(domain, 'kind', type(domain).__name__)!r}")
