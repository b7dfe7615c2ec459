"""Domains, structured grids and analytic bathymetries.

Three domain families are supported: the unit disk and the annulus
``a < |x| < 1`` (both on polar grids) and an origin-centred rectangle
(Cartesian grid). Node arrays always have shape ``(n1 + 1, n2)`` for polar
grids (radius along axis 0, periodic angle along axis 1) and
``(nx + 1, ny + 1)`` for rectangles, indexed ``[i, j]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

INTERIOR = 0
OUTER_BOUNDARY = 1
ISLAND_BOUNDARY = 2  # island i carries tag ISLAND_BOUNDARY + i


class DomainKind(str, Enum):
    DISK = "disk"
    RECTANGLE = "rectangle"
    ANNULUS = "annulus"


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    kind: DomainKind
    width: float = 2.0
    height: float = 1.0
    inner_radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if self.kind is DomainKind.ANNULUS:
            if not 0.0 < self.inner_radius < 1.0:
                raise GeometryError(
                    f"annulus inner_radius must lie in (0, 1), got {self.inner_radius}")
        if self.kind is DomainKind.RECTANGLE:
            if not (self.width > 0 and self.height > 0
                    and math.isfinite(self.width) and math.isfinite(self.height)):
                raise GeometryError("rectangle width and height must be positive and finite")

    @classmethod
    def disk(cls) -> "DomainSpec":
        return cls(DomainKind.DISK)

    @classmethod
    def rectangle(cls, width: float, height: float) -> "DomainSpec":
        return cls(DomainKind.RECTANGLE, width=float(width), height=float(height))

    @classmethod
    def annulus(cls, inner_radius: float) -> "DomainSpec":
        return cls(DomainKind.ANNULUS, inner_radius=float(inner_radius))

    @property
    def island_count(self) -> int:
        return 1 if self.kind is DomainKind.ANNULUS else 0

    @property
    def is_polar(self) -> bool:
        return self.kind is not DomainKind.RECTANGLE

    @property
    def diameter(self) -> float:
        if self.kind is DomainKind.RECTANGLE:
            return math.hypot(self.width, self.height)
        return 2.0

    @property
    def area(self) -> float:
        if self.kind is DomainKind.RECTANGLE:
            return self.width * self.height
        return math.pi * (1.0 - self.inner_radius ** 2)

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        if self.kind is DomainKind.RECTANGLE:
            return ((np.abs(x) <= self.width / 2 + tol)
                    & (np.abs(y) <= self.height / 2 + tol))
        r = np.hypot(x, y)
        return (r <= 1.0 + tol) & (r >= self.inner_radius - tol)


def distance_to_boundary(spec: DomainSpec, points, check: bool = True) -> np.ndarray:
    """Euclidean distance from each point to the boundary of the domain."""
    p = np.asarray(points, dtype=float)
    if check and not np.all(spec.contains(p, tol=1e-9)):
        raise GeometryError("point outside the domain")
    x, y = p[..., 0], p[..., 1]
    if spec.kind is DomainKind.RECTANGLE:
        dx = spec.width / 2 - np.abs(x)
        dy = spec.height / 2 - np.abs(y)
        d = np.minimum(dx, dy)
    else:
        r = np.hypot(x, y)
        d = 1.0 - r
        if spec.kind is DomainKind.ANNULUS:
            d = np.minimum(d, r - spec.inner_radius)
    d = np.maximum(d, 0.0)
    return d if d.ndim else float(d)


def project_to_domain(spec: DomainSpec, points, margin: float = 0.0):
    """Clamp points into the closed domain along the boundary normal.

    Returns ``(projected, distance_moved)``.
    """
    p = np.array(points, dtype=float, copy=True)
    if spec.kind is DomainKind.RECTANGLE:
        hw, hh = spec.width / 2 - margin, spec.height / 2 - margin
        p[..., 0] = np.clip(p[..., 0], -hw, hw)
        p[..., 1] = np.clip(p[..., 1], -hh, hh)
    else:
        r = np.hypot(p[..., 0], p[..., 1])
        rmax = 1.0 - margin
        rmin = spec.inner_radius + margin if spec.kind is DomainKind.ANNULUS else 0.0
        rc = np.clip(r, rmin, rmax)
        scale = np.where(r > 0, rc / np.where(r > 0, r, 1.0), 1.0)
        p[..., 0] *= scale
        p[..., 1] *= scale
    moved = np.linalg.norm(p - np.asarray(points, dtype=float), axis=-1)
    return p, moved


@dataclass(frozen=True, eq=False)
class Grid:
    """Structured node grid with dual-cell measures and boundary tags."""

    domain: DomainSpec
    n1: int
    n2: int
    axis1: np.ndarray  # x nodes (rectangle) or r nodes (polar)
    axis2: np.ndarray  # y nodes (rectangle) or theta nodes (polar)
    x: np.ndarray
    y: np.ndarray
    measure: np.ndarray
    tags: np.ndarray
    d1: float
    d2: float
    unique_id: np.ndarray = field(repr=False)
    n_unique: int = 0

    @property
    def shape(self):
        return self.x.shape

    @property
    def is_polar(self) -> bool:
        return self.domain.is_polar

    @property
    def has_center(self) -> bool:
        return self.domain.kind is DomainKind.DISK

    @property
    def spacing(self) -> float:
        """Nominal mesh size used by CFL limits (radial step on polar grids)."""
        return self.d1 if self.is_polar else min(self.d1, self.d2)

    @property
    def points(self) -> np.ndarray:
        return np.stack([self.x, self.y], axis=-1)

    def boundary_mask(self) -> np.ndarray:
        return self.tags != INTERIOR

    def island_mask(self, index: int = 0) -> np.ndarray:
        return self.tags == ISLAND_BOUNDARY + index

    def integrate(self, values) -> float:
        return float(np.sum(np.asarray(values) * self.measure))

    def sample(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        v = np.broadcast_to(np.asarray(fn(self.x, self.y), dtype=float), self.shape).copy()
        if self.has_center:
            v[0, :] = v[0, 0]
        return v


def _resolve_resolution(spec: DomainSpec, resolution) -> tuple[int, int]:
    if np.ndim(resolution) == 0:
        n = int(resolution)
        if spec.is_polar:
            return n, 2 * n
        ny = max(1, int(round(n * spec.height / spec.width)))
        return n, ny
    n1, n2 = (int(v) for v in resolution)
    return n1, n2


def build_grid(spec: DomainSpec, resolution) -> Grid:
    """Build the node grid for ``spec``.

    ``resolution`` is either a pair of per-axis cell counts or a single
    integer ``n``: polar grids then get ``n`` radial by ``2n`` angular cells,
    rectangles ``n`` cells along the width and a matching count along the
    height (square cells).
    """
    n1, n2 = _resolve_resolution(spec, resolution)
    if n1 < 8 or n2 < 8:
        raise GeometryError(f"resolution must be at least 8 per axis, got {(n1, n2)}")

    if spec.kind is DomainKind.RECTANGLE:
        xs = np.linspace(-spec.width / 2, spec.width / 2, n1 + 1)
        ys = np.linspace(-spec.height / 2, spec.height / 2, n2 + 1)
        hx, hy = spec.width / n1, spec.height / n2
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        wx = np.full(n1 + 1, hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(n2 + 1, hy)
        wy[[0, -1]] *= 0.5
        measure = np.outer(wx, wy)
        tags = np.zeros(X.shape, dtype=np.int64)
        tags[[0, -1], :] = OUTER_BOUNDARY
        tags[:, [0, -1]] = OUTER_BOUNDARY
        uid = np.arange(X.size).reshape(X.shape)
        return Grid(spec, n1, n2, xs, ys, X, Y, measure, tags, hx, hy, uid, X.size)

    r0 = spec.inner_radius if spec.kind is DomainKind.ANNULUS else 0.0
    dr = (1.0 - r0) / n1
    dth = 2 * math.pi / n2
    rs = r0 + dr * np.arange(n1 + 1)
    rs[-1] = 1.0
    ths = dth * np.arange(n2)
    R, TH = np.meshgrid(rs, ths, indexing="ij")
    X, Y = R * np.cos(TH), R * np.sin(TH)

    # radial extent of each dual ring, as (inner, outer) radii
    lo = np.maximum(rs - dr / 2, r0)
    hi = np.minimum(rs + dr / 2, 1.0)
    ring_area = 0.5 * (hi ** 2 - lo ** 2)  # per unit angle
    measure = np.repeat((ring_area * dth)[:, None], n2, axis=1)
    tags = np.zeros(R.shape, dtype=np.int64)
    tags[-1, :] = OUTER_BOUNDARY
    if spec.kind is DomainKind.ANNULUS:
        tags[0, :] = ISLAND_BOUNDARY
        uid = np.arange(R.size).reshape(R.shape)
        n_unique = R.size
    else:
        X[0, :] = 0.0
        Y[0, :] = 0.0
        uid = np.concatenate([np.zeros((1, n2), dtype=np.int64),
                              1 + np.arange(n1 * n2).reshape(n1, n2)])
        n_unique = 1 + n1 * n2
    return Grid(spec, n1, n2, rs, ths, X, Y, measure, tags, dr, dth, uid, n_unique)


# ---------------------------------------------------------------------------
# bathymetry

def perp(v: np.ndarray) -> np.ndarray:
    """Rotate vectors with the convention perp(a, b) = (b, -a)."""
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _smooth_bump(s):
    """C-infinity bump exp(1 - 1/(1 - s^2)) on s < 1 and its derivative."""
    s = np.asarray(s, dtype=float)
    inside = s < 1.0
    ss = np.where(inside, s, 0.0)
    q = 1.0 - ss ** 2
    val = np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, q, 1.0)), 0.0)
    dval = np.where(inside, val * (-2.0 * ss / np.where(inside, q, 1.0) ** 2), 0.0)
    return val, dval


@dataclass(frozen=True)
class Bathymetry:
    """Analytic positive depth function with its gradient.

    Families and parameters:

    * ``constant``: ``value``
    * ``affine``: ``c0 + slope . x``
    * ``radial``: ``c0 + c2 * |x|^2``
    * ``bump``: ``c0 + amplitude * B(|x - center| / width)`` with ``B`` the
      C-infinity bump ``exp(1 - 1/(1 - s^2))``; constant outside the bump.
    """

    family: str
    params: tuple = ()

    @classmethod
    def constant(cls, value: float = 1.0):
        return cls("constant", (("value", float(value)),))

    @classmethod
    def affine(cls, c0: float = 1.0, slope: Sequence[float] = (0.0, 1.0)):
        return cls("affine", (("c0", float(c0)), ("slope", tuple(float(s) for s in slope))))

    @classmethod
    def radial(cls, c0: float = 1.0, c2: float = 1.0):
        return cls("radial", (("c0", float(c0)), ("c2", float(c2))))

    @classmethod
    def bump(cls, c0: float = 1.0, amplitude: float = 0.5,
             center: Sequence[float] = (0.0, 0.0), width: float = 0.5):
        return cls("bump", (("c0", float(c0)), ("amplitude", float(amplitude)),
                            ("center", tuple(float(c) for c in center)),
                            ("width", float(width))))

    @classmethod
    def from_config(cls, family: str, **params):
        makers = {"constant": cls.constant, "affine": cls.affine,
                  "radial": cls.radial, "bump": cls.bump}
        if family not in makers:
            raise GeometryError(f"unknown bathymetry family {family!r}")
        return makers[family](**params)

    @property
    def p(self) -> dict:
        return dict(self.params)

    @property
    def is_constant(self) -> bool:
        p = self.p
        if self.family == "constant":
            return True
        if self.family == "affine":
            return all(s == 0.0 for s in p["slope"])
        if self.family == "radial":
            return p["c2"] == 0.0
        return p["amplitude"] == 0.0

    def depth(self, points) -> np.ndarray:
        return self.evaluate(points)[0]

    def evaluate(self, points):
        """Return ``(b, grad b)`` at ``points`` (shape ``(..., 2)``)."""
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        p = self.p
        if self.family == "constant":
            b = np.full(x.shape, p["value"])
            g = np.zeros(x.shape + (2,))
        elif self.family == "affine":
            s = p["slope"]
            b = p["c0"] + s[0] * x + s[1] * y
            g = np.broadcast_to(np.array(s, dtype=float), x.shape + (2,)).copy()
        elif self.family == "radial":
            b = p["c0"] + p["c2"] * (x ** 2 + y ** 2)
            g = np.stack([2 * p["c2"] * x, 2 * p["c2"] * y], axis=-1)
        elif self.family == "bump":
            cx, cy = p["center"]
            w = p["width"]
            dx, dy = x - cx, y - cy
            d = np.hypot(dx, dy)
            val, dval = _smooth_bump(d / w)
            b = p["c0"] + p["amplitude"] * val
            safe = np.where(d > 0, d, 1.0)
            coef = np.where(d > 0, p["amplitude"] * dval / (w * safe), 0.0)
            g = np.stack([coef * dx, coef * dy], axis=-1)
        else:
            raise GeometryError(f"unknown bathymetry family {self.family!r}")
        return b, g

    def perp_grad_inv(self, points) -> np.ndarray:
        """perp(grad(1/b)) = (d2(1/b), -d1(1/b)) = -perp(grad b) / b^2."""
        b, g = self.evaluate(points)
        return -perp(g) / (b ** 2)[..., None]

    def check_positive(self, grid: Grid) -> None:
        b = self.depth(grid.points)
        if not np.all(np.isfinite(b)) or np.min(b) <= 0:
            raise GeometryError(
                f"bathymetry {self.family} is not positive on the grid (min {np.min(b):.3g})")

    def bounds(self, grid: Grid) -> tuple[float, float]:
        b = self.depth(grid.points)
        return float(np.min(b)), float(np.max(b))


def eval_bathymetry(b: Bathymetry, point):
    """Return ``(depth, gradient, perp_grad_inv_b)`` at ``point``."""
    depth, grad = b.evaluate(point)
    return depth, grad, b.perp_grad_inv(point)
