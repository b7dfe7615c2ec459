"""Closed-form Dirichlet Green functions of the Laplacian and their bounds.

Gradients are taken with respect to the first argument. All functions
accept single points of shape ``(2,)`` or stacks of shape ``(N, 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class KernelKind(str, Enum):
    HALF_PLANE = "half_plane"
    DISK = "disk"


class SingularityError(ValueError):
    pass


def _pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    d2 = np.sum(d * d, axis=-1)
    if np.any(d2 == 0.0):
        raise SingularityError("Green function is singular at x == y")
    return x, y, d, d2


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def green_half_plane(x, y):
    """(1/4pi) ln(1 + 4 x2 y2 / |x - y|^2) on {x2 > 0}."""
    x, y, _, d2 = _pair(x, y)
    if np.any(x[..., 1] < 0) or np.any(y[..., 1] < 0):
        raise ValueError("points must lie in the upper half-plane")
    return _out(np.log1p(4.0 * x[..., 1] * y[..., 1] / d2) / (4 * math.pi))


def grad_green_half_plane(x, y):
    x, y, d, d2 = _pair(x, y)
    x2, y2 = x[..., 1], y[..., 1]
    a = d2 + 4 * x2 * y2
    e2 = np.zeros_like(d)
    e2[..., 1] = y2
    return (e2 - (2 * x2 * y2 / d2)[..., None] * d) / (math.pi * a)[..., None]


def green_disk(x, y):
    """(1/4pi) ln(1 + (1 - |x|^2)(1 - |y|^2) / |x - y|^2) on the unit disk."""
    x, y, _, d2 = _pair(x, y)
    px = 1.0 - np.sum(x * x, axis=-1)
    py = 1.0 - np.sum(y * y, axis=-1)
    if np.any(px < 0) or np.any(py < 0):
        raise ValueError("points must lie in the closed unit disk")
    return _out(np.log1p(px * py / d2) / (4 * math.pi))


def grad_green_disk(x, y):
    x, y, d, d2 = _pair(x, y)
    px = 1.0 - np.sum(x * x, axis=-1)
    py = 1.0 - np.sum(y * y, axis=-1)
    p = px * py
    num = x * py[..., None] + d * (p / d2)[..., None]
    return -num / (2 * math.pi * (d2 + p))[..., None]


def regular_part_disk(x, y):
    """H(x, y) = G(x, y) - (1/2pi) ln(1/|x - y|) for the unit disk."""
    x, y, _, d2 = _pair(x, y)
    return _out(green_disk(x, y) - np.log(1.0 / np.sqrt(d2)) / (2 * math.pi))


def green(kind, x, y):
    kind = KernelKind(kind)
    return green_half_plane(x, y) if kind is KernelKind.HALF_PLANE else green_disk(x, y)


def grad_green(kind, x, y):
    kind = KernelKind(kind)
    return grad_green_half_plane(x, y) if kind is KernelKind.HALF_PLANE else grad_green_disk(x, y)


def symmetric_gradient_sum(kind, x, y):
    """grad_x G(x, y) + grad_x G(y, x) in closed form."""
    kind = KernelKind(kind)
    x, y, d, d2 = _pair(x, y)
    if kind is KernelKind.HALF_PLANE:
        s = x[..., 1] + y[..., 1]
        out = np.zeros_like(d)
        out[..., 1] = s / (math.pi * (d2 + 4 * x[..., 1] * y[..., 1]))
        return out
    px = 1.0 - np.sum(x * x, axis=-1)
    py = 1.0 - np.sum(y * y, axis=-1)
    num = x * py[..., None] + y * px[..., None]
    return -num / (2 * math.pi * (d2 + px * py))[..., None]


def boundary_distance(kind, x):
    x = np.asarray(x, dtype=float)
    if KernelKind(kind) is KernelKind.HALF_PLANE:
        return x[..., 1]
    return 1.0 - np.sqrt(np.sum(x * x, axis=-1))


@dataclass
class GreenBoundsReport:
    kind: str
    n_pairs: int
    n_skipped: int
    log_bound_min_margin: float | None  # min of (1/2pi) ln(diam/|x-y|) - G
    nonnegative: bool
    sharp_bound_constant: float  # smallest C in G <= (1/4pi) ln(1 + C d_x d_y / |x-y|^2)
    gradient_bound_constant: float  # smallest C in |grad G| <= C / |x-y|

    @property
    def log_bound_holds(self) -> bool:
        return self.log_bound_min_margin is None or self.log_bound_min_margin >= -1e-14


def check_green_bounds(kind, xs, ys) -> GreenBoundsReport:
    """Evaluate the log, boundary-sharp and gradient bounds over sample pairs.

    The constants in the sharp and gradient bounds are only known to exist,
    so the report gives the smallest value that makes each inequality hold
    over the sample. Pairs with ``x == y`` or a point on the boundary are
    skipped and counted.
    """
    kind = KernelKind(kind)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    dx = boundary_distance(kind, xs)
    dy = boundary_distance(kind, ys)
    dist = np.linalg.norm(xs - ys, axis=-1)
    ok = (dist > 0) & (dx > 0) & (dy > 0)
    xs, ys, dx, dy, dist = xs[ok], ys[ok], dx[ok], dy[ok], dist[ok]
    g = np.atleast_1d(green(kind, xs, ys))
    margin = None
    if kind is KernelKind.DISK:
        margin = float(np.min(np.log(2.0 / dist) / (2 * math.pi) - g))
    sharp = float(np.max(np.expm1(4 * math.pi * g) * dist ** 2 / (dx * dy)))
    grad = np.linalg.norm(grad_green(kind, xs, ys), axis=-1)
    return GreenBoundsReport(
        kind=kind.value, n_pairs=int(ok.sum()), n_skipped=int((~ok).sum()),
        log_bound_min_margin=margin, nonnegative=bool(np.all(g >= 0)),
        sharp_bound_constant=sharp,
        gradient_bound_constant=float(np.max(grad * dist)))


def random_disk_points(rng, n, rmax=1.0):
    r = rmax * np.sqrt(rng.random(n))
    th = 2 * math.pi * rng.random(n)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def selftest() -> list[tuple[str, bool, str]]:
    """Golden checks of the closed forms; returns (name, passed, detail) rows."""
    rows = []

    def check(name, got, want, tol):
        err = float(np.max(np.abs(np.asarray(got) - np.asarray(want))))
        rows.append((name, err <= tol, f"got {np.round(got, 10)} want {np.round(want, 10)}"))

    check("half-plane G((0,1),(0,2))", green_half_plane((0, 1), (0, 2)),
          math.log(9) / (4 * math.pi), 1e-10)
    check("half-plane G((0,1),(5,1))", green_half_plane((0, 1), (5, 1)),
          math.log(29 / 25) / (4 * math.pi), 1e-10)
    check("disk G((0.5,0),0)", green_disk((0.5, 0), (0, 0)), math.log(2) / (2 * math.pi), 1e-10)
    check("half-plane symmetric gradient", symmetric_gradient_sum("half_plane", (0, 1), (0, 2)),
          (0.0, 1 / (3 * math.pi)), 1e-10)
    check("disk symmetric gradient antipodal",
          symmetric_gradient_sum("disk", (0.5, 0), (-0.5, 0)), (0.0, 0.0), 1e-14)
    rng = np.random.default_rng(0)
    xs, ys = random_disk_points(rng, 2000, 0.99), random_disk_points(rng, 2000, 0.99)
    rep = check_green_bounds("disk", xs, ys)
    rows.append(("disk log bound", rep.log_bound_holds and rep.nonnegative,
                 f"min margin {rep.log_bound_min_margin:.3e}"))
    rows.append(("disk sharp bound C <= 4", rep.sharp_bound_constant <= 4.0,
                 f"C = {rep.sharp_bound_constant:.4f}"))
    return rows
