"""Grid-sampled fields and their interpolation."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .geometry import Grid


@numba.njit(cache=True)
def _lagrange_weights(t, m, w):
    # Lagrange weights on the m nodes -(m//2 - 1), ..., m//2
    off = m // 2 - 1
    for a in range(m):
        xa = a - off
        v = 1.0
        for c in range(m):
            if c != a:
                xc = c - off
                v *= (t - xc) / (xa - xc)
        w[a] = v


@numba.njit(cache=True)
def _interp_rect(vals, x0, y0, hx, hy, px, py, bounds, m):
    nc, nx1, ny1 = vals.shape
    off = m // 2 - 1
    n = px.shape[0]
    out = np.empty((nc, n))
    lo_out = np.empty((nc, n) if bounds else (0, 0))
    hi_out = np.empty((nc, n) if bounds else (0, 0))
    wx = np.empty(m)
    wy = np.empty(m)
    for p in range(n):
        fx = (px[p] - x0) / hx
        fy = (py[p] - y0) / hy
        i = int(np.floor(fx))
        j = int(np.floor(fy))
        i = min(max(i, off), nx1 - 1 - m // 2)
        j = min(max(j, off), ny1 - 1 - m // 2)
        _lagrange_weights(fx - i, m, wx)
        _lagrange_weights(fy - j, m, wy)
        for c in range(nc):
            acc = 0.0
            for a in range(m):
                row = 0.0
                for b in range(m):
                    row += wy[b] * vals[c, i - off + a, j - off + b]
                acc += wx[a] * row
            out[c, p] = acc
            if bounds:
                lo = np.inf
                hi = -np.inf
                for a in range(off - 1, off + 3):
                    for b in range(off - 1, off + 3):
                        v = vals[c, i - off + a, j - off + b]
                        lo = min(lo, v)
                        hi = max(hi, v)
                lo_out[c, p] = lo
                hi_out[c, p] = hi
    return out, lo_out, hi_out


@numba.njit(cache=True)
def _interp_polar(vals, r0, dr, dth, has_center, px, py, bounds, m):
    nc, nr1, nth = vals.shape
    off = m // 2 - 1
    half = nth // 2
    n = px.shape[0]
    out = np.empty((nc, n))
    lo_out = np.empty((nc, n) if bounds else (0, 0))
    hi_out = np.empty((nc, n) if bounds else (0, 0))
    wr = np.empty(m)
    wt = np.empty(m)
    rows = np.empty(m, dtype=np.int64)
    shift = np.empty(m, dtype=np.int64)
    cols = np.empty(m, dtype=np.int64)
    idx = np.empty((m, m), dtype=np.int64)
    two_pi = 2.0 * np.pi
    for p in range(n):
        r = np.hypot(px[p], py[p])
        th = np.arctan2(py[p], px[p])
        if th < 0.0:
            th += two_pi
        fr = (r - r0) / dr
        j = int(np.floor(fr))
        if has_center:
            j = min(max(j, 0), nr1 - 1 - m // 2)
        else:
            j = min(max(j, off), nr1 - 1 - m // 2)
        ft = th / dth
        k = int(np.floor(ft))
        _lagrange_weights(fr - j, m, wr)
        _lagrange_weights(ft - k, m, wt)
        for a in range(m):
            q = j - off + a
            if q < 0:
                # reflect across the pole: (-r, theta) == (r, theta + pi)
                rows[a] = -q
                shift[a] = half
            else:
                rows[a] = q
                shift[a] = 0
        for b in range(m):
            cols[b] = (k - off + b) % nth
        for a in range(m):
            for b in range(m):
                idx[a, b] = (cols[b] + shift[a]) % nth
        for c in range(nc):
            acc = 0.0
            for a in range(m):
                row = 0.0
                for b in range(m):
                    row += wt[b] * vals[c, rows[a], idx[a, b]]
                acc += wr[a] * row
            out[c, p] = acc
            if bounds:
                lo = np.inf
                hi = -np.inf
                for a in range(off - 1, off + 3):
                    for b in range(off - 1, off + 3):
                        v = vals[c, rows[a], idx[a, b]]
                        lo = min(lo, v)
                        hi = max(hi, v)
                lo_out[c, p] = lo
                hi_out[c, p] = hi
    return out, lo_out, hi_out


_PAD = 20  # quintic prefilter decays ~0.43 per cell; the mirror kink at the pad end must not reach the walls
METHODS = {"linear": ("lagrange", 1), "cubic": ("lagrange", 3), "quintic": ("lagrange", 5),
           "spline3": ("spline", 3), "spline5": ("spline", 5)}


def _extrapolate(v, n):
    """``n`` rows beyond row 0 of ``v`` by cubic extrapolation, farthest first."""
    d = -np.arange(n, 0, -1, dtype=float)[:, None]
    out = 0.0
    for a in range(4):
        w = 1.0
        for c in range(4):
            if c != a:
                w = w * (d - c) / (a - c)
        out = out + w * v[a][None]
    return out


def _padded(grid: Grid, v: np.ndarray) -> np.ndarray:
    p = _PAD
    if grid.is_polar:
        if grid.has_center:
            rot = (np.arange(grid.n2) + grid.n2 // 2) % grid.n2
            k = min(p, grid.n1)
            inner = v[k:0:-1][:, rot]
            if k < p:
                inner = np.concatenate([_extrapolate(np.concatenate([inner, v]), p - k), inner])
        else:
            inner = _extrapolate(v, p)
        outer = _extrapolate(v[::-1], p)[::-1]
        return np.concatenate([inner, v, outer], axis=0)
    v = np.concatenate([_extrapolate(v, p), v, _extrapolate(v[::-1], p)[::-1]], axis=0)
    return np.concatenate([_extrapolate(v.T, p).T, v,
                           _extrapolate(v.T[::-1], p)[::-1].T], axis=1)


def spline_coefficients(grid: Grid, values, order: int = 5) -> np.ndarray:
    """B-spline coefficients of the padded node array (periodic in angle)."""
    from scipy import ndimage

    c = _padded(grid, np.asarray(values, dtype=float))
    p = _PAD
    if grid.is_polar:
        c = ndimage.spline_filter1d(c, order, axis=1, mode="grid-wrap")
        c = ndimage.spline_filter1d(c, order, axis=0, mode="mirror")
        return np.pad(c, ((0, 0), (p, p)), mode="wrap")
    return ndimage.spline_filter(c, order, mode="mirror")


def _padded_index(grid: Grid, px, py):
    if grid.is_polar:
        r = np.hypot(px, py)
        th = np.mod(np.arctan2(py, px), 2 * np.pi)
        return (r - grid.axis1[0]) / grid.d1 + _PAD, th / grid.d2 + _PAD
    return (px - grid.axis1[0]) / grid.d1 + _PAD, (py - grid.axis2[0]) / grid.d2 + _PAD


def _lagrange(grid, vals, px, py, bounds, m):
    if grid.is_polar:
        return _interp_polar(vals, float(grid.axis1[0]), grid.d1, grid.d2,
                             grid.has_center, px, py, bounds, m)
    return _interp_rect(vals, float(grid.axis1[0]), float(grid.axis2[0]),
                        grid.d1, grid.d2, px, py, bounds, m)


def interpolate(grid: Grid, values, points, monotone: bool | str = False,
                method: str = "cubic", return_raw: bool = False):
    """Interpolate node values at arbitrary points of the closed domain.

    ``method`` is ``cubic`` (4x4 Lagrange, the default), ``quintic`` (6x6
    Lagrange), ``spline3`` or ``spline5`` (tensor B-splines through the
    nodes). Lagrange stencils are shifted inward at the boundary and reflected
    across the pole on the disk; splines use the same pole reflection and
    cubic extrapolation past the walls. With ``monotone`` the result is
    clipped to the min/max of the 4x4 nodes around each point; ``"lower"``
    applies only the lower bound, which keeps nonnegative data nonnegative
    without shaving smooth maxima that fall between nodes.

    ``values`` has shape ``grid.shape`` or ``(k,) + grid.shape``; the result has
    shape ``points.shape[:-1]`` or ``(k,) + points.shape[:-1]``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown interpolation method {method!r}")
    kind, order = METHODS[method]
    vals = np.asarray(values, dtype=float)
    single = vals.ndim == 2
    if single:
        vals = vals[None]
    pts = np.asarray(points, dtype=float)
    lead = pts.shape[:-1]
    flat = pts.reshape(-1, 2)
    px = np.ascontiguousarray(flat[:, 0])
    py = np.ascontiguousarray(flat[:, 1])
    vals = np.ascontiguousarray(vals)
    if kind == "lagrange":
        out, lo, hi = _lagrange(grid, vals, px, py, monotone, order + 1)
    else:
        from scipy import ndimage

        fi, fj = _padded_index(grid, px, py)
        out = np.stack([
            ndimage.map_coordinates(spline_coefficients(grid, v, order), [fi, fj],
                                    order=order, prefilter=False, mode="nearest")
            for v in vals])
        if monotone:
            _, lo, hi = _lagrange(grid, vals, px, py, True, 4)
    raw = out
    if monotone not in (True, False, "lower"):
        raise ValueError(f"monotone must be True, False or 'lower', got {monotone!r}")
    if monotone == "lower":
        out = np.maximum(out, lo)
    elif monotone:
        out = np.clip(out, lo, hi)
    shape = (vals.shape[0],) + lead
    out, raw = out.reshape(shape), raw.reshape(shape)
    if single:
        out, raw = out[0], raw[0]
    return (out, raw) if return_raw else out


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        return cls(grid, grid.sample(fn))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    def __call__(self, points, monotone: bool = False, method: str = "cubic"):
        return interpolate(self.grid, self.values, points, monotone=monotone, method=method)

    def integral(self) -> float:
        return self.grid.integrate(self.values)

    def __add__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + o)

    def __mul__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values * o)

    __rmul__ = __mul__
