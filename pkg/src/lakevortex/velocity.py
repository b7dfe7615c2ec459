"""Velocity reconstruction u = perp(grad psi) / b and boundary measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, interpolate
from .geometry import Bathymetry, Grid, GeometryError


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Cartesian velocity components at the nodes, shape ``(2,) + grid.shape``."""

    grid: Grid
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != (2,) + self.grid.shape:
            raise ValueError(f"velocity shape {u.shape} does not match grid")
        if not np.all(np.isfinite(u)):
            raise ValueError("velocity has non-finite values")
        object.__setattr__(self, "u", u)

    def __call__(self, points) -> np.ndarray:
        """Interpolated velocity, shape ``points.shape``."""
        out = interpolate(self.grid, self.u, points)
        return np.moveaxis(out, 0, -1)

    def polar_components(self):
        """(u_r, u_theta) at the nodes of a polar grid."""
        th = self.grid.axis2[None, :]
        c, s = np.cos(th), np.sin(th)
        return self.u[0] * c + self.u[1] * s, -self.u[0] * s + self.u[1] * c

    def max_speed(self) -> float:
        return float(np.max(np.hypot(self.u[0], self.u[1])))


def _ddtheta(v, dth):
    return (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * dth)


def _center_mean_normal(grid: Grid, fr: np.ndarray) -> float:
    # (1 / area) * closed-curve integral over the first ring, as a pole value
    r1 = grid.axis1[1]
    return float(np.sum(fr[1]) * grid.d2 * r1 / (math.pi * r1 ** 2))


def gradient(grid: Grid, values) -> tuple[np.ndarray, np.ndarray]:
    """Second-order Cartesian gradient at the nodes (one-sided at boundaries)."""
    v = np.asarray(values, dtype=float)
    if not grid.is_polar:
        gx = np.gradient(v, grid.axis1, axis=0, edge_order=2)
        gy = np.gradient(v, grid.axis2, axis=1, edge_order=2)
        return gx, gy
    rs = grid.axis1
    vr = np.gradient(v, rs, axis=0, edge_order=2)
    th = grid.axis2[None, :]
    c, s = np.cos(th), np.sin(th)
    with np.errstate(divide="ignore", invalid="ignore"):
        vt = _ddtheta(v, grid.d2) / rs[:, None]
    gx = c * vr - s * vt
    gy = s * vr + c * vt
    if grid.has_center:
        # first angular Fourier mode of the first ring
        k = 2.0 / (grid.n2 * rs[1])
        gx[0, :] = k * np.sum(v[1] * c[0])
        gy[0, :] = k * np.sum(v[1] * s[0])
    return gx, gy


def velocity_from_stream(psi: ScalarField, b: Bathymetry) -> VelocityField:
    grid = psi.grid
    gx, gy = gradient(grid, psi.values)
    depth = b.depth(grid.points)
    return VelocityField(grid, np.stack([gy / depth, -gx / depth]))


def _polar_divergence(grid: Grid, fr, ft):
    rs = grid.axis1[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.gradient(rs * fr, grid.axis1, axis=0, edge_order=2) / rs + _ddtheta(ft, grid.d2) / rs
    if grid.has_center:
        out[0, :] = _center_mean_normal(grid, fr)
    return out


def divergence_weighted(u: VelocityField, b: Bathymetry) -> ScalarField:
    """Discrete div(b u)."""
    grid = u.grid
    depth = b.depth(grid.points)
    if not grid.is_polar:
        d = (np.gradient(depth * u.u[0], grid.axis1, axis=0, edge_order=2)
             + np.gradient(depth * u.u[1], grid.axis2, axis=1, edge_order=2))
        return ScalarField(grid, d)
    ur, ut = u.polar_components()
    return ScalarField(grid, _polar_divergence(grid, depth * ur, depth * ut))


def curl(u: VelocityField) -> ScalarField:
    """Discrete d1 u2 - d2 u1."""
    # Cartesian components stay smooth through the pole, unlike (u_r, u_theta)
    d1u2, _ = gradient(u.grid, u.u[1])
    _, d2u1 = gradient(u.grid, u.u[0])
    return ScalarField(u.grid, d1u2 - d2u1)


def circulation_island(u: VelocityField, b: Bathymetry | None = None, island_index: int = 0) -> float:
    """Counter-clockwise line integral of u along the island boundary.

    Equals the weak island flux of the stream function. ``b`` is accepted for
    signature compatibility; the depth is already contained in ``u``.
    """
    grid = u.grid
    if island_index < 0 or island_index >= grid.domain.island_count:
        raise IndexError(f"island index {island_index} out of range")
    _, ut = u.polar_components()
    a = grid.axis1[0]
    return float(np.sum(ut[0]) * a * grid.d2)


def boundary_normals(grid: Grid):
    """Outward unit normals at boundary nodes as ``(mask, nx, ny)``.

    Rectangle corners carry both adjacent normals; the flux uses the worse one.
    """
    mask = grid.boundary_mask()
    if grid.is_polar:
        th = np.broadcast_to(grid.axis2[None, :], grid.shape)
        sign = np.ones(grid.shape)
        if grid.domain.island_count:
            sign[0, :] = -1.0
        return mask, sign * np.cos(th), sign * np.sin(th)
    raise GeometryError("use rectangle normals via max_boundary_flux")


def max_boundary_flux(u: VelocityField) -> float:
    """max |u . nu| over boundary nodes."""
    grid = u.grid
    if grid.is_polar:
        ur, _ = u.polar_components()
        rows = [-1] + ([0] if grid.domain.island_count else [])
        return float(max(np.max(np.abs(ur[r])) for r in rows))
    ux, uy = u.u
    return float(max(np.max(np.abs(ux[0, :])), np.max(np.abs(ux[-1, :])),
                     np.max(np.abs(uy[:, 0])), np.max(np.abs(uy[:, -1]))))


def kinetic_energy(u: VelocityField, b: Bathymetry) -> float:
    """(1/2) int |u|^2 b by dual-cell quadrature."""
    depth = b.depth(u.grid.points)
    return 0.5 * u.grid.integrate((u.u[0] ** 2 + u.u[1] ** 2) * depth)
