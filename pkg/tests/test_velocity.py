import math

import numpy as np
import pytest

from lakevortex.diagnostics import energy_vortex
from lakevortex.elliptic import assemble_stream
from lakevortex.fields import ScalarField
from lakevortex.geometry import Bathymetry, build_grid
from lakevortex.velocity import (VelocityField, circulation_island, curl, divergence_weighted,
                                 kinetic_energy, max_boundary_flux, velocity_from_stream)

from conftest import DOMAINS, observed_orders, setup


def rigid(grid):
    return VelocityField(grid, np.stack([-grid.y, grid.x]))


def random_smooth_from(grid, coef):
    k = coef.shape[0]
    return sum(coef[i, j] * np.cos(i * grid.x + 0.3) * np.sin(j * grid.y + 0.7)
               for i in range(k) for j in range(k))


def test_parabolic_stream_gives_rigid_rotation():
    grid = build_grid(DOMAINS["disk"], 32)
    psi = ScalarField(grid, grid.sample(lambda x, y: (1 - x ** 2 - y ** 2) / 4))
    u = velocity_from_stream(psi, Bathymetry.constant())
    assert np.allclose(u.u, np.stack([-grid.y / 2, grid.x / 2]), atol=1e-10)
    # angular differences of the Cartesian components are exact only up to O(dtheta^2)
    assert np.allclose(curl(u).values, 1.0, atol=(2 * math.pi / 64) ** 2 / 6 + 1e-10)
    assert max_boundary_flux(u) < 1e-12


def test_depth_divides_velocity_pointwise():
    grid = build_grid(DOMAINS["rectangle"], 16)
    psi = ScalarField(grid, grid.sample(lambda x, y: (1 - x ** 2 - y ** 2) / 4))
    u = velocity_from_stream(psi, Bathymetry.affine(1.0, (0.0, 1.0)))
    i, j = 8, 8
    assert (grid.x[i, j], grid.y[i, j]) == (0.0, 0.5)
    assert np.allclose(u.u[:, i, j], (-0.25 / 1.5, 0.0), atol=1e-12)


@pytest.mark.parametrize("kind", sorted(DOMAINS))
def test_constant_stream_gives_rest(kind):
    grid = build_grid(DOMAINS[kind], 16)
    u = velocity_from_stream(ScalarField(grid, np.full(grid.shape, 2.5)), Bathymetry.radial(1, 1))
    assert np.all(np.abs(u.u) < 1e-12)
    assert np.max(np.abs(divergence_weighted(u, Bathymetry.radial(1, 1)).values)) < 1e-14


@pytest.mark.parametrize("kind", ["disk", "annulus"])
def test_rigid_rotation_divergence_free_and_tangential(kind):
    grid = build_grid(DOMAINS[kind], 32)
    u = rigid(grid)
    assert np.max(np.abs(divergence_weighted(u, Bathymetry.constant()).values)) < 1e-10
    assert max_boundary_flux(u) < 1e-12


def test_normal_incidence_flux():
    grid = build_grid(DOMAINS["disk"], 16)
    u = VelocityField(grid, np.stack([np.ones(grid.shape), np.zeros(grid.shape)]))
    assert max_boundary_flux(u) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("kind", sorted(DOMAINS))
@pytest.mark.parametrize("n", [32, 64, 128])
def test_weighted_divergence_vanishes(kind, n, rng):
    # b u is the discrete perp gradient of psi, whose discrete divergence cancels
    grid, b, solver, basis = setup(kind, n, "affine")
    coef = rng.standard_normal(4)
    w = ScalarField(grid, coef[0] + coef[1] * grid.x + coef[2] * np.sin(2 * grid.y)
                    + coef[3] * grid.x * grid.y)
    u = velocity_from_stream(assemble_stream(solver, basis, w, [0.5] * basis.m), b)
    assert np.max(np.abs(divergence_weighted(u, b).values)) < 1e-10
    assert max_boundary_flux(u) < 1e-12


def test_tangential_boundary_flux_budget():
    grid, b, solver, basis = setup("disk", 128, "affine")
    w = ScalarField(grid, np.exp(-4 * ((grid.x - 0.2) ** 2 + grid.y ** 2)))
    u = velocity_from_stream(assemble_stream(solver, basis, w), b)
    assert max_boundary_flux(u) <= 5e-3


def test_island_circulation_of_unit_flux_field():
    grid, b, _, basis = setup("annulus", 128)
    u = velocity_from_stream(basis.psi[0], b)
    assert circulation_island(u) == pytest.approx(1.0, abs=1e-3)


def test_island_circulation_examples():
    grid = build_grid(DOMAINS["annulus"], 32)
    assert circulation_island(VelocityField(grid, np.zeros((2,) + grid.shape))) == 0.0
    assert circulation_island(rigid(grid)) == pytest.approx(2 * math.pi * 0.09, abs=1e-12)
    assert circulation_island(rigid(grid)) == pytest.approx(0.56549, abs=1e-5)
    with pytest.raises(IndexError):
        circulation_island(rigid(grid), island_index=1)


@pytest.mark.parametrize("kind,family", [("disk", "radial"), ("annulus", "affine"),
                                         ("rectangle", "affine")])
def test_curl_recovers_source_on_interior_region(kind, family):
    errs = []
    for n in (32, 64, 128):
        grid, b, solver, basis = setup(kind, n, family)
        w = np.cos(grid.x + 0.2) * np.exp(0.5 * grid.y)
        u = velocity_from_stream(assemble_stream(solver, basis, ScalarField(grid, w),
                                                 [0.0] * basis.m), b)
        if grid.is_polar:
            r = np.hypot(grid.x, grid.y)
            region = (r >= 0.4) & (r <= 0.85)
        else:
            region = (np.abs(grid.x) <= 0.5) & (np.abs(grid.y) <= 0.25)
        errs.append(np.max(np.abs(curl(u).values - w)[region]))
    assert np.all(observed_orders(errs) >= 1.8)


def energy_gap(kind, n, family, w_fn, gammas=()):
    grid, b, solver, basis = setup(kind, n, family)
    w = ScalarField(grid, w_fn(grid))
    u = velocity_from_stream(assemble_stream(solver, basis, w, list(gammas)), b)
    ev = energy_vortex(solver, basis, w, list(gammas))
    return abs(kinetic_energy(u, b) - ev) / ev


@pytest.mark.parametrize("kind,family", [("disk", "affine"), ("disk", "radial"),
                                         ("annulus", "affine"), ("annulus", "radial")])
def test_energy_identity(kind, family, rng):
    for _ in range(3):
        coef = rng.standard_normal((3, 3))
        fn = lambda g, c=coef: random_smooth_from(g, c)
        for gammas in ([0.0], [1.0]) if kind == "annulus" else ([],):
            assert energy_gap(kind, 128, family, fn, gammas) <= 1e-3


def gaussian_sum(grid, rng_seed=5):
    rng = np.random.default_rng(rng_seed)
    out = 0.0
    for _ in range(4):
        c, s = rng.uniform(-0.4, 0.4, 2), rng.uniform(0.2, 0.4)
        out = out + rng.uniform(0.5, 1.5) * np.exp(-((grid.x - c[0]) ** 2 + (grid.y - c[1]) ** 2)
                                                     / (2 * s * s))
    return out


def test_energy_identity_rectangle():
    assert energy_gap("rectangle", (128, 128), "affine", gaussian_sum) <= 1e-3
    # a source that does not vanish in the corners has a larger O(h^2) constant
    cubic = lambda g: 1 + g.x - 0.7 * g.y + 0.4 * g.x * g.y ** 2 - 0.3 * g.x ** 3
    gaps = [energy_gap("rectangle", (n, n), "affine", cubic) for n in (32, 64, 128)]
    assert np.all(observed_orders(gaps) >= 1.7)


def test_velocity_field_contract():
    grid = build_grid(DOMAINS["disk"], 16)
    with pytest.raises(ValueError):
        VelocityField(grid, np.zeros(grid.shape))
    u = rigid(grid)
    assert u(np.array([[0.5, 0.0]])) == pytest.approx(np.array([[0.0, 0.5]]), abs=1e-12)
    ur, ut = u.polar_components()
    assert np.allclose(ur, 0, atol=1e-15) and np.allclose(ut, np.hypot(grid.x, grid.y))
    assert u.max_speed() == pytest.approx(1.0)
