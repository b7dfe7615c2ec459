import math

import numpy as np
import pytest
import sympy as sp

from lakevortex.elliptic import (EllipticSolver, SolverError, assemble_stream, greens_sample,
                                 island_basis, solve_dirichlet, source_node)
from lakevortex.fields import ScalarField
from lakevortex.geometry import Bathymetry, DomainSpec, GeometryError, build_grid
from lakevortex.kernels import green_disk

from conftest import observed_orders, setup

X, Y = sp.symbols("x y")


def manufactured(spec, psi_expr, b_expr, b, ns):
    w_expr = -(sp.diff(sp.diff(psi_expr, X) / b_expr, X) + sp.diff(sp.diff(psi_expr, Y) / b_expr, Y))
    fw = sp.lambdify((X, Y), w_expr, "numpy")
    fp = sp.lambdify((X, Y), psi_expr, "numpy")
    errs = []
    for n in ns:
        g = build_grid(spec, n)
        s = EllipticSolver(g, b)
        psi = solve_dirichlet(s, ScalarField(g, g.sample(lambda x, y: fw(x, y) + 0 * x)))
        errs.append(np.max(np.abs(psi.values - g.sample(lambda x, y: fp(x, y) + 0 * x))))
    return errs


def test_disk_uniform_source_matches_parabola():
    grid, _, solver, _ = setup("disk", 64)
    psi = solve_dirichlet(solver, ScalarField(grid, np.ones(grid.shape)))
    exact = (1 - grid.x ** 2 - grid.y ** 2) / 4
    assert np.max(np.abs(psi.values - exact)) < 1e-3


@pytest.mark.parametrize("kind", ["disk", "annulus", "rectangle"])
def test_zero_source_gives_zero(kind):
    grid, _, solver, _ = setup(kind, 32, "radial")
    psi = solve_dirichlet(solver, ScalarField.zeros(grid))
    assert np.all(psi.values == 0.0)


@pytest.mark.parametrize("kind", ["disk", "annulus", "rectangle"])
def test_boundary_values_vanish(kind):
    grid, _, solver, _ = setup(kind, 32, "affine")
    psi = solve_dirichlet(solver, ScalarField(grid, np.cos(grid.x) + grid.y))
    assert np.all(psi.values[grid.boundary_mask()] == 0.0)


@pytest.mark.parametrize("kind", ["disk", "annulus", "rectangle"])
def test_self_adjoint_in_measure_inner_product(kind, rng):
    grid, _, solver, _ = setup(kind, 48, "affine")
    for _ in range(3):
        w1 = ScalarField(grid, grid.sample(lambda x, y: rng.standard_normal(x.shape)))
        w2 = ScalarField(grid, grid.sample(lambda x, y: rng.standard_normal(x.shape)))
        a = grid.integrate(solve_dirichlet(solver, w1).values * w2.values)
        b = grid.integrate(w1.values * solve_dirichlet(solver, w2).values)
        assert abs(a - b) <= 1e-8 * max(abs(a), abs(b))


@pytest.mark.parametrize("kind", ["disk", "annulus", "rectangle"])
def test_discrete_maximum_principle(kind, rng):
    grid, _, solver, _ = setup(kind, 48, "radial")
    w = ScalarField(grid, grid.sample(lambda x, y: rng.random(x.shape) ** 4))
    assert solve_dirichlet(solver, w).values.min() >= -1e-12


def test_manufactured_order_rectangle_affine():
    spec = DomainSpec.rectangle(2, 1)
    psi = sp.cos(sp.pi * X / 2) * sp.cos(sp.pi * Y) * (1 + 0.3 * X)
    errs = manufactured(spec, psi, 1 + Y, Bathymetry.affine(1.0, (0.0, 1.0)), (32, 64, 128))
    assert np.all(observed_orders(errs) >= 1.9)


def test_manufactured_order_disk_radial():
    psi = (1 - X ** 2 - Y ** 2) * (1 + 0.3 * X + 0.2 * Y ** 2)
    errs = manufactured(DomainSpec.disk(), psi, 1 + X ** 2 + Y ** 2, Bathymetry.radial(1, 1),
                        (32, 64, 128))
    assert np.all(observed_orders(errs) >= 1.9)


def test_cg_path_agrees_with_direct():
    grid = build_grid(DomainSpec.annulus(0.3), 32)
    b = Bathymetry.radial(1.0, 1.0)
    w = ScalarField(grid, np.sin(3 * grid.x) + grid.y ** 2)
    direct = solve_dirichlet(EllipticSolver(grid, b, method="direct"), w)
    cg = solve_dirichlet(EllipticSolver(grid, b, method="cg", tol=1e-12), w)
    assert np.max(np.abs(direct.values - cg.values)) < 1e-9


def test_cg_failure_carries_residual():
    grid = build_grid(DomainSpec.disk(), 32)
    solver = EllipticSolver(grid, Bathymetry.constant(), method="cg", maxiter=2)
    with pytest.raises(SolverError) as err:
        solve_dirichlet(solver, ScalarField(grid, np.ones(grid.shape)))
    assert err.value.residual is not None and err.value.residual > 0


def test_unknown_method():
    with pytest.raises(ValueError):
        EllipticSolver(build_grid(DomainSpec.disk(), 16), Bathymetry.constant(), method="lu")


# -- islands --------------------------------------------------------------

def test_island_harmonic_matches_log_profile_at_second_order():
    errs = []
    for n in (32, 64, 128):
        grid, _, _, basis = setup("annulus", n)
        r = np.hypot(grid.x, grid.y)
        errs.append(np.max(np.abs(basis.phi[0].values - np.log(1 / r) / np.log(1 / 0.3))))
    assert np.all(observed_orders(errs) >= 1.9)


def test_gram_matrix_value():
    _, _, _, basis = setup("annulus", 128)
    want = 2 * math.pi / math.log(1 / 0.3)
    assert want == pytest.approx(5.2187, abs=1e-4)
    assert basis.D_matrix[0, 0] == pytest.approx(want, rel=1e-2)
    assert basis.D_matrix[0, 0] * basis.D_inverse[0, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("family", ["constant", "affine", "radial"])
def test_flux_normalization(family):
    grid, _, solver, basis = setup("annulus", 64, family)
    assert solver.flux(basis.psi_u[0]) == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.linalg.eigvalsh(basis.D_matrix) > 0)


def test_assemble_stream_island_cases():
    grid, _, solver, basis = setup("annulus", 64, "affine")
    psi = assemble_stream(solver, basis, ScalarField.zeros(grid), [1.0])
    assert np.allclose(psi.values, basis.psi[0].values, atol=1e-14)
    ones = ScalarField(grid, np.ones(grid.shape))
    psi = assemble_stream(solver, basis, ones, [0.0])
    assert abs(solver.flux(solver.to_unique(psi.values), solver.to_unique(ones.values))) < 1e-6
    psi = assemble_stream(solver, basis, ones, [0.7])
    assert solver.flux(solver.to_unique(psi.values),
                       solver.to_unique(ones.values)) == pytest.approx(0.7, abs=1e-6)
    # psi is constant on the island
    assert np.ptp(psi.values[0]) < 1e-12


def test_assemble_stream_without_islands_is_dirichlet():
    grid, _, solver, basis = setup("disk", 32, "radial")
    w = ScalarField(grid, grid.sample(lambda x, y: np.exp(x - y)))
    assert basis.m == 0
    assert np.array_equal(assemble_stream(solver, basis, w).values,
                          solve_dirichlet(solver, w).values)


def test_assemble_stream_arity():
    grid, _, solver, basis = setup("annulus", 16)
    with pytest.raises(ValueError):
        assemble_stream(solver, basis, ScalarField.zeros(grid), [])


# -- Green function columns -----------------------------------------------

def test_greens_sample_matches_disk_kernel():
    grid, _, solver, _ = setup("disk", 128)
    col = greens_sample(solver, (0.0, 0.0))
    i = np.argmin(np.abs(grid.axis1 - 0.5))
    assert col.values[i, 0] == pytest.approx(math.log(2) / (2 * math.pi), abs=5e-3)


def test_greens_sample_converges_to_disk_kernel():
    y = (0.3, 0.1)
    errs = []
    for n in (32, 64, 128):
        grid, _, solver, _ = setup("disk", n)
        col = greens_sample(solver, y)
        src = source_node(grid, y)
        far = (np.hypot(grid.x - src[0], grid.y - src[1]) > 0.3) & ~grid.boundary_mask()
        exact = green_disk(grid.points[far], np.broadcast_to(src, (far.sum(), 2)))
        errs.append(np.max(np.abs(col.values[far] - exact)))
    assert errs[0] > errs[1] > errs[2]


def test_greens_sample_symmetry_variable_depth(rng):
    grid, _, solver, _ = setup("disk", 64, "affine")
    n = 0
    while n < 5:
        x, y = rng.uniform(-0.6, 0.6, size=(2, 2))
        if np.linalg.norm(x - y) <= 0.2:
            continue
        xn, yn = source_node(grid, x), source_node(grid, y)
        gxy = greens_sample(solver, yn)(xn[None])[0]
        gyx = greens_sample(solver, xn)(yn[None])[0]
        assert abs(gxy - gyx) < 1e-3
        n += 1


def test_greens_sample_rejects_boundary_source():
    grid, _, solver, _ = setup("disk", 32)
    with pytest.raises(GeometryError):
        greens_sample(solver, (0.99, 0.0))
