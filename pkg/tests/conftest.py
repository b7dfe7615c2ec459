import functools
import math

import numpy as np
import pytest

from lakevortex.elliptic import EllipticSolver, island_basis
from lakevortex.geometry import Bathymetry, DomainSpec, build_grid

DOMAINS = {
    "disk": DomainSpec.disk(),
    "annulus": DomainSpec.annulus(0.3),
    "rectangle": DomainSpec.rectangle(2.0, 1.0),
}


def affine_for(spec):
    # 1 + x2 is not positive on the unit disk
    return Bathymetry.affine(1.0, (0.0, 1.0 if spec.kind.value == "rectangle" else 0.5))


def bathymetries(spec):
    return {"constant": Bathymetry.constant(1.0), "affine": affine_for(spec),
            "radial": Bathymetry.radial(1.0, 1.0)}


@functools.lru_cache(maxsize=None)
def setup(kind: str, n: int, family: str = "constant"):
    spec = DOMAINS[kind]
    grid = build_grid(spec, n)
    b = bathymetries(spec)[family]
    solver = EllipticSolver(grid, b)
    return grid, b, solver, island_basis(solver)


def observed_orders(errors):
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_test_function(x, y):
    return np.sin(1.3 * x + 0.4) * np.cos(0.9 * y - 0.2) + 0.3 * x * y


TWO_PI = 2 * math.pi


# criterion number -> (passed, detail), filled by the acceptance tests
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
