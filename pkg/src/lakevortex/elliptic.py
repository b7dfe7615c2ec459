"""Weighted stream-function solver for -div(b^-1 grad psi) = omega.

The operator is discretized in flux form on the dual cells of the node
grid: every edge between neighbouring nodes carries the face coefficient
``2 / (b_a + b_b)`` (harmonic mean of ``1/b``) times face length over node
distance. This gives a symmetric stiffness matrix ``S`` over all (unique)
nodes and a lumped mass ``M`` of dual-cell measures; the interior equations
read ``(S psi)_n = M_n omega_n``. On the disk the pole is one unknown shared
by the whole ``r = 0`` row.

Island fluxes are measured weakly: for a discrete solution the flux of
``psi`` through island ``i`` is ``phi_i . (S psi - M omega)``, which reduces
to the residual summed over the island's nodes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fields import ScalarField
from .geometry import (
    ISLAND_BOUNDARY,
    OUTER_BOUNDARY,
    Bathymetry,
    Grid,
    GeometryError,
    distance_to_boundary,
)

log = logging.getLogger(__name__)

DIRECT_LIMIT = 1_200_000


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _unique_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    out = np.empty(grid.n_unique)
    out[grid.unique_id.ravel()] = np.asarray(values, dtype=float).ravel()
    return out


def assemble_stiffness(grid: Grid, b_nodes: np.ndarray) -> sp.csr_matrix:
    """Symmetric flux-form stiffness over unique nodes."""
    uid = grid.unique_id
    rows, cols, w = [], [], []

    def add(ia, ib, weight):
        rows.append(ia.ravel())
        cols.append(ib.ravel())
        w.append(np.broadcast_to(weight, ia.shape).ravel())

    if not grid.is_polar:
        hx, hy = grid.d1, grid.d2
        ly = np.full(grid.n2 + 1, hy)
        ly[[0, -1]] *= 0.5
        lx = np.full(grid.n1 + 1, hx)
        lx[[0, -1]] *= 0.5
        kf = 2.0 / (b_nodes[:-1, :] + b_nodes[1:, :])
        add(uid[:-1, :], uid[1:, :], kf * ly[None, :] / hx)
        kf = 2.0 / (b_nodes[:, :-1] + b_nodes[:, 1:])
        add(uid[:, :-1], uid[:, 1:], kf * lx[:, None] / hy)
    else:
        rs, dr, dth = grid.axis1, grid.d1, grid.d2
        r_face = 0.5 * (rs[:-1] + rs[1:])
        kf = 2.0 / (b_nodes[:-1, :] + b_nodes[1:, :])
        add(uid[:-1, :], uid[1:, :], kf * (r_face * dth / dr)[:, None])
        r0 = rs[0]
        lo = np.maximum(rs - dr / 2, r0)
        hi = np.minimum(rs + dr / 2, 1.0)
        start = 1 if grid.has_center else 0
        js = np.arange(start, grid.n1 + 1)
        bn = b_nodes[js]
        kf = 2.0 / (bn + np.roll(bn, -1, axis=1))
        wgt = kf * ((hi - lo)[js] / (rs[js] * dth))[:, None]
        add(uid[js], np.roll(uid[js], -1, axis=1), wgt)

    ia = np.concatenate(rows)
    ib = np.concatenate(cols)
    ww = np.concatenate(w)
    n = grid.n_unique
    off = sp.coo_matrix((-ww, (ia, ib)), shape=(n, n))
    diag = np.bincount(ia, weights=ww, minlength=n) + np.bincount(ib, weights=ww, minlength=n)
    S = off + off.T + sp.diags(diag)
    return S.tocsr()


class EllipticSolver:
    """Factorized solver for the Dirichlet problem on one grid and depth.

    ``method`` is ``"direct"`` (sparse LU), ``"cg"`` (Jacobi-preconditioned
    conjugate gradients) or ``"auto"``, which factorizes unless the number of
    unknowns exceeds ``DIRECT_LIMIT``.
    """

    def __init__(self, grid: Grid, bathymetry: Bathymetry, tol: float = 1e-10,
                 method: str = "auto", maxiter: int = 20000):
        bathymetry.check_positive(grid)
        self.grid = grid
        self.bathymetry = bathymetry
        self.tol = tol
        self.maxiter = maxiter
        pts = np.stack([grid.x, grid.y], axis=-1)
        self.b_nodes = bathymetry.depth(pts)
        self.S = assemble_stiffness(grid, self.b_nodes)
        self.M = np.bincount(grid.unique_id.ravel(), weights=grid.measure.ravel(),
                             minlength=grid.n_unique)
        tags = _unique_values(grid, grid.tags).astype(np.int64)
        self.unique_tags = tags
        self.interior = np.flatnonzero(tags == 0)
        self.outer = np.flatnonzero(tags == OUTER_BOUNDARY)
        self.islands = [np.flatnonzero(tags == ISLAND_BOUNDARY + i)
                        for i in range(grid.domain.island_count)]
        self.boundary = np.flatnonzero(tags != 0)
        self.S_II = self.S[self.interior][:, self.interior].tocsc()
        self.S_IB = self.S[self.interior][:, self.boundary].tocsr()
        n = len(self.interior)
        if method == "auto":
            method = "direct" if n <= DIRECT_LIMIT else "cg"
        self.method = method
        if method == "direct":
            self._lu = spla.splu(self.S_II, permc_spec="MMD_AT_PLUS_A")
        elif method == "cg":
            self._lu = None
            self._jacobi = 1.0 / self.S_II.diagonal()
        else:
            raise ValueError(f"unknown solver method {method!r}")
        log.debug("elliptic solver: %d unknowns, method=%s", n, method)

    # -- conversions -------------------------------------------------------
    def to_unique(self, values) -> np.ndarray:
        return _unique_values(self.grid, values)

    def to_grid(self, vec: np.ndarray) -> np.ndarray:
        return np.asarray(vec)[self.grid.unique_id]

    # -- core solves -------------------------------------------------------
    def _solve_interior(self, rhs: np.ndarray, x0=None) -> np.ndarray:
        if self.method == "direct":
            x = self._lu.solve(rhs)
        else:
            M = spla.LinearOperator(self.S_II.shape, matvec=lambda v: self._jacobi * v)
            x, info = spla.cg(self.S_II, rhs, x0=x0, rtol=self.tol, atol=0.0,
                              maxiter=self.maxiter, M=M)
            if info != 0:
                res = np.linalg.norm(self.S_II @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
                raise SolverError(
                    f"conjugate gradients did not converge in {self.maxiter} iterations "
                    f"(relative residual {res:.3e})", residual=res)
        nrm = np.linalg.norm(rhs)
        if nrm > 0:
            res = np.linalg.norm(self.S_II @ x - rhs) / nrm
            if res > self.tol:
                raise SolverError(f"relative residual {res:.3e} exceeds {self.tol:.1e}",
                                  residual=res)
        return x

    def solve_unique(self, omega_u: np.ndarray, boundary_values=None, x0=None) -> np.ndarray:
        """Solve with source ``omega_u`` and given boundary node values."""
        psi = np.zeros(self.grid.n_unique)
        rhs = self.M[self.interior] * omega_u[self.interior]
        if boundary_values is not None:
            psi[self.boundary] = boundary_values[self.boundary]
            rhs = rhs - self.S_IB @ psi[self.boundary]
        psi[self.interior] = self._solve_interior(rhs, x0=x0)
        return psi

    def flux(self, psi_u: np.ndarray, omega_u=None, island: int = 0) -> float:
        """Weak flux of b^-1 d(psi)/d(nu) through island ``island``."""
        r = self.S @ psi_u
        if omega_u is not None:
            r = r - self.M * omega_u
        return float(np.sum(r[self.islands[island]]))

    def apply(self, psi: ScalarField) -> ScalarField:
        """Discrete -div(b^-1 grad psi) at every node (boundary rows included)."""
        psi_u = self.to_unique(psi.values)
        return ScalarField(self.grid, self.to_grid((self.S @ psi_u) / self.M))

    def energy_form(self, a_u: np.ndarray, c_u: np.ndarray) -> float:
        """Discrete bilinear form int grad a . grad c / b."""
        return float(a_u @ (self.S @ c_u))


def solve_dirichlet(solver: EllipticSolver, omega: ScalarField) -> ScalarField:
    """psi with -div(b^-1 grad psi) = omega inside and psi = 0 on the boundary."""
    psi_u = solver.solve_unique(solver.to_unique(omega.values))
    return ScalarField(solver.grid, solver.to_grid(psi_u))


@dataclass(frozen=True, eq=False)
class IslandBasis:
    phi: list
    D_matrix: np.ndarray
    D_inverse: np.ndarray
    psi: list
    phi_u: list = field(default_factory=list, repr=False)
    psi_u: list = field(default_factory=list, repr=False)

    @property
    def m(self) -> int:
        return len(self.phi)


def island_basis(solver: EllipticSolver) -> IslandBasis:
    grid = solver.grid
    m = grid.domain.island_count
    if m == 0:
        return IslandBasis([], np.zeros((0, 0)), np.zeros((0, 0)), [])
    zero = np.zeros(grid.n_unique)
    phi_u = []
    for i in range(m):
        bval = np.zeros(grid.n_unique)
        bval[solver.islands[i]] = 1.0
        phi_u.append(solver.solve_unique(zero, boundary_values=bval))
    D = np.array([[solver.energy_form(phi_u[i], phi_u[j]) for j in range(m)]
                  for i in range(m)])
    D = 0.5 * (D + D.T)
    try:
        np.linalg.cholesky(D)
    except np.linalg.LinAlgError as exc:
        raise SolverError("island Gram matrix is not positive definite") from exc
    Dinv = np.linalg.inv(D)
    psi_u = [sum(Dinv[i, j] * phi_u[j] for j in range(m)) for i in range(m)]
    return IslandBasis(
        phi=[ScalarField(grid, solver.to_grid(v)) for v in phi_u],
        D_matrix=D, D_inverse=Dinv,
        psi=[ScalarField(grid, solver.to_grid(v)) for v in psi_u],
        phi_u=phi_u, psi_u=psi_u)


def assemble_stream_unique(solver: EllipticSolver, basis: IslandBasis,
                           omega_u: np.ndarray, circulations=()) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(psi, K[omega])`` as unique-node vectors."""
    circulations = tuple(circulations)
    if len(circulations) != basis.m:
        raise ValueError(f"expected {basis.m} island circulations, got {len(circulations)}")
    g = solver.solve_unique(omega_u)
    k = g.copy()
    for i in range(basis.m):
        c = -solver.flux(g, omega_u, island=i)
        k += c * basis.psi_u[i]
    psi = k.copy()
    for i, gam in enumerate(circulations):
        psi += gam * basis.psi_u[i]
    return psi, k


def assemble_stream(solver: EllipticSolver, basis: IslandBasis, omega: ScalarField,
                    circulations=()) -> ScalarField:
    """Stream function with island fluxes equal to the given circulations."""
    psi, _ = assemble_stream_unique(solver, basis, solver.to_unique(omega.values), circulations)
    return ScalarField(solver.grid, solver.to_grid(psi))


def greens_sample(solver: EllipticSolver, source_point) -> ScalarField:
    """Column of the discrete Green function for a unit mass near ``source_point``.

    The mass sits on the dual cell (node) nearest to the source point.
    """
    grid = solver.grid
    y = np.asarray(source_point, dtype=float)
    if not grid.domain.contains(y):
        raise GeometryError("source point outside the domain")
    if distance_to_boundary(grid.domain, y) < 2 * grid.spacing:
        raise GeometryError("source point closer than two cells to the boundary")
    d2 = (grid.x - y[0]) ** 2 + (grid.y - y[1]) ** 2
    node = np.unravel_index(np.argmin(d2), grid.shape)
    u = grid.unique_id[node]
    omega_u = np.zeros(grid.n_unique)
    omega_u[u] = 1.0 / solver.M[u]
    return ScalarField(grid, solver.to_grid(solver.solve_unique(omega_u)))


def source_node(grid: Grid, source_point) -> np.ndarray:
    """Physical location of the node that ``greens_sample`` uses for a source."""
    y = np.asarray(source_point, dtype=float)
    d2 = (grid.x - y[0]) ** 2 + (grid.y - y[1]) ** 2
    node = np.unravel_index(np.argmin(d2), grid.shape)
    return np.array([grid.x[node], grid.y[node]])
