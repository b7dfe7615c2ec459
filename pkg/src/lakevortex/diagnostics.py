"""Integral functionals and concentration diagnostics of the vorticity."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .elliptic import EllipticSolver, IslandBasis, assemble_stream_unique
from .fields import ScalarField
from .geometry import Bathymetry, DomainSpec, distance_to_boundary
from .velocity import VelocityField, kinetic_energy, max_boundary_flux

MASS_RADII = (2, 4, 8, 16)
CSV_COLUMNS = ("t", "s", "Gamma", "Omega", "E", "rho", "lorentz", "q_x", "q_y",
               "mass_r2", "mass_r4", "mass_r8", "mass_r16", "confinement", "boundary_flux")


class DiagnosticError(ValueError):
    pass


def circulation(omega: ScalarField) -> float:
    return omega.integral()


def total_vorticity(omega: ScalarField, b: Bathymetry) -> float:
    return omega.grid.integrate(omega.values * b.depth(omega.grid.points))


def energy(u: VelocityField, b: Bathymetry) -> float:
    """Kinetic energy (1/2) int |u|^2 b."""
    return kinetic_energy(u, b)


def energy_vortex(solver: EllipticSolver, basis: IslandBasis, omega: ScalarField,
                  circulations=()) -> float:
    """Energy from the vorticity side.

    (1/2) int omega K[omega] + sum_i G_i int omega psi_i
    + (1/2) sum_ij G_i G_j int grad psi_i . grad psi_j / b
    """
    w = solver.to_unique(omega.values)
    _, k = assemble_stream_unique(solver, basis, w, [0.0] * basis.m)
    mw = solver.M * w
    e = 0.5 * float(mw @ k)
    for i, gi in enumerate(circulations):
        e += gi * float(mw @ basis.psi_u[i])
        for j, gj in enumerate(circulations):
            e += 0.5 * gi * gj * solver.energy_form(basis.psi_u[i], basis.psi_u[j])
    return e


def typical_scale(E: float, gamma: float, omega_total: float) -> float:
    """rho = exp(-4 pi E / (Gamma Omega))."""
    if gamma * omega_total <= 0:
        raise DiagnosticError("typical scale needs Gamma * Omega > 0")
    return math.exp(-4 * math.pi * E / (gamma * omega_total))


def _ball_log_mass(R):
    """2 pi int_0^R r (ln 1/r)_+ dr."""
    R = np.minimum(np.asarray(R, dtype=float), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = math.pi * R ** 2 * (np.log(1.0 / R) + 0.5)
    return np.where(R > 0, v, 0.0)


def lorentz_norm_atoms(values, measures, scale: float = 1.0) -> float:
    """Lorentz norm of a function made of atoms ``values`` on sets of ``measures``.

    With ``scale`` = sigma the result is the norm of ``omega(sigma .)``, whose
    level sets have their measures divided by sigma^2.
    """
    v = np.abs(np.ravel(values))
    m = np.ravel(measures)
    order = np.argsort(-v, kind="stable")
    v, m = v[order], m[order]
    mu = np.cumsum(m) / scale ** 2
    gaps = v - np.append(v[1:], 0.0)
    return float(np.sum(gaps * _ball_log_mass(np.sqrt(mu / math.pi))))


def lorentz_norm(omega: ScalarField) -> float:
    """int (ln 1/|x|)_+ |omega|^*(x) dx, each dual cell treated as an atom."""
    return lorentz_norm_atoms(omega.values, omega.grid.measure)


def lorentz_norm_rescaled(omega: ScalarField, rho: float) -> float:
    """rho^2 times the Lorentz norm of omega(rho .)."""
    if rho <= 0:
        raise DiagnosticError("rho must be positive")
    return rho ** 2 * lorentz_norm_atoms(omega.values, omega.grid.measure, scale=rho)


def center_of_vorticity(omega: ScalarField) -> np.ndarray:
    g = omega.grid
    gamma = omega.integral()
    if gamma == 0.0:
        raise DiagnosticError("center of vorticity undefined for zero circulation")
    return np.array([g.integrate(g.x * omega.values), g.integrate(g.y * omega.values)]) / gamma


def boundary_cutoff(domain: DomainSpec, points, delta: float) -> np.ndarray:
    """Smooth cutoff: 0 within delta/3 of the boundary, 1 beyond 2 delta/3."""
    d = distance_to_boundary(domain, points, check=False)
    s = np.clip((np.asarray(d) - delta / 3) / (delta / 3), 0.0, 1.0)
    return s ** 3 * (10 - 15 * s + 6 * s ** 2)


def truncated_center(omega: ScalarField, eta) -> np.ndarray:
    """Gamma^-1 int eta x omega. ``eta`` is a node array or a cutoff width delta."""
    g = omega.grid
    if np.ndim(eta) == 0:
        eta = boundary_cutoff(g.domain, g.points, float(eta))
    gamma = omega.integral()
    if gamma == 0.0:
        raise DiagnosticError("truncated center undefined for zero circulation")
    w = eta * omega.values
    return np.array([g.integrate(g.x * w), g.integrate(g.y * w)]) / gamma


def mass_near_boundary(omega: ScalarField, delta: float) -> float:
    g = omega.grid
    d = distance_to_boundary(g.domain, g.points, check=False)
    return g.integrate(np.where(d < delta, np.abs(omega.values), 0.0))


def mass_outside(omega: ScalarField, center, radius: float) -> float:
    g = omega.grid
    c = np.asarray(center, dtype=float)
    far = np.hypot(g.x - c[0], g.y - c[1]) > radius
    return g.integrate(np.where(far, omega.values, 0.0))


def confinement_functional(omega: ScalarField, rho: float) -> float:
    """int omega ln(1 + diam D / (rho + dist(x, boundary)))."""
    g = omega.grid
    d = distance_to_boundary(g.domain, g.points, check=False)
    return g.integrate(omega.values * np.log1p(g.domain.diameter / (rho + d)))


def circulation_norm(gamma: float, island_circulations=()) -> float:
    """|Gamma| + sum |Gamma_i|."""
    return abs(gamma) + sum(abs(c) for c in island_circulations)


def stream_bound_constant(k_max: float, rho: float, omega_total: float, gamma: float,
                          sup_b: float, lorentz_rescaled: float) -> float:
    """Smallest C with max K[omega] <= ln(1/rho) Omega / 2pi
    + sup_b rho^2 |omega(rho .)| / 2pi + C Gamma."""
    main = (math.log(1 / rho) * omega_total + sup_b * lorentz_rescaled) / (2 * math.pi)
    return (k_max - main) / gamma


def linear_envelope_slope(t, values) -> float:
    """Smallest c with |v(t) - v(0)| <= c t over the samples."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    pos = t > 0
    if not np.any(pos):
        return 0.0
    return float(np.max(np.abs(v[pos] - v[0]) / t[pos]))


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    s: float
    Gamma: float
    Omega: float
    E: float
    rho: float
    lorentz: float
    q_x: float
    q_y: float
    mass_r2: float
    mass_r4: float
    mass_r8: float
    mass_r16: float
    confinement: float
    boundary_flux: float

    @property
    def center(self) -> np.ndarray:
        return np.array([self.q_x, self.q_y])

    @property
    def mass_outside(self) -> dict:
        return {r: getattr(self, f"mass_r{r}") for r in MASS_RADII}

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]

    @classmethod
    def from_row(cls, row) -> "DiagnosticsRecord":
        if isinstance(row, dict):
            return cls(**{c: float(row[c]) for c in CSV_COLUMNS})
        return cls(*(float(v) for v in row))

    def check(self, inf_b: float | None = None, rel: float = 1e-12) -> list[str]:
        """Violated record invariants, as messages."""
        bad = []
        if self.Gamma * self.Omega > 0:
            want = math.exp(-4 * math.pi * self.E / (self.Gamma * self.Omega))
            if abs(self.rho - want) > rel * max(want, 1e-300):
                bad.append(f"rho {self.rho!r} != exp(-4 pi E / (Gamma Omega)) = {want!r}")
        if inf_b is not None and self.Gamma > 0 and self.Omega < inf_b * self.Gamma * (1 - rel):
            bad.append(f"Omega {self.Omega} < inf b * Gamma = {inf_b * self.Gamma}")
        return bad

    def as_dict(self) -> dict:
        return asdict(self)


assert tuple(f.name for f in fields(DiagnosticsRecord)) == CSV_COLUMNS


def measure(omega: ScalarField, u: VelocityField, k_u: np.ndarray, psi_u: np.ndarray,
            solver: EllipticSolver, b: Bathymetry, t: float, s: float,
            delta: float = 0.2) -> DiagnosticsRecord:
    """Record for one time slice.

    ``psi_u`` is the full stream function on unique nodes; the energy is its
    discrete form (1/2) psi . S psi, which equals the vorticity-side formula.
    The center is the truncated one whenever vorticity lies within ``delta``
    of the boundary.
    """
    gamma = circulation(omega)
    omega_total = total_vorticity(omega, b)
    E = 0.5 * solver.energy_form(psi_u, psi_u)
    rho = typical_scale(E, gamma, omega_total) if gamma * omega_total > 0 else float("nan")
    if mass_near_boundary(omega, delta) > 0:
        q = truncated_center(omega, delta)
    else:
        q = center_of_vorticity(omega)
    r = rho if math.isfinite(rho) else 0.0
    masses = [mass_outside(omega, q, k * r) for k in MASS_RADII]
    return DiagnosticsRecord(
        t=float(t), s=float(s), Gamma=gamma, Omega=omega_total, E=E, rho=rho,
        lorentz=lorentz_norm(omega), q_x=float(q[0]), q_y=float(q[1]),
        mass_r2=masses[0], mass_r4=masses[1], mass_r8=masses[2], mass_r16=masses[3],
        confinement=confinement_functional(omega, r), boundary_flux=max_boundary_flux(u))
