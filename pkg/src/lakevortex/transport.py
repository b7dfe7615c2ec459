"""Semi-Lagrangian transport of the potential vorticity omega / b."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .elliptic import EllipticSolver, IslandBasis, assemble_stream_unique
from .fields import ScalarField, interpolate
from .geometry import Bathymetry, DomainSpec, project_to_domain
from .velocity import VelocityField, velocity_from_stream

DEFAULT_CFL = 0.5
DEFAULT_INTERPOLATION = "spline5"
DEFAULT_MONOTONE = "lower"


class CFLError(ValueError):
    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"time step {dt:.6g} violates the CFL limit; need dt <= {dt_max:.6g}")
        self.dt = dt
        self.dt_max = dt_max


VelocityProvider = Callable[[float, np.ndarray], np.ndarray]


def frozen(u) -> VelocityProvider:
    """Time-independent provider from a VelocityField or a function of points."""
    if isinstance(u, VelocityField):
        return lambda t, p: u(p)
    return lambda t, p: np.asarray(u(p), dtype=float)


@dataclass
class FlowMapper:
    """RK3 characteristic tracer with clamp-to-domain projection.

    ``max_step`` bounds the internal RK3 step; ``clamp_total`` accumulates how
    far feet had to be moved back into the domain.
    """

    domain: DomainSpec
    velocity: VelocityProvider
    max_step: float = 1e-2
    clamp_total: float = 0.0
    clamp_max: float = 0.0

    def _project(self, p):
        q, moved = project_to_domain(self.domain, p)
        if moved.size:
            self.clamp_total += float(np.sum(moved))
            self.clamp_max = max(self.clamp_max, float(np.max(moved)))
        return q

    def rk3_step(self, t, h, p):
        # classical third-order Kutta scheme; stages may sit a fraction of a
        # cell outside, where the interpolants extrapolate, and only the foot
        # is projected so boundary-tangent motion keeps full order
        k1 = self.velocity(t, p)
        k2 = self.velocity(t + h / 2, p + (h / 2) * k1)
        k3 = self.velocity(t + h, p - h * k1 + 2 * h * k2)
        return self._project(p + (h / 6) * (k1 + 4 * k2 + k3))


def flow_map(mapper: FlowMapper, t0: float, t1: float, points, n_steps: int | None = None):
    """Positions at time ``t1`` of the particles that sit at ``points`` at ``t0``.

    ``t1 < t0`` integrates backward along the characteristics.
    """
    p = np.array(points, dtype=float, copy=True)
    span = t1 - t0
    if span == 0.0:
        return p
    if n_steps is None:
        n_steps = max(1, math.ceil(abs(span) / mapper.max_step))
    h = span / n_steps
    t = t0
    for _ in range(n_steps):
        p = mapper.rk3_step(t, h, p)
        t += h
    return p


@dataclass(frozen=True, eq=False)
class LakeState:
    """Vorticity, island circulations and the stream function and velocity they induce."""

    t: float
    omega: ScalarField
    circulations: tuple
    psi: ScalarField
    u: VelocityField
    k_u: np.ndarray = field(repr=False)  # K[omega] on unique nodes
    psi_u: np.ndarray = field(repr=False)
    clamp_total: float = 0.0
    mass_correction: float = 1.0  # product of all mass-fixer factors
    u_prev: VelocityField | None = field(default=None, repr=False)  # velocity one step back
    dt_prev: float = 0.0

    @classmethod
    def from_vorticity(cls, omega: ScalarField, circulations: Sequence[float],
                       solver: EllipticSolver, basis: IslandBasis, b: Bathymetry,
                       t: float = 0.0, clamp_total: float = 0.0,
                       mass_correction: float = 1.0, u_prev: VelocityField | None = None,
                       dt_prev: float = 0.0) -> "LakeState":
        circ = tuple(float(c) for c in circulations)
        psi_u, k_u = assemble_stream_unique(solver, basis, solver.to_unique(omega.values), circ)
        psi = ScalarField(omega.grid, solver.to_grid(psi_u))
        return cls(t, omega, circ, psi, velocity_from_stream(psi, b), k_u, psi_u,
                   clamp_total, mass_correction, u_prev, dt_prev)

    @property
    def grid(self):
        return self.omega.grid


def extrapolated(state: LakeState) -> VelocityProvider:
    """u(t) = u_n + (t - t_n) (u_n - u_{n-1}) / dt_{n-1}; frozen without history."""
    u = state.u
    if state.u_prev is None or state.dt_prev <= 0.0:
        return frozen(u)
    rate = (u.u - state.u_prev.u) / state.dt_prev
    both = np.concatenate([u.u, rate])
    t0 = state.t

    def provider(t, p):
        v = interpolate(u.grid, both, p)
        return np.moveaxis(v[:2] + (t - t0) * v[2:], 0, -1)

    return provider


def _blur(grid, v, width: int = 3):
    from scipy import ndimage

    if grid.is_polar:
        v = ndimage.uniform_filter1d(v, 2 * width + 1, axis=1, mode="wrap")
        return ndimage.uniform_filter1d(v, 2 * width + 1, axis=0, mode="nearest")
    return ndimage.uniform_filter(v, 2 * width + 1, mode="nearest")


def _local_fix(grid, new, clipped, target):
    """Restore the integral by adjusting positive values near where clipping acted.

    ``clipped`` is the size of the clipping correction at each node; the
    adjustment is spread over a few cells around it in proportion to the
    local value, so mass added at a vortex edge is taken back at that edge
    rather than from the core. No node changes sign.
    """
    excess = grid.integrate(new) - target
    w = _blur(grid, clipped) * np.maximum(new, 0.0) if excess > 0 else _blur(grid, clipped)
    mass_w = grid.integrate(w)
    if mass_w <= 0.0:
        return new
    delta = excess / mass_w * w
    if excess > 0:
        delta = np.minimum(delta, np.maximum(new, 0.0))
    return new - delta


def max_stable_dt(state: LakeState, cfl: float = DEFAULT_CFL) -> float:
    vmax = state.u.max_speed()
    return math.inf if vmax == 0.0 else cfl * state.grid.spacing / vmax


def advect(state: LakeState, dt: float, solver: EllipticSolver, basis: IslandBasis,
           b: Bathymetry, cfl: float = DEFAULT_CFL, monotone: bool | str = DEFAULT_MONOTONE,
           method: str = DEFAULT_INTERPOLATION, mass_fixer: bool = True,
           extrapolate: bool = True) -> LakeState:
    """One semi-Lagrangian step of length ``dt``.

    Feet are traced backward with one RK3 step. The velocity inside the step
    is extrapolated linearly in time from the current and previous fields
    (second order); with ``extrapolate`` off, or on the first step, it is
    frozen at the start of the step (first order). omega / b is interpolated
    at the feet and multiplied by the local depth. Pointwise interpolation does not conserve the circulation
    exactly; ``mass_fixer`` rescales the new vorticity by the global factor
    that restores it, and the product of these factors is kept in
    ``mass_correction`` so the raw drift stays visible.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dt_max = max_stable_dt(state, cfl)
    if dt > dt_max * (1 + 1e-12):
        raise CFLError(dt, dt_max)
    grid = state.grid
    if state.u.max_speed() == 0.0:
        return replace(state, t=state.t + dt, u_prev=state.u, dt_prev=dt)
    mapper = FlowMapper(grid.domain, extrapolated(state) if extrapolate else frozen(state.u))
    feet = flow_map(mapper, state.t + dt, state.t, grid.points, n_steps=1)
    depth = solver.b_nodes
    pv_old = state.omega.values / depth
    pv, raw = interpolate(grid, pv_old, feet, monotone=monotone, method=method, return_raw=True)
    new = depth * pv
    correction = state.mass_correction
    before, after = grid.integrate(state.omega.values), grid.integrate(new)
    if mass_fixer and after != 0.0 and before != 0.0:
        new = _local_fix(grid, new, depth * np.abs(pv - raw), before)
        fixed = grid.integrate(new)
        factor = before / fixed
        new = new * factor
        correction *= before / after
    return LakeState.from_vorticity(ScalarField(grid, new), state.circulations, solver, basis,
                                    b, t=state.t + dt,
                                    clamp_total=state.clamp_total + mapper.clamp_total,
                                    mass_correction=correction, u_prev=state.u, dt_prev=dt)


Hook = Callable[[int, LakeState], object]


def step_simulation(state: LakeState, dt: float, n_steps: int, solver: EllipticSolver,
                    basis: IslandBasis, b: Bathymetry, hooks: Sequence[Hook] = (),
                    record_interval: int = 10, cfl: float = DEFAULT_CFL,
                    monotone: bool | str = DEFAULT_MONOTONE, method: str = DEFAULT_INTERPOLATION,
                    mass_fixer: bool = True, extrapolate: bool = True):
    """Advance ``n_steps`` steps, calling every hook at step 0, every
    ``record_interval`` steps and at the final step.

    Returns ``(final_state, records)`` where ``records`` collects the return
    values of the first hook (or the states themselves when no hook is given).
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if record_interval < 1:
        raise ValueError("record_interval must be at least 1")
    records = []

    def capture(k, s):
        out = [h(k, s) for h in hooks]
        records.append(out[0] if hooks else s)

    capture(0, state)
    for k in range(1, n_steps + 1):
        state = advect(state, dt, solver, basis, b, cfl=cfl, monotone=monotone,
                       method=method, mass_fixer=mass_fixer, extrapolate=extrapolate)
        if k % record_interval == 0 or k == n_steps:
            capture(k, state)
    return state, records
