"""Limiting vortex law q'(s) = -perp(grad(1/b))(q(s)) and comparison with simulations."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Bathymetry, DomainSpec, distance_to_boundary


class TrajectoryExit(RuntimeError):
    def __init__(self, s_exit: float, point):
        super().__init__(f"limiting trajectory leaves the domain at s = {s_exit:.6g}")
        self.s_exit = s_exit
        self.point = np.asarray(point)


class SpanError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LimitTrajectory:
    q0: np.ndarray
    s: np.ndarray
    q: np.ndarray  # (n_samples, 2)
    tolerance: float  # step-halving difference observed at the accepted step

    def at(self, s) -> np.ndarray:
        """Linear interpolation of the samples."""
        s = np.asarray(s, dtype=float)
        lo, hi = min(self.s[0], self.s[-1]), max(self.s[0], self.s[-1])
        if np.any(s < lo - 1e-12) or np.any(s > hi + 1e-12):
            raise SpanError(f"s outside the trajectory span [{lo}, {hi}]")
        order = np.argsort(self.s)
        ss = self.s[order]
        return np.stack([np.interp(s, ss, self.q[order, 0]),
                         np.interp(s, ss, self.q[order, 1])], axis=-1)


def limit_velocity(b: Bathymetry, q) -> np.ndarray:
    return -b.perp_grad_inv(q)


def _rk4(b: Bathymetry, q0, s_grid, substeps, domain):
    q = np.array(q0, dtype=float)
    out = [q.copy()]
    for s0, s1 in zip(s_grid[:-1], s_grid[1:]):
        h = (s1 - s0) / substeps
        for k in range(substeps):
            k1 = limit_velocity(b, q)
            k2 = limit_velocity(b, q + h / 2 * k1)
            k3 = limit_velocity(b, q + h / 2 * k2)
            k4 = limit_velocity(b, q + h * k3)
            q = q + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if domain is not None and distance_to_boundary(domain, q, check=False) <= 0.0:
                raise TrajectoryExit(s0 + (k + 1) * h, q)
        out.append(q.copy())
    return np.array(out)


def limiting_trajectory(b: Bathymetry, q0, s_span, n_samples: int = 201,
                        domain: DomainSpec | None = None, max_step: float = 1e-2,
                        tol: float = 1e-10) -> LimitTrajectory:
    """RK4 integration sampled at ``n_samples`` uniform values of s.

    The internal step starts at ``max_step`` and is halved until halving it
    again changes every sample by less than ``tol``.
    """
    q0 = np.asarray(q0, dtype=float)
    if domain is not None:
        if not domain.contains(q0) or distance_to_boundary(domain, q0) <= 0:
            raise ValueError("q0 must lie in the open domain")
    s0, s1 = (0.0, float(s_span)) if np.ndim(s_span) == 0 else map(float, s_span)
    if n_samples < 2:
        raise ValueError("need at least two samples")
    s_grid = np.linspace(s0, s1, n_samples)
    gap = abs(s_grid[1] - s_grid[0])
    sub = max(1, math.ceil(gap / max_step))
    q = _rk4(b, q0, s_grid, sub, domain)
    diff = math.inf
    for _ in range(12):
        q2 = _rk4(b, q0, s_grid, 2 * sub, domain)
        diff = float(np.max(np.abs(q2 - q)))
        q, sub = q2, 2 * sub
        if diff < tol:
            break
    return LimitTrajectory(q0, s_grid, q, diff)


def rescale_time(t, E: float, gamma: float):
    """s = E t / Gamma."""
    if gamma == 0:
        raise ValueError("rescaled time undefined for zero circulation")
    return np.asarray(t) * E / gamma if np.ndim(t) else float(t) * E / gamma


def trajectory_error(records: Sequence, limit: LimitTrajectory) -> float:
    """sup over records of |q(s) - q*(s)|; records carry ``s``, ``q_x``, ``q_y``."""
    s = np.array([r.s for r in records], dtype=float)
    q = np.array([[r.q_x, r.q_y] for r in records], dtype=float)
    lo, hi = min(limit.s[0], limit.s[-1]), max(limit.s[0], limit.s[-1])
    if s.min() < lo - 1e-9 or s.max() > hi + 1e-9:
        raise SpanError(f"records span [{s.min():.6g}, {s.max():.6g}] exceeds the "
                        f"limit span [{lo:.6g}, {hi:.6g}]")
    return float(np.max(np.linalg.norm(q - limit.at(np.clip(s, lo, hi)), axis=-1)))


@dataclass(frozen=True)
class RichardsonVelocity:
    epsilon_form: np.ndarray  # (Gamma / 4 pi) ln(1/eps) perp(grad ln b)
    energy_form: np.ndarray  # -(E / Gamma) perp(grad(1/b))
    E: float

    @property
    def ratio(self) -> float:
        """|energy form| / |epsilon form| (nan when both vanish)."""
        a = float(np.linalg.norm(self.epsilon_form))
        c = float(np.linalg.norm(self.energy_form))
        return c / a if a > 0 else math.nan


def richardson_velocity(b: Bathymetry, q, gamma: float, eps: float,
                        E: float | None = None) -> RichardsonVelocity:
    """Both forms of the formal vortex velocity in original time.

    Without ``E`` the leading-order energy (Gamma^2 / 4 pi) ln(1/eps) is used.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    q = np.asarray(q, dtype=float)
    depth, grad = b.evaluate(q)
    perp_grad_ln_b = np.array([grad[1], -grad[0]]) / depth
    eps_form = gamma / (4 * math.pi) * math.log(1 / eps) * perp_grad_ln_b
    if E is None:
        E = gamma ** 2 / (4 * math.pi) * math.log(1 / eps)
    return RichardsonVelocity(eps_form, -(E / gamma) * b.perp_grad_inv(q), float(E))


REPORT_KEYS = ("scenario", "epsilons", "sup_errors", "gamma_drift", "energy_drift",
               "omega_slope", "verdict")


@dataclass
class ConvergenceReport:
    scenario: str
    epsilons: list
    sup_errors: list
    gamma_drift: list
    energy_drift: list
    omega_slope: list
    verdict: str
    notes: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.epsilons)
        for name in ("sup_errors", "gamma_drift", "energy_drift", "omega_slope"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have one entry per epsilon")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("notes")
        return {k: d[k] for k in REPORT_KEYS}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, allow_nan=True)


def validate_report(data: dict) -> None:
    """Raise ValueError unless ``data`` follows the report.json schema."""
    if set(data) != set(REPORT_KEYS):
        raise ValueError(f"report keys {sorted(data)} differ from {sorted(REPORT_KEYS)}")
    if not isinstance(data["scenario"], str) or data["verdict"] not in ("pass", "fail"):
        raise ValueError("scenario must be a string and verdict 'pass' or 'fail'")
    n = len(data["epsilons"])
    for k in ("sup_errors", "gamma_drift", "energy_drift", "omega_slope"):
        v = data[k]
        if not isinstance(v, list) or len(v) != n:
            raise ValueError(f"{k} must be a list with one entry per epsilon")
        if not all(x is None or isinstance(x, (int, float)) for x in v):
            raise ValueError(f"{k} entries must be numbers or null")
