"""Scenario construction, configuration files, runs, convergence studies and output."""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import __version__
from .asymptotics import (ConvergenceReport, SpanError, TrajectoryExit, limiting_trajectory,
                          trajectory_error)
from .diagnostics import (CSV_COLUMNS, DiagnosticsRecord, circulation_norm,
                          linear_envelope_slope, measure)
from .elliptic import EllipticSolver, island_basis
from .fields import METHODS, ScalarField
from .geometry import (Bathymetry, DomainKind, DomainSpec, GeometryError, build_grid,
                       distance_to_boundary)
from .transport import DEFAULT_CFL, DEFAULT_INTERPOLATION, LakeState, advect, max_stable_dt

log = logging.getLogger(__name__)

PROFILES = ("bump", "cosine")
MIN_CELLS_ACROSS = 6
STUDY_CELLS_ACROSS = 12
GAMMA_BUDGET = 1e-3
ENERGY_BUDGET = 1e-2
# normalized Omega slopes of a study may differ by at most this factor
OMEGA_SLOPE_SPREAD = 4.0
STATIONARY_CELLS = 5
CLIP_MODES = {"lower": "lower", "both": True, "none": False}


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` names the offending entry as ``section.key``."""

    def __init__(self, field_name: str, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field_name}{where}: {message}")
        self.field = field_name
        self.line = line


class OutputExistsError(FileExistsError):
    pass


# ---------------------------------------------------------------------------
# blob profiles

def _profile_values(profile: str, z):
    z = np.asarray(z, dtype=float)
    inside = z < 1.0
    if profile == "bump":
        q = np.where(inside, 1.0 - z ** 2, 1.0)
        return np.where(inside, np.exp(-1.0 / q), 0.0)
    if profile == "cosine":
        return np.where(inside, 0.5 * (1.0 + np.cos(np.pi * np.minimum(z, 1.0))), 0.0)
    raise ScenarioError("blob.profile", f"unknown profile {profile!r}; use one of {PROFILES}")


def profile_integral(profile: str) -> float:
    """Integral of the radial profile over the plane."""
    if profile == "cosine":
        return math.pi / 2 - 2 / math.pi
    val, _ = integrate.quad(lambda r: 2 * math.pi * r * float(_profile_values(profile, r)),
                            0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return val


def local_spacing(grid, q0, eps: float) -> float:
    """Largest node spacing over the blob support."""
    if not grid.is_polar:
        return max(grid.d1, grid.d2)
    r = float(np.hypot(*q0)) + eps
    return max(grid.d1, min(r, 1.0) * grid.d2)


def cells_across(grid, q0, eps: float) -> float:
    return 2 * eps / local_spacing(grid, q0, eps)


def concentrated_blob(profile: str, q0, eps: float, gamma: float, grid,
                      b: Bathymetry | None = None) -> ScalarField:
    """(gamma / eps^2) f((x - q0) / eps) / int f, rescaled so its grid integral is gamma."""
    q0 = np.asarray(q0, dtype=float)
    if b is not None:
        b.check_positive(grid)
    n = cells_across(grid, q0, eps)
    if n < MIN_CELLS_ACROSS:
        raise ScenarioError("blob.epsilon", f"blob spans {n:.1f} cells across; need at least "
                            f"{MIN_CELLS_ACROSS} (raise the resolution)")
    z = np.hypot(grid.x - q0[0], grid.y - q0[1]) / eps
    w = gamma / eps ** 2 * _profile_values(profile, z) / profile_integral(profile)
    total = grid.integrate(w)
    if total == 0.0:
        raise ScenarioError("blob.q0", "blob misses every grid node")
    return ScalarField(grid, w * (gamma / total))


# ---------------------------------------------------------------------------
# scenario

@dataclass(frozen=True)
class Blob:
    profile: str = "cosine"
    q0: tuple = (0.3, 0.0)
    epsilon: float = 0.05
    gamma: float = 1.0


def default_bathymetry(domain: DomainSpec, family: str) -> Bathymetry:
    """Family defaults; affine depth is 1 + x2 on rectangles and 1 + x2/2 on circular domains."""
    if family == "affine":
        slope = (0.0, 1.0) if domain.kind is DomainKind.RECTANGLE else (0.0, 0.5)
        return Bathymetry.affine(1.0, slope)
    return Bathymetry.from_config(family)


@dataclass(frozen=True)
class Scenario:
    domain: DomainSpec
    bathymetry: Bathymetry
    blob: Blob
    name: str = "scenario"
    circulations: tuple = ()
    resolution: int = 128
    cfl: float = DEFAULT_CFL  # adaptive steps dt = cfl * h / max|u|
    s_end: float = 1.0
    record_interval: int = 10
    seed: int = 0
    interpolation: str = DEFAULT_INTERPOLATION
    clip: str = "lower"  # interpolation clipping: lower, both or none
    mass_fixer: bool = True
    delta: float = 0.2

    def __post_init__(self):
        bl = self.blob
        if bl.profile not in PROFILES:
            raise ScenarioError("blob.profile", f"unknown profile {bl.profile!r}; use one of {PROFILES}")
        if not 0.0 < bl.epsilon < 0.5:
            raise ScenarioError("blob.epsilon", f"must lie in (0, 0.5), got {bl.epsilon}")
        if bl.gamma == 0.0 or not math.isfinite(bl.gamma):
            raise ScenarioError("blob.gamma", "must be finite and nonzero")
        q0 = np.asarray(bl.q0, dtype=float)
        if q0.shape != (2,) or not np.all(np.isfinite(q0)):
            raise ScenarioError("blob.q0", "must be two finite coordinates")
        if not self.domain.contains(q0, tol=0.0):
            raise ScenarioError("blob.q0", f"{tuple(q0)} lies outside the domain")
        d = distance_to_boundary(self.domain, q0)
        if d < bl.epsilon:
            raise ScenarioError("blob.epsilon", f"containment B(q0, epsilon) in D fails: "
                                f"epsilon {bl.epsilon} exceeds the boundary distance {d:.4g}")
        if len(self.circulations) != self.domain.island_count:
            raise ScenarioError("run.circulations", f"expected {self.domain.island_count} "
                                f"island circulations, got {len(self.circulations)}")
        if not isinstance(self.resolution, int) or self.resolution < 8:
            raise ScenarioError("run.resolution", f"must be an integer >= 8, got {self.resolution}")
        if not 0.0 < self.cfl <= 1.0:
            raise ScenarioError("run.cfl", f"must lie in (0, 1], got {self.cfl}")
        if not (self.s_end > 0 and math.isfinite(self.s_end)):
            raise ScenarioError("run.s_end", "must be positive")
        if self.record_interval < 1:
            raise ScenarioError("run.record_interval", "must be at least 1")
        if self.interpolation not in METHODS:
            raise ScenarioError("run.interpolation", f"unknown method {self.interpolation!r}; "
                                f"use one of {tuple(METHODS)}")
        if self.clip not in CLIP_MODES:
            raise ScenarioError("run.clip", f"unknown clipping {self.clip!r}; use one of "
                                f"{tuple(CLIP_MODES)}")
        if not self.delta > 0:
            raise ScenarioError("run.delta", "must be positive")
        try:
            self.bathymetry.check_positive(build_grid(self.domain, 16))
        except GeometryError as exc:
            raise ScenarioError("bathymetry.family", str(exc)) from None

    def with_epsilon(self, eps: float, resolution: int | None = None) -> "Scenario":
        return replace(self, blob=replace(self.blob, epsilon=float(eps)),
                       resolution=self.resolution if resolution is None else int(resolution))

    def to_ini(self) -> str:
        """Canonical configuration text; load_scenario reads it back unchanged."""
        dom = self.domain
        lines = ["[domain]", f"kind = {dom.kind.value}"]
        if dom.kind is DomainKind.RECTANGLE:
            lines += [f"width = {dom.width!r}", f"height = {dom.height!r}"]
        elif dom.kind is DomainKind.ANNULUS:
            lines.append(f"inner_radius = {dom.inner_radius!r}")
        lines += ["", "[bathymetry]", f"family = {self.bathymetry.family}"]
        for k, v in self.bathymetry.params:
            lines.append(f"{k} = {_fmt(v)}")
        bl = self.blob
        lines += ["", "[blob]", f"profile = {bl.profile}", f"q0 = {_fmt(bl.q0)}",
                  f"epsilon = {bl.epsilon!r}", f"gamma = {bl.gamma!r}",
                  "", "[run]", f"name = {self.name}",
                  f"circulations = {_fmt(self.circulations)}",
                  f"resolution = {self.resolution}", f"cfl = {self.cfl!r}",
                  f"s_end = {self.s_end!r}", f"record_interval = {self.record_interval}",
                  f"seed = {self.seed}", f"interpolation = {self.interpolation}",
                  f"clip = {self.clip}",
                  f"mass_fixer = {str(self.mass_fixer).lower()}", f"delta = {self.delta!r}"]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        return ", ".join(repr(float(x)) for x in v)
    return repr(v)


# ---------------------------------------------------------------------------
# configuration files

_KEYS = {
    "domain": {"kind", "width", "height", "inner_radius"},
    "bathymetry": {"family", "value", "c0", "slope", "c2", "amplitude", "center", "width"},
    "blob": {"profile", "q0", "epsilon", "gamma"},
    "run": {"name", "circulations", "resolution", "cfl", "s_end", "record_interval", "seed",
            "interpolation", "clip", "mass_fixer", "delta"},
}
_VECTOR_KEYS = {"slope", "center", "q0", "circulations"}


def _key_lines(text: str) -> dict:
    """(section, key) -> line number."""
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip().lower()
        elif section and s and s[0] not in "#;":
            key = re.split(r"[=:]", s, 1)[0].strip().lower()
            out.setdefault((section, key), i)
    return out


def parse_scenario(text: str, source: str = "<config>") -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ScenarioError("config", f"cannot parse {source}: {exc.message.splitlines()[0]}"
                            if hasattr(exc, "message") else str(exc), line) from None
    lines = _key_lines(text)

    for sec in parser.sections():
        if sec not in _KEYS:
            raise ScenarioError(sec, f"unknown section [{sec}]", lines.get((sec, None)))
        for key in parser[sec]:
            if key not in _KEYS[sec]:
                raise ScenarioError(f"{sec}.{key}", "unknown key", lines.get((sec, key)))
    for sec in ("domain", "blob"):
        if not parser.has_section(sec):
            raise ScenarioError(sec, f"missing section [{sec}]")

    def get(sec, key, conv, default=None, required=False):
        where = f"{sec}.{key}"
        if not parser.has_option(sec, key):
            if required:
                raise ScenarioError(where, "required key is missing")
            return default
        raw = parser.get(sec, key).strip()
        try:
            if key in _VECTOR_KEYS:
                return tuple(float(v) for v in raw.split(",") if v.strip())
            return conv(raw)
        except ValueError:
            raise ScenarioError(where, f"cannot read {raw!r}", lines.get((sec, key))) from None

    def boolean(raw):
        v = raw.lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)

    def at(where):
        sec, key = where.split(".", 1) if "." in where else (where, None)
        return lines.get((sec, key))

    try:
        kind = get("domain", "kind", str, required=True).lower()
        if kind == "disk":
            domain = DomainSpec.disk()
        elif kind == "rectangle":
            domain = DomainSpec.rectangle(get("domain", "width", float, 2.0),
                                          get("domain", "height", float, 1.0))
        elif kind == "annulus":
            domain = DomainSpec.annulus(get("domain", "inner_radius", float, required=True))
        else:
            raise ScenarioError("domain.kind", f"unknown domain kind {kind!r}", at("domain.kind"))
    except GeometryError as exc:
        raise ScenarioError("domain", str(exc)) from None

    family = get("bathymetry", "family", str, "constant") if parser.has_section("bathymetry") \
        else "constant"
    params = {k: get("bathymetry", k, float) for k in parser["bathymetry"] if k != "family"} \
        if parser.has_section("bathymetry") else {}
    try:
        base = default_bathymetry(domain, family)
        merged = {**base.p, **params}
        bathymetry = Bathymetry.from_config(family, **merged)
    except (GeometryError, TypeError) as exc:
        raise ScenarioError("bathymetry.family", str(exc), at("bathymetry.family")) from None

    blob = Blob(profile=get("blob", "profile", str, "cosine").lower(),
                q0=get("blob", "q0", float, required=True),
                epsilon=get("blob", "epsilon", float, required=True),
                gamma=get("blob", "gamma", float, 1.0))
    has_run = parser.has_section("run")

    def run_opt(key, conv, default):
        return get("run", key, conv, default) if has_run else default

    circ = run_opt("circulations", float, None)
    if circ is None:
        circ = (0.0,) * domain.island_count
    try:
        return Scenario(
            domain=domain, bathymetry=bathymetry, blob=blob,
            name=run_opt("name", str, Path(source).stem if source != "<config>" else "scenario"),
            circulations=tuple(circ), resolution=run_opt("resolution", int, 128),
            cfl=run_opt("cfl", float, DEFAULT_CFL), s_end=run_opt("s_end", float, 1.0),
            record_interval=run_opt("record_interval", int, 10), seed=run_opt("seed", int, 0),
            interpolation=run_opt("interpolation", str, DEFAULT_INTERPOLATION),
            clip=run_opt("clip", str, "lower").lower(),
            mass_fixer=run_opt("mass_fixer", boolean, True), delta=run_opt("delta", float, 0.2))
    except ScenarioError as exc:
        if exc.line is None and at(exc.field) is not None:
            raise ScenarioError(exc.field, str(exc).split(": ", 1)[1], at(exc.field)) from None
        raise


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text, source=str(path))


# ---------------------------------------------------------------------------
# runs

@dataclass
class RunOutput:
    scenario: Scenario
    records: list
    summary: dict
    E0: float
    gamma0: float
    omega0: float
    config_hash: str
    version: str = __version__
    final_state: LakeState | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.records:
            raise ValueError("a run produces at least one record")
        t = [r.t for r in self.records]
        if any(b < a for a, b in zip(t, t[1:])):
            raise ValueError("record times must be nondecreasing")

    @property
    def gamma_drift(self) -> float:
        return max(abs(r.Gamma - self.gamma0) for r in self.records) / abs(self.gamma0)

    @property
    def energy_drift(self) -> float:
        return max(abs(r.E - self.E0) for r in self.records) / abs(self.E0)

    @property
    def omega_slope(self) -> float:
        """Linear envelope slope of Omega, divided by |Gamma| times the circulation norm."""
        slope = linear_envelope_slope([r.t for r in self.records], [r.Omega for r in self.records])
        return slope / (abs(self.gamma0) * circulation_norm(self.gamma0, self.scenario.circulations))


def _grid_and_solver(scenario: Scenario):
    grid = build_grid(scenario.domain, scenario.resolution)
    scenario.bathymetry.check_positive(grid)
    solver = EllipticSolver(grid, scenario.bathymetry)
    return grid, solver, island_basis(solver)


def run(scenario: Scenario, progress: Callable[[DiagnosticsRecord], object] | None = None,
        max_steps: int | None = None) -> RunOutput:
    """Simulate until the rescaled time s = E t / Gamma reaches ``s_end``.

    Steps are adaptive, dt = cfl * h / max|u| at the start of each step, cut
    short to land exactly on the final time. ``max_steps`` truncates the run.
    """
    sc = scenario
    b = sc.bathymetry
    grid, solver, basis = _grid_and_solver(sc)
    omega = concentrated_blob(sc.blob.profile, sc.blob.q0, sc.blob.epsilon, sc.blob.gamma, grid, b)
    state = LakeState.from_vorticity(omega, sc.circulations, solver, basis, b)

    def record(st):
        rec = measure(st.omega, st.u, st.k_u, st.psi_u, solver, b, st.t,
                      E0 * st.t / gamma0 if gamma0 else 0.0, delta=sc.delta)
        if progress is not None:
            progress(rec)
        return rec

    gamma0 = omega.integral()
    E0 = 0.5 * solver.energy_form(state.psi_u, state.psi_u)
    if not E0 > 0:
        raise RuntimeError(f"{sc.name}: initial energy {E0} is not positive")
    rec0 = record(state)
    omega0 = rec0.Omega
    t_end = sc.s_end * gamma0 / E0
    if t_end <= 0:
        raise RuntimeError(f"{sc.name}: nonpositive duration; Gamma and E must share a sign")
    records = [rec0]
    k = 0
    overshoot = 0.0
    pv_max0 = float(np.max(omega.values / solver.b_nodes))
    while state.t < t_end * (1 - 1e-14) and (max_steps is None or k < max_steps):
        dt = min(max_stable_dt(state, sc.cfl), t_end - state.t)
        try:
            state = advect(state, dt, solver, basis, b, cfl=sc.cfl, monotone=CLIP_MODES[sc.clip],
                           method=sc.interpolation, mass_fixer=sc.mass_fixer)
        except Exception as exc:
            raise RuntimeError(f"{sc.name}: step {k + 1} at t = {state.t:.6g} failed: {exc}") from exc
        k += 1
        overshoot = max(overshoot, float(np.max(state.omega.values / solver.b_nodes)) - pv_max0)
        done = state.t >= t_end * (1 - 1e-14)
        if k % sc.record_interval == 0 or done or (max_steps is not None and k == max_steps):
            records.append(record(state))
    summary = {
        "steps": k, "t_end": state.t, "s_end": records[-1].s, "resolution": sc.resolution,
        "spacing": grid.spacing, "cells_across": cells_across(grid, sc.blob.q0, sc.blob.epsilon),
        "mass_correction": state.mass_correction, "clamp_total": state.clamp_total,
        "pv_overshoot": overshoot / pv_max0,
    }
    out = RunOutput(sc, records, summary, E0, gamma0, omega0, sc.config_hash(),
                    final_state=state)
    summary.update(gamma_drift=out.gamma_drift, energy_drift=out.energy_drift,
                   omega_slope=out.omega_slope)
    return out


def limit_error(output: RunOutput) -> float:
    """sup over records of the distance between the vortex center and the limiting path."""
    sc = output.scenario
    s_max = max(r.s for r in output.records)
    limit = limiting_trajectory(sc.bathymetry, sc.blob.q0, (0.0, max(s_max, 1e-12)),
                                n_samples=401, domain=sc.domain)
    return trajectory_error(output.records, limit)


def run_budgets_hold(output: RunOutput) -> bool:
    return output.gamma_drift <= GAMMA_BUDGET and output.energy_drift <= ENERGY_BUDGET


# ---------------------------------------------------------------------------
# convergence studies

def study_resolution(scenario: Scenario, eps: float, cells: int = STUDY_CELLS_ACROSS) -> int:
    """Smallest resolution >= the base one with at least ``cells`` nodes across the blob."""
    n = scenario.resolution
    dom = scenario.domain
    q0 = scenario.blob.q0
    if dom.is_polar:
        r = min(float(np.hypot(*q0)) + eps, 1.0)
        need = math.ceil(cells * max(1.0 - dom.inner_radius, math.pi * r) / (2 * eps))
    else:
        need = math.ceil(cells * dom.width / (2 * eps))
    n = max(n, need)
    while cells_across(build_grid(dom, n), q0, eps) < cells:
        n += 1
    return n


@dataclass
class MemberResult:
    epsilon: float
    resolution: int
    output: RunOutput | None
    sup_error: float | None
    error: str | None = None


def _run_member(args) -> MemberResult:
    scenario, eps = args
    res = study_resolution(scenario, eps)
    sc = scenario.with_epsilon(eps, res)
    log.info("study member eps=%g at resolution %d", eps, res)
    try:
        out = run(sc)
        err = limit_error(out)
    except (RuntimeError, ValueError, TrajectoryExit, SpanError) as exc:
        return MemberResult(eps, res, None, None, str(exc))
    return MemberResult(eps, res, out, err)


def convergence_study(base: Scenario, epsilons: Sequence[float], workers: int = 1) -> ConvergenceReport:
    """Run the blob at each epsilon and compare the vortex path with the limit.

    The verdict passes when the sup errors strictly decrease, every member
    keeps its circulation and energy within budget, and the normalized Omega
    slopes stay within a fixed factor of each other. With constant depth the
    limit is stationary and the error decrease is replaced by the requirement
    that every member wanders at most five cells.
    """
    eps = [float(e) for e in epsilons]
    if len(eps) < 2:
        raise ValueError("a convergence study needs at least two epsilons")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly descending")
    jobs = [(base, e) for e in eps]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(_run_member, jobs))
    else:
        members = [_run_member(j) for j in jobs]

    notes = []
    ok = True
    for m in members:
        if m.output is None:
            ok = False
            notes.append(f"eps={m.epsilon}: run failed: {m.error}")
        elif not run_budgets_hold(m.output):
            ok = False
            notes.append(f"eps={m.epsilon}: conservation budget exceeded (gamma drift "
                         f"{m.output.gamma_drift:.3g}, energy drift {m.output.energy_drift:.3g})")
    errs = [m.sup_error for m in members]
    if ok:
        if base.bathymetry.is_constant:
            for m in members:
                cap = STATIONARY_CELLS * m.output.summary["spacing"]
                if m.sup_error > cap:
                    ok = False
                    notes.append(f"eps={m.epsilon}: wander {m.sup_error:.3g} exceeds {cap:.3g}")
        elif any(b >= a for a, b in zip(errs, errs[1:])):
            ok = False
            notes.append("sup errors do not strictly decrease")
        slopes = [m.output.omega_slope for m in members]
        floor = 1e-8
        if max(slopes) > OMEGA_SLOPE_SPREAD * max(min(slopes), floor):
            ok = False
            notes.append(f"normalized Omega slopes {slopes} spread by more than "
                         f"{OMEGA_SLOPE_SPREAD}x")

    def col(attr):
        return [None if m.output is None else getattr(m.output, attr) for m in members]

    report = ConvergenceReport(base.name, eps, errs, col("gamma_drift"), col("energy_drift"),
                               col("omega_slope"), "pass" if ok else "fail", notes)
    report.members = members
    report.base = base
    return report


# ---------------------------------------------------------------------------
# output

def write_records(path, records: Sequence[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([repr(float(v)) for v in r.row()])


def read_records(path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: header does not match the record columns {CSV_COLUMNS}")
        out = []
        for i, row in enumerate(reader, 2):
            if len(row) != len(CSV_COLUMNS):
                raise ValueError(f"{path}:{i}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
            try:
                out.append(DiagnosticsRecord.from_row(row))
            except ValueError:
                raise ValueError(f"{path}:{i}: non-numeric field") from None
        return out


def _run_report(output: RunOutput) -> ConvergenceReport:
    try:
        err = limit_error(output)
    except (TrajectoryExit, SpanError):
        err = None
    verdict = "pass" if run_budgets_hold(output) else "fail"
    return ConvergenceReport(output.scenario.name, [output.scenario.blob.epsilon], [err],
                             [output.gamma_drift], [output.energy_drift], [output.omega_slope],
                             verdict)


def _echo(scenario: Scenario, extra: Sequence[str] = ()) -> str:
    head = [f"# lakevortex {__version__}", f"# config hash {scenario.config_hash()}", *extra]
    return "\n".join(head) + "\n" + scenario.to_ini()


def _guard(paths, force: bool):
    if force:
        return
    existing = [str(p) for p in paths if p.exists()]
    if existing:
        raise OutputExistsError(f"refusing to overwrite {', '.join(existing)} (use --force)")


def emit(output, directory, force: bool = False) -> list[Path]:
    """Write records.csv, report.json and config.echo into ``directory``.

    A study writes the finest member's records at the top level and every
    member's records under ``eps_<epsilon>/``.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if isinstance(output, RunOutput):
        report = _run_report(output)
        files = {d / "records.csv": output.records}
        echo = _echo(output.scenario, [f"# steps {output.summary['steps']}",
                                       f"# mass_correction {output.summary['mass_correction']!r}"])
    elif isinstance(output, ConvergenceReport):
        report = output
        members = getattr(output, "members", [])
        files = {}
        for m in members:
            if m.output is not None:
                files[d / f"eps_{m.epsilon:g}" / "records.csv"] = m.output.records
        done = [m for m in members if m.output is not None]
        if done:
            files[d / "records.csv"] = done[-1].output.records
        base = getattr(output, "base", None)
        extra = [f"# epsilon {m.epsilon:g}: resolution {m.resolution}" for m in members]
        extra += [f"# note: {n}" for n in output.notes]
        echo = _echo(base, extra) if base is not None else "\n".join(extra) + "\n"
    else:
        raise TypeError("emit takes a RunOutput or a ConvergenceReport")
    targets = [*files, d / "report.json", d / "config.echo"]
    _guard(targets, force)
    for path, recs in files.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        write_records(path, recs)
    (d / "report.json").write_text(report.dumps() + "\n")
    (d / "config.echo").write_text(echo)
    return targets
