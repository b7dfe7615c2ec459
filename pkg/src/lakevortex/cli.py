"""Command line entry point: run, study, kernels, diag."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace

from . import __version__
from .diagnostics import MASS_RADII, circulation_norm, linear_envelope_slope
from .scenarios import (ENERGY_BUDGET, GAMMA_BUDGET, OutputExistsError, ScenarioError,
                        convergence_study, emit, load_scenario, read_records, run,
                        run_budgets_hold)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lakevortex", description="Vortex dynamics in the lake equations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def outputs(sp):
        sp.add_argument("--resolution", type=int, help="override the configured resolution")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("config")
    outputs(r)

    s = sub.add_parser("study", help="convergence study over several epsilons")
    s.add_argument("config")
    s.add_argument("--epsilons", type=float, nargs="+", required=True)
    s.add_argument("--workers", type=int, default=1)
    outputs(s)

    k = sub.add_parser("kernels", help="closed-form Green kernel checks")
    k.add_argument("--selftest", action="store_true", required=True)

    d = sub.add_parser("diag", help="summarize and check a records.csv file")
    d.add_argument("records")
    return p


def _load(args):
    sc = load_scenario(args.config)
    if args.resolution is not None:
        sc = replace(sc, resolution=args.resolution)
    return sc


def _cmd_run(args) -> int:
    sc = _load(args)
    out = run(sc)
    emit(out, args.out, force=args.force)
    s = out.summary
    print(f"{sc.name}: {s['steps']} steps to s = {s['s_end']:.4g}, "
          f"gamma drift {s['gamma_drift']:.3g}, energy drift {s['energy_drift']:.3g}, "
          f"mass correction {s['mass_correction']:.6g}")
    ok = run_budgets_hold(out)
    print("PASS" if ok else "FAIL")
    return EXIT_PASS if ok else EXIT_FAIL


def _cmd_study(args) -> int:
    sc = _load(args)
    report = convergence_study(sc, args.epsilons, workers=args.workers)
    emit(report, args.out, force=args.force)
    for e, err in zip(report.epsilons, report.sup_errors):
        print(f"eps {e:g}: sup error {err if err is None else format(err, '.4g')}")
    for n in report.notes:
        print(f"note: {n}")
    print(report.verdict.upper())
    return EXIT_PASS if report.passed else EXIT_FAIL


def _cmd_kernels(args) -> int:
    from .kernels import selftest

    results = selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_PASS if all(ok for _, ok, _ in results) else EXIT_FAIL


def _cmd_diag(args) -> int:
    recs = read_records(args.records)
    if not recs:
        print("no records", file=sys.stderr)
        return EXIT_USAGE
    r0 = recs[0]
    bad = []
    for i, r in enumerate(recs):
        bad += [f"record {i}: {m}" for m in r.check()]
        masses = [getattr(r, f"mass_r{k}") for k in MASS_RADII]
        if any(b > a + 1e-12 * abs(r.Gamma) for a, b in zip(masses, masses[1:])):
            bad.append(f"record {i}: mass outside B(q, R rho) increases with R")
    if any(b.t < a.t for a, b in zip(recs, recs[1:])):
        bad.append("record times decrease")
    g_drift = max(abs(r.Gamma - r0.Gamma) for r in recs) / abs(r0.Gamma)
    e_drift = max(abs(r.E - r0.E) for r in recs) / abs(r0.E)
    slope = linear_envelope_slope([r.t for r in recs], [r.Omega for r in recs])
    slope /= abs(r0.Gamma) * circulation_norm(r0.Gamma)
    print(f"records {len(recs)}, t in [{r0.t:.6g}, {recs[-1].t:.6g}], "
          f"s in [{r0.s:.6g}, {recs[-1].s:.6g}]")
    print(f"gamma drift {g_drift:.3g} (budget {GAMMA_BUDGET:g}), "
          f"energy drift {e_drift:.3g} (budget {ENERGY_BUDGET:g}), "
          f"normalized omega slope {slope:.3g}")
    print(f"center moved from ({r0.q_x:.5f}, {r0.q_y:.5f}) to "
          f"({recs[-1].q_x:.5f}, {recs[-1].q_y:.5f}); "
          f"rho from {r0.rho:.4g} to {recs[-1].rho:.4g}")
    if g_drift > GAMMA_BUDGET or e_drift > ENERGY_BUDGET or not math.isfinite(slope):
        bad.append("conservation budget exceeded")
    for m in bad:
        print(f"violation: {m}")
    print("PASS" if not bad else "FAIL")
    return EXIT_PASS if not bad else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    handler = {"run": _cmd_run, "study": _cmd_study, "kernels": _cmd_kernels,
               "diag": _cmd_diag}[args.verb]
    try:
        return handler(args)
    except (ScenarioError, OutputExistsError, ValueError) as exc:
        print(f"lakevortex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"lakevortex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
