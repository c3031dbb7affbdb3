"""Command-line entry point: configuration, audit, runs, sweeps.

Subcommands:
  audit           evaluate the assumption audit and print the report
  simulate        integrate the configured system, write snapshots + CSV
  sweep-eps       vanishing-relaxation rate study (eps -> 0 at fixed tau)
  sweep-tau       vanishing-viscosity rate study (tau -> 0 at fixed eps)
  sweep-joint     joint limit along eps_k = tau_k^2
  stability       continuous-dependence ratio probe
  verify          run the packaged property suite
  oracle-compare  finite-difference stepper vs spectral Galerkin oracle

Exit codes: 0 success, 1 property/audit failure, 2 configuration error.
Every result directory receives config.resolved, audit.txt, and a
format-versioned manifest before any data files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, asymptotics, diagnostics, galerkin, verify
from .audit import audit as run_audit
from .config import build_problem, load_config
from .errors import AssumptionError, ConfigError, NlchError, StepError
from .grid import write_field, write_field_csv
from .model import derive_constants, run

MANIFEST_VERSION = 1


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlch", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"nlch {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("audit", "simulate", "sweep-eps", "sweep-tau", "sweep-joint",
                 "stability", "verify", "oracle-compare"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key=value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=0, help="seed for random-smoothed ICs")
        p.add_argument("--snapshots", type=int, default=None, help="snapshot stride")
    return ap


def _prepare_outdir(args, cfg) -> Path:
    out = Path(args.out if args.out is not None else cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(cfg.resolved_text())
    return out


def _write_manifest(out: Path, command: str, seed: int, files: list[str]):
    manifest = {
        "format": "nlch-run",
        "format_version": MANIFEST_VERSION,
        "command": command,
        "seed": seed,
        "files": sorted(files),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _gate_on_audit(problem, out: Path) -> bool:
    """Mandatory audit; the verdict is persisted before any results."""
    report = run_audit(problem.params, problem.bundle, problem.spec, problem.init)
    (out / "audit.txt").write_text(report.render())
    print(report.render(), end="")
    return report.passed


def _cmd_audit(args) -> int:
    cfg = load_config(args.config, args.set)
    problem = build_problem(cfg, seed=args.seed)
    out = _prepare_outdir(args, cfg)
    ok = _gate_on_audit(problem, out)
    _write_manifest(out, "audit", args.seed, ["config.resolved", "audit.txt"])
    return 0 if ok else 1


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.set)
    problem = build_problem(cfg, seed=args.seed)
    out = _prepare_outdir(args, cfg)
    if not _gate_on_audit(problem, out):
        _write_manifest(out, "simulate", args.seed, ["config.resolved", "audit.txt"])
        print("audit failed; no results emitted", file=sys.stderr)
        return 1
    stride = args.snapshots if args.snapshots is not None else cfg["output.snapshot_stride"]
    failure = None
    try:
        traj = run(problem.init, problem.params, problem.bundle, problem.spec,
                   snapshot_stride=max(1, stride))
    except StepError as err:
        # persist the partial trajectory before reporting the failure
        traj = getattr(err, "partial", None)
        if traj is None:
            raise
        failure = err
    files = ["config.resolved", "audit.txt"]
    if cfg["output.csv"]:
        diagnostics.write_diagnostics_csv(out / "diagnostics.csv", traj.records)
        files.append("diagnostics.csv")
    for k, (t, phi, sig) in enumerate(zip(traj.times, traj.phis, traj.sigmas)):
        for name, f in (("phi", phi), ("sigma", sig)):
            path = out / f"{name}_{k:05d}.nlchf"
            write_field(path, f)
            files.append(path.name)
        if cfg["output.csv"]:
            write_field_csv(out / f"phi_{k:05d}.csv", phi)
            files.append(f"phi_{k:05d}.csv")
    _write_manifest(out, "simulate", args.seed, files)
    if failure is not None:
        print(f"step failed at t = {traj.times[-1]:.6g}: {failure}; "
              f"partial trajectory persisted in {out}", file=sys.stderr)
        return 1
    print(f"simulated T = {traj.times[-1]:.6g} with {len(traj.records) - 1} steps; "
          f"{len(traj.times)} snapshots in {out}")
    return 0


def _sweep_command(args, mode: str) -> int:
    cfg = load_config(args.config, args.set)
    problem = build_problem(cfg, seed=args.seed)
    out = _prepare_outdir(args, cfg)
    if not _gate_on_audit(problem, out):
        return 1
    base = problem.params.with_params(T=cfg["sweep.t"], dt=cfg["sweep.dt"])
    plan = asymptotics.SweepPlan(
        mode=mode,
        values=cfg["sweep.values"],
        base_params=base,
        init=problem.init,
        bundle=problem.bundle,
        spec=problem.spec,
        m0_cap=cfg["sweep.m0"],
        workers=args.workers,
        check_floor=cfg["sweep.check_floor"],
    )
    report = asymptotics.sweep(plan)
    asymptotics.write_rates_csv(out / "rates.csv", report)
    diagnostics.write_distances_csv(
        out / "distances.csv",
        [(f"{mode}={v:g}_vs_limit", d)
         for v, d in zip(report.parameter_values, report.distances)],
    )
    _write_manifest(out, f"sweep-{mode}", args.seed,
                    ["config.resolved", "audit.txt", "rates.csv", "distances.csv"])
    print(f"{mode}-sweep over {report.parameter_values}")
    for v, tot, use in zip(report.parameter_values, report.totals, report.used_in_fit):
        note = "" if use else "  (floored, excluded from fit)"
        print(f"  {v:10.4g}  error {tot:.6e}{note}")
    if report.floor is not None:
        print(f"  dt-refinement floor: {report.floor:.3e}")
    ok = not report.incomplete and report.monotone_ok
    if report.slope is not None:
        target = report.theoretical_slope - 0.05
        rate_ok = report.slope >= target
        ok = ok and rate_ok
        print(f"fitted slope {report.slope:.4f} vs theoretical {report.theoretical_slope} "
              f"({'PASS' if rate_ok else 'FAIL'}: threshold {target:.2f})")
    else:
        ok = False
    print(f"monotone: {report.monotone_ok}; incomplete: {report.incomplete}")
    for note in report.notes:
        print("  note:", note)
    return 0 if ok else 1


def _cmd_stability(args) -> int:
    cfg = load_config(args.config, args.set)
    problem = build_problem(cfg, seed=args.seed)
    out = _prepare_outdir(args, cfg)
    if not _gate_on_audit(problem, out):
        return 1
    constants = derive_constants(problem.bundle, problem.spec)
    deltas = cfg["stability.deltas"]
    taus = cfg["stability.taus"]
    params = problem.params.with_params(T=cfg["stability.t"], eta=0.0)
    lines = ["tau,delta,lhs,rhs,ratio"]
    ok = True
    tau_ratios = []
    for tau in taus:
        rows = asymptotics.stability_probe(
            problem.init, params.with_params(tau=tau), problem.bundle, problem.spec,
            deltas, constants=constants,
        )
        if not asymptotics.ratios_consistent(rows, factor=3.0):
            ok = False
        tau_ratios.append(np.mean([r.ratio for r in rows]))
        for r in rows:
            lines.append(f"{tau:.17g},{r.delta:.17g},{r.lhs:.17g},{r.rhs:.17g},{r.ratio:.17g}")
            print(f"tau = {tau:g}, delta = {r.delta:g}: lhs/rhs = {r.ratio:.4f}")
    if len(tau_ratios) >= 2 and max(tau_ratios) > 2.0 * min(tau_ratios):
        ok = False
        print("ratios drift across tau by more than factor 2")
    (out / "stability.csv").write_text("\n".join(lines) + "\n")
    _write_manifest(out, "stability", args.seed,
                    ["config.resolved", "audit.txt", "stability.csv"])
    print("stability probe:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def _cmd_verify(args) -> int:
    cfg = load_config(args.config, args.set)
    problem = build_problem(cfg, seed=args.seed)  # surfaces configuration errors
    report = run_audit(problem.params, problem.bundle, problem.spec, problem.init)
    print(report.render(), end="")
    ok = verify.run_all()
    return 0 if (ok and report.passed) else 1


def _cmd_oracle_compare(args) -> int:
    cfg = load_config(args.config, args.set)
    overrides = {
        "model.eps": 0.1, "model.tau": 0.1,
        "model.dt": cfg["oracle.dt"], "model.T": cfg["oracle.t"],
    }
    for k, v in overrides.items():
        cfg.entries[k] = v
    problem = build_problem(cfg, seed=args.seed)
    out = _prepare_outdir(args, cfg)
    if not _gate_on_audit(problem, out):
        return 1
    n = cfg["oracle.modes"]
    basis = galerkin.make_basis(problem.grid, n)
    op = galerkin.build_operator(basis, problem.bundle, problem.spec, problem.params)
    traj = run(problem.init, problem.params, problem.bundle, problem.spec,
               record_diagnostics=False)
    y0 = galerkin.project_initial_data(problem.init.phi0, problem.init.mu0,
                                       problem.init.sigma0, basis)
    ts, coeffs = galerkin.integrate(y0, op, problem.params.T, t_eval=np.array(traj.times))
    galerkin.write_coefficients_csv(out / "oracle_coefficients.csv", ts, coeffs, n)

    diffs, norms = [], []
    for k, t in enumerate(ts):
        phi_sp = basis.functions @ coeffs[k, :n]
        d = phi_sp - traj.phis[k].values
        w = problem.grid.cell_volume
        diffs.append(np.sqrt(np.sum(d * d) * w))
        norms.append(np.sqrt(np.sum(traj.phis[k].values ** 2) * w))
    ts = np.asarray(ts)
    rel = float(np.sqrt(np.trapezoid(np.asarray(diffs) ** 2, ts))
                / np.sqrt(np.trapezoid(np.asarray(norms) ** 2, ts)))
    _write_manifest(out, "oracle-compare", args.seed,
                    ["config.resolved", "audit.txt", "oracle_coefficients.csv"])
    ok = rel <= 5e-3
    print(f"L2(0,T;H) relative difference stepper vs oracle: {rel:.6e} "
          f"({'PASS' if ok else 'FAIL'}: threshold 5e-3)")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handlers = {
        "audit": _cmd_audit,
        "simulate": _cmd_simulate,
        "sweep-eps": lambda a: _sweep_command(a, "eps"),
        "sweep-tau": lambda a: _sweep_command(a, "tau"),
        "sweep-joint": lambda a: _sweep_command(a, "joint"),
        "stability": _cmd_stability,
        "verify": _cmd_verify,
        "oracle-compare": _cmd_oracle_compare,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, AssumptionError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except NlchError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
