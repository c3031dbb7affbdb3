"""Relaxation-limit sweeps and the continuous-dependence probe.

A sweep runs the solver for a decreasing sequence of relaxation values,
compares each run against the corresponding limit system (the reference,
integrated with the parameter set to zero on the same grid and step),
and fits a log-log rate. Initial data for the members follow the
elliptic smoothing recipes, so the theoretical rates (1/4 in eps, 1/2 in
tau) are lower bounds for the fitted slopes.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .diagnostics import (
    EPS_RATE_WEIGHTS,
    JOINT_RATE_WEIGHTS,
    TAU_RATE_WEIGHTS,
    TrajectoryDistance,
    distance,
    stability_weights,
)
from .errors import AssumptionError, ConfigError, FitError, StepError
from .grid import Field, norm_h, norm_v, norm_vstar
from .kernel import KernelBundle
from .model import (
    DerivedConstants,
    InitialData,
    ModelParams,
    check_ip_chi,
    derive_constants,
    make_smoothed_ic,
    run,
)
from .potential import PotentialSpec, check_growth, f_eval, yosida

MODE_WEIGHTS = {"eps": EPS_RATE_WEIGHTS, "tau": TAU_RATE_WEIGHTS, "joint": JOINT_RATE_WEIGHTS}
MODE_THEORY_SLOPE = {"eps": 0.25, "tau": 0.5, "joint": 0.5}


@dataclass
class SweepPlan:
    """One relaxation-limit experiment.

    mode 'eps' drives eps -> 0 at fixed tau, 'tau' drives tau -> 0 at
    fixed eps, 'joint' drives both along eps_k = coupling(tau_k). The
    values sequence lists the swept parameter (eps for mode 'eps', tau
    otherwise), strictly decreasing and at least 1e-8.
    """

    mode: str
    values: tuple[float, ...]
    base_params: ModelParams
    init: InitialData
    bundle: KernelBundle
    spec: PotentialSpec
    coupling: Callable[[float], float] | None = None
    m0_cap: float = 100.0
    workers: int = 1
    snapshot_stride: int = 1
    check_floor: bool = True

    def __post_init__(self):
        if self.mode not in MODE_WEIGHTS:
            raise ConfigError(f"sweep mode must be eps, tau, or joint; got {self.mode!r}")
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 1 or any(v < 1e-8 for v in vals):
            raise ConfigError("sweep values must be >= 1e-8")
        if any(b >= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep values must be strictly decreasing")
        self.values = vals
        if self.mode == "joint" and self.coupling is None:
            self.coupling = lambda tau: tau * tau


@dataclass
class ErrorReport:
    """Per-sweep distances and the fitted convergence rate."""

    mode: str
    parameter_values: list[float]
    distances: list[TrajectoryDistance]
    totals: list[float]
    theoretical_slope: float
    slope: float | None = None
    intercept: float | None = None
    fit_residual: float | None = None
    used_in_fit: list[bool] = dc_field(default_factory=list)
    floor: float | None = None
    monotone_ok: bool = True
    incomplete: bool = False
    notes: list[str] = dc_field(default_factory=list)


def fit_rate(values, errors) -> tuple[float, float, float]:
    """Least-squares slope of log(error) against log(value).

    Zero errors are excluded with a warning; fewer than 3 usable points
    raise FitError. Returns (slope, intercept, RMS residual).
    """
    vals = np.asarray(values, dtype=float)
    errs = np.asarray(errors, dtype=float)
    usable = errs > 0
    if np.any(~usable):
        warnings.warn("fit_rate: excluding nonpositive errors", stacklevel=2)
    if int(usable.sum()) < 3:
        raise FitError(f"rate fit needs >= 3 positive points, got {int(usable.sum())}")
    x = np.log(vals[usable])
    y = np.log(errs[usable])
    design = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    return float(coef[0]), float(coef[1]), resid


def _f_prime_norm(spec: PotentialSpec, lam: float, phi: Field) -> float:
    if spec.f1_prime is not None:
        vals = np.asarray(spec.f1_prime(phi.values)) + np.asarray(spec.f2_prime(phi.values))
    else:
        vals = yosida(spec, lam, phi.values) + np.asarray(spec.f2_prime(phi.values))
    return norm_h(Field(phi.grid, vals, check=False))


def _f_mass(spec: PotentialSpec, phi: Field) -> float:
    vals = f_eval(spec, phi.values)
    return float(np.sum(vals)) * phi.grid.cell_volume


def _member_setup(plan: SweepPlan, value: float):
    """Parameters and smoothed initial data for one sweep member."""
    base = plan.base_params
    if plan.mode == "eps":
        params = base.with_params(eps=value)
        s = math.sqrt(value)
        init = InitialData(
            phi0=make_smoothed_ic(plan.init.phi0, s),
            mu0=plan.init.mu0,
            sigma0=make_smoothed_ic(plan.init.sigma0, s),
        )
    elif plan.mode == "tau":
        params = base.with_params(tau=value)
        init = InitialData(
            phi0=make_smoothed_ic(plan.init.phi0, value),
            mu0=make_smoothed_ic(plan.init.mu0, value),
            sigma0=make_smoothed_ic(plan.init.sigma0, value),
        )
    else:
        params = base.with_params(tau=value, eps=plan.coupling(value))
        init = InitialData(
            phi0=make_smoothed_ic(plan.init.phi0, value),
            mu0=plan.init.mu0,
            sigma0=make_smoothed_ic(plan.init.sigma0, value),
        )
    return params, init


def _check_monitors(plan: SweepPlan, params: ModelParams, init: InitialData):
    """Boundedness monitors on the approximating data (abort on blowup)."""
    spec = plan.spec
    lam = params.lam_eff
    quantities = {}
    if plan.mode == "eps":
        e = params.eps
        quantities["eps^1/2 |mu0|_H + |F(phi0)|_L1"] = (
            math.sqrt(e) * norm_h(init.mu0) + _f_mass(spec, init.phi0)
        )
        quantities["eps^1/4 (|mu0|_V + |sigma0|_V + |F'(phi0)|_H)"] = e ** 0.25 * (
            norm_v(init.mu0) + norm_v(init.sigma0) + _f_prime_norm(spec, lam, init.phi0)
        )
    elif plan.mode == "tau":
        quantities["tau^1/2 |phi0|_V + |F(phi0)|_L1"] = (
            math.sqrt(params.tau) * norm_v(init.phi0) + _f_mass(spec, init.phi0)
        )
    else:
        e, tau = params.eps, params.tau
        quantities["tau^1/2 |phi0|_V + eps^1/2 |mu0|_H + |F(phi0)|_L1"] = (
            math.sqrt(tau) * norm_v(init.phi0)
            + math.sqrt(e) * norm_h(init.mu0)
            + _f_mass(spec, init.phi0)
        )
        quantities["eps^1/4/tau^1/2 (|mu0|_H + |F'(phi0)|_H) + eps^1/4 (|mu0|_V + |sigma0|_V)"] = (
            e ** 0.25 / math.sqrt(tau) * (norm_h(init.mu0) + _f_prime_norm(spec, lam, init.phi0))
            + e ** 0.25 * (norm_v(init.mu0) + norm_v(init.sigma0))
        )
    for name, q in quantities.items():
        if not q <= plan.m0_cap:
            raise AssumptionError(
                "init-boundedness",
                f"monitored quantity {name} = {q:.6g} exceeds M0 = {plan.m0_cap}",
                value=q,
            )


def _validate_plan(plan: SweepPlan, constants: DerivedConstants):
    base = plan.base_params
    if plan.mode in ("eps", "joint"):
        if base.eta != 0.0:
            raise AssumptionError("eta = 0", "vanishing-relaxation sweeps need eta = 0",
                                  value=base.eta)
        check_growth(plan.spec)  # raises InapplicabilityError for barrier families
    if plan.mode in ("tau", "joint"):
        check_ip_chi(base.chi, base.eta, plan.bundle.c_a, constants.c0)
    if plan.mode == "eps" and not 0 < base.tau < 1:
        raise AssumptionError("tau in (0, tau0)", f"eps sweep needs fixed tau in (0, 1), got {base.tau}")
    if plan.mode == "tau" and base.eps <= 0:
        raise AssumptionError("eps > 0", "tau sweep needs fixed eps > 0", value=base.eps)
    if plan.mode == "joint":
        ratios = [math.sqrt(plan.coupling(t)) / t for t in plan.values]
        if max(ratios) > 100.0:
            raise AssumptionError(
                "limsup", f"joint scaling sup eps^1/2/tau = {max(ratios):.3g} is unbounded",
                value=max(ratios),
            )


def _limit_params(plan: SweepPlan) -> ModelParams:
    base = plan.base_params
    if plan.mode == "eps":
        return base.with_params(eps=0.0)
    if plan.mode == "tau":
        return base.with_params(tau=0.0)
    return base.with_params(eps=0.0, tau=0.0)


def sweep(plan: SweepPlan, constants: DerivedConstants | None = None) -> ErrorReport:
    """Run the sweep and fit the observed convergence rate.

    Hypothesis violations raise before anything runs; a member run
    failure yields a partial report flagged incomplete.
    """
    if constants is None:
        constants = derive_constants(plan.bundle, plan.spec)
    _validate_plan(plan, constants)
    weights = MODE_WEIGHTS[plan.mode]

    ref_params = _limit_params(plan)
    reference = run(plan.init, ref_params, plan.bundle, plan.spec,
                    snapshot_stride=plan.snapshot_stride, constants=constants,
                    record_diagnostics=False)

    floor = None
    if plan.check_floor:
        half = ref_params.with_params(dt=ref_params.dt / 2.0)
        ref_half = run(plan.init, half, plan.bundle, plan.spec,
                       snapshot_stride=2 * plan.snapshot_stride, constants=constants,
                       record_diagnostics=False)
        floor = distance(reference, ref_half, eps=plan.base_params.eps,
                         components=set(weights)).total(weights)

    def one_member(value):
        params, init = _member_setup(plan, value)
        _check_monitors(plan, params, init)
        traj = run(init, params, plan.bundle, plan.spec,
                   snapshot_stride=plan.snapshot_stride, constants=constants,
                   record_diagnostics=False)
        return distance(traj, reference, eps=params.eps, components=set(weights))

    report = ErrorReport(
        mode=plan.mode,
        parameter_values=list(plan.values),
        distances=[],
        totals=[],
        theoretical_slope=MODE_THEORY_SLOPE[plan.mode],
        floor=floor,
    )
    results: dict[float, TrajectoryDistance] = {}
    try:
        if plan.workers > 1:
            with ThreadPoolExecutor(max_workers=plan.workers) as pool:
                for v, d in zip(plan.values, pool.map(one_member, plan.values)):
                    results[v] = d
        else:
            for v in plan.values:
                results[v] = one_member(v)
    except StepError as err:
        report.incomplete = True
        report.notes.append(f"member run failed: {err}")

    for v in plan.values:
        if v not in results:
            continue
        d = results[v]
        report.distances.append(d)
        report.totals.append(d.total(weights))
    report.parameter_values = [v for v in plan.values if v in results]

    totals = np.asarray(report.totals)
    report.used_in_fit = [True] * len(totals)
    if floor is not None:
        for i, tot in enumerate(totals):
            if tot <= 3.0 * floor:
                report.used_in_fit[i] = False
                report.notes.append(
                    f"value {report.parameter_values[i]:.3g} is within 3x of the "
                    f"dt-refinement floor {floor:.3e}; excluded from the fit"
                )

    # Non-increasing along the decreasing parameter sequence, tolerating
    # one inversion of at most 5 percent (discretization floor noise).
    inversions = 0
    for a, b in zip(totals, totals[1:]):
        if b > a:
            inversions += 1 if b <= 1.05 * a else 2
    report.monotone_ok = inversions <= 1

    fit_vals = [v for v, use in zip(report.parameter_values, report.used_in_fit) if use]
    fit_errs = [t for t, use in zip(report.totals, report.used_in_fit) if use]
    try:
        report.slope, report.intercept, report.fit_residual = fit_rate(fit_vals, fit_errs)
    except FitError as err:
        report.incomplete = True
        report.notes.append(str(err))
    return report


def write_rates_csv(path, report: ErrorReport):
    from dataclasses import fields as dataclass_fields

    names = [f.name for f in dataclass_fields(TrajectoryDistance)]
    with open(path, "w") as fh:
        fh.write("parameter," + ",".join(names) + ",total,used_in_fit\n")
        for v, d, tot, use in zip(report.parameter_values, report.distances,
                                  report.totals, report.used_in_fit):
            fh.write(
                f"{v:.17g}," + ",".join(f"{getattr(d, n):.17g}" for n in names)
                + f",{tot:.17g},{int(use)}\n"
            )
        fh.write(f"# mode,{report.mode}\n")
        fh.write(f"# theoretical_slope,{report.theoretical_slope}\n")
        if report.slope is not None:
            fh.write(f"# fitted_slope,{report.slope:.17g}\n")
            fh.write(f"# intercept,{report.intercept:.17g}\n")
            fh.write(f"# fit_residual,{report.fit_residual:.17g}\n")
        if report.floor is not None:
            fh.write(f"# dt_floor,{report.floor:.17g}\n")
        fh.write(f"# monotone_ok,{int(report.monotone_ok)}\n")
        fh.write(f"# incomplete,{int(report.incomplete)}\n")


@dataclass
class StabilityRow:
    delta: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else math.nan


def stability_probe(init: InitialData, params: ModelParams, bundle: KernelBundle,
                    spec: PotentialSpec, deltas, bump: Field | None = None,
                    constants: DerivedConstants | None = None) -> list[StabilityRow]:
    """Continuous-dependence ratios for perturbed initial data.

    Perturbs all three initial fields by delta times a fixed smooth bump,
    runs both trajectories, and reports the ratio of the stability
    estimate's left side to its right side for every nonzero delta.
    """
    if params.eta != 0.0:
        raise AssumptionError("eta = 0", "the stability estimate needs eta = 0",
                              value=params.eta)
    if constants is None:
        constants = derive_constants(bundle, spec)
    grid = bundle.grid
    if bump is None:
        x = grid.meshgrid()[0]
        bump = Field(grid, np.cos(np.pi * x / grid.extent[0]))

    base = run(init, params, bundle, spec, constants=constants, record_diagnostics=False)
    rows = []
    for delta in deltas:
        if delta == 0.0:
            continue
        pert = InitialData(
            phi0=Field(grid, init.phi0.values + delta * bump.values),
            mu0=Field(grid, init.mu0.values + delta * bump.values),
            sigma0=Field(grid, init.sigma0.values + delta * bump.values),
        )
        traj = run(pert, params, bundle, spec, constants=constants, record_diagnostics=False)
        wts = stability_weights(params.tau)
        d = distance(traj, base, eps=params.eps, components=set(wts))
        lhs = d.total(wts)
        dphi = Field(grid, pert.phi0.values - init.phi0.values, check=False)
        dmu = Field(grid, pert.mu0.values - init.mu0.values, check=False)
        dsig = Field(grid, pert.sigma0.values - init.sigma0.values, check=False)
        combo = Field(grid, params.eps * dmu.values + dphi.values, check=False)
        rhs = norm_vstar(combo) + math.sqrt(params.tau) * norm_h(dphi) + norm_h(dsig)
        rows.append(StabilityRow(delta=float(delta), lhs=lhs, rhs=rhs))
    return rows


def ratios_consistent(rows: list[StabilityRow], factor: float = 3.0) -> bool:
    """True when all pairwise ratios of the per-delta ratios lie within factor."""
    ratios = [r.ratio for r in rows if math.isfinite(r.ratio)]
    if len(ratios) < 2:
        return True
    return max(ratios) <= factor * min(ratios)
