"""Assumption audit: every run is gated on the structural hypotheses.

The audit evaluates each named assumption against the computed kernel
and potential constants and reports pass/fail with the offending values.
Results are never emitted without a persisted audit verdict.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError, InapplicabilityError
from .grid import norm_h
from .model import (
    EPS0_SAFETY,
    DerivedConstants,
    InitialData,
    ModelParams,
    _sigma_s_array,
    derive_constants,
)
from .potential import (
    PotentialSpec,
    barrier_margin_values,
    check_dominance,
    check_growth,
    f_eval,
    normalization_offset,
    validate_split,
)


@dataclass
class AuditCheck:
    name: str
    applicable: bool
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if not self.applicable:
            status = "N/A "
        return f"[{status}] {self.name}: {self.detail}"


@dataclass
class AuditReport:
    checks: list[AuditCheck]
    constants: DerivedConstants | None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.applicable)

    def render(self) -> str:
        lines = ["assumption audit", "----------------"]
        lines += [c.line() for c in self.checks]
        if self.constants is not None:
            c = self.constants
            lines.append("")
            lines.append(
                f"constants: C0 = {c.c0:.6g}, K0 = {c.k0:.6g}, C_Omega = {c.c_omega:.6g}, "
                f"eps0 = {c.eps0.value:.6g} "
                f"(branches {c.eps0.branch_ca:.4g}, {c.eps0.branch_astar:.4g}, {c.eps0.branch_k0:.4g})"
            )
            if c.c_f is not None:
                lines.append(f"           C_F = {c.c_f:.6g}")
        lines.append("")
        lines.append("verdict: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"


def audit(params: ModelParams, bundle, spec: PotentialSpec,
          init: InitialData | None = None) -> AuditReport:
    """Evaluate A1-A7 plus the parameter gates; never raises on failures."""
    checks: list[AuditCheck] = []

    bad = [n for n in ("P", "A", "B", "C", "chi", "eta") if getattr(params, n) < 0]
    checks.append(AuditCheck(
        "A1 nonnegative coefficients", True, not bad,
        "all of P, A, B, C, chi, eta >= 0" if not bad
        else f"negative: {', '.join(f'{n} = {getattr(params, n)}' for n in bad)}",
    ))

    rs = np.linspace(-50.0, 50.0, 401)
    hv = np.asarray(params.h(rs), dtype=float)
    slopes = np.abs(np.diff(hv) / np.diff(rs))
    h_ok = bool(np.all(np.isfinite(hv)) and np.all(hv >= 0) and hv.max() <= 1e6
                and slopes.max() <= 1e6)
    checks.append(AuditCheck(
        "A2 h bounded and Lipschitz", True, h_ok,
        f"sampled range [{hv.min():.3g}, {hv.max():.3g}], max slope {slopes.max():.3g}",
    ))

    ss = _sigma_s_array(params.sigma_s, bundle.grid, 0.0)
    ss_ok = bool(np.all(ss >= 0.0) and np.all(ss <= 1.0))
    checks.append(AuditCheck(
        "A3 sigma_S in [0, 1]", True, ss_ok, f"range [{ss.min():.3g}, {ss.max():.3g}]",
    ))

    split = validate_split(spec)
    split_ok = all(split.values())
    offset = normalization_offset(spec)
    checks.append(AuditCheck(
        "A4 potential split", True, split_ok,
        f"F1 convex >= 0, F2'(0) = 0, 0 in dF1(0); F >= {-offset:.4g} "
        "(normalization offset immaterial to the dynamics)" if split_ok
        else "failed: " + ", ".join(k for k, v in split.items() if not v),
    ))

    kernel_ok = all(np.isfinite(x) for x in (bundle.a_star, bundle.a_sup, bundle.b_sup))
    checks.append(AuditCheck(
        "A5 kernel constants", True, kernel_ok,
        f"a_* = {bundle.a_star:.6g}, a^* = {bundle.a_sup:.6g}, "
        f"b^* = {bundle.b_sup:.6g}, c_a = {bundle.c_a:.6g}",
    ))

    constants = None
    try:
        constants = derive_constants(bundle, spec)
        checks.append(AuditCheck(
            "A5 dominance a_* + F'' >= C0 > 0", True, True, f"C0 estimate {constants.c0:.6g}",
        ))
    except AssumptionError as err:
        checks.append(AuditCheck("A5 dominance a_* + F'' >= C0 > 0", True, False, str(err)))

    if spec.has_barrier and spec.f1_prime is not None:
        margins = barrier_margin_values(spec, params.chi * params.eta, [1e-2, 1e-4, 1e-6])
        diverging = bool(margins[0] < margins[1] < margins[2] and margins[2] > 0)
        checks.append(AuditCheck(
            "A6 barrier divergence of F' - chi eta r", True, diverging,
            "margins at ell - {1e-2, 1e-4, 1e-6}: " + ", ".join(f"{m:.4g}" for m in margins),
        ))
    else:
        checks.append(AuditCheck(
            "A6 barrier divergence of F' - chi eta r",
            False, True,
            "not applicable (no barrier)" if not spec.has_barrier
            else "double obstacle excluded from A6",
        ))

    checks.append(AuditCheck(
        "A7 kernel admissibility flag", True, bundle.spec.is_radially_nonincreasing(),
        "radial and non-increasing (W^2,1 regularity is user-asserted)",
    ))

    if constants is not None and params.eps > 0:
        gate = EPS0_SAFETY * constants.eps0.value
        ok = params.eps < gate
        checks.append(AuditCheck(
            "eps < eps0", True, ok,
            f"eps = {params.eps:.6g} vs {EPS0_SAFETY} * eps0 = {gate:.6g}",
        ))
    else:
        checks.append(AuditCheck("eps < eps0", params.eps > 0, True,
                                 "not applicable (eps = 0)" if params.eps == 0 else "skipped"))

    checks.append(AuditCheck(
        "tau < tau0 = 1", params.tau > 0, params.tau < 1.0,
        f"tau = {params.tau:.6g}",
    ))

    if params.tau == 0.0 and params.eps > 0 and constants is not None:
        chi, eta, c_a, c0 = params.chi, params.eta, bundle.c_a, constants.c0
        cond1 = chi < np.sqrt(c_a)
        lhs = (chi + eta + 4.0 * c_a * chi) ** 2
        rhs = 8.0 * c_a * c0 + 4.0 * chi * eta
        checks.append(AuditCheck(
            "ip_chi", True, bool(cond1 and lhs < rhs),
            f"chi = {chi:.4g} vs sqrt(c_a) = {np.sqrt(c_a):.4g}; "
            f"(chi+eta+4 c_a chi)^2 = {lhs:.6g} vs 8 c_a C0 + 4 chi eta = {rhs:.6g}",
        ))
    else:
        checks.append(AuditCheck("ip_chi", False, True, "not applicable (tau > 0 or eps = 0)"))

    if params.eps == 0.0:
        try:
            cf = check_growth(spec)
            checks.append(AuditCheck(
                "pol_growth", True, True, f"C_F estimate {cf:.6g}",
            ))
        except InapplicabilityError as err:
            checks.append(AuditCheck("pol_growth", True, False, str(err)))
        checks.append(AuditCheck(
            "eta = 0 for eps = 0", True, params.eta == 0.0, f"eta = {params.eta}",
        ))
    else:
        checks.append(AuditCheck("pol_growth", False, True, "not applicable (eps > 0)"))

    if init is not None:
        fvals = f_eval(spec, init.phi0.values)
        checks.append(AuditCheck(
            "ip_init F(phi0) integrable", True, bool(np.all(np.isfinite(fvals))),
            f"max F(phi0) = {np.max(fvals):.6g}, ||mu0||_H = {norm_h(init.mu0):.4g}",
        ))
        lo, hi = float(init.sigma0.values.min()), float(init.sigma0.values.max())
        checks.append(AuditCheck(
            "ip_infty sigma0 in [0, 1]", params.eta == 0.0, 0.0 <= lo and hi <= 1.0,
            f"range [{lo:.4g}, {hi:.4g}] (gates the maximum principle when eta = 0)",
        ))

    return AuditReport(checks=checks, constants=constants)
