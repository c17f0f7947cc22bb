"""Post-hoc checks of the variational identities on computed profiles.

Every check is a pure function returning a CheckResult; a verification
report is their conjunction.  Checks compare measured quantities against
explicit bounds so failures are diagnosable from the report alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidParameterError
from .extremals import SharpConstants, sharp_constants, threshold_value
from .functionals import Params, breakdown, fiber_energy_of, pohozaev_of
from .grid import RadialField, lp_norm
from .solver import SolveReport

__all__ = [
    "CheckResult",
    "VerificationReport",
    "check_pohozaev_identity",
    "check_mountain_pass_consistency",
    "check_radial_decay_bound",
    "check_positivity_monotonicity",
    "check_level_window",
    "run_verification",
]

RIPPLE_TOL = 1e-8  # relative tolerance for "radially nonincreasing"
CRITICAL_GAP = 1e-2  # exponent distance treated as "at" a critical value


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    bound: float
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        def _num(x: float):
            return x if math.isfinite(x) else None

        return {
            "checks": [
                {
                    "name": c.name,
                    "measured": _num(c.measured),
                    "bound": _num(c.bound),
                    "passed": c.passed,
                    "note": c.note,
                }
                for c in self.checks
            ],
            "overall": self.overall,
        }


def check_pohozaev_identity(u: RadialField, params: Params, tol: float = 1e-5) -> CheckResult:
    """|P(u)| <= tol (kinetic + mass); holds at every finite-energy solution."""
    bd = breakdown(u, params)
    scale = bd.kinetic + bd.mass
    p_val = pohozaev_of(bd, params)
    if scale == 0.0:
        return CheckResult("pohozaev_identity", 0.0, 0.0, True, "degenerate zero field")
    return CheckResult("pohozaev_identity", abs(p_val), tol * scale, abs(p_val) <= tol * scale)


def check_mountain_pass_consistency(report: SolveReport, tol: float = 1e-6) -> CheckResult:
    """The ground state maximizes its own fiber: J(u) = max_tau J(u_tau)."""
    if report.status != "converged":
        raise InvalidParameterError("mountain-pass check needs a converged report")
    params = report.params
    bd = report.breakdown
    taus = np.geomspace(0.05, 20.0, 2001)
    vals = np.array([fiber_energy_of(bd, t, params) for t in taus])
    k = int(np.argmax(vals))
    lo, hi = taus[max(k - 1, 0)], taus[min(k + 1, taus.size - 1)]
    res = minimize_scalar(
        lambda t: -fiber_energy_of(bd, t, params), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    scan_max = max(float(-res.fun), float(vals[k]))
    gap = abs(report.J - scan_max)
    note = f"tau_max={res.x:.6g}"
    return CheckResult("mountain_pass_consistency", gap, tol * abs(report.J), gap <= tol * abs(report.J), note)


def _is_nonincreasing(values: np.ndarray) -> bool:
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        return True
    return bool(np.all(np.diff(values) <= RIPPLE_TOL * peak))


def check_radial_decay_bound(u: RadialField, t: float = 2.0) -> CheckResult:
    """|u(r)| <= r^{-N/t} (N / |S^{N-1}|)^{1/t} ||u||_t at every node.

    Applies to radial nonincreasing profiles only; others are reported as
    inapplicable rather than failing.
    """
    if not _is_nonincreasing(u.values):
        return CheckResult("radial_decay_bound", 0.0, 1.0, True, "inapplicable: not nonincreasing")
    g = u.grid
    n = g.dimension
    norm = lp_norm(u, t)
    if norm == 0.0:
        return CheckResult("radial_decay_bound", 0.0, 1.0, True, "zero field")
    envelope = g.nodes ** (-n / t) * (n / g.sphere_area) ** (1.0 / t) * norm
    ratio = float(np.max(np.abs(u.values) / envelope))
    return CheckResult("radial_decay_bound", ratio, 1.0 + 1e-10, ratio <= 1.0 + 1e-10)


def check_positivity_monotonicity(u: RadialField) -> CheckResult:
    """min u >= -1e-10 and no increase beyond the ripple tolerance."""
    peak = float(np.max(np.abs(u.values))) if u.values.size else 0.0
    min_val = float(np.min(u.values))
    max_rise = float(np.max(np.diff(u.values), initial=-math.inf))
    ok = min_val >= -1e-10 and max_rise <= RIPPLE_TOL * max(peak, 1e-300)
    measured = max(-min_val, max_rise)
    return CheckResult("positivity_monotonicity", measured, RIPPLE_TOL * max(peak, 1e-300), ok)


def _critical_case(params: Params) -> str | None:
    at_p_upper = abs(params.p - params.p_upper) <= CRITICAL_GAP
    at_p_lower = abs(params.p - params.p_lower) <= CRITICAL_GAP
    at_q_upper = abs(params.q - params.q_upper) <= CRITICAL_GAP
    if at_p_lower and at_q_upper:
        return "doubly-critical"
    if at_p_upper:
        return "upper-critical-p"
    if at_p_lower:
        return "lower-critical-p"
    if at_q_upper:
        return "critical-q"
    return None


def check_level_window(report: SolveReport, constants: SharpConstants | None = None) -> CheckResult:
    """0 < J, and J below the applicable lemma threshold near criticality."""
    params = report.params
    case = _critical_case(params)
    if case is None:
        return CheckResult("level_window", report.J, math.inf, report.J > 0.0, "subcritical: J > 0 only")
    if constants is None:
        constants = sharp_constants(params.N, params.alpha)
    bound = min(threshold_value(case, params, constants).values())
    ok = 0.0 < report.J <= bound + 1e-6
    return CheckResult("level_window", report.J, bound, ok, f"case {case}")


def run_verification(
    report: SolveReport,
    constants: SharpConstants | None = None,
    tol_pohozaev: float = 1e-5,
    tol_mountain_pass: float = 1e-6,
    tol_residual: float = 1e-6,
) -> VerificationReport:
    """The full suite on one solve report."""
    u = report.profile
    checks = [
        check_pohozaev_identity(u, report.params, tol_pohozaev),
        check_positivity_monotonicity(u),
        check_radial_decay_bound(u, 2.0),
        check_level_window(report, constants),
    ]
    if report.status == "converged":
        checks.append(check_mountain_pass_consistency(report, tol_mountain_pass))
        # Pohozaev + Nehari holding together must be witnessed by the
        # solver's weak-solution residual.
        scale = report.breakdown.kinetic + report.breakdown.mass
        premises = abs(report.P) <= tol_pohozaev * scale and abs(report.nehari) <= 1e-4 * scale
        implied = report.residual_norm <= tol_residual
        checks.append(
            CheckResult(
                "weak_solution_implication",
                report.residual_norm,
                tol_residual,
                (not premises) or implied,
            )
        )
    return VerificationReport(checks)
