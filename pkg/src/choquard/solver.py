"""Ground states by projected descent on the Pohozaev manifold.

Each iteration takes a preconditioned gradient step u <- u - eta g, where
g is the H^1 representative of J'(u), optionally replaces u by |u|, and
dilates back onto {P = 0}.  The reduced energy is monotone under Armijo
backtracking, and at convergence the iterate is an unconstrained critical
point, so the Pohozaev and Nehari identities hold to tolerance.

A continuation driver walks an exponent toward its critical value by
geometric gap halving, warm-starting each solve from the previous profile,
and a detector classifies the resulting sequences as converged, vanishing,
or concentrating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFieldError, InvalidParameterError, NumericalFailureError
from .functionals import (
    EnergyBreakdown,
    Params,
    dilate,
    energy_of,
    fiber_energy_of,
    nehari_of,
    odd_power,
    pohozaev_of,
    project_tau,
)
from .grid import RadialField, RadialGrid, grad_sq, h1_inner, h1_norm, h1_solve, sample
from .riesz import kernel_for

__all__ = [
    "ContinuationSpec",
    "SolveOptions",
    "SolveReport",
    "default_initial_guess",
    "ground_state",
    "continue_exponent",
    "detect_dichotomy",
    "half_mass_radius",
]

CONTINUATION_TARGETS = ("p-upper", "p-lower", "q-upper", "double")

# Dichotomy cutoffs: H^1 collapse below 1e-3 of the initial norm means
# vanishing; a tenfold sup-norm rise with a threefold half-mass shrink
# means concentration.  The shrink factor is weaker than the growth factor
# because in low dimensions the bubble mass spreads logarithmically, so
# the half-mass radius lags the sup-norm blow-up.
VANISHING_FACTOR = 1e-3
CONCENTRATION_GROWTH = 10.0
CONCENTRATION_SHRINK = 3.0


@dataclass(frozen=True)
class ContinuationSpec:
    target: str
    steps: int

    def __post_init__(self):
        if self.target not in CONTINUATION_TARGETS:
            raise InvalidParameterError(f"unknown continuation target {self.target!r}")
        if self.steps < 0:
            raise InvalidParameterError("steps must be >= 0")


@dataclass(frozen=True)
class SolveOptions:
    step: float = 1.0
    backtrack: float = 0.5
    tol_residual: float = 1e-6
    max_iter: int = 2000
    enforce_nonneg: bool = True
    continuation: ContinuationSpec | None = None

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise InvalidParameterError("tol_residual must be positive")
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be >= 1")
        if not 0.0 < self.backtrack < 1.0:
            raise InvalidParameterError("backtracking factor must lie in (0, 1)")
        if not self.step > 0:
            raise InvalidParameterError("initial step must be positive")


@dataclass(frozen=True)
class SolveReport:
    profile: RadialField
    params: Params
    breakdown: EnergyBreakdown
    J: float
    P: float
    nehari: float
    residual_norm: float
    iterations: int
    linf: float
    half_mass_radius: float
    status: str

    def to_dict(self, profile_csv_path: str | None = None) -> dict:
        g = self.profile.grid
        d = {
            "params": {
                "N": self.params.N,
                "alpha": self.params.alpha,
                "p": self.params.p,
                "q": self.params.q,
                "mu": self.params.mu,
                "lambda": self.params.lam,
            },
            "grid": {"rmax": g.rmax, "M": g.node_count},
            "J": self.J,
            "P": self.P,
            "nehari": self.nehari,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "linf": self.linf,
            "half_mass_radius": self.half_mass_radius,
            "status": self.status,
            "breakdown": {
                "kinetic": self.breakdown.kinetic,
                "mass": self.breakdown.mass,
                "nonlocal": self.breakdown.nonlocal_term,
                "local": self.breakdown.local_term,
            },
        }
        if profile_csv_path is not None:
            d["profile_csv_path"] = profile_csv_path
        return d


def half_mass_radius(u: RadialField) -> float:
    """Radius of the ball holding half of int u^2."""
    g = u.grid
    cell = g.volume_weights * u.values**2
    cum = np.cumsum(cell)
    total = cum[-1]
    if total <= 0:
        return 0.0
    idx = int(np.searchsorted(cum, 0.5 * total))
    if idx == 0:
        return float(g.nodes[0] * 0.5 * total / cum[0])
    prev = cum[idx - 1]
    frac = (0.5 * total - prev) / (cum[idx] - prev)
    return float(g.nodes[idx - 1] + frac * (g.nodes[idx] - g.nodes[idx - 1]))


def default_initial_guess(grid: RadialGrid) -> RadialField:
    """Gaussian profile; positive with nondegenerate breakdown."""
    return sample(grid, lambda r: np.exp(-(r**2)))


def _integrals(u_vals: np.ndarray, grid: RadialGrid, params: Params, kern) -> tuple:
    """One kernel product shared between the breakdown and the Euler-Lagrange
    right-hand side: returns (breakdown, potential I_a*|u|^p)."""
    vw = grid.sphere_area * grid.volume_weights
    f = np.abs(u_vals) ** params.p
    potential = kern.convolve(f)
    a = grad_sq(RadialField(grid, u_vals))
    b = float(vw @ u_vals**2)
    c = float(vw @ (potential * f))
    d = float(vw @ np.abs(u_vals) ** params.q)
    return EnergyBreakdown(a, b, max(c, 0.0), d), potential


def _residual(u: np.ndarray, potential: np.ndarray, grid: RadialGrid, params: Params):
    """H^1 gradient representative and its norm, reusing the potential."""
    rhs = params.mu * potential * odd_power(u, params.p - 1.0)
    rhs += params.lam * odd_power(u, params.q - 1.0)
    g = u - h1_solve(RadialField(grid, rhs)).values
    return g, h1_norm(RadialField(grid, g))


def _lsq_direction(u, potential, g, grid, params: Params, kern) -> np.ndarray:
    """Preconditioned gradient of 1/2 ||g||_{H^1}^2, i.e. (I - A^{-1}M J'')g.

    Costs one extra kernel product for the nonlocal Hessian action.  For
    p < 2 the pointwise Hessian factor |u|^{p-2} blows up on the zero set;
    there the subgradient 0 is used (the zero set carries no mass for the
    positive profiles this phase sees, and the line search guards descent).
    """
    p, q, mu, lam = params.p, params.q, params.mu, params.lam
    up1 = odd_power(u, p - 1.0)
    conv = kern.convolve(up1 * g)
    dng = mu * p * conv * up1
    with np.errstate(divide="ignore"):
        hess = np.where(u != 0.0, np.abs(u) ** (p - 2.0), 0.0)
    dng += mu * (p - 1.0) * potential * hess * g
    dng += lam * (q - 1.0) * np.abs(u) ** (q - 2.0) * g
    return g - h1_solve(RadialField(grid, dng)).values


def ground_state(
    params: Params,
    init: RadialField,
    opts: SolveOptions,
    trace: list | None = None,
) -> SolveReport:
    """Minimize J over the Pohozaev manifold starting from init.

    Runs projected descent (gradient step, optional |u|, dilation back onto
    {P = 0}) until the residual is small, then polishes by descent on the
    squared H^1 residual, whose zeros are the unconstrained critical
    points; this removes the interpolation-noise floor of per-step
    resampling.  Raises DegenerateFieldError for a zero (or kinetically
    degenerate) initial field and NumericalFailureError on non-finite
    iterates.  When a list is passed as trace, one record per accepted
    iteration is appended.
    """
    grid = init.grid
    if grid.dimension != params.N:
        raise InvalidParameterError("grid dimension does not match params.N")
    if not np.any(init.values != 0.0):
        raise DegenerateFieldError("initial field is identically zero")
    kern = kernel_for(grid, params.alpha)

    u = np.abs(init.values) if opts.enforce_nonneg else init.values.copy()
    bd, potential = _integrals(u, grid, params, kern)
    if bd.kinetic <= 0 or bd.nonlocal_term <= 0:
        raise DegenerateFieldError("initial field has degenerate kinetic or nonlocal term")
    tau = project_tau(bd, params)
    u = dilate(RadialField(grid, u), tau).values
    bd, potential = _integrals(u, grid, params, kern)

    first = {
        "h1": h1_norm(RadialField(grid, u)),
        "linf": float(np.max(np.abs(u))),
        "half": half_mass_radius(RadialField(grid, u)),
    }

    eta = opts.step
    iterations = 0
    g_vals, residual = _residual(u, potential, grid, params)

    # Phase 1: projected descent on the manifold.  Stops once the iterate
    # is well inside the basin of the critical point (or at tolerance),
    # or when it stalls at the manifold's resampling floor.
    switch = max(opts.tol_residual, 1e-4 * first["h1"])
    best_residual = residual
    since_progress = 0
    while iterations < opts.max_iter and residual > switch:
        if since_progress > 40:
            break
        iterations += 1
        if not math.isfinite(residual):
            raise NumericalFailureError(
                "non-finite residual", {"iteration": iterations, "step": eta}
            )
        J_cur = energy_of(bd, params)
        accepted = False
        for _ in range(40):
            trial = u - eta * g_vals
            if opts.enforce_nonneg:
                np.abs(trial, out=trial)
            if not np.all(np.isfinite(trial)):
                raise NumericalFailureError(
                    "non-finite iterate", {"iteration": iterations, "step": eta}
                )
            bd_t, _ = _integrals(trial, grid, params, kern)
            if bd_t.kinetic > 0 and bd_t.nonlocal_term > 0:
                tau = project_tau(bd_t, params)
                J_new = fiber_energy_of(bd_t, tau, params)
                if J_new <= J_cur - 1e-4 * eta * residual**2:
                    u = dilate(RadialField(grid, trial), tau).values
                    bd, potential = _integrals(u, grid, params, kern)
                    accepted = True
                    break
            eta *= opts.backtrack
        if not accepted:
            break  # stagnated below representable step sizes
        eta = min(eta / math.sqrt(opts.backtrack), 64.0 * opts.step)
        g_vals, residual = _residual(u, potential, grid, params)
        if residual < 0.99 * best_residual:
            best_residual = residual
            since_progress = 0
        else:
            since_progress += 1
        if trace is not None:
            trace.append(
                {"phase": "projected", "iteration": iterations,
                 "J": energy_of(bd, params), "residual": residual}
            )

    # Phase 2: monotone decrease of the residual norm itself.
    if residual > opts.tol_residual and bd.kinetic > 0 and bd.nonlocal_term > 0:
        eta = 1.0
        prev_u = prev_d = None
        while iterations < opts.max_iter and residual > opts.tol_residual:
            iterations += 1
            d = _lsq_direction(u, potential, g_vals, grid, params, kern)
            if prev_u is not None:
                du = RadialField(grid, u - prev_u)
                dd = RadialField(grid, d - prev_d)
                num = h1_inner(du, dd)
                den = h1_inner(dd, dd)
                if den > 0 and num > 0:
                    eta = min(max(num / den, 1e-3), 100.0)
            prev_u, prev_d = u.copy(), d.copy()
            step = eta
            improved = False
            for _ in range(50):
                trial = u - step * d
                if not np.all(np.isfinite(trial)):
                    raise NumericalFailureError(
                        "non-finite iterate", {"iteration": iterations, "step": step}
                    )
                bd_t, pot_t = _integrals(trial, grid, params, kern)
                g_t, res_t = _residual(trial, pot_t, grid, params)
                if res_t < residual:
                    u, potential, bd = trial, pot_t, bd_t
                    g_vals, residual = g_t, res_t
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
            if trace is not None:
                trace.append(
                    {"phase": "polish", "iteration": iterations,
                     "J": energy_of(bd, params), "residual": residual}
                )

    profile = RadialField(grid, u)
    P_val = pohozaev_of(bd, params)
    if residual <= opts.tol_residual and abs(P_val) <= 1e-5 * (bd.kinetic + bd.mass):
        status = "converged"
    else:
        h1_now = h1_norm(profile)
        if h1_now < VANISHING_FACTOR * first["h1"]:
            status = "vanishing"
        elif (
            float(np.max(np.abs(u))) > CONCENTRATION_GROWTH * first["linf"]
            and half_mass_radius(profile) < first["half"] / CONCENTRATION_SHRINK
        ):
            status = "concentrating"
        else:
            status = "max_iter"

    return SolveReport(
        profile=profile,
        params=params,
        breakdown=bd,
        J=energy_of(bd, params),
        P=P_val,
        nehari=nehari_of(bd, params),
        residual_norm=residual,
        iterations=iterations,
        linf=float(np.max(np.abs(u))),
        half_mass_radius=half_mass_radius(profile),
        status=status,
    )


def _schedule(start: Params, target: str, steps: int) -> list[Params]:
    p0, q0 = start.p, start.q
    p_lo, p_hi, q_hi = start.p_lower, start.p_upper, start.q_upper
    if not (p_lo < p0 < p_hi and 2.0 < q0 < q_hi):
        raise InvalidParameterError("continuation must start strictly subcritical")
    out = []
    for n in range(steps + 1):
        f = 0.5**n
        if target == "p-upper":
            out.append(start.with_(p=p_hi - (p_hi - p0) * f))
        elif target == "p-lower":
            out.append(start.with_(p=p_lo + (p0 - p_lo) * f))
        elif target == "q-upper":
            out.append(start.with_(q=q_hi - (q_hi - q0) * f))
        elif target == "double":
            # the doubly-critical family carries one gap for both exponents
            a0 = p0 - p_lo
            if abs(a0 - (q_hi - q0)) > 1e-9:
                raise InvalidParameterError(
                    "double continuation needs matching gaps: "
                    f"p - p_lower = {a0} but q_upper - q = {q_hi - q0}"
                )
            out.append(start.with_(p=p_lo + a0 * f, q=q_hi - a0 * f))
        else:
            raise InvalidParameterError(f"unknown continuation target {target!r}")
    return out


def continue_exponent(
    start: Params,
    target: str,
    steps: int,
    opts: SolveOptions,
    grid: RadialGrid,
    init: RadialField | None = None,
) -> list[SolveReport]:
    """Solve along a geometric schedule of exponents approaching criticality.

    Returns steps + 1 reports, the first at the start parameters; every
    solve after the first is warm-started from the previous profile.
    """
    if steps < 0:
        raise InvalidParameterError("steps must be >= 0")
    schedule = _schedule(start, target, steps)
    reports: list[SolveReport] = []
    current = init if init is not None else default_initial_guess(grid)
    for n, params_n in enumerate(schedule):
        try:
            report = ground_state(params_n, current, opts)
        except (DegenerateFieldError, NumericalFailureError) as exc:
            raise NumericalFailureError(
                f"continuation failed at schedule index {n} "
                f"(p={params_n.p}, q={params_n.q}): {exc}",
                {"schedule_index": n, "p": params_n.p, "q": params_n.q},
            ) from exc
        reports.append(report)
        current = report.profile
    return reports


def detect_dichotomy(reports: list[SolveReport]) -> str:
    """Classify a continuation sequence as converged, vanishing, or
    concentrating from its endpoint metrics."""
    if not reports:
        raise InvalidParameterError("detect_dichotomy needs a nonempty report list")
    first, last = reports[0], reports[-1]
    h1_first = h1_norm(first.profile)
    h1_last = h1_norm(last.profile)
    if h1_last < VANISHING_FACTOR * h1_first:
        return "vanishing"
    if (
        last.linf > CONCENTRATION_GROWTH * first.linf
        and last.half_mass_radius < first.half_mass_radius / CONCENTRATION_SHRINK
    ):
        return "concentrating"
    return "converged"
