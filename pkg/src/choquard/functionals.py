"""Energy functional, Pohozaev/Nehari functionals, and the dilation fiber.

Everything is driven by the four integrals of a field u:

    kinetic  = int |grad u|^2        mass  = int |u|^2
    nonlocal = int (I_a * |u|^p)|u|^p  local = int |u|^q

The energy is J = kinetic/2 + mass/2 - mu nonlocal/(2p) - lambda local/q.
Dilating u(x) -> u(x/tau) rescales the four integrals by exact powers of
tau, so the fiber energy phi(tau) and the projection onto the zero set of
the Pohozaev functional are algebra on breakdowns, free of interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateFieldError, InvalidParameterError
from .grid import RadialField, grad_sq, h1_solve
from .riesz import kernel_for, riesz_normalization

__all__ = [
    "Params",
    "EnergyBreakdown",
    "breakdown",
    "energy",
    "energy_of",
    "pohozaev",
    "pohozaev_of",
    "nehari",
    "nehari_of",
    "gradient_residual",
    "dilate",
    "scale_breakdown",
    "fiber_energy",
    "fiber_energy_of",
    "project_pohozaev",
    "project_tau",
    "reduced_energy",
]


@dataclass(frozen=True)
class Params:
    """Problem data for -Lap u + u = mu (I_a*|u|^p)|u|^{p-2}u + lam |u|^{q-2}u.

    p must lie in the HLS-admissible closed interval [(N+a)/N, (N+a)/(N-2)]
    and q in (2, 2N/(N-2)].  lam = 0 is admitted so that the pure nonlocal
    problem can be driven to its critical exponent.
    """

    N: int
    alpha: float
    p: float
    q: float
    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if self.N < 3:
            raise InvalidParameterError(f"N must be >= 3, got {self.N}")
        if not 0.0 < self.alpha < self.N:
            raise InvalidParameterError(f"alpha must lie in (0, N), got {self.alpha}")
        tol = 1e-12
        if not self.p_lower - tol <= self.p <= self.p_upper + tol:
            raise InvalidParameterError(
                f"p={self.p} outside [{self.p_lower}, {self.p_upper}] for N={self.N}, alpha={self.alpha}"
            )
        if not 2.0 < self.q <= self.q_upper + tol:
            raise InvalidParameterError(f"q={self.q} outside (2, {self.q_upper}] for N={self.N}")
        if not self.mu > 0:
            raise InvalidParameterError(f"mu must be positive, got {self.mu}")
        if self.lam < 0:
            raise InvalidParameterError(f"lambda must be nonnegative, got {self.lam}")

    @property
    def p_lower(self) -> float:
        return (self.N + self.alpha) / self.N

    @property
    def p_upper(self) -> float:
        return (self.N + self.alpha) / (self.N - 2)

    @property
    def q_upper(self) -> float:
        return 2.0 * self.N / (self.N - 2)

    def with_(self, **kwargs) -> "Params":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    mass: float
    nonlocal_term: float
    local_term: float

    def __post_init__(self):
        for name in ("kinetic", "mass", "nonlocal_term", "local_term"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be nonnegative")

    def astuple(self) -> tuple[float, float, float, float]:
        return (self.kinetic, self.mass, self.nonlocal_term, self.local_term)


def breakdown(u: RadialField, params: Params) -> EnergyBreakdown:
    """The four integrals of u at the given parameters."""
    g = u.grid
    if g.dimension != params.N:
        raise InvalidParameterError("grid dimension does not match params.N")
    vw = g.sphere_area * g.volume_weights
    a = grad_sq(u)
    b = float(vw @ u.values**2)
    f = np.abs(u.values) ** params.p
    kern = kernel_for(g, params.alpha)
    c = riesz_normalization(params.N, params.alpha) * kern.bilinear(f, f)
    d = float(vw @ np.abs(u.values) ** params.q)
    return EnergyBreakdown(a, b, max(c, 0.0), d)


def energy_of(bd: EnergyBreakdown, params: Params) -> float:
    a, b, c, d = bd.astuple()
    return 0.5 * (a + b) - params.mu * c / (2.0 * params.p) - params.lam * d / params.q


def pohozaev_of(bd: EnergyBreakdown, params: Params) -> float:
    a, b, c, d = bd.astuple()
    n = params.N
    return (
        0.5 * (n - 2) * a
        + 0.5 * n * b
        - params.mu * (n + params.alpha) * c / (2.0 * params.p)
        - params.lam * n * d / params.q
    )


def nehari_of(bd: EnergyBreakdown, params: Params) -> float:
    a, b, c, d = bd.astuple()
    return a + b - params.mu * c - params.lam * d


def energy(u: RadialField, params: Params) -> float:
    """J(u)."""
    return energy_of(breakdown(u, params), params)


def pohozaev(u: RadialField, params: Params) -> float:
    """Pohozaev functional P(u); zero at every finite-energy solution."""
    return pohozaev_of(breakdown(u, params), params)


def nehari(u: RadialField, params: Params) -> float:
    """Nehari value <J'(u), u>; zero at critical points."""
    return nehari_of(breakdown(u, params), params)


def odd_power(u: np.ndarray, exponent: float) -> np.ndarray:
    """sign(u) |u|^exponent, stable at u = 0 for positive exponents.

    Writing |u|^{p-2} u this way avoids 0^{negative} * 0 = nan where
    dilation has zeroed the tail and p < 2.
    """
    return np.sign(u) * np.abs(u) ** exponent


def gradient_residual(u: RadialField, params: Params) -> RadialField:
    """H^1-Riesz representative of J'(u).

    g = u - (-Lap + 1)^{-1} [mu (I_a*|u|^p)|u|^{p-2}u + lam |u|^{q-2}u],
    so <g, w>_{H^1} = <J'(u), w> holds exactly in the discretization.
    """
    g = u.grid
    kern = kernel_for(g, params.alpha)
    f = np.abs(u.values) ** params.p
    potential = kern.convolve(f)
    rhs = params.mu * potential * odd_power(u.values, params.p - 1.0)
    rhs += params.lam * odd_power(u.values, params.q - 1.0)
    w = h1_solve(RadialField(g, rhs))
    return RadialField(g, u.values - w.values)


def dilate(u: RadialField, tau: float) -> RadialField:
    """Resample u(x/tau) on the same grid; tau = 0 gives the zero field.

    Values needed left of the first node use the even extension; values
    beyond rmax are zero.
    """
    if tau < 0:
        raise InvalidParameterError(f"dilation parameter must be >= 0, got {tau}")
    if tau == 0.0:
        return RadialField(u.grid, np.zeros_like(u.values))
    if tau == 1.0:
        return u
    r = u.grid.nodes
    vals = np.interp(r / tau, r, u.values, left=u.values[0], right=0.0)
    return RadialField(u.grid, vals)


def scale_breakdown(bd: EnergyBreakdown, tau: float, params: Params) -> EnergyBreakdown:
    """Exact transform of the four integrals under u -> u(x/tau)."""
    if tau < 0:
        raise InvalidParameterError(f"dilation parameter must be >= 0, got {tau}")
    n = params.N
    return EnergyBreakdown(
        bd.kinetic * tau ** (n - 2),
        bd.mass * tau**n,
        bd.nonlocal_term * tau ** (n + params.alpha),
        bd.local_term * tau**n,
    )


def fiber_energy_of(bd: EnergyBreakdown, tau: float, params: Params) -> float:
    return energy_of(scale_breakdown(bd, tau, params), params)


def fiber_energy(u: RadialField, tau: float, params: Params) -> float:
    """phi(tau) = J(u(x/tau)), computed from the breakdown without resampling."""
    return fiber_energy_of(breakdown(u, params), tau, params)


def _fiber_slope_reduced(bd: EnergyBreakdown, params: Params):
    """phi'(tau) / tau^{N-3} as a callable; sign changes exactly once on (0, inf)."""
    a, b, c, d = bd.astuple()
    n, al = params.N, params.alpha
    lead = 0.5 * (n - 2) * a
    quad = n * (0.5 * b - params.lam * d / params.q)
    top = params.mu * (n + al) * c / (2.0 * params.p)

    def slope(t: float) -> float:
        return lead + quad * t**2 - top * t ** (2.0 + al)

    return slope


def project_tau(bd: EnergyBreakdown, params: Params) -> float:
    """Unique tau > 0 with P(u_tau) = 0, by bracketed root finding.

    Requires positive kinetic and nonlocal terms; the fiber energy then has
    a single interior maximum, so the reduced slope changes sign exactly
    once and the bracket [0, t_hi] found by doubling is valid.
    """
    if bd.kinetic <= 0 or bd.nonlocal_term <= 0:
        raise DegenerateFieldError(
            "Pohozaev projection needs positive kinetic and nonlocal terms"
        )
    slope = _fiber_slope_reduced(bd, params)
    hi = 1.0
    for _ in range(200):
        if slope(hi) < 0:
            break
        hi *= 2.0
    else:
        raise DegenerateFieldError("failed to bracket the fiber maximum")
    return float(brentq(slope, 0.0, hi, rtol=1e-13, xtol=1e-300, maxiter=200))


def project_pohozaev(u: RadialField, params: Params) -> float:
    """Dilation parameter tau0 projecting u onto the Pohozaev manifold."""
    return project_tau(breakdown(u, params), params)


def reduced_energy(u: RadialField, params: Params) -> float:
    """max_{tau >= 0} J(u_tau) = J at the Pohozaev projection of u.

    Invariant under dilations of u up to interpolation error.
    """
    bd = breakdown(u, params)
    return fiber_energy_of(bd, project_tau(bd, params), params)
