"""Riesz potential I_alpha * f for radial f, and the sharp HLS constant.

The convolution of a radial function with |x|^{alpha-N} reduces to a
one-dimensional integral against the angularly integrated kernel

    k(r, s) = int_{S^{N-1}} |r e_1 - s omega|^{alpha-N} d omega,

for which a closed form exists: elementary for N = 3, hypergeometric in
general.  A dense M x M kernel matrix is precomputed once per (grid,
alpha) pair and cached; applying the potential is then a single matrix
product, exact to quadrature order.  The integrable kernel singularity on
the diagonal r = s is replaced by the average of k over the node's own
quadrature cell.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, hyp2f1

from .errors import InvalidParameterError
from .grid import RadialField, RadialGrid

__all__ = [
    "RieszKernel",
    "riesz_normalization",
    "hls_constant",
    "angular_kernel",
    "kernel_for",
    "riesz_apply",
    "hls_bilinear",
]

_LOG_BRANCH_TOL = 1e-8


def _check_alpha(dimension: int, alpha: float) -> None:
    if not 0.0 < alpha < dimension:
        raise InvalidParameterError(f"alpha must lie in (0, {dimension}), got {alpha}")


def riesz_normalization(dimension: int, alpha: float) -> float:
    """Normalization A_alpha(N) = Gamma((N-a)/2) / (Gamma(a/2) pi^{N/2} 2^a)."""
    _check_alpha(dimension, alpha)
    n = dimension
    log_val = (
        gammaln((n - alpha) / 2.0)
        - gammaln(alpha / 2.0)
        - (n / 2.0) * math.log(math.pi)
        - alpha * math.log(2.0)
    )
    return float(math.exp(log_val))


def hls_constant(dimension: int, alpha: float) -> float:
    """Sharp constant of the bilinear Hardy-Littlewood-Sobolev inequality
    at the conjugate exponents 2N/(N+alpha)."""
    _check_alpha(dimension, alpha)
    n = dimension
    log_val = (
        ((n - alpha) / 2.0) * math.log(math.pi)
        + gammaln(alpha / 2.0)
        - gammaln((n + alpha) / 2.0)
        - (alpha / n) * (gammaln(n / 2.0) - gammaln(n))
    )
    return float(math.exp(log_val))


def angular_kernel(dimension: int, alpha: float, r, s):
    """Angular integral of |x - y|^{alpha-N} over directions of y.

    For N = 3 the closed form
        (2 pi / (r s)) ((r+s)^{a-1} - |r-s|^{a-1}) / (a - 1)
    is used, with the logarithmic limit at a = 1.  For other dimensions

        k(r, s) = c_N (r+s)^{alpha-N} 2F1((N-alpha)/2, (N-1)/2; N-1; xi),
        xi = 4 r s / (r+s)^2,

    which follows from the Euler integral representation of the Gegenbauer
    reduction.  Finite for r != s; diverges on the diagonal when alpha <= 1.
    """
    _check_alpha(dimension, alpha)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(r <= 0) or np.any(s <= 0):
        raise InvalidParameterError("angular_kernel needs positive radii")
    if dimension == 3:
        if abs(alpha - 2.0) < 1e-13:
            return 4.0 * math.pi / np.maximum(r, s)
        if abs(alpha - 1.0) < _LOG_BRANCH_TOL:
            return (2.0 * math.pi / (r * s)) * np.log((r + s) / np.abs(r - s))
        return (
            (2.0 * math.pi / (r * s))
            * ((r + s) ** (alpha - 1.0) - np.abs(r - s) ** (alpha - 1.0))
            / (alpha - 1.0)
        )
    n = dimension
    log_c = (
        (n - 1.0) * math.log(2.0)
        + ((n - 1.0) / 2.0) * math.log(math.pi)
        + gammaln((n - 1.0) / 2.0)
        - gammaln(n - 1.0)
    )
    # 1 - xi computed stably; xi clamped away from 1 so hyp2f1 stays finite.
    # Clamping only touches |r-s| < ~3e-7 max(r,s), a sliver whose kernel
    # mass is negligible in any cell average.
    xi = 1.0 - np.minimum(((r - s) / (r + s)) ** 2, 1.0)
    xi = np.minimum(xi, 1.0 - 1e-13)
    return math.exp(log_c) * (r + s) ** (alpha - n) * hyp2f1(
        (n - alpha) / 2.0, (n - 1.0) / 2.0, n - 1.0, xi
    )


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)
_DYADIC_LEVELS = 30
_BANDWIDTH = 2


def _cell_average_kernel(
    dimension: int, alpha: float, r: np.ndarray, a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """Average of k(r, .) over the cell [a, b], with r inside or outside.

    Each side of the point closest to r is covered by dyadic panels refined
    toward it with Gauss-Legendre quadrature per panel.  When r lies inside
    the cell the |r-s|^{alpha-1} singularity is integrable and the
    geometrically shrinking leftover sliver is dropped; outside, the
    grading merely resolves the kernel's peak toward the near edge.
    """
    scale = 2.0 ** -np.arange(_DYADIC_LEVELS)
    outer = np.concatenate((scale, [0.0]))  # panel edges as fractions of the side width
    lo_frac, hi_frac = outer[1:], outer[:-1]
    mid = 0.5 * (lo_frac + hi_frac)
    half = 0.5 * (hi_frac - lo_frac)
    pts = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    wts = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()

    center = np.clip(r, a, b)
    total = np.zeros_like(r)
    for edge in (a, b):
        width = np.abs(edge - center)
        mask = width > 0
        if not np.any(mask):
            continue
        s_pts = center[mask, None] + (edge - center)[mask, None] * pts[None, :]
        vals = angular_kernel(
            dimension, alpha, np.broadcast_to(r[mask, None], s_pts.shape), s_pts
        )
        total[mask] += width[mask] * (vals @ wts)
    return total / (b - a)


def _kernel_matrix(grid: RadialGrid, alpha: float) -> np.ndarray:
    r = grid.nodes
    m = r.size
    s_mat = np.broadcast_to(r[None, :], (m, m)).copy()
    s_mat[np.diag_indices(m)] *= 1.0 + 1e-6  # dummy values, replaced below
    k = angular_kernel(grid.dimension, alpha, r[:, None], s_mat)

    # Node j's quadrature cell runs between the midpoints to its neighbors.
    edges_lo = np.empty_like(r)
    edges_hi = np.empty_like(r)
    edges_lo[0] = 0.5 * r[0]
    edges_lo[1:] = 0.5 * (r[:-1] + r[1:])
    edges_hi[:-1] = edges_lo[1:]
    edges_hi[-1] = r[-1]

    # Replace a band around the diagonal by cell averages: point values of
    # the singular kernel next to the diagonal would cost an order of
    # accuracy; averages restore the composite rule's second order.
    for off in range(-_BANDWIDTH, _BANDWIDTH + 1):
        idx_i = np.arange(max(0, -off), min(m, m - off))
        idx_j = idx_i + off
        k[idx_i, idx_j] = _cell_average_kernel(
            grid.dimension, alpha, r[idx_i], edges_lo[idx_j], edges_hi[idx_j]
        )
    k = 0.5 * (k + k.T)
    if not np.all(np.isfinite(k)) or np.any(k <= 0):
        raise InvalidParameterError("kernel matrix has non-finite or non-positive entries")
    return k


@dataclass(frozen=True, eq=False)
class RieszKernel:
    """Dense angularly reduced kernel for one (grid, alpha) pair."""

    alpha: float
    dimension: int
    grid: RadialGrid
    reduced_kernel: np.ndarray

    def convolve(self, values: np.ndarray) -> np.ndarray:
        """(I_alpha * f) sampled on the nodes, including the normalization."""
        g = self.grid
        norm = riesz_normalization(self.dimension, self.alpha)
        return norm * (self.reduced_kernel @ (values * g.volume_weights))

    def bilinear(self, u: np.ndarray, v: np.ndarray) -> float:
        """Double integral of u(x) v(y) |x-y|^{alpha-N} (no normalization)."""
        g = self.grid
        uw = u * g.volume_weights
        vw = v * g.volume_weights
        return float(g.sphere_area * (uw @ self.reduced_kernel @ vw))


_kernel_cache: "weakref.WeakKeyDictionary[RadialGrid, dict[float, RieszKernel]]" = (
    weakref.WeakKeyDictionary()
)


def kernel_for(grid: RadialGrid, alpha: float) -> RieszKernel:
    """Shared kernel matrix for one grid and exponent; built on first use."""
    _check_alpha(grid.dimension, alpha)
    per_grid = _kernel_cache.setdefault(grid, {})
    kernel = per_grid.get(alpha)
    if kernel is None:
        kernel = RieszKernel(alpha, grid.dimension, grid, _kernel_matrix(grid, alpha))
        per_grid[alpha] = kernel
    return kernel


def riesz_apply(f: RadialField, alpha: float) -> RadialField:
    """Riesz potential I_alpha * f of a radial field."""
    kernel = kernel_for(f.grid, alpha)
    return RadialField(f.grid, kernel.convolve(f.values))


def hls_bilinear(u: RadialField, v: RadialField, alpha: float) -> float:
    """Bilinear HLS form int int u(x) v(y) / |x-y|^{N-alpha} dx dy."""
    if u.grid is not v.grid:
        raise InvalidParameterError("hls_bilinear needs fields on the same grid")
    return kernel_for(u.grid, alpha).bilinear(u.values, v.values)
