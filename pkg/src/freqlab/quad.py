"""Weighted quadrature on balls and radial differentiation.

Everything downstream integrates quantities of the form

    F(r) = integral over B_r(c) of f(x) * w_r(x)^alpha dx,
    w_r(x) = r^2 - |x - c|^2,

for n in {2, 3}.  The weight vanishes on the sphere, so after the radial
substitution rho = r*t, t = sqrt(u) the weight becomes a Jacobi factor
(1-u)^alpha u^((n-2)/2) that a Gauss-Jacobi rule absorbs *exactly*; only the
smooth integrand f is sampled.  Angular integration is an equal-weight
trapezoid rule on the circle (n = 2) or a Gauss-Legendre x trapezoid product
rule on the sphere (n = 3).  Both directions are polynomially exact up to
`exactness_degree(levels)` and converge spectrally for analytic integrands.

A rule is built on the unit ball once and rescaled: the integral over B_r
is r^(2*alpha + n) times the weighted sum of f at c + r*(unit nodes).  The
factors (1 - t^2) are kept from the rule construction, so w_r at a node is
computed as r^2 * (1 - t^2) with no cancellation near the boundary.

Radial derivatives of quantities like F(r) use 5-point finite-difference
stencils with weights computed for arbitrary node positions (Fornberg's
recursion), which reduces to the classical 4th-order central stencil on
interior uniform windows and degrades gracefully to one-sided 4th-order
windows at the ends of the allowed radius range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.special import roots_jacobi, roots_legendre

from .errors import EvaluationError, PreconditionError, QuadratureDomainError

Array = NDArray[np.float64]
ScalarField = Callable[[Array], Array]

#: default quadrature refinement (acceptance runs use 7)
DEFAULT_LEVELS = 5

#: operations refuse radii below this fraction of the domain radius
MIN_RADIUS_FRACTION = 1e-3


def _as_point(x, dim: int) -> Array:
    p = np.asarray(x, dtype=float).reshape(-1)
    if p.size != dim:
        raise QuadratureDomainError(f"expected a point in R^{dim}, got shape {p.shape}")
    return p


@dataclass(frozen=True)
class BallDomain:
    """A ball B_R(center) in R^n together with a quadrature resolution.

    Attributes:
        center: ball center (length-n sequence).
        radius: ball radius R > 0.
        dim: ambient dimension, 2 or 3.
        levels: refinement parameter; node counts double per level.
    """

    center: tuple[float, ...]
    radius: float
    dim: int
    levels: int = DEFAULT_LEVELS

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise QuadratureDomainError(f"dimension must be 2 or 3, got {self.dim}")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise QuadratureDomainError(f"radius must be positive, got {self.radius}")
        if self.levels < 1:
            raise QuadratureDomainError(f"levels must be >= 1, got {self.levels}")
        object.__setattr__(self, "center", tuple(float(c) for c in _as_point(self.center, self.dim)))

    @property
    def center_array(self) -> Array:
        return np.asarray(self.center, dtype=float)

    def min_radius(self) -> float:
        return MIN_RADIUS_FRACTION * self.radius


def centered_ball(radius: float, dim: int, levels: int = DEFAULT_LEVELS) -> BallDomain:
    """Ball of the given radius centered at the origin."""
    return BallDomain(center=(0.0,) * dim, radius=radius, dim=dim, levels=levels)


@dataclass(frozen=True)
class WeightSpec:
    """Radius and weight exponent of one weighted integral.

    ``alpha`` here is the exponent actually applied to w_r; the frequency
    machinery uses alpha - 1, alpha and alpha + 1 for different integrals and
    the unweighted mass h(r) uses alpha = 0, so any alpha >= 0 is legal.
    """

    r: float
    alpha: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise QuadratureDomainError(f"radius must be positive, got {self.r}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise QuadratureDomainError(f"weight exponent must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class RadialGrid:
    """Scalar samples F(r_i) on a strictly increasing radius grid."""

    radii: Array
    values: Array

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if radii.ndim != 1 or radii.shape != values.shape:
            raise PreconditionError("radii and values must be 1-d arrays of equal length")
        if radii.size >= 2 and not np.all(np.diff(radii) > 0):
            raise PreconditionError("radii must be strictly increasing")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)


def weight(x, spec: WeightSpec, center=None) -> float | Array:
    """Evaluate w_r(x) = r^2 - |x - center|^2 (center defaults to 0).

    Raises QuadratureDomainError when any point lies outside the closed ball.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if center is not None:
        pts = pts - np.asarray(center, dtype=float)
    sq = np.sum(pts * pts, axis=1)
    r2 = spec.r * spec.r
    if np.any(sq > r2 * (1.0 + 1e-12)):
        bad = pts[int(np.argmax(sq))]
        raise QuadratureDomainError(f"point {bad} lies outside the ball of radius {spec.r}")
    vals = np.maximum(r2 - sq, 0.0)
    return float(vals[0]) if single else vals


def radial_node_count(levels: int) -> int:
    return 2 ** (levels + 2)


def exactness_degree(levels: int) -> int:
    """Largest total polynomial degree integrated exactly at this level.

    The angular rules bind: 2^(levels+3) equally spaced angles integrate
    trigonometric polynomials of degree 2^(levels+3) - 1 (n = 2), and the
    polar Gauss-Legendre / azimuthal trapezoid pair match that degree in
    n = 3.  The radial Gauss-Jacobi rule is exact far beyond it.
    """
    return 2 ** (levels + 3) - 1


@dataclass(frozen=True)
class BallRule:
    """Product quadrature rule over the unit ball for one weight exponent.

    The integral of f * w_r^alpha over B_r(c) is

        r**(2*alpha + dim) * weights @ f(c + r * nodes).

    ``one_minus_t2`` holds 1 - |node|^2 exactly as produced by the radial
    rule; ``omega_values(r)`` turns it into w_r at the scaled nodes.
    """

    dim: int
    alpha: float
    levels: int
    nodes: Array = field(repr=False)
    weights: Array = field(repr=False)
    one_minus_t2: Array = field(repr=False)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    def scaled_points(self, center, r: float) -> Array:
        return np.asarray(center, dtype=float) + r * self.nodes

    def omega_values(self, r: float) -> Array:
        return (r * r) * self.one_minus_t2

    def integrate_values(self, values: Array, r: float) -> float:
        return r ** (2 * self.alpha + self.dim) * float(self.weights @ values)


def _unit_rule_2d(alpha: float, levels: int) -> BallRule:
    m = radial_node_count(levels)
    xj, wj = roots_jacobi(m, alpha, 0.0)
    u = 0.5 * (xj + 1.0)
    one_minus_u = 0.5 * (1.0 - xj)
    t = np.sqrt(u)
    # 1/2 from u = t^2, 2^-(alpha+1) from mapping [-1, 1] -> [0, 1]
    radial_w = 0.5 * 2.0 ** (-(alpha + 1.0)) * wj

    n_ang = 2 * m
    theta = 2.0 * math.pi * np.arange(n_ang) / n_ang
    directions = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    ang_w = 2.0 * math.pi / n_ang

    nodes = (t[:, None, None] * directions[None, :, :]).reshape(-1, 2)
    weights = np.repeat(radial_w * ang_w, n_ang)
    one_minus_t2 = np.repeat(one_minus_u, n_ang)
    return BallRule(2, alpha, levels, nodes, weights, one_minus_t2)


def _unit_rule_3d(alpha: float, levels: int) -> BallRule:
    m = radial_node_count(levels)
    xj, wj = roots_jacobi(m, alpha, 0.5)
    u = 0.5 * (xj + 1.0)
    one_minus_u = 0.5 * (1.0 - xj)
    t = np.sqrt(u)
    radial_w = 0.5 * 2.0 ** (-(alpha + 1.5)) * wj

    z, wz = roots_legendre(m)
    n_az = 2 * m
    phi = 2.0 * math.pi * np.arange(n_az) / n_az
    s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    dirs = np.empty((m, n_az, 3))
    dirs[:, :, 0] = s[:, None] * np.cos(phi)[None, :]
    dirs[:, :, 1] = s[:, None] * np.sin(phi)[None, :]
    dirs[:, :, 2] = z[:, None]
    sphere_w = np.repeat(wz * (2.0 * math.pi / n_az), n_az)

    nodes = (t[:, None, None] * dirs.reshape(1, -1, 3)).reshape(-1, 3)
    weights = np.multiply.outer(radial_w, sphere_w).ravel()
    one_minus_t2 = np.repeat(one_minus_u, m * n_az)
    return BallRule(3, alpha, levels, nodes, weights, one_minus_t2)


@lru_cache(maxsize=128)
def unit_ball_rule(dim: int, alpha: float, levels: int) -> BallRule:
    """Cached unit-ball rule for the given exponent and refinement level."""
    if dim == 2:
        return _unit_rule_2d(alpha, levels)
    if dim == 3:
        return _unit_rule_3d(alpha, levels)
    raise QuadratureDomainError(f"dimension must be 2 or 3, got {dim}")


def _check_radius(domain: BallDomain, r: float) -> None:
    if r < domain.min_radius():
        raise QuadratureDomainError(
            f"radius {r} is below the floor {domain.min_radius()} "
            f"({MIN_RADIUS_FRACTION} of the domain radius)"
        )
    if r > domain.radius * (1.0 + 1e-12):
        raise QuadratureDomainError(f"radius {r} exceeds the domain radius {domain.radius}")


def integrate_weighted(
    f: ScalarField,
    domain: BallDomain,
    spec: WeightSpec,
    levels: int | None = None,
) -> float:
    """Quadrature value of the integral of f * w_r^alpha over B_r(center).

    Args:
        f: vectorized scalar field mapping an (N, dim) array to (N,) values.
        domain: the ambient ball; spec.r must lie in [1e-3 * R, R].
        spec: radius and weight exponent.
        levels: override of domain.levels (used by refinement comparisons).

    Raises:
        QuadratureDomainError: r outside the accepted range.
        EvaluationError: f produced a non-finite value (carries the point).
    """
    _check_radius(domain, spec.r)
    rule = unit_ball_rule(domain.dim, spec.alpha, levels or domain.levels)
    pts = rule.scaled_points(domain.center_array, spec.r)
    vals = np.asarray(f(pts), dtype=float).reshape(-1)
    if vals.shape[0] != rule.node_count:
        raise EvaluationError(
            f"integrand returned {vals.shape[0]} values for {rule.node_count} points"
        )
    bad = ~np.isfinite(vals)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise EvaluationError(
            f"integrand returned a non-finite value at {pts[idx]}", point=pts[idx]
        )
    return rule.integrate_values(vals, spec.r)


def fd_weights(nodes: Sequence[float], x0: float, order: int) -> Array:
    """Finite-difference weights on arbitrary nodes (Fornberg's recursion).

    Returns w with sum(w * F(nodes)) approximating the order-th derivative
    of F at x0.  With 5 symmetric uniform nodes and order 1 this reproduces
    the classical 4th-order central stencil.
    """
    x = np.asarray(nodes, dtype=float)
    n = x.size
    if order >= n:
        raise PreconditionError(f"need more than {order} nodes for derivative order {order}")
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def radial_derivative(grid: RadialGrid, r: float) -> float:
    """F'(r) from grid samples via a 5-point stencil of Fornberg weights.

    4th-order accurate on smooth grids when r sits well inside the range;
    the window is shifted (one-sided) near the ends.
    """
    radii = grid.radii
    if radii.size < 5:
        raise PreconditionError("radial_derivative needs at least 5 grid points")
    if r < radii[0] - 1e-12 or r > radii[-1] + 1e-12:
        raise QuadratureDomainError(f"radius {r} outside grid range [{radii[0]}, {radii[-1]}]")
    # window of the 5 nodes nearest r, kept contiguous
    k = int(np.searchsorted(radii, r))
    lo = min(max(k - 2, 0), radii.size - 5)
    sel = slice(lo, lo + 5)
    w = fd_weights(radii[sel], r, 1)
    return float(w @ grid.values[sel])


def _stencil_radii(r: float, h: float, lo: float, hi: float) -> Array:
    """Five stencil radii around r inside [lo, hi], central when possible."""
    offsets = h * np.arange(-2.0, 3.0)
    shift = 0.0
    if r + offsets[-1] > hi:
        shift = hi - (r + offsets[-1])
    if r + offsets[0] + shift < lo:
        shift = lo - (r + offsets[0])
    radii = r + offsets + shift
    if radii[0] < lo - 1e-15 or radii[-1] > hi + 1e-15:
        raise QuadratureDomainError(
            f"cannot place a 5-point stencil of step {h} around r={r} inside [{lo}, {hi}]"
        )
    return radii


def stencil_step(
    r: float,
    rel_noise: float,
    growth_exponent: float,
    lo: float,
    hi: float,
) -> float:
    """Step size balancing the h^4 stencil term against noise amplification.

    For F ~ r^p the 5-point stencil truncation is ~ |F| p^5 h^4 / (30 r^5)
    while quadrature noise of relative size eps enters as 1.5 eps |F| / h.
    The step keeps the truncation at one tenth of the noise term, clamped to
    a window that stays inside [lo, hi].
    """
    p = max(growth_exponent, 2.0)
    eps = max(rel_noise, 1e-16)
    h = r * (4.5 * eps / p**5) ** 0.2
    h_max = min(0.05 * r, (hi - lo) / 4.5)
    h_min = 1e-4 * r
    return float(min(max(h, h_min), h_max))


@dataclass(frozen=True)
class DerivativeIdentityReport:
    """Residuals of the two weight-derivative identity forms at one radius.

    The identity under test, for F(r) = integral of f * w_r^alpha:

        F'(r) = (2*alpha + n)/r * F(r) + (1/r)  * integral of (grad f . x) w_r^alpha
              = (2*alpha + n)/r * F(r) + 1/(2*(alpha+1)*r) * integral of (lap f) w_r^(alpha+1)
    """

    r: float
    alpha: float
    F_value: float
    dF_numeric: float
    rhs_gradient_form: float
    rhs_laplacian_form: float
    residual_gradient_form: float
    residual_laplacian_form: float
    stencil_h: float
    quad_noise_estimate: float

    @property
    def relative_residuals(self) -> tuple[float, float]:
        scale = max(abs(self.dF_numeric), abs(self.rhs_gradient_form), 1e-300)
        return (
            self.residual_gradient_form / scale,
            self.residual_laplacian_form / scale,
        )


def check_derivative_identity(
    f: ScalarField,
    grad_f: Callable[[Array], Array],
    lap_f: ScalarField,
    domain: BallDomain,
    alpha: float,
    r: float,
    levels: int | None = None,
) -> DerivativeIdentityReport:
    """Compare the numerical F'(r) against both closed derivative forms.

    grad_f maps (N, dim) points to (N, dim) gradients; x in the gradient
    form is measured relative to the ball center.
    """
    lv = levels or domain.levels
    _check_radius(domain, r)
    center = domain.center_array

    def F(rho: float, at_levels: int = lv) -> float:
        return integrate_weighted(f, domain, WeightSpec(rho, alpha), levels=at_levels)

    F_r = F(r)
    F_coarse = F(r, at_levels=max(lv - 1, 1))
    scale = max(abs(F_r), 1e-300)
    rel_noise = abs(F_r - F_coarse) / scale

    lo = domain.min_radius()
    hi = domain.radius
    h = stencil_step(r, rel_noise, 2 * alpha + domain.dim + 2, lo, hi)
    radii = _stencil_radii(r, h, lo, hi)
    w = fd_weights(radii, r, 1)
    dF = float(w @ [F(rho) for rho in radii])

    def radial_gradient(pts: Array) -> Array:
        return np.einsum("ij,ij->i", np.asarray(grad_f(pts), dtype=float), pts - center)

    grad_term = integrate_weighted(radial_gradient, domain, WeightSpec(r, alpha), levels=lv)
    lap_term = integrate_weighted(lap_f, domain, WeightSpec(r, alpha + 1.0), levels=lv)

    base = (2 * alpha + domain.dim) / r * F_r
    rhs1 = base + grad_term / r
    rhs2 = base + lap_term / (2 * (alpha + 1.0) * r)
    return DerivativeIdentityReport(
        r=r,
        alpha=alpha,
        F_value=F_r,
        dF_numeric=dF,
        rhs_gradient_form=rhs1,
        rhs_laplacian_form=rhs2,
        residual_gradient_form=abs(dF - rhs1),
        residual_laplacian_form=abs(dF - rhs2),
        stencil_h=h,
        quad_noise_estimate=rel_noise * scale,
    )
