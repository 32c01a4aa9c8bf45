"""Frequency bundles and their derivative / monotonicity checks.

For a solution u on B_R and an exponent alpha >= 2, the weighted quantities

    H(r) = integral of u^2 [mu] w_r^(alpha-1)      (mass)
    D(r) = integral of A grad u . grad u w_r^alpha (energy)
    L(r) = integral of u div(A grad u) w_r^alpha   (equation pairing)
    I(r) = 2 alpha integral of u A grad u . x w_r^(alpha-1) = D + L  (by parts)
    J(r) = (I + D) / 2,      N(r) = D / H          (frequency)

are assembled radius-by-radius ([mu] present only in the variable-coefficient
case, where A-deviation error terms E_H, E_D also appear).  The headline
facts this module verifies numerically:

* the mass derivative identity
  H'(r) = (2(alpha-1)+n)/r H + (D+L)/(alpha r) [+ E_H/r],
* the frequency derivative lower bound
  N'(r) [+ c0 eta N] >= - integral of (div A grad u)^2 [mu^-1] w^(alpha+1)
                          / (4 alpha r H),
* almost-monotonicity of the compensated frequency
  Ntilde = N + M^2 r^4/(16 alpha)                                (classical)
  Ntilde = [N + M^2 r^4/(8 lam^2 alpha)] e^(c0 eta r + K^2 r^2/(4 lam^2 alpha))
                                                                 (variable).

Numerical policy: each radius is evaluated once on a Gauss-Jacobi rule with
weight exponent alpha - 1; the alpha and alpha + 1 integrals reuse those
nodes with explicit w_r factors (no extra solution evaluations, no accuracy
loss — the rule's polynomial exactness absorbs the extra factors).  Every
bundle also carries values from one coarser quadrature level, and verdicts
compare violations against a budget of 10x the observed refinement gap.
Derivatives in the checks use fresh 5-point stencils with steps balancing
truncation against quadrature noise, not the report grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateSolutionError, EvaluationError, PreconditionError
from .fields import CoefficientField, _mu_z_arrays
from .quad import BallDomain, fd_weights, stencil_step, unit_ball_rule, _stencil_radii
from .solutions import SolutionField

Array = NDArray[np.float64]

#: below this rms size (H normalized by the weight mass of the ball, i.e.
#: the weighted mean of u^2), the solution counts as vanishing on the ball
H_FLOOR = 1e-30

#: default radius-grid size
DEFAULT_RADII = 64

CSV_COLUMNS = ("r", "H", "D", "L", "I", "J", "N", "Ntilde", "EH", "ED", "alpha")


def geometric_radii(r_min: float, r_max: float, count: int = DEFAULT_RADII) -> Array:
    """Equal-log-step radius grid (resolves small r and near-R behavior)."""
    if not (0 < r_min < r_max):
        raise PreconditionError(f"need 0 < r_min < r_max, got ({r_min}, {r_max})")
    if count < 2:
        raise PreconditionError(f"need at least 2 radii, got {count}")
    return np.geomspace(r_min, r_max, count)


def default_alpha(M: float, R: float) -> float:
    """alpha = max(2, ceil((M R^2)^(2/3))): the exponent the three-ball
    derivation optimizes over."""
    return float(max(2, math.ceil((max(M, 0.0) * R * R) ** (2.0 / 3.0))))


def _weight_mass(dim: int, exponent: float, r: float) -> float:
    """integral of w_r^exponent over B_r, in closed form.

    Radially, with s = |x|/r: |S^(n-1)| r^n integral of (1-s^2)^a s^(n-1) ds
    = |S^(n-1)|/2 * Beta(n/2, a+1) * r^(2a+n).
    """
    a = exponent
    if dim == 2:
        surf = 2.0 * math.pi
    elif dim == 3:
        surf = 4.0 * math.pi
    else:
        raise PreconditionError(f"unsupported dimension {dim}")
    beta = math.gamma(dim / 2.0) * math.gamma(a + 1.0) / math.gamma(a + 1.0 + dim / 2.0)
    return surf / 2.0 * beta * r ** (2.0 * a + dim)


@dataclass(frozen=True)
class _RawValues:
    """Scalar integrals at one radius and one quadrature level."""

    H: float
    D: float
    L: float
    EH: float
    ED: float


def _classical_values(
    sol: SolutionField, domain: BallDomain, alpha: float, r: float, levels: int
) -> _RawValues:
    rule = unit_ball_rule(domain.dim, alpha - 1.0, levels)
    pts = rule.scaled_points(domain.center_array, r)
    u = sol.u_at(pts)
    g = sol.grad_at(pts)
    dAg = sol.divAgrad_at(pts)
    if not (np.isfinite(u).all() and np.isfinite(g).all() and np.isfinite(dAg).all()):
        raise EvaluationError(f"non-finite solution values inside B_{r}")
    w = rule.omega_values(r)
    H = rule.integrate_values(u * u, r)
    D = rule.integrate_values(np.einsum("ni,ni->n", g, g) * w, r)
    L = rule.integrate_values(u * dAg * w, r)
    return _RawValues(H=H, D=D, L=L, EH=0.0, ED=0.0)


def _variable_values(
    sol: SolutionField,
    fld: CoefficientField,
    domain: BallDomain,
    alpha: float,
    r: float,
    levels: int,
) -> _RawValues:
    rule = unit_ball_rule(domain.dim, alpha - 1.0, levels)
    pts = rule.scaled_points(domain.center_array, r)
    u = sol.u_at(pts)
    g = sol.grad_at(pts)
    dAg = sol.divAgrad_at(pts)
    if not (np.isfinite(u).all() and np.isfinite(g).all() and np.isfinite(dAg).all()):
        raise EvaluationError(f"non-finite solution values inside B_{r}")
    w = rule.omega_values(r)
    n = domain.dim

    A = fld.A_at(pts)
    mu, Z, jacZ, div_Ax = _mu_z_arrays(fld, pts, step=fld.fd_step * domain.radius)
    Ag = np.einsum("nij,nj->ni", A, g)

    H = rule.integrate_values(u * u * mu, r)
    D = rule.integrate_values(np.einsum("ni,ni->n", Ag, g) * w, r)
    L = rule.integrate_values(u * dAg * w, r)
    # E_H = integral of u^2 (div(Ax) mu^-1 - n) mu w^(alpha-1)
    EH = rule.integrate_values(u * u * (div_Ax - n * mu), r)
    # E_D term 1: (div Z - n) A grad u . grad u w^alpha
    divZ = np.einsum("nii->n", jacZ)
    t1 = (divZ - n) * np.einsum("ni,ni->n", Ag, g)
    # term 2: 2 a_ij du_k du_j (delta_ik - d_i Z_k) w^alpha
    delta_minus = np.eye(n)[None, :, :] - jacZ
    t2 = 2.0 * np.einsum("nij,nk,nj,nik->n", A, g, g, delta_minus)
    # term 3: (d_k a_ij) du_i du_j Z_k w^alpha
    G = fld.grad_A_at(pts, step=fld.fd_step * domain.radius)
    t3 = np.einsum("nkij,ni,nj,nk->n", G, g, g, Z)
    ED = rule.integrate_values((t1 + t2 + t3) * w, r)
    return _RawValues(H=H, D=D, L=L, EH=EH, ED=ED)


def _raw_values(
    sol: SolutionField,
    fld: CoefficientField | None,
    domain: BallDomain,
    alpha: float,
    r: float,
    levels: int,
    kind: str,
) -> _RawValues:
    if kind == "classical":
        return _classical_values(sol, domain, alpha, r, levels)
    assert fld is not None
    return _variable_values(sol, fld, domain, alpha, r, levels)


def _classical_ntilde(N: Array, radii: Array, M: float, alpha: float) -> Array:
    return N + (M * M) * radii**4 / (16.0 * alpha)


def _variable_ntilde(
    N: Array, radii: Array, M: float, K: float, lam: float, eta: float,
    alpha: float, c0: float,
) -> Array:
    lift = N + (M * M) * radii**4 / (8.0 * lam * lam * alpha)
    # Huge compensation constants may saturate to inf; verdicts treat
    # non-finite values as failures rather than warnings.
    with np.errstate(over="ignore"):
        return lift * np.exp(
            c0 * eta * radii + (K * K) * radii**2 / (4.0 * lam * lam * alpha)
        )


@dataclass(frozen=True)
class FrequencyBundle:
    """All frequency quantities on a radius grid, plus a refinement shadow.

    Arrays are aligned with ``radii``.  ``I`` and ``J`` are derived
    algebraically (I = D + L by parts, J = (I + D)/2), so the bundle
    identities J = (I+D)/2, D = J - L/2, I = J + L/2 hold to rounding by
    construction; the by-parts identity itself is checked against direct
    quadrature by ``radial_pairing_integral``.

    ``*_coarse`` arrays hold the same quantities from one coarser quadrature
    level and feed the error budgets of the verdicts.
    """

    kind: str  # "classical" | "variable"
    dim: int
    alpha: float
    levels: int
    radii: Array
    H: Array
    D: Array
    L: Array
    EH: Array
    ED: Array
    M: float
    K: float
    lam: float
    eta: float
    c0: float
    sol_residual: float
    label: str
    H_coarse: Array | None = None
    D_coarse: Array | None = None
    L_coarse: Array | None = None

    @property
    def I(self) -> Array:  # noqa: E743 - the standard symbol
        return self.D + self.L

    @property
    def J(self) -> Array:
        return (self.I + self.D) / 2.0

    @property
    def N(self) -> Array:
        return self.D / self.H

    @property
    def Ntilde(self) -> Array:
        if self.kind == "classical":
            return _classical_ntilde(self.N, self.radii, self.M, self.alpha)
        return _variable_ntilde(
            self.N, self.radii, self.M, self.K, self.lam, self.eta,
            self.alpha, self.c0,
        )

    @property
    def N_coarse(self) -> Array | None:
        if self.H_coarse is None:
            return None
        return self.D_coarse / self.H_coarse

    @property
    def Ntilde_coarse(self) -> Array | None:
        Nc = self.N_coarse
        if Nc is None:
            return None
        if self.kind == "classical":
            return _classical_ntilde(Nc, self.radii, self.M, self.alpha)
        return _variable_ntilde(
            Nc, self.radii, self.M, self.K, self.lam, self.eta,
            self.alpha, self.c0,
        )

    def refinement_rel_error(self) -> float:
        """Worst relative gap of Ntilde between the two quadrature levels."""
        fine, coarse = self.Ntilde, self.Ntilde_coarse
        if coarse is None:
            return 0.0
        scale = np.maximum(np.abs(fine), 1e-300)
        with np.errstate(invalid="ignore"):
            gap = np.abs(fine - coarse) / scale
        return float(np.max(np.where(np.isfinite(gap), gap, np.inf)))


def with_c0(bundle: FrequencyBundle, c0: float) -> FrequencyBundle:
    """The same bundle with a different monotonicity constant c0."""
    return replace(bundle, c0=c0)


def _check_common(alpha: float, radii) -> Array:
    if alpha < 2.0:
        raise PreconditionError(f"frequency bundles require alpha >= 2, got {alpha}")
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 1 or not np.all(np.diff(radii) > 0):
        raise PreconditionError("radii must be a strictly increasing 1-d grid")
    return radii


def _assemble(
    sol: SolutionField,
    fld: CoefficientField | None,
    domain: BallDomain,
    alpha: float,
    radii: Array,
    kind: str,
    levels: int,
    refine: bool,
    M: float,
    K: float,
    lam: float,
    eta: float,
    c0: float,
    label: str,
) -> FrequencyBundle:
    n = radii.size
    H = np.empty(n)
    D = np.empty(n)
    L = np.empty(n)
    EH = np.empty(n)
    ED = np.empty(n)
    Hc = np.empty(n) if refine else None
    Dc = np.empty(n) if refine else None
    Lc = np.empty(n) if refine else None
    for i, r in enumerate(radii):
        v = _raw_values(sol, fld, domain, alpha, float(r), levels, kind)
        floor = H_FLOOR * _weight_mass(domain.dim, alpha - 1.0, float(r))
        if not (v.H > floor):
            raise DegenerateSolutionError(
                f"H({r}) = {v.H:.3e} is below the positivity floor "
                f"{floor:.3e} (weighted mean of u^2 under {H_FLOOR}); "
                "the solution vanishes on this ball"
            )
        H[i], D[i], L[i], EH[i], ED[i] = v.H, v.D, v.L, v.EH, v.ED
        if refine:
            vc = _raw_values(sol, fld, domain, alpha, float(r), levels - 1, kind)
            Hc[i], Dc[i], Lc[i] = vc.H, vc.D, vc.L
    return FrequencyBundle(
        kind=kind, dim=domain.dim, alpha=alpha, levels=levels, radii=radii,
        H=H, D=D, L=L, EH=EH, ED=ED,
        M=M, K=K, lam=lam, eta=eta, c0=c0,
        sol_residual=sol.residual_bound if math.isfinite(sol.residual_bound) else 0.0,
        label=label,
        H_coarse=Hc, D_coarse=Dc, L_coarse=Lc,
    )


def classical_bundle(
    sol: SolutionField,
    domain: BallDomain,
    alpha: float,
    radii,
    M: float | None = None,
    levels: int | None = None,
    refine: bool = True,
) -> FrequencyBundle:
    """Frequency bundle with the flat weight (A = I, no mu factor).

    M defaults to the potential bound of the solution's attached equation
    (0 when there is none); it only enters the compensated Ntilde.
    """
    radii = _check_common(alpha, radii)
    if M is None:
        M = sol.equation.potential_bound if sol.equation is not None else 0.0
    K = sol.equation.drift_bound if sol.equation is not None else 0.0
    lv = levels if levels is not None else domain.levels
    return _assemble(
        sol, None, domain, alpha, radii, "classical", lv, refine,
        M=M, K=K, lam=1.0, eta=0.0, c0=0.0,
        label=f"classical({sol.label}, alpha={alpha})",
    )


def variable_bundle(
    sol: SolutionField,
    fld: CoefficientField,
    domain: BallDomain,
    alpha: float,
    radii,
    c0: float = 0.0,
    levels: int | None = None,
    refine: bool = True,
) -> FrequencyBundle:
    """Frequency bundle with the mu weight and A-energy, plus E_H and E_D.

    Requires A(0) = I and a ball centered at the origin (mu and Z are tied
    to the absolute coordinate).  c0 is the monotonicity constant entering
    Ntilde; fit it with certify.fit_c0 or supply a configured value.
    """
    radii = _check_common(alpha, radii)
    if not fld.is_identity_at_origin():
        raise PreconditionError("variable bundles require A(0) = I")
    if np.any(domain.center_array != 0.0):
        raise PreconditionError("variable bundles require a ball centered at 0")
    lv = levels if levels is not None else domain.levels
    return _assemble(
        sol, fld, domain, alpha, radii, "variable", lv, refine,
        M=fld.potential_bound, K=fld.drift_bound,
        lam=fld.ellipticity, eta=fld.lipschitz, c0=c0,
        label=f"variable({sol.label}, {fld.label}, alpha={alpha})",
    )


def radial_pairing_integral(
    sol: SolutionField,
    domain: BallDomain,
    alpha: float,
    r: float,
    fld: CoefficientField | None = None,
    levels: int | None = None,
) -> float:
    """Direct quadrature of I(r) = 2 alpha integral of u A grad u . x w^(alpha-1).

    Integration by parts makes this equal D(r) + L(r); the bundle defines I
    that way, and this function provides the independent value for checking.
    """
    lv = levels if levels is not None else domain.levels
    rule = unit_ball_rule(domain.dim, alpha - 1.0, lv)
    center = domain.center_array
    pts = rule.scaled_points(center, r)
    u = sol.u_at(pts)
    g = sol.grad_at(pts)
    if fld is not None:
        g = np.einsum("nij,nj->ni", fld.A_at(pts), g)
    radial = np.einsum("ni,ni->n", g, pts - center)
    return 2.0 * alpha * rule.integrate_values(u * radial, r)


# ---------------------------------------------------------------------------
# derivative checks


def _local_derivative(
    value_at: Callable[[float, int], float],
    r: float,
    domain: BallDomain,
    levels: int,
    growth_exponent: float,
) -> tuple[float, float]:
    """(F'(r), relative quadrature noise) via a fresh balanced 5-point stencil."""
    F_fine = value_at(r, levels)
    F_coarse = value_at(r, max(levels - 1, 1))
    scale = max(abs(F_fine), 1e-300)
    rel_noise = abs(F_fine - F_coarse) / scale
    lo, hi = domain.min_radius(), domain.radius
    h = stencil_step(r, rel_noise, growth_exponent, lo, hi)
    radii = _stencil_radii(r, h, lo, hi)
    w = fd_weights(radii, r, 1)
    return float(w @ [value_at(float(rho), levels) for rho in radii]), rel_noise


@dataclass(frozen=True)
class DerivativeResidualReport:
    """|H'(r) - RHS(r)| on a radius grid."""

    radii: Array
    residual: Array
    relative_residual: Array
    levels: int

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))


def check_H_derivative(
    bundle: FrequencyBundle,
    sol: SolutionField,
    domain: BallDomain,
    fld: CoefficientField | None = None,
    radii=None,
) -> DerivativeResidualReport:
    """Residuals of H'(r) = (2(alpha-1)+n)/r H + (D+L)/(alpha r) [+ E_H/r].

    H' comes from a fresh local stencil of full-quadrature H evaluations;
    the right-hand side uses the bundle's stored integrals.
    """
    if bundle.kind == "variable" and fld is None:
        fld = sol.equation
        if fld is None:
            raise PreconditionError("variable bundle check needs the coefficient field")
    alpha, n = bundle.alpha, domain.dim
    eval_radii = np.asarray(radii, dtype=float) if radii is not None else bundle.radii
    idx = np.searchsorted(bundle.radii, eval_radii)
    if not np.allclose(bundle.radii[np.clip(idx, 0, bundle.radii.size - 1)], eval_radii):
        raise PreconditionError("radii must be a subset of the bundle grid")

    def H_at(rho: float, lv: int) -> float:
        return _raw_values(sol, fld, domain, alpha, rho, lv, bundle.kind).H

    res = np.empty(eval_radii.size)
    rel = np.empty(eval_radii.size)
    growth = 2.0 * (alpha - 1.0) + n + 2.0
    for j, r in enumerate(eval_radii):
        i = int(idx[j])
        dH, _ = _local_derivative(H_at, float(r), domain, bundle.levels, growth)
        rhs = (
            (2.0 * (alpha - 1.0) + n) / r * bundle.H[i]
            + (bundle.D[i] + bundle.L[i]) / (alpha * r)
            + bundle.EH[i] / r
        )
        res[j] = abs(dH - rhs)
        rel[j] = res[j] / max(abs(dH), abs(rhs), 1e-300)
    return DerivativeResidualReport(
        radii=eval_radii, residual=res, relative_residual=rel, levels=bundle.levels
    )


@dataclass(frozen=True)
class FrequencySlackReport:
    """Slack of the N' lower bound on a radius grid.

    slack(r) = N'(r) [+ c0 eta N(r)] - RHS(r) where RHS is the negative
    quadratic term; the bound holds when slack >= -budget everywhere.
    """

    radii: Array
    slack: Array
    budget: Array
    passed: bool
    levels: int

    @property
    def worst_deficit(self) -> float:
        return float(np.max(np.maximum(-self.slack - self.budget, 0.0)))


def check_N_derivative_bound(
    bundle: FrequencyBundle,
    sol: SolutionField,
    domain: BallDomain,
    fld: CoefficientField | None = None,
    radii=None,
) -> FrequencySlackReport:
    """Verify N' >= -(1/(4 alpha r H)) integral of (div A grad u)^2 [mu^-1] w^(alpha+1)
    (with + c0 eta N on the left in the variable case).

    The budget is 10x the observed change of the slack under one step of
    quadrature coarsening, plus a rounding floor.
    """
    if bundle.kind == "variable" and fld is None:
        fld = sol.equation
        if fld is None:
            raise PreconditionError("variable bundle check needs the coefficient field")
    alpha = bundle.alpha
    eval_radii = np.asarray(radii, dtype=float) if radii is not None else bundle.radii

    def N_at(rho: float, lv: int) -> float:
        v = _raw_values(sol, fld, domain, alpha, rho, lv, bundle.kind)
        if not (v.H > H_FLOOR * _weight_mass(domain.dim, alpha - 1.0, rho)):
            raise DegenerateSolutionError(f"H({rho}) below floor")
        return v.D / v.H

    def quadratic_term(rho: float, lv: int) -> float:
        rule = unit_ball_rule(domain.dim, alpha - 1.0, lv)
        pts = rule.scaled_points(domain.center_array, rho)
        dAg = sol.divAgrad_at(pts)
        w = rule.omega_values(rho)
        if bundle.kind == "variable":
            mu, _, _, _ = _mu_z_arrays(fld, pts, step=fld.fd_step * domain.radius)
            vals = dAg * dAg / mu * w * w
        else:
            vals = dAg * dAg * w * w
        return rule.integrate_values(vals, rho)

    def slack_at(rho: float, lv: int) -> float:
        v = _raw_values(sol, fld, domain, alpha, rho, lv, bundle.kind)
        if not (v.H > H_FLOOR * _weight_mass(domain.dim, alpha - 1.0, rho)):
            raise DegenerateSolutionError(f"H({rho}) below floor")
        dN, _ = _local_derivative(
            lambda rr, lvl: N_at(rr, lvl), rho, domain, lv, 4.0
        )
        lhs = dN
        if bundle.kind == "variable":
            lhs = dN + bundle.c0 * bundle.eta * (v.D / v.H)
        rhs = -quadratic_term(rho, lv) / (4.0 * alpha * rho * v.H)
        return lhs - rhs

    scale = float(np.max(np.abs(bundle.Ntilde))) / max(float(eval_radii[0]), 1e-6)
    slack = np.empty(eval_radii.size)
    budget = np.empty(eval_radii.size)
    for j, r in enumerate(eval_radii):
        fine = slack_at(float(r), bundle.levels)
        coarse = slack_at(float(r), max(bundle.levels - 1, 1))
        slack[j] = fine
        budget[j] = 10.0 * abs(fine - coarse) + 1e-9 * max(scale, 1.0)
    passed = bool(np.all(slack >= -budget))
    return FrequencySlackReport(
        radii=eval_radii, slack=slack, budget=budget, passed=passed,
        levels=bundle.levels,
    )


# ---------------------------------------------------------------------------
# monotonicity verdicts


@dataclass(frozen=True)
class MonotonicityReport:
    """Verdict on Ntilde being nondecreasing across the radius grid."""

    radii: Array
    Ntilde: Array
    worst_violation: float
    budget: float
    passed: bool
    violation_count: int
    label: str

    def summary(self) -> str:
        state = "pass" if self.passed else "FAIL"
        return (
            f"[{state}] {self.label}: worst drop {self.worst_violation:.3e} "
            f"vs budget {self.budget:.3e} over {self.radii.size} radii "
            f"({self.violation_count} decreasing steps)"
        )


def monotonicity_budget(bundle: FrequencyBundle) -> float:
    """10 x max|Ntilde| x (refinement gap) plus solution-residual slack.

    Consecutive-radius comparisons involve no derivative stencil, so the
    stencil term of the budget is identically zero here; solved fields
    additionally contribute twice their relative residual.
    """
    scale = float(np.max(np.abs(bundle.Ntilde)))
    rel = bundle.refinement_rel_error()
    sol_term = 0.0
    if bundle.sol_residual > 0.0:
        # u-scale from the mass: ||u||-rms on the largest ball
        r_big = float(bundle.radii[-1])
        m = _weight_mass(bundle.dim, bundle.alpha - 1.0, r_big)
        u_rms = math.sqrt(float(bundle.H[-1]) / m)
        sol_term = 2.0 * bundle.sol_residual / max(u_rms, 1e-300)
    return 10.0 * scale * (rel + sol_term) + 1e-13 * max(scale, 1.0)


def verify_monotonicity(
    bundle: FrequencyBundle, budget: float | None = None
) -> MonotonicityReport:
    """Check Ntilde(r_{i+1}) >= Ntilde(r_i) - budget on consecutive radii."""
    if bundle.radii.size < 16:
        raise PreconditionError(
            f"monotonicity verdicts need >= 16 radii, got {bundle.radii.size}"
        )
    if budget is None:
        if bundle.H_coarse is None:
            raise PreconditionError(
                "bundle has no refinement shadow; pass an explicit budget "
                "or rebuild with refine=True"
            )
        budget = monotonicity_budget(bundle)
    nt = bundle.Ntilde
    if not np.all(np.isfinite(nt)):
        # Overflowed compensation factors cannot certify anything: report
        # every consecutive pair as violated with an infinite worst case.
        return MonotonicityReport(
            radii=bundle.radii,
            Ntilde=nt,
            worst_violation=math.inf,
            budget=float(budget),
            passed=False,
            violation_count=int(bundle.radii.size - 1),
            label=bundle.label,
        )
    drops = nt[:-1] - nt[1:]
    worst = float(np.max(drops)) if drops.size else 0.0
    worst = max(worst, 0.0)
    count = int(np.sum(drops > budget))
    return MonotonicityReport(
        radii=bundle.radii,
        Ntilde=nt,
        worst_violation=worst,
        budget=float(budget),
        passed=bool(worst <= budget),
        violation_count=count,
        label=bundle.label,
    )


# ---------------------------------------------------------------------------
# CSV export


def bundle_csv(bundle: FrequencyBundle) -> str:
    """Bundle as CSV text with the documented column schema."""
    lines = [",".join(CSV_COLUMNS)]
    cols = (
        bundle.radii, bundle.H, bundle.D, bundle.L, bundle.I, bundle.J,
        bundle.N, bundle.Ntilde, bundle.EH, bundle.ED,
        np.full(bundle.radii.size, bundle.alpha),
    )
    for row in zip(*cols):
        lines.append(",".join(f"{v:.16e}" for v in row))
    return "\n".join(lines) + "\n"


def write_bundle_csv(bundle: FrequencyBundle, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(bundle_csv(bundle))
