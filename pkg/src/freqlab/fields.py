"""Coefficient fields (A, W, V) and the auxiliary function mu / vector field Z.

A generalized Schrodinger operator -div(A grad u) + W . grad u + V u is
described by a symmetric uniformly elliptic matrix field A with

    ellipticity  lam |xi|^2 <= A(x) xi . xi,   A(x) xi . zeta <= lam^-1 |xi||zeta|,
    lipschitz    |grad a_ij(x)| <= eta,
    |V| <= potential_bound,  |W| <= drift_bound.

The variable-coefficient frequency machinery weighs u^2 by

    mu(x) = A(x) x . x / |x|^2   in [lam, 1/lam]

and differentiates the energy along Z(x) = A(x) x / mu(x), which satisfies
Z(x) . x = |x|^2 identically.  When A(0) = I the deviation of (mu, Z) from
the constant-coefficient case is first order in eta * |x|:

    |div(A x) / mu - n| <= c1 eta r,
    |delta_ik - dZ_k/dx_i| <= c2 eta r,
    |div Z - n| <= c3 eta r    on B_r,

with constants depending only on n and lam; ``check_structure_constants``
fits the smallest such (c1, c2, c3) empirically.  ``normalize_at`` performs
the change of variables x = x0 + S y, S = A(x0)^(1/2), that restores
A(0) = I at an arbitrary center while degrading (lam, eta, K) in a
controlled way; it is the workhorse of the iterated decay estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.stats import qmc

from .errors import PreconditionError, QuadratureDomainError
from .quad import BallDomain, unit_ball_rule

Array = NDArray[np.float64]

#: default low-discrepancy sample count for sup-norm estimates
DEFAULT_SAMPLES = 4096

#: tolerated asymmetry of A(x0) in normalize_at
SYMMETRY_TOL = 1e-10

#: relative slack allowed before a declared bound counts as violated
VALIDATION_SLACK = 1e-8


def _zeros_vector(pts: Array) -> Array:
    return np.zeros_like(pts)


def _zeros_scalar(pts: Array) -> Array:
    return np.zeros(pts.shape[0])


@dataclass(frozen=True)
class CoefficientField:
    """The coefficient triple (A, W, V) with its declared bounds.

    Attributes:
        dim: ambient dimension.
        A: vectorized matrix field, (N, dim) points -> (N, dim, dim).
        grad_A: optional vectorized gradient, (N, dim) -> (N, dim, dim, dim)
            with entry [p, i, j, k] = (d a_jk / d x_i)(points[p]); when None,
            central finite differences with step ``fd_step`` are used.
        W: optional drift, (N, dim) -> (N, dim); None means identically 0.
        V: optional potential, (N, dim) -> (N,); None means identically 0.
        ellipticity: declared lam in (0, 1].
        lipschitz: declared eta >= 0 bounding |grad a_ij|.
        potential_bound: declared M with |V| <= M.
        drift_bound: declared K with |W| <= K.
        fd_step: step for the finite-difference gradient fallback.
        label: human-readable tag used in reports and manifests.
    """

    dim: int
    A: Callable[[Array], Array]
    grad_A: Callable[[Array], Array] | None = None
    W: Callable[[Array], Array] | None = None
    V: Callable[[Array], Array] | None = None
    ellipticity: float = 1.0
    lipschitz: float = 0.0
    potential_bound: float = 0.0
    drift_bound: float = 0.0
    fd_step: float = 1e-5
    label: str = "field"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise PreconditionError(f"dimension must be 2 or 3, got {self.dim}")
        if not (0.0 < self.ellipticity <= 1.0):
            raise PreconditionError(
                f"ellipticity must lie in (0, 1], got {self.ellipticity}"
            )
        if self.lipschitz < 0 or self.potential_bound < 0 or self.drift_bound < 0:
            raise PreconditionError("declared bounds must be nonnegative")

    @property
    def grad_mode(self) -> str:
        return "analytic" if self.grad_A is not None else "finite-difference"

    def A_at(self, pts: Array) -> Array:
        return np.asarray(self.A(np.atleast_2d(pts)), dtype=float)

    def grad_A_at(self, pts: Array, step: float | None = None) -> Array:
        """Gradient tensor [p, i, j, k] = d a_jk / d x_i at each point."""
        pts = np.atleast_2d(pts)
        if self.grad_A is not None:
            return np.asarray(self.grad_A(pts), dtype=float)
        h = step if step is not None else self.fd_step
        n, d = pts.shape
        out = np.empty((n, d, d, d))
        for i in range(d):
            shift = np.zeros(d)
            shift[i] = h
            out[:, i] = (self.A_at(pts + shift) - self.A_at(pts - shift)) / (2.0 * h)
        return out

    def W_at(self, pts: Array) -> Array:
        pts = np.atleast_2d(pts)
        if self.W is None:
            return _zeros_vector(pts)
        return np.asarray(self.W(pts), dtype=float)

    def V_at(self, pts: Array) -> Array:
        pts = np.atleast_2d(pts)
        if self.V is None:
            return _zeros_scalar(pts)
        return np.asarray(self.V(pts), dtype=float)

    def is_identity_at_origin(self, tol: float = 1e-12) -> bool:
        A0 = self.A_at(np.zeros((1, self.dim)))[0]
        return bool(np.max(np.abs(A0 - np.eye(self.dim))) <= tol)


@dataclass(frozen=True)
class MuZEvaluation:
    """mu, Z and the Jacobian of Z at one point."""

    mu: float
    Z: Array
    jac_Z: Array
    div_Z: float


def _mu_z_arrays(
    fld: CoefficientField, pts: Array, step: float | None = None
) -> tuple[Array, Array, Array, Array]:
    """Vectorized (mu, Z, jacZ, div(Ax)) at nonzero points."""
    pts = np.atleast_2d(pts)
    s = np.einsum("ni,ni->n", pts, pts)
    if np.any(s == 0.0):
        raise QuadratureDomainError("mu and Z are undefined at the origin")
    Amat = fld.A_at(pts)
    Ax = np.einsum("nij,nj->ni", Amat, pts)
    q = np.einsum("ni,ni->n", Ax, pts)
    mu = q / s
    Z = (s / q)[:, None] * Ax

    G = fld.grad_A_at(pts, step=step)
    # d_i (A x)_k = sum_j (d_i a_kj) x_j + a_ki
    dAx = np.einsum("nikj,nj->nik", G, pts) + np.swapaxes(Amat, 1, 2)
    # d_i (A x . x) = sum_lm (d_i a_lm) x_l x_m + 2 (A x)_i   (A symmetric)
    dq = np.einsum("nilm,nl,nm->ni", G, pts, pts) + 2.0 * Ax
    # Z_k = s (Ax)_k / q
    jacZ = (
        2.0 * pts[:, :, None] * Ax[:, None, :] / q[:, None, None]
        + (s / q)[:, None, None] * dAx
        - (s / q**2)[:, None, None] * Ax[:, None, :] * dq[:, :, None]
    )
    div_Ax = np.einsum("nii->n", dAx)
    return mu, Z, jacZ, div_Ax


def mu_z(fld: CoefficientField, x, step: float | None = None) -> MuZEvaluation:
    """Evaluate mu, Z, jac Z and div Z at a single nonzero point."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != fld.dim:
        raise PreconditionError(f"point must live in R^{fld.dim}")
    mu, Z, jacZ, _ = _mu_z_arrays(fld, x, step=step)
    return MuZEvaluation(
        mu=float(mu[0]),
        Z=Z[0],
        jac_Z=jacZ[0],
        div_Z=float(np.trace(jacZ[0])),
    )


def mu_values(fld: CoefficientField, pts: Array) -> Array:
    """Vectorized mu with the continuous extension mu(0) = 1 when A(0) = I."""
    pts = np.atleast_2d(pts)
    s = np.einsum("ni,ni->n", pts, pts)
    at_origin = s == 0.0
    if np.any(at_origin) and not fld.is_identity_at_origin():
        raise QuadratureDomainError(
            "mu is undefined at the origin unless A(0) = I"
        )
    Amat = fld.A_at(pts)
    q = np.einsum("nij,ni,nj->n", Amat, pts, pts)
    out = np.ones_like(s)
    np.divide(q, s, out=out, where=~at_origin)
    return out


def ball_samples(domain: BallDomain, count: int) -> Array:
    """Deterministic low-discrepancy points filling the ball.

    A Halton sequence on the bounding cube, rejected to the open ball; the
    same (domain, count) always yields the same points.
    """
    if count < 1:
        raise PreconditionError("sample count must be >= 1")
    engine = qmc.Halton(d=domain.dim, scramble=False)
    center = domain.center_array
    collected: list[Array] = []
    total = 0
    while total < count:
        raw = engine.random(2 * count)
        cube = (2.0 * raw - 1.0) * domain.radius
        keep = np.sum(cube * cube, axis=1) < domain.radius**2
        pts = center + cube[keep]
        collected.append(pts)
        total += pts.shape[0]
    return np.concatenate(collected)[:count]


def _sup_sample_points(domain: BallDomain, r: float, count: int) -> Array:
    """Low-discrepancy samples plus quadrature nodes inside B_r(center)."""
    sub = BallDomain(domain.center, r, domain.dim, domain.levels)
    rule = unit_ball_rule(domain.dim, 1.0, min(domain.levels, 4))
    nodes = rule.scaled_points(domain.center_array, r)
    return np.concatenate([ball_samples(sub, count), nodes])


@dataclass(frozen=True)
class FieldValidationReport:
    """Observed extremes of a coefficient field against its declared bounds."""

    ok: bool
    violations: tuple[str, ...]
    symmetry_defect: float
    min_eigenvalue: float
    max_eigenvalue: float
    declared_ellipticity: float
    observed_lipschitz: float
    declared_lipschitz: float
    observed_potential: float
    declared_potential_bound: float
    observed_drift: float
    declared_drift_bound: float
    grad_mode: str
    sample_count: int


def validate(
    fld: CoefficientField, domain: BallDomain, samples: int = DEFAULT_SAMPLES
) -> FieldValidationReport:
    """Check the declared (lam, eta, M, K) against sampled evaluations.

    Violations are reported, never raised, so that a deliberately broken
    field can still be inspected.
    """
    pts = _sup_sample_points(domain, domain.radius, samples)
    Amat = fld.A_at(pts)

    sym_defect = float(np.max(np.abs(Amat - np.swapaxes(Amat, 1, 2))))
    eigs = np.linalg.eigvalsh(0.5 * (Amat + np.swapaxes(Amat, 1, 2)))
    min_eig = float(eigs[:, 0].min())
    max_eig = float(eigs[:, -1].max())

    G = fld.grad_A_at(pts, step=fld.fd_step * domain.radius)
    # |grad a_jk| is the euclidean norm over the derivative index i
    grad_norms = np.sqrt(np.einsum("nijk,nijk->njk", G, G))
    obs_eta = float(grad_norms.max())

    obs_V = float(np.max(np.abs(fld.V_at(pts))))
    obs_W = float(np.max(np.linalg.norm(fld.W_at(pts), axis=1)))

    lam = fld.ellipticity
    slack = VALIDATION_SLACK
    violations = []
    if sym_defect > SYMMETRY_TOL:
        violations.append(f"A asymmetric: max defect {sym_defect:.3e}")
    if min_eig < lam * (1.0 - slack) - slack:
        violations.append(f"ellipticity violated: min eigenvalue {min_eig:.6g} < {lam}")
    if max_eig > (1.0 / lam) * (1.0 + slack) + slack:
        violations.append(f"upper bound violated: max eigenvalue {max_eig:.6g} > {1.0/lam:.6g}")
    # the finite-difference mode carries O(h^2) noise; allow a wider margin
    eta_slack = slack if fld.grad_A is not None else 1e-4 * max(1.0, obs_eta)
    if obs_eta > fld.lipschitz * (1.0 + slack) + eta_slack:
        violations.append(
            f"Lipschitz bound violated: observed {obs_eta:.6g} > declared {fld.lipschitz}"
        )
    if obs_V > fld.potential_bound * (1.0 + slack) + slack * max(1.0, obs_V):
        violations.append(
            f"potential bound violated: observed {obs_V:.6g} > declared {fld.potential_bound}"
        )
    if obs_W > fld.drift_bound * (1.0 + slack) + slack * max(1.0, obs_W):
        violations.append(
            f"drift bound violated: observed {obs_W:.6g} > declared {fld.drift_bound}"
        )

    return FieldValidationReport(
        ok=not violations,
        violations=tuple(violations),
        symmetry_defect=sym_defect,
        min_eigenvalue=min_eig,
        max_eigenvalue=max_eig,
        declared_ellipticity=lam,
        observed_lipschitz=obs_eta,
        declared_lipschitz=fld.lipschitz,
        observed_potential=obs_V,
        declared_potential_bound=fld.potential_bound,
        observed_drift=obs_W,
        declared_drift_bound=fld.drift_bound,
        grad_mode=fld.grad_mode,
        sample_count=pts.shape[0],
    )


@dataclass(frozen=True)
class StructureConstants:
    """Fitted constants of the first-order (mu, Z) deviation bounds on B_r."""

    c1: float
    c2: float
    c3: float
    r: float
    eta: float
    sample_count: int


def check_structure_constants(
    fld: CoefficientField,
    domain: BallDomain,
    r: float,
    samples: int = DEFAULT_SAMPLES,
) -> StructureConstants:
    """Smallest (c1, c2, c3) with the deviation bounds holding on samples.

        |div(A x) / mu - n|        <= c1 * eta * r
        max_ik |delta_ik - dZ_k/dx_i| <= c2 * eta * r
        |div Z - n|                <= c3 * eta * r

    Requires A(0) = I (the bounds are first-order expansions around the
    origin).  For eta = 0 all left-hand sides must vanish and the fitted
    constants are 0 by convention.
    """
    if not fld.is_identity_at_origin(tol=1e-12):
        raise PreconditionError("structure constants require A(0) = I")
    if r <= 0 or r > domain.radius * (1 + 1e-12):
        raise QuadratureDomainError(f"r must lie in (0, {domain.radius}]")

    pts = _sup_sample_points(domain, r, samples)
    norms = np.linalg.norm(pts - domain.center_array, axis=1)
    pts = pts[norms > 1e-9 * r]

    mu, _, jacZ, div_Ax = _mu_z_arrays(fld, pts, step=fld.fd_step * domain.radius)
    n = fld.dim
    lhs1 = float(np.max(np.abs(div_Ax / mu - n)))
    eye = np.eye(n)
    lhs2 = float(np.max(np.abs(eye[None, :, :] - jacZ)))
    lhs3 = float(np.max(np.abs(np.einsum("nii->n", jacZ) - n)))

    eta = fld.lipschitz
    if eta == 0.0:
        if max(lhs1, lhs2, lhs3) > 1e-8:
            raise PreconditionError(
                "declared lipschitz constant 0 but (mu, Z) deviations are "
                f"nonzero (max {max(lhs1, lhs2, lhs3):.3e})"
            )
        return StructureConstants(0.0, 0.0, 0.0, r, eta, pts.shape[0])
    scale = eta * r
    return StructureConstants(
        c1=lhs1 / scale,
        c2=lhs2 / scale,
        c3=lhs3 / scale,
        r=r,
        eta=eta,
        sample_count=pts.shape[0],
    )


@dataclass(frozen=True)
class AffineNormalization:
    """Record of the change of variables x = x0 + S y with S = A(x0)^(1/2)."""

    x0: Array
    S: Array
    S_inv: Array

    def push_points(self, y: Array) -> Array:
        """Map normalized coordinates y to original coordinates x0 + S y."""
        return self.x0 + np.atleast_2d(y) @ self.S.T


def normalize_at(
    fld: CoefficientField, x0
) -> tuple[CoefficientField, AffineNormalization]:
    """Change variables so the transformed matrix field is I at the origin.

    With S = A(x0)^(1/2) (symmetric square root), the transformed field is
    A~(y) = S^-1 A(x0 + S y) S^-1, W~(y) = S^-1 W(x0 + S y),
    V~(y) = V(x0 + S y).  Declared constants degrade to ellipticity lam^2,
    Lipschitz lam^(-1/2) eta and drift bound lam^(-1/2) K; the potential
    bound is unchanged.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != fld.dim:
        raise PreconditionError(f"x0 must live in R^{fld.dim}")
    A0 = fld.A_at(x0[None, :])[0]
    if np.max(np.abs(A0 - A0.T)) > SYMMETRY_TOL:
        raise PreconditionError(
            f"A(x0) asymmetric beyond tolerance {SYMMETRY_TOL:.1e}"
        )
    w, Q = np.linalg.eigh(0.5 * (A0 + A0.T))
    if np.any(w <= 0.0):
        raise PreconditionError(f"A(x0) is not positive definite: eigenvalues {w}")
    S = (Q * np.sqrt(w)) @ Q.T
    S_inv = (Q / np.sqrt(w)) @ Q.T
    record = AffineNormalization(x0=x0, S=S, S_inv=S_inv)

    base_A, base_grad, base_W, base_V = fld.A, fld.grad_A, fld.W, fld.V

    def A_new(y: Array) -> Array:
        return np.einsum(
            "ij,njk,kl->nil", S_inv, np.asarray(base_A(record.push_points(y)), dtype=float), S_inv
        )

    grad_new = None
    if base_grad is not None:

        def grad_new(y: Array) -> Array:  # noqa: F811 - conditional definition
            G = np.asarray(base_grad(record.push_points(y)), dtype=float)
            # chain rule: d/dy_i = sum_m S_mi d/dx_m, then conjugate by S^-1
            inner = np.einsum("jk,nmkl,li->nmji", S_inv, G, S_inv)
            return np.einsum("mi,nmjk->nijk", S, inner)

    W_new = None
    if base_W is not None:

        def W_new(y: Array) -> Array:  # noqa: F811
            return np.asarray(base_W(record.push_points(y)), dtype=float) @ S_inv.T

    V_new = None
    if base_V is not None:

        def V_new(y: Array) -> Array:  # noqa: F811
            return np.asarray(base_V(record.push_points(y)), dtype=float)

    lam = fld.ellipticity
    new_field = replace(
        fld,
        A=A_new,
        grad_A=grad_new,
        W=W_new,
        V=V_new,
        ellipticity=lam * lam,
        lipschitz=fld.lipschitz / math.sqrt(lam),
        drift_bound=fld.drift_bound / math.sqrt(lam),
        label=f"{fld.label}@({', '.join(f'{c:.4g}' for c in x0)})",
    )
    return new_field, record


# ---------------------------------------------------------------------------
# built-in field constructors


def _constant_drift(vec) -> Callable[[Array], Array]:
    v = np.asarray(vec, dtype=float)

    def W(pts: Array) -> Array:
        return np.broadcast_to(v, (pts.shape[0], v.size)).copy()

    return W


def _constant_potential(value: float) -> Callable[[Array], Array]:
    def V(pts: Array) -> Array:
        return np.full(pts.shape[0], float(value))

    return V


def identity_field(
    dim: int,
    W_const=None,
    V_const: float | None = None,
    V: Callable[[Array], Array] | None = None,
    potential_bound: float = 0.0,
    drift_bound: float = 0.0,
    label: str = "identity",
) -> CoefficientField:
    """A = I with optional constant drift / potential attached."""

    def A(pts: Array) -> Array:
        return np.broadcast_to(np.eye(dim), (pts.shape[0], dim, dim)).copy()

    def grad_A(pts: Array) -> Array:
        return np.zeros((pts.shape[0], dim, dim, dim))

    W_fn = _constant_drift(W_const) if W_const is not None else None
    if V is not None and V_const is not None:
        raise PreconditionError("pass either V or V_const, not both")
    V_fn = V if V is not None else (
        _constant_potential(V_const) if V_const is not None else None
    )
    if W_const is not None and drift_bound == 0.0:
        drift_bound = float(np.linalg.norm(np.asarray(W_const, dtype=float)))
    if V_const is not None and potential_bound == 0.0:
        potential_bound = abs(float(V_const))
    return CoefficientField(
        dim=dim,
        A=A,
        grad_A=grad_A,
        W=W_fn,
        V=V_fn,
        ellipticity=1.0,
        lipschitz=0.0,
        potential_bound=potential_bound,
        drift_bound=drift_bound,
        label=label,
    )


def diagonal_linear_field(
    dim: int,
    eta: float,
    radius: float,
    axis: int = 0,
    entry: int = 0,
    label: str | None = None,
    **kwargs,
) -> CoefficientField:
    """A = I + eta * x_axis * (e_entry tensor e_entry) on a ball of the radius.

    The n = 2 default is diag(1 + eta x1, 1).  Valid while eta * radius < 1;
    the declared ellipticity is 1 - eta * radius.
    """
    if not (0 <= eta and eta * radius < 1.0):
        raise PreconditionError(
            f"need 0 <= eta and eta * radius < 1, got eta={eta}, radius={radius}"
        )

    def A(pts: Array) -> Array:
        out = np.broadcast_to(np.eye(dim), (pts.shape[0], dim, dim)).copy()
        out[:, entry, entry] += eta * pts[:, axis]
        return out

    def grad_A(pts: Array) -> Array:
        out = np.zeros((pts.shape[0], dim, dim, dim))
        out[:, axis, entry, entry] = eta
        return out

    return CoefficientField(
        dim=dim,
        A=A,
        grad_A=grad_A,
        ellipticity=1.0 - eta * radius,
        lipschitz=eta,
        label=label or f"diagonal-linear(eta={eta})",
        **kwargs,
    )


def rotation_perturbation_field(
    dim: int,
    eta: float,
    radius: float,
    label: str | None = None,
    **kwargs,
) -> CoefficientField:
    """A = I + eta * x1 * (e1 tensor e2 + e2 tensor e1): off-diagonal coupling.

    Eigenvalues are 1 +- eta |x1|, so the declared ellipticity is
    1 - eta * radius (valid while eta * radius < 1).
    """
    if not (0 <= eta and eta * radius < 1.0):
        raise PreconditionError(
            f"need 0 <= eta and eta * radius < 1, got eta={eta}, radius={radius}"
        )

    def A(pts: Array) -> Array:
        out = np.broadcast_to(np.eye(dim), (pts.shape[0], dim, dim)).copy()
        out[:, 0, 1] += eta * pts[:, 0]
        out[:, 1, 0] += eta * pts[:, 0]
        return out

    def grad_A(pts: Array) -> Array:
        out = np.zeros((pts.shape[0], dim, dim, dim))
        out[:, 0, 0, 1] = eta
        out[:, 0, 1, 0] = eta
        return out

    return CoefficientField(
        dim=dim,
        A=A,
        grad_A=grad_A,
        ellipticity=1.0 - eta * radius,
        lipschitz=eta,
        label=label or f"rotation-perturbation(eta={eta})",
        **kwargs,
    )
