"""Coefficient fields: mu/Z identities, validation, structure constants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqlab import PreconditionError, QuadratureDomainError, centered_ball
from freqlab.fields import (
    AffineNormalization,
    CoefficientField,
    ball_samples,
    check_structure_constants,
    diagonal_linear_field,
    identity_field,
    mu_values,
    mu_z,
    normalize_at,
    rotation_perturbation_field,
    validate,
)


@pytest.fixture(scope="module")
def disk():
    return centered_ball(1.0, 2, levels=3)


def _point_strategy(dim):
    coord = st.floats(-0.7, 0.7)
    return st.lists(coord, min_size=dim, max_size=dim).filter(
        lambda p: sum(c * c for c in p) > 1e-4
    )


class TestMuZ:
    def test_identity_case(self):
        fld = identity_field(2)
        ev = mu_z(fld, [0.3, -0.4])
        assert ev.mu == pytest.approx(1.0)
        assert np.allclose(ev.Z, [0.3, -0.4])
        assert np.allclose(ev.jac_Z, np.eye(2))
        assert ev.div_Z == pytest.approx(2.0)

    def test_identity_case_3d(self):
        fld = identity_field(3)
        ev = mu_z(fld, [0.1, 0.2, -0.3])
        assert np.allclose(ev.jac_Z, np.eye(3))
        assert ev.div_Z == pytest.approx(3.0)

    def test_diagonal_linear_on_axis(self):
        # A = diag(1 + eta x1, 1) at x = (t, 0): mu = 1 + eta t, Z = x
        fld = diagonal_linear_field(2, eta=0.1, radius=1.0)
        t = 0.37
        ev = mu_z(fld, [t, 0.0])
        assert ev.mu == pytest.approx(1.0 + 0.1 * t, rel=1e-14)
        assert np.allclose(ev.Z, [t, 0.0], atol=1e-15)

    def test_origin_rejected(self):
        with pytest.raises(QuadratureDomainError):
            mu_z(identity_field(2), [0.0, 0.0])

    def test_mu_even_symmetry_for_even_A(self):
        # A depends on x1^2 only, so mu(-x) = mu(x)
        def A(pts):
            out = np.broadcast_to(np.eye(2), (pts.shape[0], 2, 2)).copy()
            out[:, 0, 0] += 0.2 * pts[:, 0] ** 2
            return out

        fld = CoefficientField(dim=2, A=A, ellipticity=0.8)
        x = np.array([0.4, -0.3])
        assert mu_z(fld, x).mu == pytest.approx(mu_z(fld, -x).mu, rel=1e-14)

    @given(p=_point_strategy(2), eta=st.sampled_from([0.05, 0.1, 0.2]))
    @settings(max_examples=25, deadline=None)
    def test_Z_dot_x_is_x_squared(self, p, eta):
        fld = rotation_perturbation_field(2, eta=eta, radius=1.0)
        x = np.asarray(p)
        ev = mu_z(fld, x)
        assert float(ev.Z @ x) == pytest.approx(float(x @ x), rel=1e-12)

    @given(p=_point_strategy(2))
    @settings(max_examples=10, deadline=None)
    def test_jacobian_matches_finite_differences(self, p):
        fld = diagonal_linear_field(2, eta=0.15, radius=1.0)
        x = np.asarray(p)
        h = 1e-6
        J = np.zeros((2, 2))
        for i in range(2):
            dx = np.zeros(2)
            dx[i] = h
            J[i] = (mu_z(fld, x + dx).Z - mu_z(fld, x - dx).Z) / (2.0 * h)
        assert np.max(np.abs(J - mu_z(fld, x).jac_Z)) < 1e-8

    @given(p=_point_strategy(2), eta=st.sampled_from([0.0, 0.1, 0.3]))
    @settings(max_examples=20, deadline=None)
    def test_mu_within_ellipticity_band(self, p, eta):
        fld = diagonal_linear_field(2, eta=eta, radius=1.0)
        ev = mu_z(fld, np.asarray(p))
        lam = fld.ellipticity
        assert lam * (1 - 1e-12) <= ev.mu <= (1 / lam) * (1 + 1e-12)

    def test_mu_values_origin_extension(self):
        fld = diagonal_linear_field(2, eta=0.1, radius=1.0)
        vals = mu_values(fld, np.array([[0.0, 0.0], [0.5, 0.0]]))
        assert vals[0] == pytest.approx(1.0)
        assert vals[1] == pytest.approx(1.05)

    def test_mu_values_origin_needs_identity(self):
        def A(pts):
            out = np.broadcast_to(np.diag([4.0, 1.0]), (pts.shape[0], 2, 2)).copy()
            return out

        fld = CoefficientField(dim=2, A=A, ellipticity=0.25)
        with pytest.raises(QuadratureDomainError):
            mu_values(fld, np.zeros((1, 2)))


class TestValidate:
    def test_identity_all_clean(self, disk):
        rep = validate(identity_field(2), disk, samples=256)
        assert rep.ok
        assert rep.observed_lipschitz == 0.0
        assert rep.observed_potential == 0.0
        assert rep.observed_drift == 0.0
        assert rep.min_eigenvalue == pytest.approx(1.0)

    def test_diagonal_linear_margins(self, disk):
        rep = validate(diagonal_linear_field(2, eta=0.1, radius=1.0), disk, samples=512)
        assert rep.ok
        assert rep.min_eigenvalue >= 0.9 - 1e-9
        assert rep.observed_lipschitz == pytest.approx(0.1, rel=1e-12)

    def test_asymmetric_field_flagged(self, disk):
        def A(pts):
            out = np.broadcast_to(np.eye(2), (pts.shape[0], 2, 2)).copy()
            out[:, 0, 1] += 0.3
            return out

        rep = validate(CoefficientField(dim=2, A=A), disk, samples=64)
        assert not rep.ok
        assert any("asymmetric" in v for v in rep.violations)

    def test_understated_lipschitz_flagged(self, disk):
        fld = diagonal_linear_field(2, eta=0.2, radius=1.0)
        # redeclare a lipschitz constant that is too small
        understated = CoefficientField(
            dim=2, A=fld.A, grad_A=fld.grad_A, ellipticity=fld.ellipticity,
            lipschitz=0.05,
        )
        rep = validate(understated, disk, samples=128)
        assert not rep.ok
        assert any("Lipschitz" in v for v in rep.violations)

    def test_finite_difference_mode_recorded(self, disk):
        fld = CoefficientField(dim=2, A=identity_field(2).A)
        rep = validate(fld, disk, samples=64)
        assert rep.grad_mode == "finite-difference"
        assert rep.ok

    def test_drift_and_potential_observed(self, disk):
        fld = identity_field(2, W_const=[3.0, 4.0], V_const=-2.0)
        rep = validate(fld, disk, samples=64)
        assert rep.ok
        assert rep.observed_drift == pytest.approx(5.0)
        assert rep.observed_potential == pytest.approx(2.0)


class TestStructureConstants:
    def test_identity_gives_zeros(self, disk):
        sc = check_structure_constants(identity_field(2), disk, r=0.8, samples=128)
        assert (sc.c1, sc.c2, sc.c3) == (0.0, 0.0, 0.0)

    def test_requires_identity_at_origin(self, disk):
        def A(pts):
            return np.broadcast_to(np.diag([2.0, 1.0]), (pts.shape[0], 2, 2)).copy()

        with pytest.raises(PreconditionError):
            check_structure_constants(
                CoefficientField(dim=2, A=A, ellipticity=0.5), disk, r=0.5
            )

    def test_stable_across_eta(self, disk):
        # first-order bounds: fitted constants nearly independent of eta
        cs = []
        for eta in (0.05, 0.1, 0.2):
            fld = diagonal_linear_field(2, eta=eta, radius=1.0)
            sc = check_structure_constants(fld, disk, r=0.8, samples=1024)
            cs.append((sc.c1, sc.c2, sc.c3))
        arr = np.asarray(cs)
        ratios = arr.max(axis=0) / arr.min(axis=0)
        assert np.all(ratios < 1.2)

    def test_sup_scales_with_radius(self, disk):
        fld = diagonal_linear_field(2, eta=0.1, radius=1.0)
        big = check_structure_constants(fld, disk, r=0.8, samples=1024)
        small = check_structure_constants(fld, disk, r=0.4, samples=1024)
        # observed sup = c * eta * r; halving r at most halves it (up to h.o.t.)
        for cb, cs_ in ((big.c1, small.c1), (big.c2, small.c2), (big.c3, small.c3)):
            assert cs_ * small.eta * small.r <= cb * big.eta * big.r * 0.55

    def test_converges_under_sampling_refinement(self, disk):
        fld = rotation_perturbation_field(2, eta=0.1, radius=1.0)
        coarse = check_structure_constants(fld, disk, r=0.8, samples=1024)
        fine = check_structure_constants(fld, disk, r=0.8, samples=8192)
        # nested low-discrepancy samples: the sup estimate grows toward its
        # limit, and the remaining change is small
        assert fine.c3 >= coarse.c3 - 1e-12
        assert fine.c3 <= coarse.c3 * 1.05


class TestNormalizeAt:
    def test_constant_diagonal(self):
        def A(pts):
            return np.broadcast_to(np.diag([4.0, 1.0]), (pts.shape[0], 2, 2)).copy()

        fld = CoefficientField(dim=2, A=A, ellipticity=0.25)
        new, rec = normalize_at(fld, [0.0, 0.0])
        assert np.allclose(rec.S, np.diag([2.0, 1.0]))
        assert np.allclose(new.A_at(np.zeros((1, 2)))[0], np.eye(2))
        assert new.ellipticity == pytest.approx(0.0625)

    def test_identity_unchanged(self):
        fld = identity_field(2)
        new, rec = normalize_at(fld, [0.0, 0.0])
        assert np.allclose(rec.S, np.eye(2))
        assert np.allclose(new.A_at(np.array([[0.3, 0.1]]))[0], np.eye(2))

    @given(
        seed=st.integers(0, 10_000),
        x0=st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=2),
    )
    @settings(max_examples=20, deadline=None)
    def test_random_spd_identity_at_origin(self, seed, x0):
        rng = np.random.default_rng(seed)
        B = rng.standard_normal((2, 2))
        M = B @ B.T + 0.5 * np.eye(2)

        def A(pts):
            return np.broadcast_to(M, (pts.shape[0], 2, 2)).copy()

        fld = CoefficientField(dim=2, A=A, ellipticity=1e-6)
        new, _ = normalize_at(fld, x0)
        A0 = new.A_at(np.zeros((1, 2)))[0]
        assert np.max(np.abs(A0 - np.eye(2))) < 1e-12
        # symmetry inherited at samples
        pts = rng.uniform(-0.5, 0.5, (8, 2))
        An = new.A_at(pts)
        assert np.max(np.abs(An - np.swapaxes(An, 1, 2))) < 1e-12

    def test_gradient_transform_matches_finite_differences(self):
        fld = diagonal_linear_field(2, eta=0.1, radius=1.0)
        new, _ = normalize_at(fld, [0.5, 0.2])
        y = np.array([[0.1, -0.2]])
        G_analytic = new.grad_A_at(y)
        fd_only = CoefficientField(dim=2, A=new.A, ellipticity=new.ellipticity)
        G_fd = fd_only.grad_A_at(y, step=1e-6)
        assert np.max(np.abs(G_analytic - G_fd)) < 1e-8

    def test_constant_degradation(self):
        fld = diagonal_linear_field(
            2, eta=0.1, radius=1.0, drift_bound=2.0, potential_bound=3.0
        )
        lam = fld.ellipticity
        new, _ = normalize_at(fld, [0.5, 0.0])
        assert new.ellipticity == pytest.approx(lam * lam)
        assert new.lipschitz == pytest.approx(0.1 / math.sqrt(lam))
        assert new.drift_bound == pytest.approx(2.0 / math.sqrt(lam))
        assert new.potential_bound == pytest.approx(3.0)

    def test_not_spd_rejected(self):
        def A(pts):
            return np.broadcast_to(np.diag([-1.0, 1.0]), (pts.shape[0], 2, 2)).copy()

        with pytest.raises(PreconditionError):
            normalize_at(CoefficientField(dim=2, A=A), [0.0, 0.0])

    def test_push_points_roundtrip(self):
        rec = AffineNormalization(
            x0=np.array([1.0, -1.0]),
            S=np.diag([2.0, 1.0]),
            S_inv=np.diag([0.5, 1.0]),
        )
        y = np.array([[0.5, 0.25]])
        assert np.allclose(rec.push_points(y), [[2.0, -0.75]])


class TestBallSamples:
    def test_deterministic_and_inside(self, disk):
        s1 = ball_samples(disk, 200)
        s2 = ball_samples(disk, 200)
        assert np.array_equal(s1, s2)
        assert s1.shape == (200, 2)
        assert np.all(np.linalg.norm(s1, axis=1) < 1.0)

    def test_respects_center(self):
        dom = centered_ball(0.5, 2, levels=2)
        shifted = type(dom)(center=(2.0, 3.0), radius=0.5, dim=2, levels=2)
        pts = ball_samples(shifted, 100)
        assert np.all(np.linalg.norm(pts - np.array([2.0, 3.0]), axis=1) < 0.5)
