"""Solution families and the finite-difference Dirichlet solver."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqlab import EvaluationError, PreconditionError, centered_ball
from freqlab.fields import (
    identity_field,
    normalize_at,
    rotation_perturbation_field,
)
from freqlab.solutions import (
    drift_solution,
    exponential_solution,
    from_callables,
    harmonic_polynomial,
    load_solved_grid,
    oscillatory_solution,
    pde_residual,
    perturbed_exponential_solution,
    pullback,
    save_solved_grid,
    solve_dirichlet,
)

RNG = np.random.default_rng(20240814)


def _all_exact_families():
    return [
        harmonic_polynomial(2, 0),
        harmonic_polynomial(2, 1, "re"),
        harmonic_polynomial(2, 3, "re"),
        harmonic_polynomial(2, 5, "im"),
        harmonic_polynomial(3, 1),
        harmonic_polynomial(3, 2),
        harmonic_polynomial(3, 3),
        exponential_solution(2, 1.0),
        exponential_solution(3, 4.0),
        oscillatory_solution(2, math.pi**2),
        drift_solution(2, 2.0),
        drift_solution(3, 1.0),
        perturbed_exponential_solution(2, 0.1, 1.0),
    ]


class TestExactFamilies:
    def test_residual_at_ten_thousand_points(self):
        for sol in _all_exact_families():
            pts = RNG.uniform(-0.7, 0.7, (10_000, sol.dim))
            res = np.max(np.abs(pde_residual(sol, pts)))
            assert res <= 1e-10, f"{sol.label}: residual {res}"

    def test_harmonic_degree_zero(self):
        sol = harmonic_polynomial(2, 0)
        pts = RNG.uniform(-1, 1, (10, 2))
        assert np.allclose(sol.u_at(pts), 1.0)
        assert np.allclose(sol.grad_at(pts), 0.0)

    def test_harmonic_degree_one(self):
        sol = harmonic_polynomial(2, 1, "re")
        pts = RNG.uniform(-1, 1, (10, 2))
        assert np.allclose(sol.u_at(pts), pts[:, 0])
        assert np.allclose(sol.grad_at(pts), [1.0, 0.0])

    def test_harmonic_degree_three_expansion(self):
        # Re (x1 + i x2)^3 = x1^3 - 3 x1 x2^2
        sol = harmonic_polynomial(2, 3, "re")
        pts = RNG.uniform(-1, 1, (50, 2))
        x, y = pts[:, 0], pts[:, 1]
        assert np.allclose(sol.u_at(pts), x**3 - 3 * x * y**2, atol=1e-14)

    @given(
        d=st.integers(0, 6),
        t=st.floats(0.2, 2.0),
        seed=st.integers(0, 1000),
    )
    @settings(max_examples=25, deadline=None)
    def test_harmonic_homogeneity(self, d, t, seed):
        sol = harmonic_polynomial(2, d, "im" if seed % 2 else "re")
        rng = np.random.default_rng(seed)
        x = rng.uniform(-0.5, 0.5, (5, 2))
        assert np.allclose(sol.u_at(t * x), t**d * sol.u_at(x), rtol=1e-12, atol=1e-12)

    def test_exponential_values(self):
        sol = exponential_solution(2, 4.0)
        assert sol.u_at(np.zeros((1, 2)))[0] == pytest.approx(1.0)
        assert sol.grad_at(np.zeros((1, 2)))[0, 0] == pytest.approx(2.0)
        # sqrt(4) * 0.5 = 1
        assert sol.u_at(np.array([[0.5, 0.0]]))[0] == pytest.approx(math.e, rel=1e-15)

    def test_oscillatory_values(self):
        sol = oscillatory_solution(2, math.pi**2)
        assert sol.u_at(np.zeros((1, 2)))[0] == 0.0
        assert sol.u_at(np.array([[0.5, 0.0]]))[0] == pytest.approx(1.0, rel=1e-15)
        assert sol.grad_at(np.zeros((1, 2)))[0, 0] == pytest.approx(math.pi, rel=1e-15)
        assert sol.equation.V_at(np.zeros((1, 2)))[0] == pytest.approx(-math.pi**2)

    def test_drift_values(self):
        sol = drift_solution(2, 2.0)
        assert sol.u_at(np.zeros((1, 2)))[0] == pytest.approx(1.0)
        assert sol.u_at(np.array([[0.25, 0.0]]))[0] == pytest.approx(
            1.6487212707001282, rel=1e-15
        )
        W = sol.equation.W_at(np.zeros((1, 2)))[0]
        assert np.allclose(W, [2.0, 0.0])

    def test_parameter_guards(self):
        with pytest.raises(PreconditionError):
            exponential_solution(2, 0.0)
        with pytest.raises(PreconditionError):
            oscillatory_solution(2, -1.0)
        with pytest.raises(PreconditionError):
            drift_solution(2, 0.0)
        with pytest.raises(PreconditionError):
            harmonic_polynomial(2, -1)
        with pytest.raises(PreconditionError):
            harmonic_polynomial(3, 4)

    def test_gradients_match_finite_differences(self):
        h = 1e-6
        for sol in _all_exact_families():
            x = RNG.uniform(-0.5, 0.5, (20, sol.dim))
            fd = np.zeros_like(x)
            for i in range(sol.dim):
                dx = np.zeros(sol.dim)
                dx[i] = h
                fd[:, i] = (sol.u_at(x + dx) - sol.u_at(x - dx)) / (2 * h)
            scale = 1.0 + np.max(np.abs(sol.grad_at(x)))
            assert np.max(np.abs(fd - sol.grad_at(x))) / scale < 1e-8, sol.label

    def test_perturbed_pair_potential(self):
        sol = perturbed_exponential_solution(2, 0.2, 1.0)
        eq = sol.equation
        # V = 1 + eta (1 + x1)
        pts = np.array([[0.0, 0.0], [0.5, -0.3]])
        assert np.allclose(eq.V_at(pts), [1.2, 1.3])
        assert eq.potential_bound == pytest.approx(1.4)

    def test_raw_field_has_no_equation(self):
        sol = from_callables(
            2,
            u=lambda p: np.sum(p * p, axis=1),
            grad_u=lambda p: 2.0 * p,
            divAgrad_u=lambda p: np.full(p.shape[0], 4.0),
        )
        assert sol.equation is None
        with pytest.raises(PreconditionError):
            pde_residual(sol, np.ones((1, 2)))


class TestPullback:
    def test_solves_transformed_equation(self):
        base = perturbed_exponential_solution(2, 0.1, 1.0)
        new_field, rec = normalize_at(base.equation, [0.3, 0.1])
        moved = pullback(base, rec, equation=new_field)
        y = RNG.uniform(-0.3, 0.3, (200, 2))
        assert np.max(np.abs(pde_residual(moved, y))) < 1e-10

    def test_values_and_gradient_chain_rule(self):
        base = exponential_solution(2, 1.0)
        _, rec = normalize_at(base.equation, [0.5, 0.0])
        moved = pullback(base, rec)
        y = np.array([[0.2, -0.1]])
        x = rec.push_points(y)
        assert moved.u_at(y)[0] == pytest.approx(base.u_at(x)[0], rel=1e-14)
        expected = base.grad_at(x) @ rec.S.T
        assert np.allclose(moved.grad_at(y), expected)


@pytest.fixture(scope="module")
def disk():
    return centered_ball(1.0, 2, levels=3)


class TestDirichletSolver:
    def test_linear_datum_reproduced(self, disk):
        sol = solve_dirichlet(identity_field(2), disk, lambda p: p[:, 0], h=1 / 32)
        pts = RNG.uniform(-0.6, 0.6, (300, 2))
        assert np.max(np.abs(sol.u_at(pts) - pts[:, 0])) < 1e-10
        assert np.max(np.abs(sol.grad_at(pts) - np.array([1.0, 0.0]))) < 1e-9
        assert sol.provenance == "solved"

    def test_zero_datum_zero_solution(self, disk):
        sol = solve_dirichlet(
            identity_field(2), disk, lambda p: np.zeros(p.shape[0]), h=1 / 16
        )
        pts = RNG.uniform(-0.5, 0.5, (100, 2))
        assert np.max(np.abs(sol.u_at(pts))) == 0.0

    def test_second_order_against_exponential(self, disk):
        exact = exponential_solution(2, 1.0)
        fld = identity_field(2, V_const=1.0)
        pts = RNG.uniform(-0.6, 0.6, (400, 2))
        errs = []
        for m in (16, 32, 64):
            s = solve_dirichlet(fld, disk, lambda p: np.exp(p[:, 0]), h=1.0 / m)
            errs.append(float(np.max(np.abs(s.u_at(pts) - exact.u_at(pts)))))
        orders = [math.log(errs[i] / errs[i + 1]) / math.log(2) for i in range(2)]
        assert min(orders) >= 1.8, (errs, orders)

    def test_second_order_with_variable_coefficients(self, disk):
        exact = perturbed_exponential_solution(2, 0.1, 1.0)
        pts = RNG.uniform(-0.6, 0.6, (400, 2))
        errs = []
        for m in (16, 32, 64):
            s = solve_dirichlet(
                exact.equation, disk, lambda p: np.exp(p[:, 0]), h=1.0 / m
            )
            errs.append(float(np.max(np.abs(s.u_at(pts) - exact.u_at(pts)))))
        orders = [math.log(errs[i] / errs[i + 1]) / math.log(2) for i in range(2)]
        assert min(orders) >= 1.8, (errs, orders)

    def test_cross_terms_converge(self, disk):
        # no closed form; use Richardson as the error proxy and check decay
        fld = rotation_perturbation_field(2, eta=0.2, radius=1.0)
        g = lambda p: np.exp(p[:, 0])
        s1 = solve_dirichlet(fld, disk, g, h=1 / 16, error_estimate=True)
        s2 = solve_dirichlet(fld, disk, g, h=1 / 32, error_estimate=True)
        assert s2.residual_bound < s1.residual_bound / 2.5

    def test_three_dimensional_linear_datum(self):
        dom = centered_ball(1.0, 3, levels=2)
        sol = solve_dirichlet(identity_field(3), dom, lambda p: p[:, 2], h=1 / 10)
        pts = RNG.uniform(-0.4, 0.4, (100, 3))
        assert np.max(np.abs(sol.u_at(pts) - pts[:, 2])) < 1e-10

    def test_drift_term_second_order(self, disk):
        exact = drift_solution(2, 1.5)
        pts = RNG.uniform(-0.5, 0.5, (200, 2))
        errs = []
        for m in (16, 32):
            s = solve_dirichlet(
                exact.equation, disk, lambda p: np.exp(1.5 * p[:, 0]), h=1.0 / m
            )
            errs.append(float(np.max(np.abs(s.u_at(pts) - exact.u_at(pts)))))
        assert errs[1] < errs[0] / 2.5

    def test_evaluation_restricted_near_boundary(self, disk):
        sol = solve_dirichlet(identity_field(2), disk, lambda p: p[:, 0], h=1 / 16)
        assert sol.eval_radius == pytest.approx(1.0 - 2 / 16)
        with pytest.raises(EvaluationError):
            sol.u_at(np.array([[0.95, 0.0]]))

    def test_bad_mesh_rejected(self, disk):
        with pytest.raises(PreconditionError):
            solve_dirichlet(identity_field(2), disk, lambda p: p[:, 0], h=0.3)

    def test_richardson_bound_recorded(self, disk):
        fld = identity_field(2, V_const=1.0)
        s = solve_dirichlet(
            fld, disk, lambda p: np.exp(p[:, 0]), h=1 / 32, error_estimate=True
        )
        exact = exponential_solution(2, 1.0)
        pts = RNG.uniform(-0.5, 0.5, (200, 2))
        true_err = np.max(np.abs(s.u_at(pts) - exact.u_at(pts)))
        # the Richardson estimate should be the right order of magnitude
        assert s.residual_bound == pytest.approx(true_err, rel=3.0)
        assert s.residual_bound > 0

    def test_save_load_roundtrip(self, disk, tmp_path):
        fld = identity_field(2, V_const=1.0)
        s = solve_dirichlet(fld, disk, lambda p: np.exp(p[:, 0]), h=1 / 16)
        path = tmp_path / "grid.csv"
        save_solved_grid(s, str(path))
        loaded = load_solved_grid(str(path), fld, disk)
        pts = RNG.uniform(-0.5, 0.5, (100, 2))
        assert np.allclose(loaded.u_at(pts), s.u_at(pts), atol=1e-15)
        assert np.allclose(loaded.grad_at(pts), s.grad_at(pts), atol=1e-15)
