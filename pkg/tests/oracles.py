"""Independent oracles used to freeze expected values in the test suite.

Nothing in here imports freqlab.  The closed forms come from one change of
variables done by hand (polar/spherical coordinates plus s = rho^2), and the
brute-force integrator is a plain midpoint rule on a Cartesian grid clipped
to the ball, so agreement between the two is meaningful evidence that the
frozen constants are right before the real quadrature is ever involved.

Closed forms used below (B is the Euler Beta function):

  n = 2:  integral over B_r of |x|^(2k) (r^2-|x|^2)^a dx
              = pi * r^(2k+2a+2) * B(k+1, a+1)
  n = 3:  integral over B_r of |x|^(2k) (r^2-|x|^2)^a dx
              = 2*pi * r^(2k+2a+3) * B(k+3/2, a+1)

and for the x1-moment in n = 2 (u = x1 anchors):

  integral over B_r of x1^2 (r^2-|x|^2)^a dx
              = (pi/2) * r^(2a+4) * B(2, a+1).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import beta as beta_fn


def ball_radial_moment(n: int, k: float, a: float, r: float = 1.0) -> float:
    """Closed form of the integral of |x|^(2k) * (r^2-|x|^2)^a over B_r."""
    if n == 2:
        return math.pi * r ** (2 * k + 2 * a + 2) * beta_fn(k + 1, a + 1)
    if n == 3:
        return 2 * math.pi * r ** (2 * k + 2 * a + 3) * beta_fn(k + 1.5, a + 1)
    raise ValueError(f"unsupported dimension {n}")


def ball_x1sq_moment_2d(a: float, r: float = 1.0) -> float:
    """Closed form of the integral of x1^2 * (r^2-|x|^2)^a over B_r in n = 2."""
    return 0.5 * math.pi * r ** (2 * a + 4) * beta_fn(2.0, a + 1)


def brute_force_ball_integral(f, n: int, r: float, cells_per_axis: int = 400) -> float:
    """Midpoint-rule integral of f over the ball B_r in R^n.

    Deliberately naive: uniform Cartesian cells, keep midpoints inside the
    ball.  First-order accurate at the boundary, which is plenty to confirm
    3-4 digits of the closed forms.
    """
    h = 2.0 * r / cells_per_axis
    edges = np.linspace(-r + h / 2, r - h / 2, cells_per_axis)
    grids = np.meshgrid(*([edges] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    inside = np.sum(pts**2, axis=1) < r * r
    return float(np.sum(f(pts[inside])) * h**n)


def checked_anchor_values() -> dict[str, float]:
    """Every frozen constant in the suite, cross-checked here.

    Each closed-form value is compared against the brute-force integrator;
    a failed cross-check raises, so importing this module in tests cannot
    silently hand out a wrong constant.
    """
    anchors = {
        # integrate_weighted anchors: f == 1, n = 2, r = 1
        "w_alpha1": ball_radial_moment(2, 0.0, 1.0),  # pi/2
        "w_alpha2": ball_radial_moment(2, 0.0, 2.0),  # pi/3
        # frequency anchors for u = x1, n = 2, alpha = 2, r = 1
        "H_x1": ball_x1sq_moment_2d(1.0),  # weight exponent alpha-1 = 1 -> pi/12
        "D_x1": ball_radial_moment(2, 0.0, 2.0),  # |grad u|^2 = 1 -> pi/3
        # u == 1 bundle anchor (weight exponent alpha-1 = 1)
        "H_const": ball_radial_moment(2, 0.0, 1.0),  # pi/2
        # unweighted h(r=1) of u == 1 (ball area) and of u = Re(z^3)
        "h_const": ball_radial_moment(2, 0.0, 0.0),  # pi
        "h_z3": math.pi / 8.0,  # degree-3 harmonic: pi/(2d+2) at r = 1
        # n = 3 weighted volume, alpha = 2
        "w3_alpha2": ball_radial_moment(3, 0.0, 2.0),  # 32*pi/105
    }

    expected_exact = {
        "w_alpha1": math.pi / 2,
        "w_alpha2": math.pi / 3,
        "H_x1": math.pi / 12,
        "D_x1": math.pi / 3,
        "H_const": math.pi / 2,
        "h_const": math.pi,
        "w3_alpha2": 32 * math.pi / 105,
    }
    for name, want in expected_exact.items():
        if not math.isclose(anchors[name], want, rel_tol=1e-12):
            raise AssertionError(f"oracle self-check failed for {name}")

    brute = {
        "w_alpha1": brute_force_ball_integral(
            lambda p: (1 - np.sum(p**2, axis=1)) ** 1, 2, 1.0
        ),
        "w_alpha2": brute_force_ball_integral(
            lambda p: (1 - np.sum(p**2, axis=1)) ** 2, 2, 1.0
        ),
        "H_x1": brute_force_ball_integral(
            lambda p: p[:, 0] ** 2 * (1 - np.sum(p**2, axis=1)), 2, 1.0
        ),
        "h_z3": brute_force_ball_integral(
            lambda p: (p[:, 0] ** 3 - 3 * p[:, 0] * p[:, 1] ** 2) ** 2, 2, 1.0
        ),
        "w3_alpha2": brute_force_ball_integral(
            lambda p: (1 - np.sum(p**2, axis=1)) ** 2, 3, 1.0, cells_per_axis=150
        ),
    }
    for name, approx in brute.items():
        if not math.isclose(anchors[name], approx, rel_tol=2e-3):
            raise AssertionError(
                f"brute-force cross-check failed for {name}: "
                f"closed form {anchors[name]!r} vs midpoint {approx!r}"
            )

    return anchors


def small_r_slope(f, n: int, r_lo: float = 0.01, r_hi: float = 0.02) -> float:
    """Brute-force log-log slope of h(r) = integral of f over B_r as r -> 0.

    Used once to freeze the vanishing-order expectation for the oscillatory
    family before the real implementation existed.
    """
    h_lo = brute_force_ball_integral(f, n, r_lo, cells_per_axis=600)
    h_hi = brute_force_ball_integral(f, n, r_hi, cells_per_axis=600)
    return math.log(h_hi / h_lo) / math.log(r_hi / r_lo)


if __name__ == "__main__":
    vals = checked_anchor_values()
    for key, val in sorted(vals.items()):
        print(f"{key:12s} = {val:.15g}")
    slope = small_r_slope(lambda p: np.sin(p[:, 0]) ** 2, 2)
    print(f"oscillatory small-r slope (n=2, M=1): {slope:.4f}  (expect ~4)")
