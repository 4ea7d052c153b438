"""Symbolic derivation of the degree-6 forward-projection polynomial.

Regenerates the closed-form coefficients embedded in
``domecal.projection._thin_poly_coefficients`` and cross-checks them
numerically against a direct geometric ray trace.  Run from the repo root:

    python scripts/derive_projection_polynomial.py

See docs/thin_dome_projection.md for the prose derivation.
"""

from __future__ import annotations

import math
import random

import sympy as sp


def derive() -> list[sp.Expr]:
    """Return polynomial coefficients [c0..c6] for c6*y^6 + ... + c0 = 0."""
    y, ux, uy, d, r, m1, m2 = sp.symbols("y u_x u_y d r mu1 mu2", real=True)

    # Working in the plane of the camera offset and the target point:
    # camera at (0, d), target at (ux, uy), refraction point (x, y) on the
    # circle x^2 + y^2 = r^2, inward normal -(x, y)/r.
    #
    # Collinearity of (target - refraction point) with the refracted ray,
    # after substituting the vector refraction formula, isolating the
    # square root and squaring, reduces to EVEN(y) + x*ODD(y) = 0 with
    # x^2 = r^2 - y^2.  Squaring once more gives the final polynomial.
    P = r**2 - uy * y
    Q = m1**2 * (r**2 - d * y) ** 2 - (m1**2 - m2**2) * r**2 * (r**2 - 2 * d * y + d**2)
    x2 = r**2 - y**2

    even = m1**2 * d**2 * (x2 * P**2 + ux**2 * x2**2) - Q * (uy**2 * x2 + ux**2 * y**2)
    odd = 2 * ux * (Q * uy * y - m1**2 * d**2 * P * x2)

    final = sp.expand(even**2 - x2 * odd**2)
    poly = sp.Poly(final, y)
    assert poly.degree() == 6, poly.degree()
    coeffs = [sp.factor(poly.coeff_monomial(y**k)) for k in range(7)]
    return coeffs


def _trace_residual(ux, uy, d, r, m1, m2, yv):
    """Geometric residual: does the refracted ray at (x, y) hit the target?"""
    x = math.sqrt(max(r * r - yv * yv, 0.0))
    lx, ly = x - 0.0, yv - d
    norm = math.hypot(lx, ly)
    lx, ly = lx / norm, ly / norm
    nx, ny = -x / r, -yv / r
    eta = m1 / m2
    c1 = -(lx * nx + ly * ny)
    disc = 1.0 - eta * eta * (1.0 - c1 * c1)
    if disc < 0:
        return float("inf")
    c2 = math.sqrt(disc)
    tx = eta * lx + (eta * c1 - c2) * nx
    ty = eta * ly + (eta * c1 - c2) * ny
    return (ux - x) * ty - (uy - yv) * tx


def check_numeric(coeffs, n_trials: int = 200, seed: int = 7) -> None:
    y = sp.Symbol("y")
    syms = sp.symbols("u_x u_y d r mu1 mu2")
    funcs = [sp.lambdify(syms, c, "math") for c in coeffs]
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(n_trials):
        r = rng.uniform(0.03, 0.1)
        d = rng.uniform(1e-4, 0.8 * r)
        m1, m2 = 1.0, rng.uniform(1.2, 1.5)
        # Target point well outside the dome.
        rad = rng.uniform(3 * r, 30 * r)
        ang = rng.uniform(-1.2, 1.2)
        ux, uy = rad * math.sin(abs(ang)) + 1e-6, rad * math.cos(ang)
        cs = [f(ux, uy, d, r, m1, m2) for f in funcs]
        roots = sp.Poly(list(reversed(cs)), y).nroots(n=30)
        best = float("inf")
        for rt in roots:
            if abs(sp.im(rt)) > 1e-12:
                continue
            yv = float(sp.re(rt))
            if abs(yv) > r:
                continue
            res = abs(_trace_residual(ux, uy, d, r, m1, m2, yv))
            best = min(best, res)
        assert best < 1e-9, (best, ux, uy, d, r, m2)
        worst = max(worst, best)
    print(f"numeric check OK over {n_trials} trials, worst residual {worst:.3e}")


def main() -> None:
    coeffs = derive()
    for k, c in enumerate(coeffs):
        print(f"c{k} =", sp.simplify(c))
        print()
    check_numeric(coeffs)


if __name__ == "__main__":
    main()
