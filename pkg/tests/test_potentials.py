import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracball.errors import NonIntegrable, OutOfDomain
from fracball.kernels import ProblemParams, constants, getoor_lambda
from fracball.potentials import (
    PotentialField,
    boundary_surface_integral,
    getoor_potential,
    green_potential,
    green_potential_gradient,
    nontrivial_constant,
    nontrivial_field,
    nontrivial_solution,
    poisson_extension,
)
from fracball.quadrature import ScalarField, frac_laplacian_pv
from fracball.rules import sphere_area

ONE = ScalarField.constant(1.0, 2)


def pt(*c):
    return np.array(c, dtype=float)


@pytest.mark.parametrize("n,s", [(2, 0.75), (2, 0.3), (3, 0.6)])
def test_green_of_one_matches_closed_form(n, s):
    p = ProblemParams(n=n, s=s)
    one = ScalarField.constant(1.0, n)
    # 64 directions on S^2 resolve exit distances only away from the sphere
    radii = (0.0, 0.5, 0.9, 0.99) if n == 2 else (0.0, 0.5, 0.8)
    for r in radii:
        x = np.zeros(n)
        x[-1] = r
        tol = 1e-7 if n == 2 else 1e-5
        assert green_potential(one, x, p) == pytest.approx(getoor_potential(x, p), rel=tol)


def test_green_gradient_of_one_matches_closed_form():
    p = ProblemParams(n=2, s=0.75)
    lam = getoor_lambda(2, 0.75)
    for x in (pt(0.3, 0.1), pt(-0.6, 0.5), pt(0.0, 0.9)):
        ref = -2 * p.s * x * (1 - x @ x) ** (p.s - 1) / lam
        assert np.allclose(green_potential_gradient(ONE, x, p), ref, rtol=1e-6, atol=1e-10)


def test_green_gradient_needs_s_above_half():
    with pytest.raises(NonIntegrable):
        green_potential_gradient(ONE, pt(0.2, 0.1), ProblemParams(n=2, s=0.4))


def test_green_potential_vanishes_outside():
    p = ProblemParams()
    assert green_potential(ONE, pt(1.0, 0.0), p) == 0.0
    assert green_potential(ONE, pt(1.5, 0.5), p) == 0.0


def test_green_radial_density_against_1d_oracle():
    # G*(1-|x|^2) at 0: kappa |S| int_0^1 r^(2s-1) I((1-r^2)/r^2) (1-r^2) dr, n = 2
    p = ProblemParams(n=2, s=0.75)
    k = constants(p)
    from scipy.special import beta, betainc
    a, b = p.s, 1 - p.s

    def inc(rh):
        return beta(a, b) * betainc(a, b, rh / (1 + rh))

    ref = k.kappa_ns * 2 * np.pi * integrate.quad(
        lambda r: r ** (2 * p.s - 1) * inc((1 - r * r) / (r * r)) * (1 - r * r), 0, 1,
        limit=200, epsrel=1e-11)[0]
    f = ScalarField(lambda x: 1 - np.sum(x * x, axis=-1), 2, "ball", "smooth", True)
    assert green_potential(f, pt(0, 0), p) == pytest.approx(ref, rel=1e-7)


@given(st.floats(-3, 3), st.floats(0, 0.85), st.floats(0, 2 * np.pi))
@settings(max_examples=15)
def test_green_potential_is_linear(a, r, th):
    p = ProblemParams(n=2, s=0.6)
    x = r * pt(np.cos(th), np.sin(th))
    f = ScalarField.constant(a, 2)
    assert green_potential(f, x, p) == pytest.approx(a * green_potential(ONE, x, p),
                                                     rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("n,s", [(2, 0.25), (2, 0.4), (2, 0.75), (3, 0.6)])
def test_poisson_of_one_is_one(n, s):
    p = ProblemParams(n=n, s=s)
    one = ScalarField.constant(1.0, n)
    for r in (0.0, 0.45, 0.8):
        x = np.zeros(n)
        x[0] = r
        assert poisson_extension(one, x, p) == pytest.approx(1.0, abs=1e-7)


def test_poisson_radial_datum_against_1d_oracle():
    p = ProblemParams(n=2, s=0.75)
    c = constants(p).c_ns
    g = ScalarField(lambda x: np.exp(-np.linalg.norm(x, axis=-1)), 2, "global", "smooth",
                    True, (), "exp(-|x|)")
    ref = integrate.quad(lambda r: np.exp(-r) * (r + 1) ** (-p.s) / r, 1, 2,
                         weight="alg", wvar=(-p.s, 0))[0]
    ref += integrate.quad(lambda r: np.exp(-r) * (r * r - 1) ** (-p.s) / r, 2, np.inf)[0]
    ref *= c * 2 * np.pi
    assert poisson_extension(g, pt(0, 0), p) == pytest.approx(ref, rel=1e-8)


def test_poisson_extension_equals_datum_outside():
    g = ScalarField(lambda x: x[..., 0] ** 2, 2)
    assert poisson_extension(g, pt(1.5, 0.0), ProblemParams()) == pytest.approx(2.25)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_nontrivial_solution_is_s_harmonic(s):
    p = ProblemParams(n=2, s=s)
    u = nontrivial_field(p)
    c = nontrivial_constant(p)
    for x in (pt(0, 0), pt(0.3, -0.4), pt(0.65, 0.1)):
        assert abs(frac_laplacian_pv(u, x, p)) <= 2e-3 * c


def test_nontrivial_closed_form_and_surface_integral():
    p = ProblemParams(n=2, s=0.75)
    c = nontrivial_constant(p)
    # c(n,s)|S| at x = 0
    assert c == pytest.approx(constants(p).c_ns * sphere_area(2), rel=1e-12)
    x = pt(0.5, 0.2)
    assert boundary_surface_integral(x, p, points=512) == pytest.approx(
        nontrivial_solution(x, p), rel=1e-10)
    assert nontrivial_solution(pt(1.2, 0), p) == 0.0
    with pytest.raises(OutOfDomain):
        boundary_surface_integral(pt(1.0, 0.0), p)


def test_potential_field_view():
    p = ProblemParams(n=2, s=0.75)
    u = PotentialField(ONE, p).as_field()
    x = np.array([[0.2, 0.0], [0.0, 0.2], [0.5, 0.5], [2.0, 0.0]])
    ref = getoor_potential(x, p)
    assert np.allclose(u(x), ref, rtol=1e-7)
    assert u.radial and u.support == "ball"
