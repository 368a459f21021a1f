import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab import sturm1d as s1
from hardylab.speclog import DomainError


def legendre_root(z_sign, theta):
    """Smallest nu > 0 with P_nu(z_sign cos theta) = 0, via mpmath."""
    f = lambda nu: mp.legenp(nu, 0, z_sign * mp.cos(theta))
    grid = [0.01 * k for k in range(1, 4000)]
    prev = f(grid[0])
    for a, b in zip(grid, grid[1:]):
        cur = f(b)
        if prev * cur < 0:
            return mp.findroot(f, (a, b), solver="anderson")
        prev = cur
    raise AssertionError("no root")


def sharpness_exact(n, eps):
    e = Fraction(eps)
    g = Fraction(-(n - 2), 2) + e
    den = 1 / (2 * e) - 2 / (2 * e + 1) + 1 / (2 * e + 2)
    num = g * g / (2 * e) - 2 * g * (g + 1) / (2 * e + 1) + (g + 1) ** 2 / (2 * e + 2)
    return float((num + (n - 1) * den) / den)


@pytest.mark.parametrize("n", [3, 4, 5, 7])
def test_hemisphere_eigenvalue(n):
    assert s1.cap_eigenpair(s1.CapProblem(n, math.pi / 2)).value == pytest.approx(n - 1, abs=1e-6)


@pytest.mark.parametrize("theta", [0.3, 1.0, 2.0, 2.8])
def test_cap_eigenvalue_against_legendre_zero(theta):
    nu = legendre_root(1, theta)
    assert s1.cap_eigenpair(s1.CapProblem(3, theta)).value == pytest.approx(float(nu * (nu + 1)), rel=1e-7)


@pytest.mark.parametrize("theta", [0.5, 1.3])
def test_example_cap_against_legendre_zero(theta):
    nu = legendre_root(-1, theta)
    assert s1.cap_eigenpair(s1.CapProblem(3, theta, "example-cap")).value == pytest.approx(
        float(nu * (nu + 1)), rel=1e-7)


def test_cap_eigenfunction_normalized():
    pair = s1.cap_eigenpair(s1.CapProblem(3, math.pi / 2))
    t, g = pair.nodes, pair.values
    # omega_1 * int g^2 sin t dt = 1; hemisphere mode is c cos t with c^2 = 3/(2 pi)
    integrand = g**2 * np.sin(t)
    total = 2 * math.pi * np.sum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))
    assert total == pytest.approx(1.0, rel=1e-4)
    assert g[0] == pytest.approx(math.sqrt(3 / (2 * math.pi)), rel=1e-4)


def test_cap_problem_validation():
    with pytest.raises(DomainError):
        s1.CapProblem(3, 0.0)
    with pytest.raises(DomainError):
        s1.CapProblem(3, math.pi)
    with pytest.raises(DomainError):
        s1.CapProblem(1, 1.0)
    with pytest.raises(DomainError):
        s1.CapProblem(3, 1.0, "bogus")


def test_areas():
    assert s1.sphere_area(2) == pytest.approx(4 * math.pi)
    assert s1.sphere_area(1) == pytest.approx(2 * math.pi)
    assert s1.cap_area(3, 1.1) == pytest.approx(2 * math.pi * (1 - math.cos(1.1)))
    assert s1.cap_area(4, math.pi / 2) == pytest.approx(s1.sphere_area(3) / 2)


@pytest.mark.parametrize("n,a,b", [(3, 2.0, 2 * math.exp(2 * math.pi)), (3, 1.0, 2.0), (4, 0.5, 3.0),
                                   (5, 1.0, 10.0), (2, 1.0, math.e)])
def test_radial_annulus(n, a, b):
    closed, est = s1.radial_annulus_constant(n, a, b)
    assert abs(est.value - closed) < 1e-6


def test_radial_annulus_exact_case():
    assert s1.radial_annulus_closed_form(3, 2.0, 2 * math.exp(2 * math.pi)) == pytest.approx(0.5, rel=1e-15)


def test_cone_hardy_constant_half_space():
    assert s1.cone_hardy_constant(3, math.pi / 2) == pytest.approx(0.25 + 2, abs=1e-6)


@pytest.mark.parametrize("n,eps", [(3, 0.01), (4, 0.1), (5, 0.3)])
def test_sharpness_quotient_exact(n, eps):
    assert s1.sharpness_quotient(n, eps) == pytest.approx(sharpness_exact(n, eps), rel=1e-10)


def test_sharpness_quotient_tends_to_boundary_constant():
    assert s1.sharpness_quotient(3, 1e-3) == pytest.approx(2.25, rel=1e-3)
    with pytest.raises(DomainError):
        s1.sharpness_quotient(3, 0.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 1.4), st.floats(0.05, 0.5))
def test_cap_eigenvalue_decreases_with_angle(theta, step):
    small = s1.cap_eigenpair(s1.CapProblem(3, theta)).value
    big = s1.cap_eigenpair(s1.CapProblem(3, theta + step)).value
    assert big < small


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.floats(0.1, 3.0), st.floats(1.05, 50.0))
def test_radial_closed_form_above_interior_constant(n, a, ratio):
    assert s1.radial_annulus_closed_form(n, a, a * ratio) > ((n - 2) / 2) ** 2
