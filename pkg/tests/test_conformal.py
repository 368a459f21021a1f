import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hardylab import conformal as cf
from hardylab.speclog import DomainError

upper = arrays(np.float64, 3, elements=st.floats(-5, 5)).map(lambda v: np.append(v[:2], abs(v[2]) + 1e-2))


def test_kelvin_fixed_points():
    e = np.array([0.0, 0.0, 1.0])
    assert np.allclose(cf.kelvin(e), e)
    assert np.allclose(cf.kelvin(2 * e), e / 2)
    with pytest.raises(DomainError):
        cf.kelvin(np.zeros(3))


def test_mobius_special_values():
    e = np.array([0.0, 0.0, 1.0])
    assert np.allclose(cf.map_s(np.zeros(3)), e)
    assert np.allclose(cf.map_s(e), 0.0)
    assert np.allclose(cf.map_t(np.zeros(3)), e)
    with pytest.raises(DomainError):
        cf.map_s(-e)
    with pytest.raises(DomainError):
        cf.map_t(e)
    with pytest.raises(DomainError):
        cf.inv_t(-e)


def test_t_is_kelvin_after_s():
    v = np.random.default_rng(1).standard_normal((100, 4))
    assert np.allclose(cf.map_t(v), cf.kelvin(cf.map_s(v)), rtol=1e-12)


def test_jac_t_values():
    e = np.array([0.0, 0.0, 1.0])
    assert cf.jac_t(np.zeros(3)) == 8.0
    assert cf.jac_t(-e) == pytest.approx(1 / 8)


@pytest.mark.parametrize("which", ["kelvin", "S", "T"])
def test_analytic_jacobians_match_finite_differences(which):
    rng = np.random.default_rng(2)
    v = rng.standard_normal((50, 3))
    v[:, -1] = np.abs(v[:, -1]) + 0.1
    f = {"kelvin": cf.kelvin, "S": cf.map_s, "T": cf.map_t}[which]
    jac = {"kelvin": cf.jac_kelvin, "S": cf.jac_s, "T": cf.jac_t}[which]
    for p in v:
        fd = cf.fd_jacobian(f, p)
        assert np.allclose(cf.dmap(which, p), fd, rtol=1e-6, atol=1e-8 * np.abs(fd).max())
        assert abs(np.linalg.det(fd)) == pytest.approx(float(jac(p)), rel=1e-6)


def test_image_ball():
    b = cf.image_ball(0.5)
    assert np.allclose(b.center, [0, 0, 5 / 3])
    assert b.radius == pytest.approx(4 / 3)
    small = cf.image_ball(1e-8)
    assert np.allclose(small.center, [0, 0, 1]) and small.radius < 1e-7
    rng = np.random.default_rng(3)
    z = rng.standard_normal((200, 3))
    z *= 0.3 / np.linalg.norm(z, axis=1, keepdims=True)
    d = np.linalg.norm(cf.map_t(z) - cf.image_ball(0.3).center, axis=1)
    assert np.allclose(d, cf.image_ball(0.3).radius, rtol=1e-10)
    with pytest.raises(DomainError):
        cf.image_ball(1.0)


def test_sigma_n():
    assert cf.sigma_n(3) == pytest.approx(1 / (9 * math.sqrt(75)))
    assert cf.sigma_n(2) == pytest.approx(1 / (4 * math.sqrt(75)))
    assert all(cf.sigma_n(n + 1) < cf.sigma_n(n) for n in range(2, 12))


def test_energy_pair_zero_function():
    assert cf.pullback_energy_pair(None, "T") == (0.0, 0.0)
    assert cf.pullback_energy_pair(cf.GaussianBump((0, 0, 2.0), 0.1, amplitude=0.0), "T") == (0.0, 0.0)


@pytest.mark.parametrize("which,center", [("T", (0.2, 0.1, 1.8)), ("S", (0.1, 0.0, 0.3)),
                                          ("kelvin", (0.3, 0.0, 1.5))])
def test_energy_invariance_with_self_convergence(which, center):
    f = cf.GaussianBump(center, 0.08, tilt=(0.5, -0.3, 0.2))
    a1, b1 = cf.pullback_energy_pair(f, which, quad=40)
    a2, b2 = cf.pullback_energy_pair(f, which, quad=56)
    assert abs(b2 - b1) / b2 < 1e-8
    assert abs(a2 - b2) / b2 < 1e-6


def test_energy_invariance_n4():
    f = cf.GaussianBump((0.2, 0.1, 0.0, 1.8), 0.08)
    a, b = cf.pullback_energy_pair(f, "T")
    assert abs(a - b) / b < 1e-6


def test_energy_invariance_detects_wrong_factor():
    # with the conformal factor dropped the energies must disagree
    f = cf.GaussianBump((0.2, 0.1, 1.8), 0.08)
    a, b = cf.pullback_energy_pair(f, "T")
    orig = cf._conformal_factor
    try:
        cf._conformal_factor = lambda which, v: (np.ones(len(v)), np.zeros_like(v))
        a_bad, _ = cf.pullback_energy_pair(f, "T")
    finally:
        cf._conformal_factor = orig
    assert abs(a_bad - b) / b > 1e-2


def test_source_domain_check():
    f = cf.GaussianBump((0.2, 0.1, 1.8), 0.08)
    with pytest.raises(DomainError):
        cf.pullback_energy_pair(f, "T", source_domain=lambda v: v[:, -1] > 10)


@settings(max_examples=100, deadline=None)
@given(upper)
def test_s_involution_and_modulus(v):
    e = np.array([0.0, 0.0, 1.0])
    assert np.allclose(cf.map_s(cf.map_s(v)), v, rtol=1e-11, atol=1e-11)
    assert np.linalg.norm(cf.map_s(v)) == pytest.approx(np.linalg.norm(v - e) / np.linalg.norm(v + e), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(upper)
def test_t_maps_half_space_outside_ball(v):
    if np.linalg.norm(v - np.array([0, 0, 1.0])) < 1e-3:
        return
    assert np.linalg.norm(cf.map_t(v)) > 1
    assert np.allclose(cf.inv_t(cf.map_t(v)), v, rtol=1e-10, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 4, elements=st.floats(-10, 10)))
def test_kelvin_involution_and_inv_t_modulus(x):
    if np.linalg.norm(x) < 1e-3:
        return
    assert np.allclose(cf.kelvin(cf.kelvin(x)), x, rtol=1e-14, atol=1e-14 * np.linalg.norm(x))
    e = np.zeros(4)
    e[-1] = 1.0
    if np.linalg.norm(x + e) < 1e-3:
        return
    assert np.linalg.norm(cf.inv_t(x)) == pytest.approx(np.linalg.norm(x - e) / np.linalg.norm(x + e), rel=1e-12)
