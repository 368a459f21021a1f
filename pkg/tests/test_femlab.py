import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, sparse

from hardylab.femlab import (
    IndefiniteFormError,
    MeridianDomain,
    QuadratureError,
    assemble,
    build_meridian_mesh,
    dump_mesh,
    hardy_quotient_of,
    interpolate,
    level_trace,
    load_mesh,
    mesh_levels,
    min_angle_deg,
    refine_uniform,
    shell_bound,
    shell_function,
    smallest_eig,
    write_trace_csv,
)
from hardylab.femlab.assemble import assemble_mass, assemble_stiffness, hardy_weight
from hardylab.speclog import DomainError
from hardylab.sturm1d import sphere_area

J_3HALF_1 = 4.493409457909064  # first zero of the spherical Bessel function j_1


@pytest.fixture(scope="module")
def half_ball_mesh():
    return build_meridian_mesh(MeridianDomain.half_ball(), 0.1)


def green_volume(mesh, n):
    """omega_{n-2} * sum over triangles of the boundary integral of s^{n-1}/(n-1) dz."""
    gx, gw = np.polynomial.legendre.leggauss(n + 2)
    total = 0.0
    for tri in mesh.triangles:
        v = mesh.vertices[tri]
        e1, e2 = v[1] - v[0], v[2] - v[0]
        orient = 1.0 if e1[0] * e2[1] - e1[1] * e2[0] > 0 else -1.0
        for a, b in ((v[0], v[1]), (v[1], v[2]), (v[2], v[0])):
            t = 0.5 * (gx + 1)
            s = a[0] + t * (b[0] - a[0])
            total += orient * 0.5 * np.sum(gw * s ** (n - 1)) / (n - 1) * (b[1] - a[1])
    return sphere_area(n - 2) * total


def test_half_ball_boundary_vertices_on_boundary(half_ball_mesh):
    m = half_ball_mesh
    idx = np.unique(m.edges)
    s, z = m.vertices[idx].T
    dist = np.minimum(np.minimum(np.abs(s), np.abs(z)), np.abs(np.hypot(s, z) - 1))
    assert dist.max() < 1e-3


def test_annulus_mesh_quality():
    assert min_angle_deg(build_meridian_mesh(MeridianDomain.annulus(1.0), 0.2)) > 20


@pytest.mark.parametrize("domain", [MeridianDomain.half_ball(), MeridianDomain.annulus(1.0),
                                    MeridianDomain.cap_sector(1.3, 0.2), MeridianDomain.ball_minus_ball(0.1, 0.3)])
def test_mesh_quality_all_kinds(domain):
    assert min_angle_deg(build_meridian_mesh(domain, 0.3)) > 20


def test_vertex_count_scaling():
    d = MeridianDomain.half_ball()
    a = len(build_meridian_mesh(d, 0.1, grading=1.0, levels=0).vertices)
    b = len(build_meridian_mesh(d, 0.05, grading=1.0, levels=0).vertices)
    assert 3.0 <= b / a <= 5.0


def test_geometry_errors():
    with pytest.raises(DomainError):
        MeridianDomain.annulus(0.0)
    with pytest.raises(DomainError):
        MeridianDomain.cap_sector(1.7, 0.1)
    with pytest.raises(DomainError):
        build_meridian_mesh(MeridianDomain.half_ball(), 0.0)


def test_uniform_refinement_is_nested(half_ball_mesh):
    fine = refine_uniform(half_ball_mesh)
    assert len(fine.triangles) == 4 * len(half_ball_mesh.triangles)
    assert np.allclose(fine.vertices[: len(half_ball_mesh.vertices)], half_ball_mesh.vertices)
    assert fine.areas().sum() == pytest.approx(half_ball_mesh.areas().sum(), rel=1e-14)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_patch_test_against_green_formula(half_ball_mesh, n):
    m = half_ball_mesh
    K = assemble_stiffness(m, n)
    z = m.vertices[:, 1]
    vol = green_volume(m, n)
    assert z @ (K @ z) == pytest.approx(vol, rel=1e-10)
    M = assemble_mass(m, n)
    assert M.sum() == pytest.approx(vol, rel=1e-10)


def test_matrices_exactly_symmetric(half_ball_mesh):
    sys = assemble(half_ball_mesh, 3)
    assert abs(sys.K - sys.K.T).max() == 0
    assert abs(sys.M - sys.M.T).max() == 0


def test_hardy_mass_against_adaptive_quadrature():
    m = build_meridian_mesh(MeridianDomain.half_ball(), 0.5, levels=2)
    n = 3
    U = interpolate(m, lambda s, z: np.hypot(s, z))
    sys = assemble(m, n)
    x = sys.restrict(U)
    assembled = x @ (sys.M @ x)
    w = hardy_weight((0.0, 0.0))
    ref = 0.0
    for tri in m.triangles:
        v = m.vertices[tri]
        vals = U[tri]
        A = np.array([[v[1, 0] - v[0, 0], v[2, 0] - v[0, 0]], [v[1, 1] - v[0, 1], v[2, 1] - v[0, 1]]])
        det = abs(np.linalg.det(A))

        def f(b, a):
            s, z = v[0] + A @ np.array([a, b])
            u = vals[0] * (1 - a - b) + vals[1] * a + vals[2] * b
            return u * u * w(s, z) * max(s, 0.0) ** (n - 2) * det

        ref += integrate.dblquad(f, 0, 1, 0, lambda a: 1 - a, epsabs=1e-13, epsrel=1e-11)[0]
    assert assembled == pytest.approx(sphere_area(n - 2) * ref, rel=1e-4)


def test_quadrature_error_when_pole_is_free():
    poly = MeridianDomain.polygon([(0, -1), (1, -1), (1, 1), (0, 1), (0, 0)],
                                  ["dirichlet", "dirichlet", "dirichlet", "axis", "axis"], (0.0, 0.0))
    mesh = build_meridian_mesh(poly, 0.4)
    with pytest.raises(QuadratureError):
        assemble(mesh, 3)


def test_k_equals_m_gives_one(half_ball_mesh):
    sys = assemble(half_ball_mesh, 3, "unit")
    est = smallest_eig(sys.M, sys.M)
    assert est.value == pytest.approx(1.0, abs=1e-9)


def test_dirichlet_half_ball_reference():
    tr = level_trace(MeridianDomain.half_ball(), 3, 3, 0.05, "unit", grading=1.0, grading_levels=0)
    v = [r[3] for r in tr.trace]
    assert all(r[4] <= 1e-9 for r in tr.trace)
    assert (4 * v[-1] - v[-2]) / 3 == pytest.approx(J_3HALF_1**2, rel=1e-3)


def test_half_ball_hardy_trace():
    tr = level_trace(MeridianDomain.half_ball(), 3, 3, 0.3, "hardy")
    v = [r[3] for r in tr.trace]
    assert all(a > b for a, b in zip(v, v[1:]))
    assert min(v) >= 2.25 - 1e-3


def test_indefinite_form_detected():
    with pytest.raises(IndefiniteFormError):
        level_trace(MeridianDomain.half_ball(), 3, 1, 0.3, "unit", shift_form=5.0, check_definite=True)


def test_hardy_quotient_properties(half_ball_mesh):
    sys = assemble(half_ball_mesh, 3)
    est = smallest_eig(sys)
    x = est.vector
    assert hardy_quotient_of(x, sys) == pytest.approx(est.value, rel=1e-9)
    assert hardy_quotient_of(2 * x, sys) == pytest.approx(hardy_quotient_of(x, sys), rel=1e-14)
    with pytest.raises(ZeroDivisionError):
        hardy_quotient_of(np.zeros_like(x), sys)
    full = sys.expand(x)
    full[half_ball_mesh.dirichlet_nodes[0]] = 1.0
    with pytest.raises(ValueError):
        hardy_quotient_of(full, sys)


def test_shell_function_quotient():
    n, tau = 3, 100.0
    base = build_meridian_mesh(MeridianDomain.annulus(tau), 0.3)
    mesh = mesh_levels(base, 3)[-1]
    sys = assemble(mesh, n)
    U = interpolate(mesh, shell_function(n, tau))
    q = hardy_quotient_of(U, sys)
    assert abs(q / shell_bound(n, tau) - 1) < 0.1


def test_mesh_dump_roundtrip(tmp_path, half_ball_mesh):
    path = tmp_path / "mesh.txt"
    dump_mesh(half_ball_mesh, path)
    back = load_mesh(path)
    assert np.array_equal(back.vertices, half_ball_mesh.vertices)
    assert np.array_equal(back.triangles, half_ball_mesh.triangles)
    assert np.array_equal(back.dirichlet_nodes, half_ball_mesh.dirichlet_nodes)
    assert path.read_text().splitlines()[0].startswith("v ")


def test_trace_csv(tmp_path):
    path = tmp_path / "trace.csv"
    write_trace_csv([(0, 0.1, 10, 2.5, 1e-12)], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "level,h,dofs,eigenvalue,residual"
    assert lines[1] == "0,0.10000000000000001,10,2.5,9.9999999999999998e-13"


@settings(max_examples=6, deadline=None)
@given(st.floats(0.05, 5.0), st.integers(2, 5))
def test_annulus_trace_monotone(tau, n):
    tr = level_trace(MeridianDomain.annulus(tau), n, 3, 0.5, "hardy")
    v = [r[3] for r in tr.trace]
    assert all(b <= a * (1 + 1e-10) for a, b in zip(v, v[1:]))
    assert all(r[4] <= 1e-9 for r in tr.trace)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2**31))
def test_assembly_independent_of_element_order(seed):
    m = build_meridian_mesh(MeridianDomain.half_ball(), 0.4)
    perm = np.random.default_rng(seed).permutation(len(m.triangles))
    from dataclasses import replace

    m2 = replace(m, triangles=m.triangles[perm])
    a, b = assemble(m, 3), assemble(m2, 3)
    assert sparse.linalg.norm(a.K - b.K) <= 1e-14 * sparse.linalg.norm(a.K)
    assert sparse.linalg.norm(a.M - b.M) <= 1e-14 * sparse.linalg.norm(a.M)
