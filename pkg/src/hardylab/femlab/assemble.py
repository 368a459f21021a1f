"""Linear finite elements on a meridian mesh with the axisymmetric measure
omega_{n-2} s^{n-2} ds dz."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse

from ..sturm1d import sphere_area
from .mesh import MeridianMesh

__all__ = [
    "QuadratureError",
    "SparseSystem",
    "assemble",
    "assemble_stiffness",
    "assemble_mass",
    "hardy_weight",
    "interpolate",
    "triangle_rule",
    "polar_rule",
]

POLAR_ANGULAR = 16
POLAR_RADIAL = 8
NEAR_RULE = 10
FAR_RULE = 6


class QuadratureError(ArithmeticError):
    """Weight would be evaluated at its singular point."""


def triangle_rule(q: int):
    """Collapsed Gauss rule on the reference triangle: (xi, eta), weights."""
    gx, gw = np.polynomial.legendre.leggauss(q)
    u = 0.5 * (gx + 1)
    wu = 0.5 * gw
    U, V = np.meshgrid(u, u, indexing="ij")
    W = np.outer(wu, wu) * (1 - U)
    return np.stack([U.ravel(), ((1 - U) * V).ravel()], axis=1), W.ravel()


def polar_rule(radial: int = POLAR_RADIAL, angular: int = POLAR_ANGULAR):
    """Rule collapsed onto reference vertex 0: xi = t(1-w), eta = t w, jacobian t."""
    rx, rw = np.polynomial.legendre.leggauss(radial)
    ax, aw = np.polynomial.legendre.leggauss(angular)
    t = 0.5 * (rx + 1)
    w = 0.5 * (ax + 1)
    T, Wg = np.meshgrid(t, w, indexing="ij")
    weights = np.outer(0.5 * rw, 0.5 * aw) * T
    return np.stack([(T * (1 - Wg)).ravel(), (T * Wg).ravel()], axis=1), weights.ravel()


@dataclass
class SparseSystem:
    K: sparse.csr_matrix
    M: sparse.csr_matrix
    free: np.ndarray
    n: int
    mesh: MeridianMesh
    weight: str = "hardy"
    quad_error: float = 0.0

    @property
    def dofs(self) -> int:
        return len(self.free)

    def restrict(self, U):
        """Free-node coefficients of a full nodal vector."""
        U = np.asarray(U, dtype=float)
        return U[self.free] if len(U) == self.mesh.vertices.shape[0] else U

    def expand(self, x):
        full = np.zeros(len(self.mesh.vertices))
        full[self.free] = x
        return full


def _geometry(mesh):
    v = mesh.vertices[mesh.triangles]  # (T, 3, 2)
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # gradients of barycentric functions
    inv = np.empty((len(v), 2, 2))
    inv[:, 0, 0] = e2[:, 1] / det
    inv[:, 0, 1] = -e2[:, 0] / det
    inv[:, 1, 0] = -e1[:, 1] / det
    inv[:, 1, 1] = e1[:, 0] / det
    g1 = inv[:, 0, :]
    g2 = inv[:, 1, :]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)  # (T, 3, 2)
    return v, det, grads


def _scatter(mesh, local):
    # exact symmetry: (i, j) and (j, i) then sum identical values in identical order
    local = 0.5 * (local + local.transpose(0, 2, 1))
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    N = len(mesh.vertices)
    A = sparse.coo_matrix((local.reshape(-1), (rows, cols)), shape=(N, N)).tocsr()
    A.sum_duplicates()
    return A


def _restrict(A, free):
    return A[free][:, free].tocsr()


def assemble_stiffness(mesh: MeridianMesh, n: int):
    """K_ij = omega_{n-2} int grad phi_i . grad phi_j s^{n-2} (exact rule)."""
    v, det, grads = _geometry(mesh)
    pts, w = triangle_rule(max(2, (n + 2) // 2 + 1))
    s = v[:, 0, 0, None] + pts[:, 0] * (v[:, 1, 0] - v[:, 0, 0])[:, None] + pts[:, 1] * (v[:, 2, 0] - v[:, 0, 0])[:, None]
    ws = np.abs(det) * (np.maximum(s, 0.0) ** (n - 2) @ w)
    local = np.einsum("tid,tjd->tij", grads, grads) * ws[:, None, None]
    return sphere_area(n - 2) * _scatter(mesh, local)


def hardy_weight(x0):
    z0 = float(x0[1])
    s0 = float(x0[0])

    def w(s, z):
        return 1.0 / ((z - z0) ** 2 + (s - s0) ** 2)

    return w


def _mass_local(v, det, pts, wts, weight, n, map_vertex=None):
    """Element mass integrals sum_q w_q phi_i phi_j weight s^{n-2} |det|.

    With ``map_vertex`` the rule's reference vertex 0 is placed at that local
    vertex of each element (used for rules collapsed onto the singular point).
    """
    if map_vertex is not None:
        idx = (map_vertex[:, None] + np.arange(3)[None, :]) % 3
        rot = _mass_local(np.take_along_axis(v, idx[:, :, None], axis=1), det, pts, wts, weight, n)
        back = np.argsort(idx, axis=1)
        T = np.arange(len(v))[:, None, None]
        return rot[T, back[:, :, None], back[:, None, :]]
    lam = np.stack([1 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]], axis=1)  # (Q, 3)
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    X = v[:, 0][:, None, :] + pts[None, :, 0, None] * e1[:, None, :] + pts[None, :, 1, None] * e2[:, None, :]
    s = np.maximum(X[..., 0], 0.0)
    f = weight(X[..., 0], X[..., 1]) * s ** (n - 2)
    fw = f * wts[None, :] * np.abs(det)[:, None]
    return np.einsum("tq,qi,qj->tij", fw, lam, lam)


def assemble_mass(mesh: MeridianMesh, n: int, weight: Callable | None = None, singular_point=None):
    """M_ij = omega_{n-2} int phi_i phi_j w s^{n-2}; w = 1 when weight is None.

    Elements touching ``singular_point`` use the collapsed polar rule at that
    vertex; elements within two diameters of it use a 10x10 rule.
    """
    v, det, _ = _geometry(mesh)
    if weight is None:
        pts, w = triangle_rule(max(2, (n + 4) // 2 + 1))
        local = _mass_local(v, det, pts, w, lambda s, z: np.ones_like(s), n)
        return sphere_area(n - 2) * _scatter(mesh, local)
    local = np.zeros((len(v), 3, 3))
    far = np.ones(len(v), dtype=bool)
    if singular_point is not None:
        x0 = np.asarray(singular_point, dtype=float)
        dist = np.linalg.norm(v - x0, axis=2)  # (T, 3)
        touch = dist.min(axis=1) < 1e-14
        if touch.any():
            at = np.argmin(dist[touch], axis=1)
            pts, w = polar_rule()
            local[touch] = _mass_local(v[touch], det[touch], pts, w, weight, n, map_vertex=at)
        diam = np.max(np.linalg.norm(v - np.roll(v, 1, axis=1), axis=2), axis=1)
        near = ~touch & (dist.min(axis=1) < 2 * diam)
        if near.any():
            pts, w = triangle_rule(NEAR_RULE)
            local[near] = _mass_local(v[near], det[near], pts, w, weight, n)
        far = ~touch & ~near
    if far.any():
        pts, w = triangle_rule(FAR_RULE)
        local[far] = _mass_local(v[far], det[far], pts, w, weight, n)
    return sphere_area(n - 2) * _scatter(mesh, local)


def assemble(mesh: MeridianMesh, n: int, weight: str | Callable = "hardy") -> SparseSystem:
    """Stiffness and weighted mass on the free (non-Dirichlet) nodes.

    ``weight`` is 'hardy' (1/|x - x0|^2 with x0 the mesh singular point),
    'unit', or a callable V(s, z), integrated with the singular-point rules.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    free = mesh.free_nodes
    x0 = np.asarray(mesh.singularity, dtype=float)
    at_pole = np.linalg.norm(mesh.vertices[free] - x0, axis=1) < 1e-14
    K = assemble_stiffness(mesh, n)
    if weight == "unit":
        M = assemble_mass(mesh, n)
        name = "unit"
    else:
        if at_pole.any():
            raise QuadratureError("weight singular at a free node; the singular point must carry Dirichlet data")
        fn = hardy_weight(x0) if weight == "hardy" else weight
        name = "hardy" if weight == "hardy" else getattr(weight, "__name__", "potential")
        M = assemble_mass(mesh, n, fn, singular_point=x0)
    return SparseSystem(_restrict(K, free), _restrict(M, free), free, n, mesh, name)


def interpolate(mesh: MeridianMesh, f: Callable) -> np.ndarray:
    """Nodal values f(s, z) with zero Dirichlet data imposed."""
    U = np.asarray(f(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float).copy()
    U[mesh.dirichlet_nodes] = 0.0
    return U
