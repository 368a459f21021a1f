"""Smallest generalized eigenvalues of assembled systems and refinement traces."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from ..sturm1d import EigenEstimate
from .assemble import SparseSystem, assemble
from .mesh import MeridianDomain, build_meridian_mesh, mesh_levels

__all__ = [
    "FemEigen",
    "IndefiniteFormError",
    "NonConvergenceError",
    "gershgorin_lower",
    "negative_pivots",
    "smallest_eig",
    "hardy_quotient_of",
    "level_trace",
    "lambda_tau",
    "shell_function",
    "shell_bound",
    "write_trace_csv",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("level", "h", "dofs", "eigenvalue", "residual")


class NonConvergenceError(RuntimeError):
    pass


class IndefiniteFormError(ArithmeticError):
    """Quadratic form has negative directions at this resolution."""


@dataclass
class FemEigen(EigenEstimate):
    vector: np.ndarray | None = None


def gershgorin_lower(K, M) -> float:
    """max(0, min Gershgorin lower edge of K / max Gershgorin upper edge of M)."""
    K = sparse.csr_matrix(K)
    M = sparse.csr_matrix(M)
    dk = K.diagonal()
    rk = np.asarray(abs(K).sum(axis=1)).ravel() - np.abs(dk)
    dm = M.diagonal()
    rm = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(dm)
    return max(0.0, float(np.min(dk - rk)) / float(np.max(dm + rm)))


def _symmetric_lu(A):
    return splinalg.splu(sparse.csc_matrix(A), permc_spec="MMD_AT_PLUS_A",
                         diag_pivot_thresh=0.0, options={"SymmetricMode": True})


def negative_pivots(A) -> int:
    """Number of negative eigenvalues of symmetric A (inertia of LDL^T pivots)."""
    lu = _symmetric_lu(A)
    if not (np.all(lu.perm_r == lu.perm_c)):
        raise ArithmeticError("factorization used off-diagonal pivoting; inertia unavailable")
    return int(np.sum(lu.U.diagonal() < 0))


def _residual(K, M, x, lam):
    Mx = M @ x
    return float(np.linalg.norm(K @ x - lam * Mx) / np.linalg.norm(Mx))


def smallest_eig(sys_or_K, M=None, tol: float = 1e-9, max_iter: int = 50,
                 check_definite: bool = False) -> FemEigen:
    """Smallest eigenvalue of K x = lam M x by shift-invert Lanczos.

    Shift = 0.9 * gershgorin_lower(K, M); start vector all ones; the result is
    polished by inverse iteration until the relative residual is below tol.
    """
    if isinstance(sys_or_K, SparseSystem):
        K, M = sys_or_K.K, sys_or_K.M
    else:
        K = sys_or_K
    K = sparse.csc_matrix(K)
    M = sparse.csc_matrix(M)
    if check_definite and negative_pivots(K) > 0:
        raise IndefiniteFormError("form has negative pivots; refine the mesh")
    sigma = 0.9 * gershgorin_lower(K, M)
    v0 = np.ones(K.shape[0])
    if K.shape[0] == 1:
        lam = float(K[0, 0] / M[0, 0])
        return FemEigen(lam, 0.0, vector=np.ones(1))
    if K.shape[0] < 3:
        w, V = np.linalg.eigh(np.linalg.solve(M.toarray(), K.toarray()))
        x = V[:, 0]
        lam = float(w[0])
        return FemEigen(lam, _residual(K, M, x, lam), vector=x)
    vals, vecs = splinalg.eigsh(K, k=1, M=M, sigma=sigma, which="LM", v0=v0, tol=tol * 1e-2)
    lam = float(vals[0])
    x = vecs[:, 0]
    res = _residual(K, M, x, lam)
    if res > tol:
        lu = splinalg.splu(K - sigma * M)
        for _ in range(max_iter):
            x = lu.solve(M @ x)
            x /= math.sqrt(float(x @ (M @ x)))
            lam = float(x @ (K @ x))
            res = _residual(K, M, x, lam)
            if res <= tol:
                break
        else:
            raise NonConvergenceError(f"residual {res:.3e} above tol {tol:.1e} after {max_iter} iterations")
    if x.sum() < 0:
        x = -x
    return FemEigen(lam, res, vector=x)


def hardy_quotient_of(U, sys: SparseSystem) -> float:
    """(U^T K U) / (U^T M U) for nodal values U (full or free-node vector)."""
    U = np.asarray(U, dtype=float)
    if len(U) == len(sys.mesh.vertices):
        if np.any(U[sys.mesh.dirichlet_nodes] != 0):
            raise ValueError("U must vanish on Dirichlet nodes")
        x = U[sys.free]
    else:
        x = U
    den = float(x @ (sys.M @ x))
    if den == 0.0 or not np.any(x):
        raise ZeroDivisionError("U vanishes identically")
    return float(x @ (sys.K @ x)) / den


def level_trace(domain: MeridianDomain, n: int, levels: int, h: float, weight="hardy",
                grading: float = 1.7, grading_levels: int = 6, tol: float = 1e-9,
                shift_form: float = 0.0, check_definite: bool = False) -> FemEigen:
    """Eigenvalue per uniform refinement level of the graded base mesh.

    With ``shift_form`` = c the pencil is (K - c M_hardy, M_weight).
    """
    base = build_meridian_mesh(domain, h, grading, grading_levels)
    rows = []
    est = None
    for lvl, mesh in enumerate(mesh_levels(base, levels)):
        sys = assemble(mesh, n, weight)
        K = sys.K
        if shift_form:
            K = K - shift_form * assemble(mesh, n, "hardy").M
        est = smallest_eig(K, sys.M, tol=tol, check_definite=check_definite)
        rows.append((lvl, mesh.max_edge, sys.dofs, est.value, est.residual))
    out = FemEigen(est.value, est.residual, trace=rows, vector=est.vector)
    return out


def lambda_tau(n: int, tau: float, levels: int = 4, h: float = 0.3, rho: float = 1.0,
               grading: float = 1.7, grading_levels: int = 6, tol: float = 1e-9) -> FemEigen:
    """Upper bounds on the annulus Hardy constant for rho < |x| < rho(1+tau), pole rho e_n."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    return level_trace(MeridianDomain.annulus(tau, rho), n, levels, h, "hardy", grading, grading_levels, tol)


def shell_function(n: int, tau: float, rho: float = 1.0):
    """r^{-(n-2)/2} sin(pi ln(r/2rho)/ln(tau/2)) on 2 rho < r < tau rho, r = |x - rho e_n|."""

    def f(s, z):
        r = np.hypot(s, z - rho) / rho
        inside = (r > 2) & (r < tau)
        rr = np.where(inside, r, 2.0)
        return np.where(inside, rr ** (-(n - 2) / 2) * np.sin(np.log(rr / 2) * math.pi / math.log(tau / 2)), 0.0)

    return f


def shell_bound(n: int, tau: float) -> float:
    return ((n - 2) / 2) ** 2 + (math.pi / math.log(tau / 2)) ** 2


def write_trace_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for lvl, h, dofs, lam, res in rows:
            w.writerow([int(lvl), f"{h:.17g}", int(dofs), f"{lam:.17g}", f"{res:.17g}"])
