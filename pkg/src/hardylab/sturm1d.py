"""One-dimensional weighted Sturm-Liouville eigensolvers.

All problems have the form  -(p g')' = lam * q g  on an interval, discretized
by linear elements with lumped mass.  Eigenvalues of the tridiagonal pencil
are isolated by bisection on its inertia count, then Richardson-extrapolated
over dyadic resolutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg

from .speclog import DomainError

__all__ = [
    "ConvergenceError",
    "CapProblem",
    "EigenEstimate",
    "CapEigenpair",
    "sphere_area",
    "sturm_count",
    "pencil_eigenvalue",
    "weighted_sl_eigen",
    "cap_eigenpair",
    "cap_area",
    "radial_annulus_closed_form",
    "radial_annulus_constant",
    "cone_hardy_constant",
    "sharpness_quotient",
]

VARIANTS = ("cone-cap", "example-cap")
GAUSS3 = np.polynomial.legendre.leggauss(3)


ROUNDOFF_FLOOR = 1e-9


class ConvergenceError(RuntimeError):
    """Refinement trace did not settle."""


def sphere_area(m: int) -> float:
    """Surface measure of the unit sphere S^m in R^{m+1}."""
    return 2.0 * math.pi ** ((m + 1) / 2) / math.gamma((m + 1) / 2)


@dataclass(frozen=True)
class CapProblem:
    n: int
    angle: float
    variant: str = "cone-cap"
    k: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("dimension must be at least 2")
        if not 0.0 < self.angle < math.pi:
            raise DomainError(f"angle must lie strictly inside (0, pi), got {self.angle}")
        if self.variant not in VARIANTS:
            raise DomainError(f"variant must be one of {VARIANTS}")
        if self.k < 1:
            raise DomainError("index k must be >= 1")

    @property
    def interval(self):
        if self.variant == "cone-cap":
            return 0.0, self.angle
        return self.angle, math.pi

    @property
    def boundary(self):
        # (left, right): 'D' Dirichlet, 'N' natural
        return ("N", "D") if self.variant == "cone-cap" else ("D", "N")

    def weight(self, t):
        return np.sin(t) ** (self.n - 2)


@dataclass
class EigenEstimate:
    value: float
    residual: float
    trace: list = field(default_factory=list)
    extrapolated: list = field(default_factory=list)

    def as_dict(self):
        return {
            "value": self.value,
            "residual": self.residual,
            "trace": [list(p) for p in self.trace],
            "extrapolated": [list(p) for p in self.extrapolated],
        }


@dataclass
class CapEigenpair:
    estimate: EigenEstimate
    nodes: np.ndarray
    values: np.ndarray

    @property
    def value(self):
        return self.estimate.value


def _cell_integrals(f, x):
    """Integrals of f over each cell [x_i, x_{i+1}] and its two halves."""
    gx, gw = GAUSS3
    a, b = x[:-1], x[1:]
    m = 0.5 * (a + b)

    def integ(lo, hi):
        c = 0.5 * (lo + hi)[:, None]
        r = 0.5 * (hi - lo)[:, None]
        return (f(c + r * gx[None, :]) * gw[None, :]).sum(axis=1) * r[:, 0]

    return integ(a, b), integ(a, m), integ(m, b)


def assemble_pencil(p, q, a, b, bc, N):
    """Tridiagonal stiffness (diag, off) and lumped mass for N cells on [a, b].

    Returns (diag, off, mass, free_nodes).
    """
    x = np.linspace(a, b, N + 1)
    h = (b - a) / N
    pint, _, _ = _cell_integrals(p, x)
    kcell = pint / h**2
    _, ql, qr = _cell_integrals(q, x)
    diag = np.zeros(N + 1)
    diag[:-1] += kcell
    diag[1:] += kcell
    off = -kcell
    mass = np.zeros(N + 1)
    mass[:-1] += ql
    mass[1:] += qr
    lo = 1 if bc[0] == "D" else 0
    hi = N if bc[1] == "D" else N + 1
    return diag[lo:hi], off[lo:hi - 1], mass[lo:hi], x[lo:hi]


def sturm_count(diag, off, mass, lam) -> int:
    """Number of eigenvalues of (K, M) strictly below lam (inertia of K - lam M)."""
    count = 0
    d = 1.0
    prev_off2 = 0.0
    for i in range(len(diag)):
        d = diag[i] - lam * mass[i] - prev_off2 / d
        if d == 0.0:
            d = -1e-300
        if d < 0.0:
            count += 1
        if i < len(off):
            prev_off2 = off[i] * off[i]
    return count


def pencil_eigenvalue(diag, off, mass, k, rtol=1e-15):
    """k-th (1-based) eigenvalue of the symmetric tridiagonal pencil by bisection."""
    diag_l = diag.tolist()
    off_l = off.tolist()
    mass_l = mass.tolist()
    sm = np.sqrt(mass)
    row = np.abs(diag) / mass
    scaled_off = np.abs(off) / (sm[:-1] * sm[1:])
    row[:-1] += scaled_off
    row[1:] += scaled_off
    lo, hi = 0.0, float(row.max())
    if sturm_count(diag_l, off_l, mass_l, 0.0) > 0:
        lo = -hi
    while hi - lo > rtol * max(abs(hi), 1e-300):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if sturm_count(diag_l, off_l, mass_l, mid) >= k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def pencil_eigenvector(diag, off, mass, lam, iters=3):
    """Inverse iteration for the eigenvector nearest lam (mass-normalized)."""
    n = len(diag)
    shift = lam * (1 + 1e-10) + 1e-14
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1, :] = diag - shift * mass
    ab[2, :-1] = off
    v = np.ones(n)
    for _ in range(iters):
        v = linalg.solve_banded((1, 1), ab, mass * v)
        v /= math.sqrt(float(np.dot(v * mass, v)))
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


def weighted_sl_eigen(p, q, a, b, bc, k=1, resolution=64, levels=4):
    """Richardson-extrapolated k-th eigenvalue of -(p g')' = lam q g on (a, b)."""
    if resolution < 8:
        raise ValueError("resolution too small")
    trace = []
    for j in range(levels):
        N = resolution * 2**j
        diag, off, mass, _ = assemble_pencil(p, q, a, b, bc, N)
        trace.append((N, pencil_eigenvalue(diag, off, mass, k)))
    extrap = []
    for j in range(1, levels):
        extrap.append((trace[j][0], (4 * trace[j][1] - trace[j - 1][1]) / 3))
    diffs = [abs(trace[j][1] - trace[j - 1][1]) for j in range(1, levels)]
    # differences below the roundoff floor may grow without signalling divergence
    floor = ROUNDOFF_FLOOR * max(1.0, abs(trace[-1][1]))
    if any(diffs[j] > diffs[j - 1] for j in range(1, len(diffs)) if diffs[j - 1] > floor):
        raise ConvergenceError(f"trace differences do not decrease: {diffs}")
    value = extrap[-1][1]
    residual = abs(extrap[-1][1] - extrap[-2][1]) if len(extrap) > 1 else diffs[-1]
    return EigenEstimate(value=value, residual=residual, trace=trace, extrapolated=extrap)


def cap_eigenpair(p: CapProblem, resolution: int = 128, levels: int = 4) -> CapEigenpair:
    """k-th eigenpair of the weighted cap problem -(sin^{n-2} g')' = lam sin^{n-2} g.

    The eigenfunction is sampled at the finest level and normalized so that
    omega_{n-2} * int g^2 sin^{n-2} t dt = 1.
    """
    if resolution < 64:
        raise ValueError("resolution must be >= 64")
    a, b = p.interval
    est = weighted_sl_eigen(p.weight, p.weight, a, b, p.boundary, p.k, resolution, levels)
    N = resolution * 2 ** (levels - 1)
    diag, off, mass, x = assemble_pencil(p.weight, p.weight, a, b, p.boundary, N)
    v = pencil_eigenvector(diag, off, mass, est.trace[-1][1])
    v = v / math.sqrt(sphere_area(p.n - 2))
    nodes = np.linspace(a, b, N + 1)
    vals = np.zeros(N + 1)
    lo = 1 if p.boundary[0] == "D" else 0
    vals[lo:lo + len(v)] = v
    return CapEigenpair(est, nodes, vals)


def cap_area(n: int, angle: float) -> float:
    """|Sigma| for the polar cap {angle from e_n < angle} on S^{n-1}."""
    val, _ = integrate.quad(lambda t: math.sin(t) ** (n - 2), 0.0, angle, epsabs=0, epsrel=1e-13)
    return sphere_area(n - 2) * val


def radial_annulus_closed_form(n: int, a: float, b: float) -> float:
    if not 0 < a < b:
        raise DomainError("need 0 < a < b")
    return ((n - 2) / 2) ** 2 + (math.pi / math.log(b / a)) ** 2


def radial_annulus_constant(n: int, a: float, b: float, resolution: int = 64, levels: int = 4):
    """Closed form and numeric minimum of int f'^2 r^{n-1} / int f^2 r^{n-3}.

    The numeric solve works in s = ln(r/a), where both weights become
    a^{n-2} e^{(n-2)s}.
    """
    closed = radial_annulus_closed_form(n, a, b)
    length = math.log(b / a)

    def w(s):
        return np.exp((n - 2) * s)

    est = weighted_sl_eigen(w, w, 0.0, length, ("D", "D"), 1, resolution, levels)
    return closed, est


def cone_hardy_constant(n: int, angle: float, resolution: int = 128) -> float:
    """(n-2)^2/4 + mu_1 of the polar cap of half-angle ``angle``."""
    mu = cap_eigenpair(CapProblem(n, angle, "cone-cap", 1), resolution).value
    return (n - 2) ** 2 / 4 + mu


def sharpness_quotient(n: int, eps: float) -> float:
    """Half-ball Hardy quotient of u = r^{-(n-2)/2+eps}(1-r) times the first
    hemisphere mode; integrals are taken in s = -ln r."""
    if not eps > 0:
        raise DomainError("eps must be positive (the integrals diverge otherwise)")
    if eps >= 0.5:
        raise DomainError("eps must be below 1/2")
    g = -(n - 2) / 2 + eps

    # with r = e^{-s}: u'^2 r^n = e^{-2 eps s} (g(1-r) - r)^2 and
    # u^2 r^{n-2} = e^{-2 eps s} (1-r)^2
    def grad2(s):
        r = math.exp(-s)
        return math.exp(-2 * eps * s) * (g * -math.expm1(-s) - r) ** 2

    def mass(s):
        return math.exp(-2 * eps * s) * math.expm1(-s) ** 2

    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    num, _ = integrate.quad(grad2, 0.0, np.inf, **opts)
    den, _ = integrate.quad(mass, 0.0, np.inf, **opts)
    return (num + (n - 1) * den) / den
