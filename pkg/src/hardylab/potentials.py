"""Ground-state weights for domains with an exterior ball at the origin,
subcriticality of potentials, C_r(V) probes and cone Sobolev bounds.

Standing geometry: the exterior ball at 0 is B(-2 rho e_n, 2 rho); the
ground state

    phi(x) = (|x + rho e_n|^2 - rho^2) / (|x|^{n/2} |x + 2 rho e_n|^{n/2})

vanishes on the smaller sphere |x + rho e_n| = rho and is positive outside it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import speclog
from .certificates import tau_lower_bound
from .femlab import MeridianDomain, assemble, build_meridian_mesh
from .femlab.eigen import IndefiniteFormError, negative_pivots, smallest_eig
from .femlab.mesh import mesh_levels
from .speclog import DomainError
from .sturm1d import CapProblem, cap_area, cap_eigenpair, sphere_area

__all__ = [
    "InconclusiveError",
    "GroundStateWeights",
    "PotentialSpec",
    "AxialBump",
    "phi",
    "q",
    "phi_m",
    "q_m",
    "brace_factor",
    "groundstate_identity_check",
    "subcritical_test",
    "cr_v_estimate",
    "sobolev_constant",
    "cone_sobolev_bound",
]

EXCLUDED_TOL = 1e-12


class InconclusiveError(ValueError):
    """Potential lacks the metadata needed for a decision."""


@dataclass(frozen=True)
class GroundStateWeights:
    n: int
    rho: float
    m: int = 0
    D: float = 1.0
    D_tilde: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("n must be >= 2")
        if not self.rho > 0:
            raise DomainError("rho must be positive")
        if self.m < 0:
            raise DomainError("m must be >= 0")
        if self.D_tilde is not None and self.D_tilde < self.D:
            raise DomainError("D_tilde must be >= D")

    @property
    def log_scale(self) -> float:
        return 3 * speclog.kappa() * (self.D_tilde if self.D_tilde is not None else self.D)


def _pieces(x, w: GroundStateWeights):
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    shifted = x.copy()
    shifted[..., -1] += 2 * w.rho
    f2 = np.sum(shifted * shifted, axis=-1)  # |x + 2 rho e_n|^2
    num = r2 + 2 * w.rho * x[..., -1]  # |x + rho e_n|^2 - rho^2
    if np.any(r2 < EXCLUDED_TOL**2):
        raise DomainError("x = 0 is excluded")
    if np.any(num < -EXCLUDED_TOL * np.maximum(r2, 1.0)):
        raise DomainError("x lies inside the ball |x + rho e_n| < rho")
    return x, r2, f2, num


def phi(x, w: GroundStateWeights):
    _, r2, f2, num = _pieces(x, w)
    return num / (r2 ** (w.n / 4) * f2 ** (w.n / 4))


def q(x, w: GroundStateWeights):
    """(n^2/4)(|x|^2 + 4 rho x_n) / (|x|^2 |x + 2 rho e_n|^2)."""
    x, r2, f2, _ = _pieces(x, w)
    return w.n**2 / 4 * (r2 + 4 * w.rho * x[..., -1]) / (r2 * f2)


def _x_products(x, w):
    r = np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))
    t = r / w.log_scale
    if np.any(t >= 1):
        raise DomainError("|x| must stay below 3 kappa D_tilde")
    prods = []
    lt = -np.log(t)
    xk = 1.0 / (1.0 + lt)
    gap = lt / (1.0 + lt)
    p = np.ones_like(t)
    for _ in range(w.m):
        p = p * xk
        prods.append(p)
        u = -np.log1p(-gap)
        xk = 1.0 / (1.0 + u)
        gap = u / (1.0 + u)
    return prods


def phi_m(x, w: GroundStateWeights):
    """phi * prod_{i<=m} X_i^{-1/2}(|x| / (3 kappa D_tilde))."""
    base = phi(x, w)
    if w.m == 0:
        return base
    prods = _x_products(x, w)
    return base / np.sqrt(prods[-1])


def brace_factor(x, w: GroundStateWeights):
    """(n/2)(|x|^2 + 2 rho x_n)/|x + 2 rho e_n|^2 - |x|^2/(|x|^2 + 2 rho x_n)."""
    x, r2, f2, num = _pieces(x, w)
    return w.n / 2 * num / f2 - r2 / num


def q_m(x, w: GroundStateWeights):
    base = q(x, w)
    if w.m == 0:
        return base
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    total = np.sum(_x_products(x, w), axis=0)
    return base + brace_factor(x, w) / r2 * total


@dataclass(frozen=True)
class AxialBump:
    """w(x) = amplitude (1 - |x - c|^2/a^2)^power on B(c, a), c = (0, ..., 0, center)."""

    center: float
    radius: float
    amplitude: float = 1.0
    power: int = 4

    def value_grad(self, x):
        c = np.zeros(x.shape[-1])
        c[-1] = self.center
        d = x - c
        t = 1.0 - np.sum(d * d, axis=-1) / self.radius**2
        t = np.maximum(t, 0.0)
        val = self.amplitude * t**self.power
        grad = (self.amplitude * self.power * t ** (self.power - 1) * (-2.0 / self.radius**2))[..., None] * d
        return val, grad


def _grad_phi(x, w):
    """phi and its gradient (closed form)."""
    _, r2, f2, num = _pieces(x, w)
    n = w.n
    val = num / (r2 ** (n / 4) * f2 ** (n / 4))
    shifted = x.copy()
    shifted[..., -1] += 2 * w.rho
    dnum = 2 * x.copy()
    dnum[..., -1] += 2 * w.rho
    g = dnum / num[..., None] - n / 2 * x / r2[..., None] - n / 2 * shifted / f2[..., None]
    return val, val[..., None] * g


def _meridian_nodes(bump: AxialBump, n: int, quad: int):
    """Points (in R^n, meridian plane) and weights for int over B(c, a), axisymmetric."""
    gx, gw = np.polynomial.legendre.leggauss(quad)
    r = 0.5 * bump.radius * (gx + 1)
    wr = 0.5 * bump.radius * gw
    psi = 0.5 * math.pi * (gx + 1)
    wpsi = 0.5 * math.pi * gw
    R, P = np.meshgrid(r, psi, indexing="ij")
    W = np.outer(wr, wpsi) * R * (R * np.sin(P)) ** (n - 2) * sphere_area(n - 2)
    pts = np.zeros(R.shape + (n,))
    pts[..., 0] = R * np.sin(P)
    pts[..., -1] = bump.center + R * np.cos(P)
    return pts.reshape(-1, n), W.ravel()


def _identity_sides(bump, w, quad):
    pts, W = _meridian_nodes(bump, w.n, quad)
    wv, wg = bump.value_grad(pts)
    ph, gph = _grad_phi(pts, w)
    gu = gph * wv[:, None] + ph[:, None] * wg
    lhs = float(W @ np.sum(gu * gu, axis=1))
    r2 = np.sum(pts * pts, axis=1)
    shifted = pts.copy()
    shifted[:, -1] += 2 * w.rho
    f2 = np.sum(shifted * shifted, axis=1)
    rhs = float(W @ (ph**2 * np.sum(wg * wg, axis=1))) + w.n**2 * w.rho**2 * float(W @ (ph**2 * wv**2 / (r2 * f2)))
    return lhs, rhs


def groundstate_identity_check(wfun: AxialBump | None, w: GroundStateWeights, quad: int = 48) -> dict:
    """Both sides of int |grad(phi w)|^2 = int phi^2 |grad w|^2 + n^2 rho^2 int phi^2 w^2/(|x|^2|x+2rho e_n|^2)."""
    if wfun is None or wfun.amplitude == 0.0:
        return {"lhs": 0.0, "rhs": 0.0, "rel_err": 0.0, "self_convergence": 0.0, "quad": quad}
    # B(c e_n, a) avoids 0 and B(-2 rho e_n, 2 rho) iff c > a
    if wfun.center - wfun.radius <= 0:
        raise DomainError("bump support must stay inside the domain, away from 0 and the exterior ball")
    lhs, rhs = _identity_sides(wfun, w, quad)
    lhs2, rhs2 = _identity_sides(wfun, w, 2 * quad)
    return {
        "lhs": lhs2,
        "rhs": rhs2,
        "rel_err": abs(lhs2 - rhs2) / abs(lhs2),
        "self_convergence": abs(lhs2 - lhs) / abs(lhs2),
        "quad": 2 * quad,
    }


@dataclass(frozen=True)
class PotentialSpec:
    """family: 'power' (|x|^-s), 'logweighted' (X_1^alpha(|x|/D)/|x|^2) or 'tabulated'.

    A tabulated potential may carry ``exponent`` and ``log_power`` metadata
    describing its majorant |x|^{-exponent} X_1^{log_power}(|x|/D).
    """

    family: str
    s: float = 2.0
    alpha: float = 0.0
    D: float = 1.0
    exponent: float | None = None
    log_power: float | None = None
    table: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.family not in ("power", "logweighted", "tabulated"):
            raise DomainError(f"unknown potential family {self.family!r}")
        if not self.D > 0:
            raise DomainError("D must be positive")

    def majorant(self):
        """(power of 1/|x|, power of X_1)."""
        if self.family == "power":
            return self.s, 0.0
        if self.family == "logweighted":
            return 2.0, self.alpha
        if self.exponent is None:
            raise InconclusiveError("tabulated potential without singularity metadata")
        return self.exponent, self.log_power or 0.0

    def meridian(self):
        """V(s, z) for femlab assembly."""
        p, a = self.majorant()
        if self.family == "tabulated":
            raise InconclusiveError("tabulated potentials are not evaluated on meshes")
        D = self.D

        def V(s, z):
            r = np.hypot(s, z)
            out = r ** (-p)
            if a:
                out = out * (1.0 / (1.0 - np.log(r / D))) ** a
            return out

        V.__name__ = self.family
        return V


def subcritical_test(V: PotentialSpec, n: int, tol: float = 0.0) -> dict:
    """Classify int_{B_D} V^{n/2} X_1^{1-n}(|x|/D) dx by its radial reduction.

    With V = |x|^{-p} X_1^a the radial integrand is r^{n-1-pn/2} X_1^{an/2+1-n};
    for p = 2 the substitution dX_1 = X_1^2 dt/t turns it into X^{beta-2} dX
    with beta = a n/2 + 1 - n.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    p, a = V.majorant()
    sphere = sphere_area(n - 1)
    power = n - p * n / 2  # exponent of r in r^{n-1} V^{n/2}, plus one
    beta = a * n / 2 + 1 - n
    out = {"family": V.family, "n": n, "radial_power": power, "beta": beta, "tol": tol}
    if abs(power) <= tol:
        if beta > 1:
            radial = V.D**power / (beta - 1)
            out.update(classification="finite", radial_integral=radial, estimate=sphere * radial)
        elif beta == 1:
            out.update(classification="infinite", divergence="log(log(D/eps))")
        else:
            out.update(classification="infinite", divergence=f"log(D/eps)^{1 - beta:g}")
        return out
    if power > 0:
        # int_0^inf D^power e^{-power y} (1+y)^{-beta}... with X_1 = 1/(1+y), r = D e^{-y}
        k = -beta
        val = _exp_poly_integral(power, k) * V.D**power
        out.update(classification="finite", radial_integral=val, estimate=sphere * val)
        return out
    out.update(classification="infinite", divergence=f"eps^{power:g}")
    return out


def _exp_poly_integral(a: float, k: float) -> float:
    """int_0^inf e^{-a y} (1 + y)^k dy for a > 0."""
    if k == 0:
        return 1.0 / a
    # substitute u = a(1+y): e^a a^{-k-1} Gamma(k+1, a)
    if k > -1:
        return math.exp(a) * a ** (-k - 1) * special.gamma(k + 1) * special.gammaincc(k + 1, a)
    from scipy import integrate
    val, _ = integrate.quad(lambda y: math.exp(-a * y) * (1 + y) ** k, 0, math.inf, epsabs=0, epsrel=1e-12)
    return val


def cr_v_estimate(V: PotentialSpec, r: float, levels: int = 3, n: int = 3, rho: float | None = None,
                  h: float = 0.25, tol: float = 1e-9) -> dict:
    """Upper bounds on C_r(V) = inf (int |grad u|^2 - n^2/4 int u^2/|x|^2) / int V u^2
    over B_r minus B(-2 rho e_n, 2 rho), one per uniform refinement level.

    rho defaults to 1/(2 tau*) with tau* the certified lower bound, which keeps
    the numerator nonnegative on every B_r with r <= 1.
    """
    if not 0 < r:
        raise DomainError("r must be positive")
    if rho is None:
        rho = 1.0 / (2 * tau_lower_bound(n))
    domain = MeridianDomain.ball_minus_ball(r, rho)
    base = build_meridian_mesh(domain, h)
    Vfun = V.meridian()
    rows = []
    for lvl, mesh in enumerate(mesh_levels(base, levels)):
        hardy = assemble(mesh, n, "hardy")
        pot = assemble(mesh, n, Vfun)
        A = (hardy.K - n * n / 4 * hardy.M).tocsc()
        neg = negative_pivots(A)
        if neg:
            raise IndefiniteFormError(f"numerator form has {neg} negative pivots at level {lvl}; refine")
        est = smallest_eig(A, pot.M, tol=tol)
        rows.append((lvl, mesh.max_edge, hardy.dofs, est.value, est.residual))
    return {"family": V.family, "r": r, "rho": rho, "n": n, "trace": rows, "value": rows[-1][3]}


def sobolev_constant(n: int) -> float:
    """pi n (n-2) (Gamma(n/2)/Gamma(n))^{2/n}."""
    if n < 3:
        raise DomainError("n must be >= 3")
    return math.pi * n * (n - 2) * math.exp(2.0 / n * (math.lgamma(n / 2) - math.lgamma(n)))


def _eigen_lp(n, angle, p):
    """int_Sigma |phi_1|^p dS for the L^2-normalized first cap mode."""
    pair = cap_eigenpair(CapProblem(n, angle, "cone-cap"))
    t, g = pair.nodes, pair.values
    gx, gw = np.polynomial.legendre.leggauss(4)
    a, b = t[:-1], t[1:]
    total = 0.0
    for x, wq in zip(gx, gw):
        lam = 0.5 * (x + 1)
        tt = a + lam * (b - a)
        gg = g[:-1] + lam * (g[1:] - g[:-1])
        total += wq * 0.5 * np.sum((b - a) * np.abs(gg) ** p * np.sin(tt) ** (n - 2))
    return sphere_area(n - 2) * total


def cone_sobolev_bound(n: int, angle: float) -> dict:
    """Coarse and sharp upper bounds for the Sobolev coefficient on the cone over a polar cap.

    sharp  = w^{-2/n} (n-2)^{-2/n} S_n / (int |phi_1|^{2n/(n-2)})^{(n-2)/n}
    coarse = w^{-2/n} (n-2)^{-2/n} S_n |Sigma|^{2/n}          (w = omega_{n-1})
    Hoelder with int phi_1^2 = 1 gives sharp <= coarse.
    """
    if n < 3:
        raise DomainError("n must be >= 3")
    if not 0 < angle < math.pi:
        raise DomainError("angle must lie in (0, pi)")
    S = sobolev_constant(n)
    om = sphere_area(n - 1)
    area = cap_area(n, angle)
    p = 2 * n / (n - 2)
    lp = _eigen_lp(n, angle, p)
    pref = om ** (-2 / n) * (n - 2) ** (-2 / n) * S
    coarse = pref * area ** (2 / n)
    sharp = pref / lp ** ((n - 2) / n)
    return {
        "n": n,
        "angle": angle,
        "area": area,
        "sobolev_constant": S,
        "eigen_lp": lp,
        "coarse": coarse,
        "sharp": sharp,
        "coarse_alt": om ** (-2 * (n - 1) / n) * (n - 2) ** (-2 / n) * S * area ** (2 / n),
        "sharp_alt": om ** (-2 / n) * (n - 2) ** (-2 * (n - 1) / n) * S / lp ** ((n - 2) / n),
        "sharp_le_coarse": sharp <= coarse * (1 + 1e-12),
    }
