"""Pointwise certificates and randomized remainder tests for the Hardy-type
inequalities with a boundary singularity.

Inequality ids
--------------
halfball-sobolev    |grad u|^2 - n^2/4 u^2/|x|^2 - c Sob(X_1^{(2n-2)/(n-2)})          on B_R^+
halfball-mlogs      ... - 1/4 sum_{i<=m} X_1^2..X_i^2 u^2/|x|^2 - c Sob((X_1..X_{m+1})^{...})
halfball-logseries  ... - 1/4 B u^2/|x|^2                                             X = X(|x|/R)
halfball-extra      ... - 1/4 B u^2/|x|^2 - u^2/(8 R^{1/2} |x|^{3/2})                 X = X(|x|/(kappa R))
domain-hardy        |grad u|^2 - n^2/4 u^2/|x|^2                     on B_D minus B(-rho e_n, rho)
domain-hardy-sobolev  ... - c Sob(X_1^{(2n-2)/(n-2)}),  X_1 = X_1(|x|/(3D))
domain-logseries    ... - 1/4 B u^2/|x|^2,  X = X(|x|/(3 kappa D))

Every integral is a radial (half-ball) or radial x polar (domain) tensor
Gauss rule; the quadrature error is the difference between m and 2m points
per panel plus the tail bounds of the log-weight series.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import optimize

from . import speclog
from .conformal import sigma_n
from .speclog import DomainError
from .sturm1d import CapProblem, cap_eigenpair, sphere_area

__all__ = [
    "INEQUALITY_IDS",
    "SOBOLEV_IDS",
    "SupportError",
    "InequalitySpec",
    "SeparableTrial",
    "sharpness_trial",
    "remainder",
    "remainder_terms",
    "random_trial",
    "random_trial_suite",
    "cert_gef",
    "tau_lower_bound",
    "tau_upper_bound",
    "counterexample_bound",
    "counterexample_threshold",
    "counterexample_grid",
    "div_field",
    "div_field_closed_form",
    "div_field_check",
    "interior_samples",
]

INEQUALITY_IDS = (
    "halfball-sobolev",
    "halfball-mlogs",
    "halfball-logseries",
    "halfball-extra",
    "domain-hardy",
    "domain-hardy-sobolev",
    "domain-logseries",
)
SOBOLEV_IDS = ("halfball-sobolev", "halfball-mlogs", "domain-hardy-sobolev")
WEIGHT_TOL = 1e-12
PANEL_WIDTH = 0.5  # in ln r


class SupportError(DomainError):
    """Trial function is not supported inside the domain of the inequality."""


@dataclass(frozen=True)
class InequalitySpec:
    id: str
    n: int = 3
    R: float = 1.0
    D: float = 1.0
    rho: float | None = None
    m: int = 1
    c: float = 0.0

    def __post_init__(self):
        if self.id not in INEQUALITY_IDS:
            raise DomainError(f"unknown inequality id {self.id!r}")
        if self.n < 3:
            raise DomainError("inequalities need n >= 3")
        if not (self.R > 0 and self.D > 0):
            raise DomainError("R and D must be positive")
        if self.m < 1:
            raise DomainError("m must be >= 1")
        if self.c < 0:
            raise DomainError("c must be nonnegative")
        if self.is_domain and self.rho is not None and self.rho < self.min_rho:
            raise DomainError(f"rho={self.rho} below the admissible minimum {self.min_rho}")

    @property
    def is_domain(self) -> bool:
        return self.id.startswith("domain-")

    @property
    def min_rho(self) -> float:
        if self.id == "domain-hardy":
            return self.D / tau_lower_bound(self.n)
        return self.D / sigma_n(self.n)

    @property
    def exterior_radius(self) -> float:
        return self.rho if self.rho is not None else self.min_rho

    @property
    def support_radius(self) -> float:
        return self.D if self.is_domain else self.R

    def as_dict(self):
        d = asdict(self)
        d["rho"] = self.exterior_radius if self.is_domain else None
        return d


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x), 6.0 * x * (1.0 - x)


@dataclass(frozen=True)
class SeparableTrial:
    """Radial profile v(r) = amp r^gamma P(ell) S_in(r) S_out(r).

    S_in rises from 0 at ``r_in[0]`` to 1 at ``r_in[1]`` (cubic smoothstep);
    S_out falls from 1 at ``r_out[0]`` to 0 at ``r_out[1]``, either by a
    smoothstep or, with ``outer="linear"``, as 1 - r/r_out[1] on the whole
    range.  P is a cubic in ell = ln(r/r_out[1]) / ln(r_in[0]/r_out[1]).
    """

    exponent: float
    r_in: tuple
    r_out: tuple
    poly: tuple = (0.0, 0.0, 0.0)
    outer: str = "smooth"
    amplitude: float = 1.0

    def __post_init__(self):
        a, b = self.r_in
        c, d = self.r_out
        if not 0 < a < b <= d:
            raise SupportError(f"need 0 < r_in[0] < r_in[1] <= r_out[1], got {self.r_in}, {self.r_out}")
        if self.outer == "smooth" and not b <= c < d:
            raise SupportError("smooth outer cut needs r_in[1] <= r_out[0] < r_out[1]")
        if self.outer not in ("smooth", "linear"):
            raise ValueError("outer must be 'smooth' or 'linear'")

    @property
    def breakpoints(self):
        a, b = self.r_in
        c, d = self.r_out
        pts = [a, b, d] if self.outer == "linear" else [a, b, c, d]
        return sorted(set(pts))

    @property
    def support(self):
        return self.r_in[0], self.r_out[1]

    def profile(self, r):
        """(v, dv/dr) at radii r."""
        sv, rdv = self.scaled_profile(np.log(r))
        base = r**self.exponent
        return sv * base, rdv * base / r

    def scaled_profile(self, s):
        """(v r^{-gamma}, r v' r^{-gamma}) at r = e^s; free of overflow for tiny r."""
        a, b = self.r_in
        c, d = self.r_out
        g = self.exponent
        r = np.exp(s)
        s_in, ds_in = _smoothstep((r - a) / (b - a))
        ds_in = ds_in * r / (b - a)
        if self.outer == "linear":
            s_out = np.clip(1.0 - r / d, 0.0, None)
            ds_out = np.where(r < d, -r / d, 0.0)
        else:
            s_out, ds_out = _smoothstep((d - r) / (d - c))
            ds_out = -ds_out * r / (d - c)
        scale = math.log(a / d)
        ell = (s - math.log(d)) / scale
        a1, a2, a3 = self.poly
        poly = 1.0 + ell * (a1 + ell * (a2 + ell * a3))
        dpoly = (a1 + ell * (2 * a2 + ell * 3 * a3)) / scale
        v = poly * s_in * s_out
        dv = g * v + dpoly * s_in * s_out + poly * ds_in * s_out + poly * s_in * ds_out
        return self.amplitude * v, self.amplitude * dv

    def describe(self):
        return {
            "exponent": self.exponent,
            "r_in": list(self.r_in),
            "r_out": list(self.r_out),
            "poly": list(self.poly),
            "outer": self.outer,
            "amplitude": self.amplitude,
        }


def sharpness_trial(n: int, eps: float, R: float = 1.0, inner: float = 1e-300) -> SeparableTrial:
    """r^{-(n-2)/2+eps}(1 - r/R), cut off (smoothly) below ``inner * R``."""
    if not 0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    return SeparableTrial(-(n - 2) / 2 + eps, (inner * R, 2 * inner * R), (2 * inner * R, R), outer="linear")


def _radial_rule(breaks, m):
    """Gauss nodes s = ln r and weights (for ds) on the support, panels uniform in s."""
    gx, gw = np.polynomial.legendre.leggauss(m)
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        la, lb = math.log(lo), math.log(hi)
        k = max(1, math.ceil((lb - la) / PANEL_WIDTH))
        edges = np.linspace(la, lb, k + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        nodes.append((mid + half * gx).ravel())
        weights.append((half * gw).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _x_chain(t, count):
    """[X_1(t), ..., X_count(t)] as arrays, via the cancellation-free gap."""
    lt = -np.log(t)
    xs = [1.0 / (1.0 + lt)]
    gap = lt / (1.0 + lt)
    for _ in range(count - 1):
        u = -np.log1p(-gap)
        xs.append(1.0 / (1.0 + u))
        gap = u / (1.0 + u)
    return xs


def _weights(spec: InequalitySpec, r):
    """Log weight (coefficient of u^2/|x|^2), its tail bound, Sobolev weight,
    and whether the |x|^{-3/2} term is present."""
    n = spec.n
    zero = np.zeros_like(r)
    log_w, log_err, sob_w = zero, zero, None
    p_exp = (2 * n - 2) / (n - 2)
    if spec.id in ("halfball-logseries", "halfball-extra", "domain-logseries"):
        scale = {"halfball-logseries": spec.R,
                 "halfball-extra": speclog.kappa() * spec.R,
                 "domain-logseries": 3 * speclog.kappa() * spec.D}[spec.id]
        val, err = speclog.series_array(r / scale, power=2, tol=WEIGHT_TOL)
        log_w, log_err = 0.25 * val, 0.25 * err
    elif spec.id == "halfball-mlogs":
        xs = _x_chain(r / spec.R, spec.m + 1)
        prod = np.ones_like(r)
        acc = np.zeros_like(r)
        for i in range(spec.m):
            prod = prod * xs[i] ** 2
            acc = acc + prod
        log_w = 0.25 * acc
        sob_w = np.prod(xs, axis=0) ** p_exp
    elif spec.id == "halfball-sobolev":
        sob_w = _x_chain(r / spec.R, 1)[0] ** p_exp
    elif spec.id == "domain-hardy-sobolev":
        sob_w = _x_chain(r / (3 * spec.D), 1)[0] ** p_exp
    return log_w, log_err, sob_w


def _hemisphere_moment(n, power):
    """int_{S^{n-1}_+} cos^power(theta) dS."""
    return sphere_area(n - 2) * 0.5 * math.exp(
        math.lgamma((power + 1) / 2) + math.lgamma((n - 1) / 2) - math.lgamma((power + n) / 2))


def _check_support(spec, u):
    lo, hi = u.support
    if hi > spec.support_radius * (1 + 1e-14):
        raise SupportError(f"trial support radius {hi} exceeds {spec.support_radius}")
    if spec.is_domain and hi >= 2 * spec.exterior_radius:
        raise SupportError("trial support reaches beyond the exterior ball diameter")


def _halfball_terms(spec, u, m):
    n = spec.n
    s, w = _radial_rule(u.breakpoints, m)
    r = np.exp(s)
    v, rdv = u.scaled_profile(s)
    g = u.exponent
    area = sphere_area(n - 1) / (2 * n)
    log_w, log_err, sob_w = _weights(spec, r)
    # dr/r^2 * r^{n-1} * r^{2 gamma} = r^{2 gamma + n - 2} ds
    hw = w * np.exp((2 * g + n - 2) * s)
    v2 = v * v
    t = {
        "gradient": area * float(np.dot(hw, rdv * rdv + (n - 1) * v2)),
        "hardy": area * float(np.dot(hw, v2)),
        "log": area * float(np.dot(hw, v2 * log_w)),
        "log_tail": area * float(np.dot(hw, v2 * log_err)),
        "extra": 0.0,
        "sobolev": 0.0,
    }
    if spec.id == "halfball-extra":
        t["extra"] = area / (8 * math.sqrt(spec.R)) * float(np.dot(hw * np.sqrt(r), v2))
    if sob_w is not None:
        p = 2 * n / (n - 2)
        pw = w * np.exp((p * g + n) * s)
        inner = _hemisphere_moment(n, p) * float(np.dot(pw, sob_w * np.abs(v) ** p))
        t["sobolev"] = inner ** ((n - 2) / n)
    return t


def _domain_terms(spec, u, m):
    """Warped mode u = v(r) cos(pi theta / (2 Theta(r))), Theta(r) = pi/2 + asin(r/(2 rho))."""
    n = spec.n
    rho = spec.exterior_radius
    sr, w = _radial_rule(u.breakpoints, m)
    r = np.exp(sr)
    v, rdv = u.scaled_profile(sr)
    g = u.exponent
    gx, gw = np.polynomial.legendre.leggauss(m)
    s = 0.5 * (gx + 1.0)
    ws = 0.5 * gw
    q = r / (2 * rho)
    big = 0.5 * math.pi + np.arcsin(q)
    rdbig = q / np.sqrt(1.0 - q * q)  # r Theta'(r)
    c = np.cos(0.5 * math.pi * s)
    dc = -0.5 * math.pi * np.sin(0.5 * math.pi * s)
    S2 = s[None, :]
    theta_w = big[:, None] * np.sin(big[:, None] * S2) ** (n - 2)  # dtheta sin^{n-2}
    # scaled by r^{-gamma}: r u_r and u_theta
    ru_r = rdv[:, None] * c - v[:, None] * dc * S2 * (rdbig / big)[:, None]
    u_t = v[:, None] * dc / big[:, None]
    W = (w * np.exp((2 * g + n - 2) * sr))[:, None] * ws[None, :] * theta_w * sphere_area(n - 2)
    log_w, log_err, sob_w = _weights(spec, r)
    u2 = (v[:, None] * c) ** 2
    t = {
        "gradient": float(np.sum(W * (ru_r**2 + u_t**2))),
        "hardy": float(np.sum(W * u2)),
        "log": float(np.sum(W * u2 * log_w[:, None])),
        "log_tail": float(np.sum(W * u2 * log_err[:, None])),
        "extra": 0.0,
        "sobolev": 0.0,
    }
    if sob_w is not None:
        p = 2 * n / (n - 2)
        PW = (w * np.exp((p * g + n) * sr))[:, None] * ws[None, :] * theta_w * sphere_area(n - 2)
        inner = float(np.sum(PW * sob_w[:, None] * np.abs(v[:, None] * c) ** p))
        t["sobolev"] = inner ** ((n - 2) / n)
    return t


def _combine(spec, t):
    return (t["gradient"] - spec.n**2 / 4 * t["hardy"] - t["log"] - t["extra"]
            - spec.c * t["sobolev"])


def remainder_terms(spec: InequalitySpec, u: SeparableTrial, quad: int = 16) -> dict:
    """All terms of the inequality for u, plus value and quadrature error."""
    if u.amplitude == 0.0:
        zero = dict.fromkeys(("gradient", "hardy", "log", "log_tail", "extra", "sobolev"), 0.0)
        return {**zero, "value": 0.0, "quad_error": 0.0}
    _check_support(spec, u)
    fn = _domain_terms if spec.is_domain else _halfball_terms
    coarse = fn(spec, u, quad)
    fine = fn(spec, u, 2 * quad)
    value = _combine(spec, fine)
    roundoff = 1e-13 * (fine["gradient"] + spec.n**2 / 4 * fine["hardy"])
    err = abs(value - _combine(spec, coarse)) + fine["log_tail"] + roundoff
    return {**fine, "value": value, "quad_error": err}


def remainder(spec: InequalitySpec, u: SeparableTrial, quad: int = 16):
    """(LHS - RHS, quadrature error) for the trial u."""
    t = remainder_terms(spec, u, quad)
    return t["value"], t["quad_error"]


def random_trial(rng: np.random.Generator, n: int, radius: float) -> SeparableTrial:
    gamma = -(n - 2) / 2 + rng.uniform(-0.4, 0.6)
    a = radius * 10 ** rng.uniform(-6, -2)
    b = a * rng.uniform(1.5, 10.0)
    d_lo = max(3 * b, 1e-2 * radius)
    d = math.exp(rng.uniform(math.log(d_lo), math.log(radius))) if d_lo < radius else radius
    c = max(d / rng.uniform(1.2, 3.0), b)
    poly = tuple(float(x) for x in rng.uniform(-0.5, 0.5, size=3))
    return SeparableTrial(float(gamma), (float(a), float(b)), (float(c), float(d)), poly)


def random_trial_suite(spec: InequalitySpec, count: int, seed: int, quad: int = 16,
                       probe_c: bool = False, keep: int = 5) -> dict:
    """Deterministic random separable trials; min remainder and violations.

    With ``probe_c`` the Sobolev coefficient is reported as the largest c for
    which every trial still has a nonnegative remainder.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if probe_c and spec.id not in SOBOLEV_IDS:
        raise DomainError(f"{spec.id} has no Sobolev term to probe")
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        u = random_trial(rng, spec.n, spec.support_radius)
        t = remainder_terms(spec, u, quad)
        rows.append((i, u, t))
    violations = [i for i, _, t in rows if t["value"] < -t["quad_error"]]
    rel = [t["value"] / t["gradient"] for _, _, t in rows]
    order = np.argsort(rel, kind="stable")
    worst = [{"index": int(rows[j][0]), "relative": rel[j], "value": rows[j][2]["value"],
              "quad_error": rows[j][2]["quad_error"], "trial": rows[j][1].describe()}
             for j in order[:keep]]
    k = int(np.argmin([t["value"] for _, _, t in rows]))
    report = {
        "inequality": spec.as_dict(),
        "count": count,
        "seed": seed,
        "quad": quad,
        "min_remainder": rows[k][2]["value"],
        "argmin": {"index": k, "trial": rows[k][1].describe()},
        "min_relative_remainder": float(rel[order[0]]),
        "max_quad_error": max(t["quad_error"] for _, _, t in rows),
        "violations": len(violations),
        "violating_indices": violations,
        "worst": worst,
    }
    if probe_c:
        base = replace(spec, c=0.0)
        ratios = []
        for _, u, t in rows:
            r0 = _combine(base, t) - t["quad_error"]
            ratios.append(r0 / t["sobolev"] if t["sobolev"] > 0 else math.inf)
        report["probe_c"] = float(min(ratios))
    return report


def cert_gef(n: int, grid: int = 10001) -> tuple[bool, float]:
    """n^2 r^{1/2} t^{1/2} (t+4)(t+2)^{1/2} <= 1 for 0 < t <= 1/(75 n^4 r), r = sigma_n.

    The left side is a product of increasing positive factors, so the maximum
    is at the right endpoint; the grid only confirms monotonicity.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    r = sigma_n(n)
    t_max = 1.0 / (75 * n**4 * r)
    t = np.linspace(0.0, t_max, grid)
    lhs = n * n * math.sqrt(r) * np.sqrt(t) * (t + 4) * np.sqrt(t + 2)
    monotone = bool(np.all(np.diff(lhs) >= 0))
    margin = 1.0 - float(lhs[-1])
    return bool(monotone and margin > 0 and lhs.max() <= 1.0), margin


def _tau_gap(t, n):
    """ln X_1(t/(2(t+1)))^2 - ln(n^2 t (t+2)); positive means the inequality holds."""
    s = t / (2 * (t + 1))
    return -2 * math.log1p(-math.log(s)) - math.log(n * n * t * (t + 2))


def tau_lower_bound(n: int) -> float:
    """First crossing of X_1^2(t/(2(t+1))) = n^2 t (t+2).

    On the bracket used, X_1(t/(2(t+1))) < 1/2, which makes the gap strictly
    decreasing in t; the root is therefore the first and only crossing.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    # X_1(s) < 1/2  <=>  s < e^{-1}; t/(2(t+1)) < e^{-1} for t < 2/(e - 2)
    hi = 0.5
    lo = 1e-300
    if not (_tau_gap(lo, n) > 0 > _tau_gap(hi, n)):
        raise RuntimeError("no sign change on the monotone bracket")
    return optimize.brentq(_tau_gap, lo, hi, args=(n,), xtol=1e-300, rtol=4 * np.finfo(float).eps)


def tau_upper_bound(n: int) -> float:
    if n < 2:
        raise DomainError("n must be >= 2")
    return 2.0 * math.exp(math.pi / math.sqrt(n - 1))


def _check_counterexample_args(n, theta, rho):
    if n < 2:
        raise DomainError("n must be >= 2")
    if not 0 < theta < math.pi / 2:
        raise DomainError(f"theta must lie in (0, pi/2), got {theta}")
    if not 0 < rho < 0.5:
        raise DomainError(f"rho must lie in (0, 1/2), got {rho}")


def counterexample_threshold(n: int, theta: float, lam1: float | None = None) -> float:
    """rho below which the shell test function beats n^2/4 on the cone-annulus domain."""
    if lam1 is None:
        lam1 = cap_eigenpair(CapProblem(n, theta, "example-cap")).value
    gap = n - 1 - lam1
    if gap <= 0:
        return 0.0
    return math.exp(-math.pi / math.sqrt(gap)) / (2 * math.cos(theta))


def counterexample_bound(n: int, theta: float, rho: float, lam1: float | None = None) -> dict:
    """Upper bound ((n-2)/2)^2 + (pi/ln(2 rho cos theta))^2 + lambda_1(n, theta)."""
    _check_counterexample_args(n, theta, rho)
    if lam1 is None:
        lam1 = cap_eigenpair(CapProblem(n, theta, "example-cap")).value
    bound = ((n - 2) / 2) ** 2 + (math.pi / math.log(2 * rho * math.cos(theta))) ** 2 + lam1
    threshold = n * n / 4
    thr_rho = counterexample_threshold(n, theta, lam1)
    cond = rho < thr_rho
    return {
        "n": n,
        "theta": theta,
        "rho": rho,
        "lambda1": lam1,
        "upper_bound": bound,
        "threshold": threshold,
        "rho_threshold": thr_rho,
        "below_threshold": cond,
        "implication_holds": (not cond) or bound < threshold,
    }


def counterexample_grid(n: int, thetas, rhos) -> dict:
    """Check below_threshold => bound < n^2/4 at every (theta, rho) pair; one cap solve per theta."""
    cells = 0
    premise = 0
    failures = []
    for theta in thetas:
        lam1 = cap_eigenpair(CapProblem(n, float(theta), "example-cap")).value
        for rho in rhos:
            rep = counterexample_bound(n, float(theta), float(rho), lam1)
            cells += 1
            premise += rep["below_threshold"]
            if not rep["implication_holds"]:
                failures.append((float(theta), float(rho)))
    return {"cells": cells, "premise_true": premise, "failures": failures, "holds": not failures}


def interior_samples(n: int, R: float, count: int, seed: int, margin: float = 1e-3):
    """Uniform points of B_R^+ at distance >= margin from x_n = 0, 0 and |x| = R."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        x = rng.uniform(-R, R, size=n)
        x[-1] = abs(x[-1])
        r = np.linalg.norm(x)
        if x[-1] >= margin and margin <= r <= R - margin:
            out.append(x)
    return np.array(out)


def div_field(x, n: int, R: float):
    """The vector field T at points x (shape (m, n)); complex input allowed."""
    r2 = np.sum(x * x, axis=-1)
    r = np.sqrt(r2)
    eta_val, _ = speclog.series_array(r / (speclog.kappa() * R), power=1, tol=1e-17)
    coef = (n / 2 + eta_val / 2) / r2 + 1.0 / (2 * (math.sqrt(R) - np.sqrt(r)) * r**1.5)
    T = coef[..., None] * x
    T[..., -1] = T[..., -1] - 1.0 / x[..., -1]
    return T


def div_field_closed_form(x, n: int, R: float):
    r2 = np.sum(x * x, axis=-1)
    r = np.sqrt(r2)
    t = r / (speclog.kappa() * R)
    eta_val, _ = speclog.series_array(t, power=1, tol=1e-17)
    b_val, _ = speclog.series_array(t, power=2, tol=1e-17)
    return (n * n / 4 + b_val / 4) / r2 + (0.5 - eta_val) / (2 * (math.sqrt(R) - r ** 0.5) * r**1.5)


def div_field_check(n: int, R: float, samples, rel_step: float = 2e-3) -> dict:
    """Max relative discrepancy between FD(div T) - |T|^2 and the closed form.

    Central differences with one Richardson level; the step at each sample is
    ``rel_step`` times its distance to the singular set.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.shape[-1] != n:
        raise DomainError("sample dimension does not match n")
    r = np.linalg.norm(x, axis=1)
    dist = np.minimum.reduce([x[:, -1], r, R - r])
    if np.any(dist < 1e-3 * (1 - 1e-12)):
        raise DomainError("samples must stay 1e-3 away from x_n = 0, the origin and |x| = R")
    h = rel_step * dist
    div = np.zeros(len(x))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0

        def cd(step):
            xp = x + step[:, None] * e
            xm = x - step[:, None] * e
            return (div_field(xp, n, R)[:, j] - div_field(xm, n, R)[:, j]) / (2 * step)

        div += (4 * cd(h / 2) - cd(h)) / 3
    T = div_field(x, n, R)
    lhs = div - np.sum(T * T, axis=1)
    closed = div_field_closed_form(x, n, R)
    rel = np.abs(lhs - closed) / np.abs(closed)
    floor = n * n / (4 * r * r)
    return {
        "n": n,
        "R": R,
        "samples": len(x),
        "max_rel_discrepancy": float(rel.max()),
        "closed_form_above_hardy": bool(np.all(closed >= floor)),
        "min_closed_over_hardy": float(np.min(closed / floor)),
    }
