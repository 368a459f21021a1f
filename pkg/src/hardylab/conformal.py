"""Kelvin transform and the Moebius maps S, T of the upper half-space.

Points are arrays whose last axis holds coordinates; the last coordinate is
the e_n direction.  All maps accept a single point (shape (n,)) or a batch
(shape (m, n)).

    S(v) = (2 v', 1 - |v|^2) / |v + e_n|^2        (involution, R^n_+ -> unit ball)
    T(v) = (2 v', 1 - |v|^2) / |v - e_n|^2        (R^n_+ -> exterior of the ball)
    K(x) = x / |x|^2
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .speclog import DomainError

__all__ = [
    "BallSpec",
    "GaussianBump",
    "kelvin",
    "map_s",
    "map_t",
    "inv_t",
    "jac_kelvin",
    "jac_s",
    "jac_t",
    "dmap",
    "fd_jacobian",
    "image_ball",
    "pullback_energy_pair",
    "sigma_n",
]

SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class BallSpec:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("radius must be positive")


def _as_points(v):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] < 2:
        raise DomainError("dimension must be at least 2")
    return v


def _unit_n(v):
    e = np.zeros(v.shape[-1])
    e[-1] = 1.0
    return e


def _guard(dist2, what):
    if np.any(dist2 < SINGULAR_TOL**2):
        raise DomainError(f"point within {SINGULAR_TOL} of the excluded point {what}")


def kelvin(x):
    x = _as_points(x)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    _guard(r2, "0")
    return x / r2


def _mobius(v, sign):
    # (2v', 1-|v|^2) / |v - sign*e_n|^2
    v = _as_points(v)
    e = _unit_n(v)
    d = v - sign * e
    q = np.sum(d * d, axis=-1, keepdims=True)
    _guard(q, "e_n" if sign > 0 else "-e_n")
    num = 2.0 * v
    num[..., -1] = 1.0 - np.sum(v * v, axis=-1)
    return num / q


def map_s(v):
    return _mobius(v, -1.0)


def map_t(v):
    v = _as_points(v)
    e = _unit_n(v)
    d = v + e
    _guard(np.sum(d * d, axis=-1), "-e_n")
    return _mobius(v, 1.0)


def inv_t(x):
    """T^{-1}(x) = (2x', |x|^2 - 1) / (|x'|^2 + (x_n + 1)^2)."""
    x = _as_points(x)
    e = _unit_n(x)
    d = x + e
    q = np.sum(d * d, axis=-1, keepdims=True)
    _guard(q, "-e_n")
    num = 2.0 * x
    num[..., -1] = np.sum(x * x, axis=-1) - 1.0
    return num / q


def jac_t(v):
    """|det DT(v)| = 2^n / |v - e_n|^{2n}."""
    v = _as_points(v)
    n = v.shape[-1]
    d = v - _unit_n(v)
    q = np.sum(d * d, axis=-1)
    _guard(q, "e_n")
    return 2.0**n / q**n


def jac_s(v):
    v = _as_points(v)
    n = v.shape[-1]
    d = v + _unit_n(v)
    q = np.sum(d * d, axis=-1)
    _guard(q, "-e_n")
    return 2.0**n / q**n


def jac_kelvin(x):
    x = _as_points(x)
    n = x.shape[-1]
    r2 = np.sum(x * x, axis=-1)
    _guard(r2, "0")
    return r2 ** (-n)


def dmap(which: str, v):
    """Analytic derivative matrix D(map)(v), shape (..., n, n)."""
    v = _as_points(v)
    n = v.shape[-1]
    eye = np.eye(n)
    if which == "kelvin":
        r2 = np.sum(v * v, axis=-1)[..., None, None]
        return (eye - 2.0 * v[..., :, None] * v[..., None, :] / r2) / r2
    sign = {"S": -1.0, "T": 1.0}[which]
    e = _unit_n(v)
    d = v - sign * e
    q = np.sum(d * d, axis=-1)[..., None, None]
    num = 2.0 * v
    num[..., -1] = 1.0 - np.sum(v * v, axis=-1)
    dnum = np.broadcast_to(2.0 * eye, v.shape[:-1] + (n, n)).copy()
    dnum[..., -1, :] = -2.0 * v
    grad_q = 2.0 * d
    return dnum / q - num[..., :, None] * grad_q[..., None, :] / q**2


def fd_jacobian(f: Callable, v, step: float = 1e-5):
    """Central-difference Jacobian with one Richardson level."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0

        def cd(h):
            return (f(v + h * e) - f(v - h * e)) / (2 * h)

        cols.append((4 * cd(step / 2) - cd(step)) / 3)
    return np.stack(cols, axis=-1)


def image_ball(r: float, n: int = 3) -> BallSpec:
    """T(B(r)) = B(((1 + r^2)/(1 - r^2)) e_n, 2r/(1 - r^2)) for 0 < r < 1."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"r must lie in (0, 1), got {r}")
    center = np.zeros(n)
    center[-1] = (1 + r * r) / (1 - r * r)
    return BallSpec(center=center, radius=2 * r / (1 - r * r))


def sigma_n(n: int) -> float:
    if n < 2:
        raise DomainError("n must be >= 2")
    return 1.0 / (math.sqrt(75.0) * n * n)


@dataclass(frozen=True)
class GaussianBump:
    """F(x) = amplitude * exp(-|x - center|^2 / (2 width^2)) (optionally times a
    linear modulation 1 + tilt . (x - center)).

    Treated as compactly supported on B(center, cutoff * width); outside that
    ball it is below 5e-9 relative.
    """

    center: tuple
    width: float
    amplitude: float = 1.0
    tilt: tuple | None = None
    cutoff: float = 6.2

    def value_grad(self, x):
        c = np.asarray(self.center, dtype=float)
        d = x - c
        g = self.amplitude * np.exp(-np.sum(d * d, axis=-1) / (2 * self.width**2))
        grad = -d / self.width**2 * g[..., None]
        if self.tilt is not None:
            a = np.asarray(self.tilt, dtype=float)
            m = 1.0 + d @ a
            grad = grad * m[..., None] + g[..., None] * a
            g = g * m
        return g, grad

    @property
    def support_radius(self):
        return self.cutoff * self.width


_MAPS = {"kelvin": kelvin, "S": map_s, "T": map_t}
_INVERSES = {"kelvin": kelvin, "S": map_s, "T": inv_t}
_JACS = {"kelvin": jac_kelvin, "S": jac_s, "T": jac_t}


def _conformal_factor(which, v):
    """a(v) = |J(v)|^{(n-2)/(2n)} and its gradient."""
    n = v.shape[-1]
    p = (n - 2) / 2.0
    if which == "kelvin":
        r2 = np.sum(v * v, axis=-1)
        a = r2 ** (-p)
        grad = -2.0 * p * v * (r2 ** (-p - 1))[..., None]
        return a, grad
    sign = {"S": -1.0, "T": 1.0}[which]
    d = v - sign * _unit_n(v)
    q = np.sum(d * d, axis=-1)
    # a = (2/q)^p
    a = (2.0 / q) ** p
    grad = -p * a[..., None] * 2.0 * d / q[..., None]
    return a, grad


def _source_box(which, f: GaussianBump, n, samples=4000, seed=0):
    """Bounding box of the preimage of the numerical support of f."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((samples, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    pts = np.asarray(f.center, dtype=float) + f.support_radius * z
    pre = _INVERSES[which](pts)
    lo, hi = pre.min(axis=0), pre.max(axis=0)
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def pullback_energy_pair(f, which: str, quad: int | None = None, n: int | None = None,
                         source_domain: Callable | None = None, chunk: int = 200_000):
    """Dirichlet energies of G(v) = F(map(v)) |J(v)|^{(n-2)/(2n)} and of F.

    Both integrals use one tensor Gauss-Legendre rule with ``quad`` nodes per
    axis (40 for n <= 3, 36 otherwise) on a box containing the preimage of supp F; the image energy is
    computed through the change of variables x = map(v).  ``source_domain``
    optionally checks that the preimage lies in the intended source set
    (e.g. the half-ball) and raises a support error otherwise.
    """
    if f is None or (isinstance(f, GaussianBump) and f.amplitude == 0.0):
        return 0.0, 0.0
    if which not in _MAPS:
        raise DomainError(f"unknown map {which!r}")
    n = n or len(f.center)
    if quad is None:
        quad = 40 if n <= 3 else 36
    lo, hi = _source_box(which, f, n)
    if source_domain is not None:
        corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)])).reshape(n, -1).T
        if not np.all(source_domain(corners)):
            raise DomainError("trial function does not vanish near the boundary of the source domain")
    gx, gw = np.polynomial.legendre.leggauss(quad)
    axes = [0.5 * (a + b) + 0.5 * (b - a) * gx for a, b in zip(lo, hi)]
    wts = [0.5 * (b - a) * gw for a, b in zip(lo, hi)]
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(n, -1).T
    w = np.ones(1)
    for wi in wts:
        w = np.multiply.outer(w, wi).ravel()
    e_src = 0.0
    e_img = 0.0
    fmap = _MAPS[which]
    for s in range(0, len(grid), chunk):
        v = grid[s:s + chunk]
        ws = w[s:s + chunk]
        x = fmap(v)
        fv, fg = f.value_grad(x)
        dm = dmap(which, v)
        a, ga = _conformal_factor(which, v)
        # grad G = a * DM^T grad F(x) + F(x) grad a
        gg = a[:, None] * np.einsum("mij,mi->mj", dm, fg) + fv[:, None] * ga
        e_src += float(np.dot(ws, np.sum(gg * gg, axis=1)))
        e_img += float(np.dot(ws, np.sum(fg * fg, axis=1) * _JACS[which](v)))
    return e_src, e_img
