"""Iterated logarithms X_k, the series eta and B, and the constant kappa.

X_1(t) = 1/(1 - ln t) and X_{k+1} = X_k o X_1 on (0, 1].  The series

    eta(t) = sum_i X_1(t) ... X_i(t),      B(t) = sum_i X_1(t)^2 ... X_i(t)^2

converge for t in (0, 1), but only algebraically: along the orbit the gap
d_k = 1 - X_k(t) behaves like 2/k, so the products decay like k^-2 (eta) or
k^-4 (B) and a geometric tail estimate is not valid.  Instead the tail is
enclosed with closed-form super/sub-solutions of the functional equation

    F(t) = X_1(t)^p (1 + F(X_1(t)))       (p = 1 for eta, p = 2 for B)

written in the gap variable d = 1 - t.  See :func:`tail_enclosure`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "ToleranceNotReachable",
    "LogPoint",
    "SeriesValue",
    "eval_x",
    "prod_x",
    "x_sequence",
    "partial_sum",
    "series_array",
    "eta",
    "big_b",
    "tail_enclosure",
    "solve_kappa",
    "kappa_bisection",
    "kappa_secant",
    "kappa",
    "derivative_identity_report",
    "ENCLOSURE_GAP_MAX",
]

MAX_TERMS = 10**6

# Asymptotic coefficients of F(1 - d) = A/d + c0 + c1 d + c2 d^2 + c3 d^3 + ...
# obtained by formal matching in the functional equation.
_ASYMPTOTIC = {
    1: (2.0, (-7.0 / 6.0, -1.0 / 9.0, -157.0 / 2160.0, -125.0 / 2592.0)),
    2: (2.0 / 3.0, (-25.0 / 36.0, 1.0 / 10.0, 31.0 / 3240.0, -347.0 / 27216.0)),
}
# Truncated series is a supersolution on (0, ENCLOSURE_GAP_MAX]; subtracting
# _SUB_SHIFT[p] * d^4 gives a subsolution there (checked in the test-suite
# with 60-digit arithmetic).
_SUB_SHIFT = {1: 0.1, 2: 0.04}
ENCLOSURE_GAP_MAX = 0.25


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class ToleranceNotReachable(RuntimeError):
    """Series truncation needed more terms than the configured cap."""


@dataclass(frozen=True)
class LogPoint:
    t: float
    k: int = 1

    def __post_init__(self):
        _check_t(self.t)
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"depth must be a positive integer, got {self.k}")


@dataclass(frozen=True)
class SeriesValue:
    """Lower enclosure ``value`` and width ``tail_bound`` of a positive series.

    The exact sum lies in ``[value, value + tail_bound]``.
    """

    value: float
    tail_bound: float
    terms_used: int

    @property
    def upper(self) -> float:
        return self.value + self.tail_bound

    def as_dict(self) -> dict:
        return {"value": self.value, "tail_bound": self.tail_bound, "terms": self.terms_used}


def _check_t(t, open_right=False):
    if not (t > 0.0) or t > 1.0 or (open_right and t >= 1.0) or math.isnan(t):
        rng = "(0, 1)" if open_right else "(0, 1]"
        raise DomainError(f"t must lie in {rng}, got {t!r}")


def _first_gap(t):
    """Return (X_1(t), 1 - X_1(t)) without cancellation."""
    lt = -math.log(t)
    return 1.0 / (1.0 + lt), lt / (1.0 + lt)


def _next_gap(gap):
    """Map the gap d = 1 - X to the gap of X_1(X)."""
    u = -math.log1p(-gap)
    return 1.0 / (1.0 + u), u / (1.0 + u)


def eval_x(k: int, t: float) -> float:
    """X_k(t) by k - 1 compositions of X_1."""
    LogPoint(t, k)
    x, gap = _first_gap(t)
    for _ in range(k - 1):
        x, gap = _next_gap(gap)
    return x


def x_sequence(k: int, t: float) -> list[float]:
    """[X_1(t), ..., X_k(t)]."""
    LogPoint(t, k)
    x, gap = _first_gap(t)
    out = [x]
    for _ in range(k - 1):
        x, gap = _next_gap(gap)
        out.append(x)
    return out


def prod_x(i: int, t: float) -> float:
    """X_1(t) X_2(t) ... X_i(t)."""
    return math.prod(x_sequence(i, t))


def partial_sum(t: float, terms: int, power: int = 1) -> float:
    """Sum of the first ``terms`` products (X_1...X_i)^power."""
    _check_t(t, open_right=True)
    x, gap = _first_gap(t)
    p = 1.0
    s = 0.0
    for i in range(terms):
        if i:
            x, gap = _next_gap(gap)
        p *= x**power
        s += p
    return s


def _asymptotic_value(power, gap, shift=0.0):
    a, c = _ASYMPTOTIC[power]
    return a / gap + c[0] + gap * (c[1] + gap * (c[2] + gap * (c[3] - shift * gap)))


def tail_enclosure(power: int, gap: float) -> tuple[float, float]:
    """Bounds (lo, hi) on F(1 - gap) for 0 < gap <= ENCLOSURE_GAP_MAX.

    F is eta (power 1) or B (power 2).  If U satisfies
    U(s) >= X_1(s)^p (1 + U(X_1(s))) along an orbit, iterating the functional
    equation gives U - F = sum_j P_j * residual_j >= 0; the same argument with
    the reversed inequality gives the lower bound.
    """
    if not 0.0 < gap <= ENCLOSURE_GAP_MAX:
        raise DomainError(f"gap must lie in (0, {ENCLOSURE_GAP_MAX}], got {gap!r}")
    hi = _asymptotic_value(power, gap)
    lo = _asymptotic_value(power, gap, _SUB_SHIFT[power])
    return lo, hi


def _series(t, power, tol, max_terms):
    _check_t(t, open_right=True)
    if not tol > 0:
        raise ValueError("tol must be positive")
    x, gap = _first_gap(t)
    p = 1.0
    s = 0.0
    comp = 0.0
    n = 0
    while True:
        p *= x**power
        # Neumaier compensated summation
        tmp = s + p
        comp += (s - tmp) + p if abs(s) >= p else (p - tmp) + s
        s = tmp
        n += 1
        # the tail after n terms is p * F(X_n(t))
        if gap <= ENCLOSURE_GAP_MAX:
            width = p * _SUB_SHIFT[power] * gap**4
            if width <= tol:
                lo, hi = tail_enclosure(power, gap)
                s += comp
                # rounding allowance for the orbit and the products
                slack = 1e-15 * (s + p * hi)
                return SeriesValue(s + p * lo - slack, p * (hi - lo) + 2 * slack, n)
        if n >= max_terms:
            raise ToleranceNotReachable(
                f"series at t={t!r} needs more than {max_terms} terms for tol={tol!r}"
            )
        x, gap = _next_gap(gap)


def eta(t: float, tol: float = 1e-15, max_terms: int = MAX_TERMS) -> SeriesValue:
    """eta(t) = sum_i X_1(t)...X_i(t) for t in (0, 1)."""
    return _series(t, 1, tol, max_terms)


def big_b(t: float, tol: float = 1e-15, max_terms: int = MAX_TERMS) -> SeriesValue:
    """B(t) = sum_i X_1(t)^2...X_i(t)^2 for t in (0, 1)."""
    return _series(t, 2, tol, max_terms)


def series_array(t, power: int = 1, tol: float = 1e-15, max_terms: int = MAX_TERMS):
    """Vectorized eta (power 1) or B (power 2): arrays (value, tail_bound).

    Same enclosure as :func:`eta`; real or complex (complex-step) input.
    Complex input skips the rounding allowance.
    """
    t = np.asarray(t)
    cplx = np.iscomplexobj(t)
    flat = t.ravel()
    if not cplx and (np.any(flat <= 0) or np.any(flat >= 1)):
        raise DomainError("t must lie in (0, 1)")
    lt = -np.log(flat)
    x = 1.0 / (1.0 + lt)
    gap = lt / (1.0 + lt)
    p = np.ones_like(x)
    s = np.zeros_like(x)
    value = np.zeros_like(x)
    bound = np.zeros(flat.shape)
    active = np.ones(flat.shape, dtype=bool)
    a, c = _ASYMPTOTIC[power]
    shift = _SUB_SHIFT[power]
    for n in range(1, max_terms + 1):
        p = p * x**power
        s = s + p
        g = gap
        width = np.abs(p * shift * g**4)
        ready = active & (np.abs(g) <= ENCLOSURE_GAP_MAX) & (width <= tol)
        if np.any(ready):
            gr = g[ready]
            hi = a / gr + c[0] + gr * (c[1] + gr * (c[2] + gr * c[3]))
            lo = hi - shift * gr**4
            tot = s[ready] + p[ready] * hi
            slack = 0.0 if cplx else 1e-15 * np.abs(tot)
            value[ready] = s[ready] + p[ready] * lo - slack
            bound[ready] = np.abs(p[ready] * (hi - lo)) + 2 * slack
            active &= ~ready
        if not active.any():
            return value.reshape(t.shape), bound.reshape(t.shape)
        u = -np.log1p(-gap)
        x = 1.0 / (1.0 + u)
        gap = u / (1.0 + u)
    raise ToleranceNotReachable(f"series needs more than {max_terms} terms for tol={tol!r}")


def _eta_mid(t, tol):
    v = eta(t, tol=tol)
    return v.value + 0.5 * v.tail_bound


# eta(1e-4) < 1/4 < eta(1e-2), asserted in the tests
_T_BRACKET = (1e-4, 1e-2)


def kappa_bisection(tol: float = 1e-13) -> float:
    """kappa by bisection on the increasing map t -> eta(t)."""
    lo, hi = _T_BRACKET
    ftol = min(tol, 1e-14) * 0.1
    while hi - lo > 1e-17 * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        v = eta(mid, tol=ftol)
        if v.value > 0.25:
            hi = mid
        elif v.upper < 0.25:
            lo = mid
        else:
            # enclosure straddles 1/4; mid is as good as the arithmetic allows
            lo = hi = mid
            break
    return 2.0 / (lo + hi)


def kappa_secant(tol: float = 1e-13, max_iter: int = 60) -> float:
    """kappa by the secant method on log t -> eta(t) - 1/4."""
    ftol = min(tol, 1e-14) * 0.1
    a, b = math.log(_T_BRACKET[0]), math.log(_T_BRACKET[1])
    fa = _eta_mid(math.exp(a), ftol) - 0.25
    fb = _eta_mid(math.exp(b), ftol) - 0.25
    for _ in range(max_iter):
        if fb == fa:
            break
        c = b - fb * (b - a) / (fb - fa)
        a, fa = b, fb
        b = c
        fb = _eta_mid(math.exp(b), ftol) - 0.25
        if abs(fb) <= 0.05 * ftol or abs(b - a) < 1e-16:
            break
    return math.exp(-b)


def solve_kappa(tol: float = 1e-12, method: str = "bisection") -> float:
    """The unique kappa > 1 with eta(1/kappa) = 1/4 (residual below ``tol``)."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if method == "bisection":
        k = kappa_bisection(tol)
    elif method == "secant":
        k = kappa_secant(tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return k


_KAPPA_CACHE: dict = {}


def kappa() -> float:
    """Cached value of kappa at full double precision."""
    if "k" not in _KAPPA_CACHE:
        _KAPPA_CACHE["k"] = solve_kappa(1e-14)
    return _KAPPA_CACHE["k"]


def _dx_closed(k, t):
    xs = x_sequence(k, t)
    return math.prod(xs[:-1]) * xs[-1] ** 2 / t


def _deta_closed(t):
    e = _eta_mid(t, 1e-16)
    b = big_b(t, tol=1e-16)
    return (e * e + b.value + 0.5 * b.tail_bound) / (2.0 * t)


def _central(f, t, h):
    # use the representable displacement, not the requested one
    hp = (t + h) - t
    hm = t - (t - h)
    return (f(t + hp) - f(t - hm)) / (hp + hm)


def _richardson_derivative(f, t, h):
    return (4 * _central(f, t, h / 2) - _central(f, t, h)) / 3


def derivative_identity_report(grid, h_rel: float = 1e-2) -> float:
    """Worst relative error of the closed-form derivatives on ``grid``.

    ``grid`` holds pairs (k, t); k = 0 selects eta, k >= 1 selects X_k.
    Finite differences are central with one Richardson level and step
    h_rel * min(t, 1 - t).
    """
    worst = 0.0
    for k, t in grid:
        if not (1e-6 <= t <= 1 - 1e-6):
            raise DomainError(f"t={t!r} is closer than 1e-6 to an endpoint")
        h = h_rel * min(t, 1.0 - t)
        if k == 0:
            exact = _deta_closed(t)
            approx = _richardson_derivative(lambda s: _eta_mid(s, 1e-15), t, h)
        else:
            exact = _dx_closed(k, t)
            approx = _richardson_derivative(lambda s: eval_x(k, s), t, h)
        worst = max(worst, abs(approx - exact) / abs(exact))
    return worst
