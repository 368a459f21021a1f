import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hardylab import certificates as ce
from hardylab import speclog
from hardylab.speclog import DomainError


def scan_first_crossing(n, hi, points, chunk=1_000_000):
    """First sign change of X_1^2(t/(2(t+1))) - n^2 t (t+2) on a uniform grid."""
    t_all = np.linspace(hi / points, hi, points)
    prev = None
    for k in range(0, points, chunk):
        t = t_all[k:k + chunk]
        s = t / (2 * (t + 1))
        gap = 1 / (1 - np.log(s)) ** 2 - n * n * t * (t + 2)
        neg = np.nonzero(gap < 0)[0]
        if len(neg):
            i = neg[0]
            lo = t[i - 1] if i > 0 else prev
            return lo, t[i], t_all
        prev = t[-1]
    raise AssertionError("no crossing")


def test_tau_lower_bound_against_fine_scan():
    lo, hi, grid = scan_first_crossing(3, 2e-3, 10_000_000)
    tau = ce.tau_lower_bound(3)
    assert lo - 1e-12 <= tau <= hi + 1e-12
    assert hi - lo < 1e-8


@pytest.mark.parametrize("n", range(2, 11))
def test_tau_bracket(n):
    lo = ce.tau_lower_bound(n)
    assert 0 < lo <= ce.tau_upper_bound(n)
    # the inequality holds strictly just below the root and fails just above
    s = lambda t: t / (2 * (t + 1))
    assert 1 / (1 - math.log(s(0.999 * lo))) ** 2 > n * n * 0.999 * lo * (0.999 * lo + 2)
    assert 1 / (1 - math.log(s(1.001 * lo))) ** 2 < n * n * 1.001 * lo * (1.001 * lo + 2)


def test_tau_upper_bound_values():
    mp.mp.dps = 30
    assert ce.tau_upper_bound(2) == pytest.approx(2 * math.exp(math.pi))
    assert ce.tau_upper_bound(5) == pytest.approx(2 * math.exp(math.pi / 2))
    assert ce.tau_upper_bound(3) == pytest.approx(float(2 * mp.exp(mp.pi / mp.sqrt(2))), rel=1e-15)


@pytest.mark.parametrize("n", range(2, 11))
def test_cert_gef(n):
    holds, margin = ce.cert_gef(n)
    mp.mp.dps = 30
    r = 1 / (mp.sqrt(75) * n * n)
    t = 1 / (75 * n**4 * r)
    lhs = n * n * mp.sqrt(r) * mp.sqrt(t) * (t + 4) * mp.sqrt(t + 2)
    assert holds
    assert margin == pytest.approx(float(1 - lhs), rel=1e-12)


def test_counterexample_example():
    n, theta = 3, 1.3
    thr = ce.counterexample_threshold(n, theta)
    rep = ce.counterexample_bound(n, theta, thr / 2)
    assert rep["below_threshold"] and rep["upper_bound"] < 2.25 and rep["implication_holds"]


def test_counterexample_threshold_is_break_even():
    n, theta = 3, 1.1
    thr = ce.counterexample_threshold(n, theta)
    rep = ce.counterexample_bound(n, theta, thr)
    assert rep["upper_bound"] == pytest.approx(n * n / 4, rel=1e-12)
    assert not rep["below_threshold"]


def test_counterexample_grid():
    g = ce.counterexample_grid(3, np.linspace(0.05, math.pi / 2 - 0.05, 20), np.geomspace(1e-8, 0.45, 20))
    assert g["holds"] and g["cells"] == 400 and 0 < g["premise_true"] < 400


def test_counterexample_preconditions():
    with pytest.raises(DomainError):
        ce.counterexample_bound(3, 2.0, 0.01)
    with pytest.raises(DomainError):
        ce.counterexample_bound(3, 1.0, 0.6)


def test_counterexample_near_half_space_limit():
    thr = ce.counterexample_threshold(3, math.pi / 2 - 1e-3)
    assert thr < 1e-3 or thr == 0.0


@pytest.mark.parametrize("n,R", [(3, 1.0), (4, 2.0)])
def test_div_field_check(n, R):
    rep = ce.div_field_check(n, R, ce.interior_samples(n, R, 100, seed=1))
    assert rep["max_rel_discrepancy"] < 1e-5
    assert rep["closed_form_above_hardy"]


def test_div_field_rejects_wrong_dimension():
    with pytest.raises(DomainError):
        ce.div_field_check(3, 1.0, np.ones((2, 4)) * 0.1)


def test_zero_trial():
    u = ce.SeparableTrial(0.0, (0.1, 0.2), (0.5, 0.9), amplitude=0.0)
    assert ce.remainder(ce.InequalitySpec("halfball-extra"), u) == (0.0, 0.0)


def test_extra_remainder_against_direct_quadrature():
    n, R, g = 3, 1.0, 0.8
    u = ce.SeparableTrial(g, (1e-300, 2e-300), (2e-300, R), outer="linear")
    t = ce.remainder_terms(ce.InequalitySpec("halfball-extra", n=n, R=R), u)
    k = speclog.kappa()
    area = 2 * math.pi / 3  # int of cos^2 over the upper unit hemisphere
    f = lambda r: r**g * (1 - r)
    df = lambda r: g * r ** (g - 1) * (1 - r) - r**g
    opts = dict(epsabs=0, epsrel=1e-11, limit=200)
    grad = integrate.quad(lambda r: (df(r) ** 2 + (n - 1) * f(r) ** 2 / r**2) * r ** (n - 1), 0, 1, **opts)[0]
    hardy = integrate.quad(lambda r: f(r) ** 2 * r ** (n - 3), 0, 1, **opts)[0]
    logs = integrate.quad(lambda r: speclog.big_b(r / (k * R)).value * f(r) ** 2 * r ** (n - 3), 0, 1, **opts)[0]
    extra = integrate.quad(lambda r: f(r) ** 2 * r ** (n - 2.5), 0, 1, **opts)[0]
    value = area * (grad - n * n / 4 * hardy - logs / 4 - extra / (8 * math.sqrt(R)))
    assert t["value"] == pytest.approx(value, rel=1e-8)
    assert t["value"] > 0


def test_sharpness_trial_near_extremal():
    n, eps = 3, 0.01
    t = ce.remainder_terms(ce.InequalitySpec("halfball-sobolev", n=n), ce.sharpness_trial(n, eps))
    assert t["gradient"] / t["hardy"] == pytest.approx(2.2601, rel=1e-6)
    assert t["value"] / t["hardy"] < 0.02


def test_support_violation():
    u = ce.SeparableTrial(-0.5, (0.01, 0.02), (0.5, 1.5))
    with pytest.raises(ce.SupportError):
        ce.remainder(ce.InequalitySpec("halfball-logseries"), u)


def test_domain_rho_minimum():
    spec = ce.InequalitySpec("domain-logseries", n=3, D=1.0)
    assert spec.exterior_radius == pytest.approx(math.sqrt(75) * 9)
    with pytest.raises(DomainError):
        ce.InequalitySpec("domain-logseries", n=3, D=1.0, rho=1.0)
    assert ce.InequalitySpec("domain-hardy").min_rho == pytest.approx(1 / ce.tau_lower_bound(3))


def test_suite_deterministic():
    spec = ce.InequalitySpec("halfball-logseries")
    a = ce.random_trial_suite(spec, 20, seed=5)
    b = ce.random_trial_suite(spec, 20, seed=5)
    assert a == b
    assert a["violations"] == 0


@pytest.mark.parametrize("ident", ce.INEQUALITY_IDS)
def test_suites_have_no_violations(ident):
    rep = ce.random_trial_suite(ce.InequalitySpec(ident), 50, seed=11)
    assert rep["violations"] == 0
    assert rep["min_remainder"] >= -rep["max_quad_error"]


def test_probe_c_positive_and_consistent():
    spec = ce.InequalitySpec("halfball-sobolev")
    rep = ce.random_trial_suite(spec, 40, seed=3, probe_c=True)
    c = rep["probe_c"]
    assert c > 0
    from dataclasses import replace

    assert ce.random_trial_suite(replace(spec, c=0.99 * c), 40, seed=3)["violations"] == 0
    with pytest.raises(DomainError):
        ce.random_trial_suite(ce.InequalitySpec("halfball-logseries"), 5, 0, probe_c=True)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 10.0), st.sampled_from(ce.INEQUALITY_IDS))
def test_remainder_is_quadratic(seed, amp, ident):
    spec = ce.InequalitySpec(ident, c=0.5 if ident in ce.SOBOLEV_IDS else 0.0)
    u = ce.random_trial(np.random.default_rng(seed), 3, spec.support_radius)
    from dataclasses import replace

    a = ce.remainder(spec, u)[0]
    b = ce.remainder(spec, replace(u, amplitude=amp))[0]
    assert b == pytest.approx(amp * amp * a, rel=1e-9, abs=1e-12 * amp * amp)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-6, 0.999), st.integers(2, 10))
def test_gef_lhs_below_endpoint(frac, n):
    r = 1 / (math.sqrt(75) * n * n)
    tmax = 1 / (75 * n**4 * r)
    f = lambda t: n * n * math.sqrt(r * t) * (t + 4) * math.sqrt(t + 2)
    assert f(frac * tmax) <= f(tmax) <= 1
