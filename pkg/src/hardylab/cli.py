"""Command-line entry point: validated run configs, dispatch, JSON/CSV reports."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable

import numpy as np
import scipy

from . import __version__

FORMATS = ("json", "csv")
CONFIG_KEYS = {"command", "params", "seed", "tol"}


class ValidationError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ConfigParseError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    kind: type
    default: Any = None
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple | None = None
    required: bool = False


def _positive(x):
    return x > 0


def _dim(x):
    return x >= 2


def _dim3(x):
    return x >= 3


def _open_angle(x):
    return 0 < x < math.pi


def _count(x):
    return x >= 1


DIM = Param(int, 3, _dim, "n >= 2")
DIM3 = Param(int, 3, _dim3, "n >= 3")


@dataclass(frozen=True)
class Command:
    params: dict
    run: Callable
    tol: float | None = None
    seeded: bool = False
    help: str = ""


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    tol: float | None = None

    def echo(self) -> str:
        parts = [self.command]
        for k, v in sorted(self.params.items()):
            flag = "--" + k.replace("_", "-")
            if isinstance(v, bool):
                if v:
                    parts.append(flag)
            elif v is not None:
                parts += [flag, str(v)]
        if COMMANDS[self.command].seeded:
            parts += ["--seed", str(self.seed)]
        if self.tol is not None:
            parts += ["--tol", repr(self.tol)]
        return " ".join(parts)


# ---------------------------------------------------------------- runners
# Each runner takes (params, seed, tol) and returns (results, failures, warnings).


def _run_kappa(p, seed, tol):
    from . import speclog

    out = {}
    if p["method"] in ("bisection", "both"):
        out["bisection"] = speclog.solve_kappa(tol, "bisection")
    if p["method"] in ("secant", "both"):
        out["secant"] = speclog.solve_kappa(tol, "secant")
    k = out.get("bisection", out.get("secant"))
    ev = speclog.eta(1.0 / k, tol=1e-16)
    residual = abs(ev.value + 0.5 * ev.tail_bound - 0.25) + 0.5 * ev.tail_bound
    out.update(kappa=k, residual=residual)
    failures = []
    if residual > tol:
        failures.append(f"residual {residual:.3e} above tol {tol:.1e}")
    if "bisection" in out and "secant" in out:
        out["agreement"] = abs(out["bisection"] - out["secant"])
        if out["agreement"] > 1e-10:
            failures.append(f"solvers disagree by {out['agreement']:.3e}")
    return out, failures, []


def _run_speclog(p, seed, tol):
    from . import speclog

    t, k = p["t"], p["k"]
    return {
        "t": t,
        "k": k,
        "x": speclog.x_sequence(k, t),
        "eta": speclog.eta(t, tol=tol).as_dict(),
        "big_b": speclog.big_b(t, tol=tol).as_dict(),
    }, [], []


def _upper_half_points(rng, count, n):
    v = rng.standard_normal((count, n))
    v[:, -1] = np.abs(v[:, -1]) + 1e-3
    return v


def _conformal_bumps(rng, n, which, count):
    out = []
    for _ in range(count):
        d = rng.standard_normal(n)
        d[-1] = abs(d[-1])
        d /= np.linalg.norm(d)
        width = 0.08
        if which == "T":
            center = d * rng.uniform(1.0 + 6.2 * width + 0.1, 2.0)
        else:
            center = d * rng.uniform(0.1, 1.0 - 6.2 * width - 0.1)
        tilt = tuple(float(x) for x in rng.uniform(-1, 1, n))
        out.append((center, width, tilt))
    return out


def conformal_report(n: int, samples: int, seed: int, bumps: int = 2) -> dict:
    from . import conformal as cf

    rng = np.random.default_rng(seed)
    v = _upper_half_points(rng, samples, n)
    e = np.zeros(n)
    e[-1] = 1.0
    norm = np.linalg.norm

    def rel(a, b):
        return float(np.max(np.abs(a - b) / np.abs(b)))

    ss = cf.map_s(cf.map_s(v))
    out = {
        "s_involution": float(np.max(norm(ss - v, axis=1) / norm(v, axis=1))),
        "s_modulus": rel(norm(cf.map_s(v), axis=1), norm(v - e, axis=1) / norm(v + e, axis=1)),
        "t_roundtrip": float(np.max(norm(cf.inv_t(cf.map_t(v)) - v, axis=1) / norm(v, axis=1))),
        "t_exterior": bool(np.all(norm(cf.map_t(v), axis=1) > 1)),
    }
    x = rng.standard_normal((samples, n))
    out["t_inverse_modulus"] = rel(norm(cf.inv_t(x), axis=1), norm(x - e, axis=1) / norm(x + e, axis=1))
    jac = np.array([abs(np.linalg.det(cf.fd_jacobian(cf.map_t, p))) for p in v])
    out["jacobian_fd"] = rel(jac, cf.jac_t(v))
    energy = []
    for which in ("S", "T"):
        for center, width, tilt in _conformal_bumps(rng, n, which, bumps):
            f = cf.GaussianBump(tuple(float(c) for c in center), width, tilt=tilt)
            a, b = cf.pullback_energy_pair(f, which)
            energy.append({"map": which, "center": [float(c) for c in center], "rel_err": abs(a - b) / b})
    out["energy"] = energy
    out["energy_max_rel_err"] = max(r["rel_err"] for r in energy)
    return out


def _run_conformal(p, seed, tol):
    out = conformal_report(p["n"], p["samples"], seed, p["bumps"])
    failures = []
    for key in ("s_involution", "s_modulus", "t_roundtrip", "t_inverse_modulus"):
        if out[key] > 1e-12:
            failures.append(f"{key} {out[key]:.3e} above 1e-12")
    if not out["t_exterior"]:
        failures.append("map_t sent an upper half-space point into the unit ball")
    if out["jacobian_fd"] > 1e-6:
        failures.append(f"jacobian_fd {out['jacobian_fd']:.3e} above 1e-6")
    if out["energy_max_rel_err"] > tol:
        failures.append(f"energy invariance {out['energy_max_rel_err']:.3e} above {tol:.1e}")
    return out, failures, []


def _run_cap_eig(p, seed, tol):
    from .sturm1d import CapProblem, cap_eigenpair

    pair = cap_eigenpair(CapProblem(p["n"], p["theta"], p["variant"], p["k"]), p["resolution"], p["levels"])
    return pair.estimate.as_dict(), [], []


def _run_annulus_1d(p, seed, tol):
    from .sturm1d import radial_annulus_constant

    closed, est = radial_annulus_constant(p["n"], p["a"], p["b"])
    diff = abs(est.value - closed)
    failures = [] if diff <= tol * max(1.0, closed) else [f"numeric differs from closed form by {diff:.3e}"]
    return {"closed_form": closed, "numeric": est.value, "abs_diff": diff, "trace": est.as_dict()["trace"]}, failures, []


def _trace_rows(rows):
    from .femlab.eigen import CSV_COLUMNS

    return [dict(zip(CSV_COLUMNS, (int(r[0]), float(r[1]), int(r[2]), float(r[3]), float(r[4])))) for r in rows]


def _monotone_failures(values, what):
    bad = [i for i in range(1, len(values)) if values[i] > values[i - 1] * (1 + 1e-10)]
    return [f"{what} increased at refinement level {i}" for i in bad]


def _run_annulus(p, seed, tol):
    from .certificates import tau_lower_bound, tau_upper_bound
    from .femlab.eigen import lambda_tau, shell_bound

    n, tau = p["n"], p["tau"]
    est = lambda_tau(n, tau, p["levels"], p["h"], p["rho"], tol=tol)
    rows = _trace_rows(est.trace)
    vals = [r["eigenvalue"] for r in rows]
    target = n * n / 4
    out = {"value": est.value, "trace": rows, "boundary_constant": target,
           "tau_lower_bound": tau_lower_bound(n), "tau_upper_bound": tau_upper_bound(n)}
    failures = _monotone_failures(vals, "eigenvalue")
    warnings = []
    if tau > 2:
        out["shell_bound"] = shell_bound(n, tau)
    if tau <= out["tau_lower_bound"] and min(vals) < target - 1e-3:
        failures.append(f"estimate {min(vals):.6g} below n^2/4 - 1e-3 although tau <= tau_lower_bound")
    if tau >= out["tau_upper_bound"] and est.value >= target:
        failures.append(f"estimate {est.value:.6g} not below n^2/4 although tau >= tau_upper_bound")
    if out["tau_lower_bound"] < tau < out["tau_upper_bound"]:
        warnings.append("tau lies between the certified bounds; no pass/fail claim is made")
    return out, failures, warnings


def _run_sharpness(p, seed, tol):
    from .certificates import InequalitySpec, remainder_terms, sharpness_trial
    from .sturm1d import sharpness_quotient

    n, eps = p["n"], p["eps"]
    one_d = sharpness_quotient(n, eps)
    t = remainder_terms(InequalitySpec("halfball-sobolev", n=n, c=0.0), sharpness_trial(n, eps))
    trial = t["gradient"] / t["hardy"]
    target = n * n / 4
    out = {"quotient": trial, "quotient_1d": one_d, "target": target,
           "relative_gap": trial / target - 1, "within_5_percent": abs(trial / target - 1) <= 0.05}
    failures = []
    if trial < target * (1 - 1e-9):
        failures.append("quotient below n^2/4")
    # the trial is cut off below r = 1e-300, which shifts the quotient by O(1e-8)
    if abs(trial - one_d) > 1e-6 * one_d:
        failures.append(f"trial quotient and 1D quotient differ by {abs(trial - one_d):.3e}")
    return out, failures, []


def _run_verify(p, seed, tol):
    from .certificates import InequalitySpec, random_trial_suite

    spec = InequalitySpec(p["inequality"], n=p["n"], R=p["R"], D=p["D"], rho=p["rho"], m=p["m"], c=p["c"])
    rep = random_trial_suite(spec, p["trials"], seed, p["quad"], probe_c=p["probe_c"])
    failures = [f"{rep['violations']} trials violate the inequality beyond quadrature error"] if rep["violations"] else []
    warnings = []
    if rep["max_quad_error"] > 1e-3 * abs(rep["min_remainder"]) and rep["min_remainder"] != 0:
        warnings.append("quadrature error is a noticeable fraction of the smallest remainder")
    return rep, failures, warnings


def _run_tau_bounds(p, seed, tol):
    from .certificates import cert_gef, tau_lower_bound, tau_upper_bound

    n = p["n"]
    lo, hi = tau_lower_bound(n), tau_upper_bound(n)
    holds, margin = cert_gef(n)
    failures = []
    if not 0 < lo <= hi:
        failures.append("lower bound not in (0, upper bound]")
    if not holds:
        failures.append(f"pointwise certificate fails, margin {margin:.3e}")
    return {"n": n, "tau_lower_bound": lo, "tau_upper_bound": hi, "gef_holds": holds, "gef_margin": margin}, failures, []


def _run_counterexample(p, seed, tol):
    from .certificates import counterexample_bound, counterexample_grid, counterexample_threshold

    n, theta = p["n"], p["theta"]
    rho = p["rho"]
    if rho is None:
        rho = 0.5 * counterexample_threshold(n, theta)
        if rho <= 0:
            raise ValidationError("theta", "lambda_1(n, theta) >= n - 1, no admissible rho exists")
    rep = counterexample_bound(n, theta, rho)
    failures = []
    if rep["below_threshold"] and not rep["upper_bound"] < rep["threshold"]:
        failures.append("bound not below n^2/4 although the radius condition holds")
    g = p["grid"]
    if g:
        thetas = np.linspace(0.05, math.pi / 2 - 0.05, g)
        rhos = np.geomspace(1e-8, 0.45, g)
        grid = counterexample_grid(n, thetas, rhos)
        rep["grid"] = grid
        if not grid["holds"]:
            failures.append(f"implication fails at {len(grid['failures'])} grid cells")
    return rep, failures, []


def _run_divcheck(p, seed, tol):
    from .certificates import div_field_check, interior_samples

    pts = interior_samples(p["n"], p["R"], p["samples"], seed)
    rep = div_field_check(p["n"], p["R"], pts)
    failures = []
    if rep["max_rel_discrepancy"] >= tol:
        failures.append(f"max relative discrepancy {rep['max_rel_discrepancy']:.3e} not below {tol:.1e}")
    if not rep["closed_form_above_hardy"]:
        failures.append("closed form drops below n^2/(4|x|^2)")
    return rep, failures, []


def _potential(p):
    from .potentials import PotentialSpec

    return PotentialSpec(p["family"], s=p["s"], alpha=p["alpha"], D=p["D"])


def _run_subcritical(p, seed, tol):
    from .potentials import subcritical_test

    return subcritical_test(_potential(p), p["n"], tol), [], []


def _run_crv(p, seed, tol):
    from .potentials import cr_v_estimate

    rep = cr_v_estimate(_potential(p), p["r"], p["levels"], p["n"], p["rho"], p["h"], tol)
    rep["trace"] = _trace_rows(rep["trace"])
    failures = _monotone_failures([r["eigenvalue"] for r in rep["trace"]], "C_r upper bound")
    warnings = ["values are one-sided upper bounds; a saturating trend does not by itself identify criticality"]
    return rep, failures, warnings


def _run_cone_sobolev(p, seed, tol):
    from .potentials import cone_sobolev_bound

    rep = cone_sobolev_bound(p["n"], p["theta"])
    failures = [] if rep["sharp_le_coarse"] else ["sharp bound exceeds coarse bound"]
    return rep, failures, []


def _run_groundstate(p, seed, tol):
    from .potentials import AxialBump, GroundStateWeights, groundstate_identity_check

    w = GroundStateWeights(p["n"], p["rho"])
    rep = groundstate_identity_check(AxialBump(p["center"], p["radius"]), w, p["quad"])
    failures = [] if rep["rel_err"] < tol else [f"relative error {rep['rel_err']:.3e} not below {tol:.1e}"]
    return rep, failures, []


def _choice(*names):
    return Param(str, names[0], None, "", tuple(names))


COMMANDS: dict[str, Command] = {
    "kappa": Command({"method": _choice("both", "bisection", "secant")}, _run_kappa, 1e-12,
                     help="solve eta(1/kappa) = 1/4"),
    "speclog": Command({"t": Param(float, None, lambda t: 0 < t <= 1, "0 < t <= 1", required=True),
                        "k": Param(int, 1, _count, "k >= 1")}, _run_speclog, 1e-15,
                       help="iterated logarithms and the eta, B series at t"),
    "conformal": Command({"n": DIM, "samples": Param(int, 1000, _count, "samples >= 1"),
                          "bumps": Param(int, 2, lambda b: b >= 0, "bumps >= 0")},
                         _run_conformal, 1e-6, seeded=True, help="invariant report for the Kelvin/S/T maps"),
    "cap-eig": Command({"n": DIM, "theta": Param(float, math.pi / 2, _open_angle, "0 < theta < pi"),
                        "variant": _choice("cone-cap", "example-cap"), "k": Param(int, 1, _count, "k >= 1"),
                        "resolution": Param(int, 128, lambda r: r >= 8, "resolution >= 8"),
                        "levels": Param(int, 4, _count, "levels >= 1")}, _run_cap_eig,
                       help="first Dirichlet eigenvalues of polar caps"),
    "annulus-1d": Command({"n": DIM, "a": Param(float, 1.0, _positive, "a > 0"),
                           "b": Param(float, 2.0, _positive, "b > a")}, _run_annulus_1d, 1e-6,
                          help="radial annulus constant: closed form vs 1D solve"),
    "annulus": Command({"n": DIM, "tau": Param(float, None, _positive, "tau > 0", required=True),
                        "levels": Param(int, 4, lambda v: v >= 2, "levels >= 2"),
                        "h": Param(float, 0.3, _positive, "h > 0"), "rho": Param(float, 1.0, _positive, "rho > 0")},
                       _run_annulus, 1e-9, help="FEM upper bounds on the annulus Hardy constant"),
    "sharpness": Command({"n": DIM3, "eps": Param(float, 0.01, lambda e: 0 < e < 0.5, "0 < eps < 1/2")},
                         _run_sharpness, help="Hardy quotient of the eps-sharpness trial"),
    "verify": Command({"inequality": Param(str, None, None, "", None, True), "n": DIM3,
                       "trials": Param(int, 1000, _count, "trials >= 1"),
                       "m": Param(int, 1, _count, "m >= 1"), "c": Param(float, 0.0, lambda c: c >= 0, "c >= 0"),
                       "R": Param(float, 1.0, _positive, "R > 0"), "D": Param(float, 1.0, _positive, "D > 0"),
                       "rho": Param(float, None, _positive, "rho > 0"),
                       "quad": Param(int, 16, lambda q: q >= 4, "quad >= 4"),
                       "probe_c": Param(bool, False)}, _run_verify, seeded=True,
                      help="seeded random separable trials against an inequality"),
    "tau-bounds": Command({"n": DIM}, _run_tau_bounds, help="certified bracket for the annulus threshold"),
    "counterexample": Command({"n": DIM, "theta": Param(float, None, lambda t: 0 < t < math.pi / 2,
                                                       "0 < theta < pi/2", required=True),
                               "rho": Param(float, None, lambda r: 0 < r < 0.5, "0 < rho < 1/2"),
                               "grid": Param(int, 20, lambda g: g >= 0, "grid >= 0")}, _run_counterexample,
                              help="cone-annulus upper bound below n^2/4"),
    "divcheck": Command({"n": DIM3, "R": Param(float, 1.0, _positive, "R > 0"),
                         "samples": Param(int, 100, _count, "samples >= 1")}, _run_divcheck, 1e-5, seeded=True,
                        help="div T - |T|^2 against its closed form"),
    "subcritical": Command({"family": _choice("logweighted", "power"), "n": DIM,
                            "alpha": Param(float, 3.0, lambda a: a >= 0, "alpha >= 0"),
                            "s": Param(float, 2.0, lambda s: s >= 0, "s >= 0"),
                            "D": Param(float, 1.0, _positive, "D > 0")}, _run_subcritical, 0.0,
                           help="finiteness of int V^{n/2} X_1^{1-n}"),
    "crv": Command({"family": _choice("logweighted", "power"), "n": DIM,
                    "alpha": Param(float, 3.0, lambda a: a >= 0, "alpha >= 0"),
                    "s": Param(float, 2.0, lambda s: s >= 0, "s >= 0"),
                    "D": Param(float, 1.0, _positive, "D > 0"),
                    "r": Param(float, 0.1, lambda r: 0 < r <= 1, "0 < r <= 1"),
                    "levels": Param(int, 3, _count, "levels >= 1"),
                    "rho": Param(float, None, _positive, "rho > 0"),
                    "h": Param(float, 0.25, _positive, "h > 0")}, _run_crv, 1e-9,
                   help="FEM upper bounds on C_r(V)"),
    "cone-sobolev": Command({"n": DIM3, "theta": Param(float, math.pi / 2, _open_angle, "0 < theta < pi")},
                            _run_cone_sobolev, help="coarse and sharp cone Sobolev bounds"),
    "groundstate-check": Command({"n": DIM, "rho": Param(float, 1.0, _positive, "rho > 0"),
                                  "center": Param(float, 0.5, _positive, "center > 0"),
                                  "radius": Param(float, 0.3, _positive, "radius > 0"),
                                  "quad": Param(int, 48, lambda q: q >= 4, "quad >= 4")},
                                 _run_groundstate, 1e-5, help="ground-state substitution identity"),
}


def _inequality_check(value):
    from .certificates import INEQUALITY_IDS

    if value not in INEQUALITY_IDS:
        raise ValidationError("inequality", f"must be one of {', '.join(INEQUALITY_IDS)}")


def _coerce(name, spec: Param, value):
    if spec.kind is bool:
        if not isinstance(value, bool):
            raise ValidationError(name, f"expected a boolean, got {value!r}")
        return value
    if spec.kind is int:
        if isinstance(value, bool) or not (isinstance(value, int) or (isinstance(value, float) and value.is_integer())):
            raise ValidationError(name, f"expected an integer, got {value!r}")
        return int(value)
    if spec.kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(name, f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(name, "must be finite")
        return value
    if not isinstance(value, str):
        raise ValidationError(name, f"expected a string, got {value!r}")
    return value


def resolve(cfg: RunConfig) -> RunConfig:
    """Validate against the command schema and fill defaults."""
    if cfg.command not in COMMANDS:
        raise ValidationError("command", f"unknown command {cfg.command!r}")
    cmd = COMMANDS[cfg.command]
    unknown = sorted(set(cfg.params) - set(cmd.params))
    if unknown:
        raise ValidationError(unknown[0], f"unknown parameter for {cfg.command}")
    out = {}
    for name, spec in cmd.params.items():
        value = cfg.params.get(name)
        if value is None:
            if spec.required:
                raise ValidationError(name, "is required")
            out[name] = spec.default
            continue
        value = _coerce(name, spec, value)
        if spec.choices and value not in spec.choices:
            raise ValidationError(name, f"must be one of {', '.join(spec.choices)}")
        if spec.check and not spec.check(value):
            raise ValidationError(name, f"violates {spec.rule}, got {value!r}")
        out[name] = value
    if cfg.command == "verify":
        _inequality_check(out["inequality"])
    if cfg.command == "annulus-1d" and not out["b"] > out["a"]:
        raise ValidationError("b", "must exceed a")
    if cfg.command == "groundstate-check" and not out["center"] > out["radius"]:
        raise ValidationError("radius", "bump must stay away from 0 (center > radius)")
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ValidationError("seed", f"expected a nonnegative integer, got {cfg.seed!r}")
    tol = cfg.tol
    if tol is not None:
        tol = _coerce("tol", Param(float), tol)
        if tol < 0:
            raise ValidationError("tol", "must be nonnegative")
    return RunConfig(cfg.command, out, cfg.seed, tol)


def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def provenance(seed: int, elapsed: float) -> dict:
    return {
        "hardylab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "elapsed_s": round(elapsed, 3),
    }


def dispatch(cfg: RunConfig) -> dict:
    """Run one validated config; module errors are serialized, not raised."""
    start = time.perf_counter()
    cmd = COMMANDS[cfg.command]
    tol = cfg.tol if cfg.tol is not None else cmd.tol
    report = {"command": cfg.echo(), "name": cfg.command, "params": dict(cfg.params), "seed": cfg.seed, "tol": tol}
    try:
        results, failures, warnings = cmd.run(cfg.params, cfg.seed, tol)
        report.update(status="fail" if failures else "pass", results=results, failures=failures,
                      warnings=warnings, error=None)
    except Exception as exc:  # noqa: BLE001 - serialized into the report
        report.update(status="error", results=None, failures=[], warnings=[],
                      error=f"{type(exc).__name__}: {exc}")
    report["provenance"] = provenance(cfg.seed, time.perf_counter() - start)
    return _plain(report)


def comparable(report: dict) -> dict:
    """Report without the provenance block (timestamps, timings)."""
    return {k: v for k, v in report.items() if k != "provenance"}


def parse_config_text(text: str, source: str = "<config>") -> list:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, list):
        raise ConfigParseError(f"{source}:1:1: top level must be a list of run entries")
    return data


def config_from_entry(entry) -> RunConfig:
    if not isinstance(entry, dict):
        raise ValidationError("entry", "must be an object")
    unknown = sorted(set(entry) - CONFIG_KEYS)
    if unknown:
        raise ValidationError(unknown[0], "unknown key")
    if "command" not in entry:
        raise ValidationError("command", "is required")
    if entry["command"] == "batch":
        raise ValidationError("command", "batch entries cannot nest")
    params = entry.get("params", {})
    if not isinstance(params, dict):
        raise ValidationError("params", "must be an object")
    params = {k.replace("-", "_"): v for k, v in params.items()}
    return resolve(RunConfig(entry["command"], params, entry.get("seed", 0), entry.get("tol")))


def _entry_report(index_entry):
    index, entry = index_entry
    try:
        cfg = config_from_entry(entry)
    except ValidationError as exc:
        name = entry.get("command") if isinstance(entry, dict) else None
        return _plain({"command": name, "name": name, "index": index, "status": "error", "results": None,
                       "failures": [], "warnings": [], "error": f"ValidationError: {exc}",
                       "provenance": provenance(0, 0.0)})
    rep = dispatch(cfg)
    rep["index"] = index
    return rep


def run_batch(entries: list, jobs: int = 1) -> list:
    """Reports in input order; invalid entries become error reports."""
    items = list(enumerate(entries))
    if jobs <= 1 or len(items) <= 1:
        return [_entry_report(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_entry_report, items))


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}.{i}", v, out)
    else:
        out.append((prefix, obj))


def _csv_value(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def to_csv(reports: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "command", "status", "key", "value"])
    for i, rep in enumerate(reports):
        rows = []
        _flatten("", {"results": rep.get("results"), "failures": rep.get("failures"),
                      "warnings": rep.get("warnings"), "error": rep.get("error")}, rows)
        for key, value in rows:
            w.writerow([rep.get("index", i), rep.get("name"), rep["status"], key, _csv_value(value)])
    return buf.getvalue()


def to_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


def exit_status(reports: list) -> int:
    return 0 if all(r["status"] == "pass" for r in reports) else 1


def _add_param(sub, name, spec: Param):
    flag = "--" + name.replace("_", "-")
    if spec.kind is bool:
        sub.add_argument(flag, dest=name, action="store_true", default=None)
    else:
        sub.add_argument(flag, dest=name, type=spec.kind, default=None, required=spec.required,
                         help=f"{spec.rule or ''} (default {spec.default})".strip())


def _global_flags(parser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--out", default=d(None), help="write the report here instead of stdout")
    parser.add_argument("--format", choices=FORMATS, default=d("json"))
    parser.add_argument("--seed", type=int, default=d(0))
    parser.add_argument("--jobs", type=int, default=d(1), help="parallel batch entries")
    parser.add_argument("--tol", type=float, default=d(None), help="command tolerance override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardylab", description="Hardy-inequality numerics with JSON/CSV reports.")
    _global_flags(parser, suppress=False)
    subs = parser.add_subparsers(dest="command", required=True)
    for name, cmd in COMMANDS.items():
        sub = subs.add_parser(name, help=cmd.help)
        _global_flags(sub, suppress=True)
        for pname, spec in cmd.params.items():
            _add_param(sub, pname, spec)
    sub = subs.add_parser("batch", help="run a JSON list of run entries")
    _global_flags(sub, suppress=True)
    sub.add_argument("config")
    return parser


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if args.jobs < 1:
        print("error: jobs: must be >= 1", file=sys.stderr)
        return 2
    if args.command == "batch":
        try:
            with open(args.config) as fh:
                entries = parse_config_text(fh.read(), args.config)
        except (OSError, ConfigParseError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        reports = run_batch(entries, args.jobs)
        text = to_csv(reports) if args.format == "csv" else to_json({"reports": reports})
        _emit(text, args.out)
        return exit_status(reports)
    params = {k: getattr(args, k) for k in COMMANDS[args.command].params}
    try:
        cfg = resolve(RunConfig(args.command, params, args.seed, args.tol))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = dispatch(cfg)
    text = to_csv([report]) if args.format == "csv" else to_json(report)
    _emit(text, args.out)
    return exit_status([report])


if __name__ == "__main__":
    sys.exit(main())
