"""Programmatic acceptance checks.

Each check returns :class:`Check` records holding the measured value, the
target, the tolerance and the verdict. ``run_suite("fast")`` skips the
coupling-ladder extrapolations; ``run_suite("full")`` runs everything.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asym
from . import fermi_ops as fo
from . import gap_solver as gs
from . import oracles
from .errors import ContractError
from .linear_criterion import critical_temperature, lowest_eigenvalue_KV, thermal_grid
from .potentials import CATALOG, RadialPotential, zero

__all__ = ["Check", "SUITES", "run_suite", "ladder_report"]

GAUSS = CATALOG["gaussian"]


@dataclass
class Check:
    criterion: int
    name: str
    measured: object
    target: object
    tolerance: object
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"[{verdict}] {self.criterion:>2} {self.name}: measured={_fmt(self.measured)} "
                f"target={_fmt(self.target)} tol={_fmt(self.tolerance)} ({self.seconds:.1f}s)")


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    return str(x)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        dt = time.perf_counter() - t0
        for c in out if isinstance(out, list) else [out]:
            c.seconds = dt
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_funk_hecke(V: RadialPotential = GAUSS, mu: float = 1.0, tol: float = 1e-8) -> Check:
    """Closed-form channel eigenvalues against sphere-quadrature diagonalisation."""
    table = oracles.sphere_channel_check(V, mu, (0, 1, 2))
    worst = 0.0
    per = {}
    for ell, d in table.items():
        e = fo.vmu_channel_eigenvalue(V, mu, ell)
        errs = [abs(q - e) for q in d["quotients"]] + [abs(x - e) for x in d["eigenvalues"]]
        per[ell] = (e, max(errs))
        worst = max(worst, max(errs))
    return Check(1, "Funk-Hecke channel eigenvalues vs sphere quadrature", worst, 0.0, tol,
                 worst <= tol, {"per_channel": per})


@_timed
def check_mmu(mu: float = 1.0, T: float = 1e-6, tol: float = 1e-3) -> Check:
    val = math.sqrt(mu) * fo.mmu(mu, T) - math.log(mu / T)
    target = asym.EULER_GAMMA - 2.0 + math.log(8.0 / math.pi)
    return Check(2, "m_mu(T) small-T constant", val, target, tol, abs(val - target) <= tol)


@_timed
def check_tc_equivalence(V: RadialPotential = GAUSS, mu: float = 1.0, lam: float = 0.5,
                         tol: float = 1e-3) -> Check:
    """Linear-criterion T_c against the temperature where the finite-T gap closes."""
    tcr = critical_temperature(V, mu, lam, tol=1e-9)
    vanish = gs.gap_vanishing_temperature(V, mu, lam, tcr.tc)
    rel = abs(vanish["T_vanish"] - tcr.tc) / tcr.tc
    return Check(3, "T_c linear criterion vs gap closing temperature", vanish["T_vanish"], tcr.tc,
                 tol, rel <= tol and vanish["converged"],
                 {"relative_difference": rel, "samples": vanish["samples"]})


@_timed
def check_monotonicity(V: RadialPotential = GAUSS, mu: float = 1.0, lam: float = 0.3) -> Check:
    temps = [f * mu for f in (0.005, 0.01, 0.02, 0.05, 0.1)]
    eig = [lowest_eigenvalue_KV(V, 0, mu, T, lam, thermal_grid(V, mu, T)).eigenvalue for T in temps]
    tcs = [critical_temperature(V, mu, x, tol=1e-8, check_grid=False).tc for x in (0.15, 0.3, 0.6)]
    ok_e = all(b > a for a, b in zip(eig, eig[1:]))
    ok_t = all(b >= a for a, b in zip(tcs, tcs[1:]))
    return Check(4, "eigenvalue increasing in T, T_c nondecreasing in lambda",
                 {"eigenvalues": eig, "tc": tcs}, "monotone", "strict / non-strict",
                 ok_e and ok_t, {"eigen_increasing": ok_e, "tc_nondecreasing": ok_t})


def ladder_report(V: RadialPotential = GAUSS, mu: float = 1.0, ladder=asym.DEFAULT_LADDER,
                  jobs: int = 1) -> asym.AsymptoticsReport:
    return asym.asymptotic_report(V, mu, ladder, jobs=jobs)


def check_leading(report: asym.AsymptoticsReport, tol: float = 0.02) -> Check:
    fit = report.extrapolated["leading"]
    target = -1.0 / report.e_mu
    rel = abs(fit.limit - target) / abs(target)
    return Check(5, "extrapolated lambda ln(mu/T_c) vs -1/e_mu", fit.limit, target,
                 f"{tol:.0%} rel", rel <= tol,
                 {"relative_error": rel, "fit_residual": fit.residual, "values": report.leading})


def check_drift_tc(report: asym.AsymptoticsReport, tol: float = 5e-2) -> Check:
    fit = report.extrapolated["drift_tc"]
    return Check(6, "extrapolated T_c drift", fit.limit, asym.DRIFT_TC_LIMIT, tol,
                 abs(fit.limit - asym.DRIFT_TC_LIMIT) <= tol,
                 {"fit_residual": fit.residual, "values": report.drift_tc})


def check_gap_drift_ratio(report: asym.AsymptoticsReport, tol_drift: float = 5e-2,
                          tol_ratio: float = 0.02) -> Check:
    fd, fr = report.extrapolated["drift_xi"], report.extrapolated["ratio"]
    ok_d = abs(fd.limit - asym.DRIFT_XI_LIMIT) <= tol_drift
    rel = abs(fr.limit - asym.UNIVERSAL_RATIO) / asym.UNIVERSAL_RATIO
    ok_r = rel <= tol_ratio
    return Check(7, "extrapolated gap drift and Xi/T_c ratio", (fd.limit, fr.limit),
                 (asym.DRIFT_XI_LIMIT, asym.UNIVERSAL_RATIO), (tol_drift, f"{tol_ratio:.0%} rel"),
                 ok_d and ok_r,
                 {"drift_ok": ok_d, "ratio_ok": ok_r, "ratio_relative_error": rel,
                  "drift_values": report.drift_xi, "ratio_values": report.ratio,
                  "fit_residuals": (fd.residual, fr.residual)})


@_timed
def check_born(names=("gaussian", "exponential"), tol: float = 1e-6) -> Check:
    errs = {}
    for n in names:
        V = CATALOG[n]
        f = fo.coulomb_double_integral(V)
        b = oracles.bipolar_coulomb(V)
        errs[n] = abs(f - b) / abs(b)
    worst = max(errs.values())
    return Check(8, "Fourier-side vs bipolar second-Born term", worst, 0.0, tol, worst <= tol,
                 {"relative_errors": errs})


def _random_probe(rng, p, mu):
    kf = math.sqrt(mu)
    g = np.zeros_like(p)
    for _ in range(4):
        c = rng.normal()
        center = abs(rng.normal(kf, kf))
        width = kf * rng.uniform(0.05, 1.0)
        g += c * np.exp(-((p - center) / width) ** 2)
    return g


@_timed
def check_gap_properties(lam: float = 0.5, mu: float = 1.0, n_probes: int = 50,
                         seed: int = 12345) -> Check:
    """Positivity, uniqueness, constraint chain, continuity, Hessian and free-energy checks."""
    rng = np.random.default_rng(seed)
    res = {}
    supported = {}
    for name, V in CATALOG.items():
        try:
            g1 = gs.solve_gap(V, mu, lam, 0.0, initial=0.1 * mu, max_iter=20000)
        except ContractError:
            supported[name] = False
            continue
        supported[name] = True
        g2 = gs.solve_gap(V, mu, lam, 0.0, initial=1e-4 * mu, max_iter=20000)
        # the two runs may settle on different grids: compare Nystrom extensions
        diff = float(np.max(np.abs(g1.nystrom(g1.nodes) - g2.nystrom(g1.nodes)))
                     / np.max(np.abs(g1.values)))
        state = gs.derive_state(g1)
        diag = gs.continuity_diagnostic(state)
        scale_terms = []
        hmin = math.inf
        for _ in range(n_probes):
            g = _random_probe(rng, g1.nodes, mu)
            h = gs.hessian_form_T0(g, g1)
            meas = 4 * math.pi * g1.nodes**2
            scale_terms.append(g1.grid.integrate(meas * g1.energy() * g * g))
            hmin = min(hmin, h / max(scale_terms[-1], 1e-300))
        tcr = critical_temperature(V, mu, lam, check_grid=False)
        T = 0.5 * tcr.tc
        gT = gs.solve_gap(V, mu, lam, T, max_iter=20000)
        sT = gs.derive_state(gT)
        x = gT.nodes**2 - mu
        gamma0 = 1.0 / (np.exp(np.clip(x / T, -700, 700)) + 1.0)
        f_norm = gs.free_energy((gamma0, np.zeros_like(x)), V, mu, lam, T, grid=gT.grid)
        chain = []
        for st in (state, sT):
            chain.append(bool(np.all(np.abs(st.alpha) <= 0.5 + 1e-14)))
            chain.append(bool(np.all(st.alpha**2 <= st.gamma * (1 - st.gamma) + 1e-14)))
        res[name] = {
            "nonnegative": bool(np.all(g1.values >= 0) and np.all(gT.values >= 0)),
            "init_diff": diff,
            "init_independent": diff <= 1e-6,
            "constraints": all(chain),
            "continuity_agree": diag["agree"],
            "gapped": diag["gapped"],
            "hessian_min_rel": hmin,
            "hessian_ok": hmin >= -1e-8,
            "free_energy_gain": sT.free_energy - f_norm,
            "free_energy_ok": sT.free_energy < f_norm,
            "converged": g1.converged and g2.converged and gT.converged,
        }
    z = gs.derive_state(gs.solve_gap(zero(), mu, lam, 0.0))
    zdiag = gs.continuity_diagnostic(z)
    res["zero"] = {"continuity_agree": zdiag["agree"], "gapped": zdiag["gapped"]}
    keys = ("nonnegative", "init_independent", "constraints", "continuity_agree", "hessian_ok",
            "free_energy_ok", "converged")
    ok = all(all(v.get(k, True) for k in keys) for v in res.values())
    summary = {n: {k: v[k] for k in keys if k in v} for n, v in res.items()}
    return Check(9, "gap solver property suite", summary, "all true", "-", ok,
                 {"runs": res, "supported": supported})


@_timed
def check_small_mu(V: RadialPotential = GAUSS, lam: float = 0.3, mus=(1e-1, 1e-2, 1e-3)) -> Check:
    vals = []
    for mu in mus:
        r = fo.bmu(V, mu, lam)
        vals.append(abs(1.0 / r.b_mu - 1.0 / r.a0) / math.sqrt(mu))
    ok = all(b < a for a, b in zip(vals, vals[1:]))
    return Check(10, "small-mu bridge to the Born scattering length", vals, "strictly decreasing",
                 "-", ok)


def _ladder_checks(jobs=1):
    t0 = time.perf_counter()
    rep = ladder_report(jobs=jobs)
    dt = time.perf_counter() - t0
    out = [check_leading(rep), check_drift_tc(rep), check_gap_drift_ratio(rep)]
    for c in out:
        c.seconds = dt
    return out


FAST = [check_funk_hecke, check_mmu, check_born, check_small_mu]
SUITES = ("fast", "full")


def run_suite(suite: str = "fast", jobs: int = 1) -> list:
    """Run a named suite and return the checks ordered by criterion."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    checks = [fn() for fn in FAST]
    if suite == "full":
        checks += [check_tc_equivalence(), check_monotonicity(), check_gap_properties()]
        checks += _ladder_checks(jobs)
    return sorted(checks, key=lambda c: c.criterion)
