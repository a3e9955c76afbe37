"""Weak-coupling predictions and extraction of ``lambda -> 0`` limits.

Closed forms (``b = b_mu(lambda) < 0``)::

    T_c ~ mu * 8 e^{gamma - 2} / pi * exp(pi / (2 sqrt(mu) b))
    Xi  ~ mu * 8 / e^2               * exp(pi / (2 sqrt(mu) b))

Drifts ``ln(mu / T_c) + pi / (2 sqrt(mu) b)`` tend to ``2 - gamma - ln(8 / pi)``
and the analogous quantity for ``Xi`` tends to ``2 - ln 8``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import FitError, UnsupportedRegimeError
from .fermi_ops import bmu, emu
from .potentials import RadialPotential

__all__ = [
    "EULER_GAMMA",
    "TC_PREFACTOR",
    "XI_PREFACTOR",
    "UNIVERSAL_RATIO",
    "DRIFT_TC_LIMIT",
    "DRIFT_XI_LIMIT",
    "DEFAULT_LADDER",
    "predict_tc",
    "predict_xi",
    "extract_limit",
    "LimitFit",
    "LadderEntry",
    "AsymptoticsReport",
    "ladder_entry",
    "asymptotic_report",
]

EULER_GAMMA = float(np.euler_gamma)
TC_PREFACTOR = 8.0 * math.exp(EULER_GAMMA - 2.0) / math.pi
XI_PREFACTOR = 8.0 / math.e**2
UNIVERSAL_RATIO = math.pi / math.exp(EULER_GAMMA)
DRIFT_TC_LIMIT = 2.0 - EULER_GAMMA - math.log(8.0 / math.pi)
DRIFT_XI_LIMIT = 2.0 - math.log(8.0)
DEFAULT_LADDER = (0.6, 0.45, 0.3, 0.225, 0.15)


def _exponent(V, mu, lam, b):
    if b is None:
        b = bmu(V, mu, lam).b_mu
    if not b < 0:
        raise UnsupportedRegimeError("prediction requires b_mu(lambda) < 0")
    return math.pi / (2.0 * math.sqrt(mu) * b)


def predict_tc(V: RadialPotential, mu: float, lam: float, b: float | None = None) -> float:
    """Asymptotic critical temperature; ``b`` may be supplied to skip its evaluation."""
    return mu * TC_PREFACTOR * math.exp(_exponent(V, mu, lam, b))


def predict_xi(V: RadialPotential, mu: float, lam: float, b: float | None = None) -> float:
    """Asymptotic zero-temperature energy gap."""
    return mu * XI_PREFACTOR * math.exp(_exponent(V, mu, lam, b))


@dataclass
class LimitFit:
    limit: float
    slope: float
    residual: float

    def __iter__(self):
        return iter((self.limit, self.slope, self.residual))


def extract_limit(points, model: str = "linear") -> LimitFit:
    """Least-squares fit ``value = c0 + c1 lambda``; returns ``c0``, ``c1`` and the RMS residual."""
    if model != "linear":
        raise FitError(f"unknown extrapolation model {model!r}")
    pts = sorted((float(x), float(y)) for x, y in points)
    if len(pts) < 3:
        raise FitError("at least three points are required")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if len(np.unique(x)) != len(x):
        raise FitError("coupling values must be distinct")
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    res = y - design @ coef
    return LimitFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res * res))))


@dataclass
class LadderEntry:
    lam: float
    tc: float
    xi: float
    b_mu: float
    flags: list = field(default_factory=list)

    def drift_tc(self, mu):
        return math.log(mu / self.tc) + math.pi / (2.0 * math.sqrt(mu) * self.b_mu)

    def drift_xi(self, mu):
        return math.log(mu / self.xi) + math.pi / (2.0 * math.sqrt(mu) * self.b_mu)


@dataclass
class AsymptoticsReport:
    mu: float
    e_mu: float
    ladder: list
    drift_tc: list
    drift_xi: list
    ratio: list
    leading: list
    extrapolated: dict
    dropped: list = field(default_factory=list)

    def as_dict(self):
        return {
            "mu": self.mu, "e_mu": self.e_mu,
            "ladder": [(e.lam, e.tc, e.xi, e.b_mu) for e in self.ladder],
            "drift_tc": self.drift_tc, "drift_xi": self.drift_xi, "ratio": self.ratio,
            "leading": self.leading,
            "extrapolated": {k: vars(v) for k, v in self.extrapolated.items()},
            "dropped": self.dropped,
        }


def ladder_entry(V: RadialPotential, mu: float, lam: float, n_outer: int = 200,
                 n_inner: int = 240, gap_tol: float = 1e-11) -> LadderEntry:
    """Compute ``T_c``, ``Xi`` and ``b_mu`` for one coupling."""
    from .gap_solver import energy_gap, solve_gap
    from .linear_criterion import critical_temperature

    tcr = critical_temperature(V, mu, lam, ell_set=(0,), n_outer=n_outer, n_inner=n_inner,
                               tol=1e-8)
    b = bmu(V, mu, lam).b_mu
    gap = solve_gap(V, mu, lam, 0.0, damping=1.0, tol=gap_tol, max_iter=20000,
                    n_outer=n_outer, n_inner=n_inner, initial=predict_xi(V, mu, lam, b))
    flags = list(tcr.flags) + list(gap.flags)
    if not gap.converged:
        flags.append("gap not converged")
    if tcr.grid_report and not tcr.grid_report.get("converged", True):
        flags.append("tc grid not converged")
    return LadderEntry(float(lam), tcr.tc, energy_gap(gap), b, flags)


def asymptotic_report(V: RadialPotential, mu: float, ladder=DEFAULT_LADDER, jobs: int = 1,
                      entries=None) -> AsymptoticsReport:
    """Assemble drifts, ratios and their ``lambda -> 0`` extrapolations.

    ``entries`` may hold precomputed :class:`LadderEntry` objects; otherwise
    they are computed, concurrently when ``jobs > 1``.
    """
    spec = emu(V, mu)
    if not spec.e_mu < 0:
        raise UnsupportedRegimeError("asymptotic report requires e_mu < 0")
    lams = sorted({float(x) for x in ladder}, reverse=True)
    if entries is None:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                entries = list(pool.map(lambda lam: ladder_entry(V, mu, lam), lams))
        else:
            entries = [ladder_entry(V, mu, lam) for lam in lams]
    entries = sorted(entries, key=lambda e: -e.lam)
    kept, dropped = [], []
    for e in entries:
        if e.tc > 0 and e.xi > 0:
            kept.append(e)
        else:
            dropped.append(e.lam)
            warnings.warn(f"ladder entry lambda={e.lam} below the temperature floor; dropped",
                          stacklevel=2)
    drift_tc = [e.drift_tc(mu) for e in kept]
    drift_xi = [e.drift_xi(mu) for e in kept]
    ratio = [e.xi / e.tc for e in kept]
    leading = [e.lam * math.log(mu / e.tc) for e in kept]
    lam_k = [e.lam for e in kept]
    extrap = {}
    if len(kept) >= 3:
        extrap = {
            "drift_tc": extract_limit(zip(lam_k, drift_tc)),
            "drift_xi": extract_limit(zip(lam_k, drift_xi)),
            "ratio": extract_limit(zip(lam_k, ratio)),
            "leading": extract_limit(zip(lam_k, leading)),
        }
    return AsymptoticsReport(float(mu), spec.e_mu, kept, drift_tc, drift_xi, ratio, leading,
                             extrap, dropped)
