"""Numerical kernels: Fermi-refined radial quadrature, symmetric eigenpairs, bisection."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special
import scipy.linalg

from .errors import (
    BracketError,
    ContractError,
    ConvergenceError,
    MonotonicityWarning,
    ParameterError,
)

__all__ = [
    "QuadratureGrid",
    "SpectralResult",
    "BisectionResult",
    "gauss_legendre",
    "build_fermi_grid",
    "lowest_eigenpair",
    "jacobi_eigh",
    "bisect_monotone",
]


@lru_cache(maxsize=64)
def _gl_unit(n: int):
    x, w = special.roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    """Nodes and weights of the ``n``-point Gauss-Legendre rule on ``[a, b]``."""
    x, w = _gl_unit(int(n))
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def _composite(edges, order):
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(order, a, b)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def _even_at_least(n, floor=4):
    n = max(floor, int(math.ceil(n)))
    return n + (n % 2)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Radial momentum quadrature on ``(0, cutoff)`` refined around the Fermi momentum.

    Attributes
    ----------
    nodes, weights : ndarray
        Ascending nodes in ``(0, cutoff)`` and positive weights.
    cutoff : float
        Upper momentum limit.
    fermi_momentum : float
        ``sqrt(mu)``.
    inner_window : float
        Half-width of the geometrically refined band around ``fermi_momentum``.
    counts : tuple of int
        ``(n_outer, n_inner)`` as requested.
    min_halfwidth : float
        Half-width of the central panel, i.e. the finest resolved scale.
    key : tuple
        Hashable summary of the construction parameters.
    """

    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float
    fermi_momentum: float
    inner_window: float
    counts: tuple
    min_halfwidth: float
    key: tuple = field(repr=False)

    def __len__(self):
        return self.nodes.size

    @property
    def mu(self):
        return self.fermi_momentum**2

    def integrate(self, values):
        """Sum ``weights * values`` in ascending node order."""
        return float(np.sum(self.weights * np.asarray(values, dtype=float)))

    def inner_mask(self):
        return np.abs(self.nodes - self.fermi_momentum) <= self.inner_window


def build_fermi_grid(
    mu: float,
    cutoff: float,
    n_outer: int = 200,
    n_inner: int = 240,
    w_min: float = 1e-10,
    inner_window: float | None = None,
    max_panel: float | None = None,
) -> QuadratureGrid:
    """Composite Gauss-Legendre grid on ``(0, cutoff)`` with Fermi-surface refinement.

    The band ``|p - sqrt(mu)| <= inner_window`` is split into panels whose
    distance to the Fermi momentum halves from ``inner_window`` down to
    ``w_min * sqrt(mu)``; a single symmetric panel covers the remaining core.
    Outside the band, panels grow geometrically towards ``cutoff`` (capped at
    ``max_panel`` when given).

    Parameters
    ----------
    mu : float
        Chemical potential, ``> 0``.
    cutoff : float
        Momentum cutoff, ``> 2 sqrt(mu)``.
    n_outer, n_inner : int
        Minimum node counts outside and inside the refined band.
    w_min : float
        Relative half-width of the central panel, in ``(1e-14, 1e-1)``.
    inner_window : float, optional
        Defaults to ``sqrt(mu) / 2``.
    max_panel : float, optional
        Largest allowed outer panel width.
    """
    if not (mu > 0):
        raise ParameterError("mu must be positive")
    kf = math.sqrt(mu)
    if not (cutoff > 2 * kf):
        raise ParameterError("cutoff must exceed 2*sqrt(mu)")
    if not (1e-14 < w_min < 1e-1):
        raise ParameterError("w_min must lie in (1e-14, 1e-1)")
    if n_outer < 1 or n_inner < 1:
        raise ParameterError("node counts must be positive")
    window = 0.5 * kf if inner_window is None else float(inner_window)
    if not (w_min * kf < window < kf):
        raise ParameterError("inner_window must lie in (w_min*sqrt(mu), sqrt(mu))")

    halfwidths = [window]
    while halfwidths[-1] > w_min * kf:
        halfwidths.append(0.5 * halfwidths[-1])
    core = halfwidths[-1]
    upper = [kf + h for h in reversed(halfwidths)]
    inner_edges = [kf - h for h in halfwidths] + upper
    n_panels_in = len(inner_edges) - 1
    m_in = _even_at_least(n_inner / n_panels_in)
    x_in, w_in = _composite(np.array(inner_edges), m_in)

    low_end = kf - window
    low_edges = np.linspace(0.0, low_end, 3)
    high_edges = [kf + window]
    step = window
    while high_edges[-1] < cutoff:
        nxt = high_edges[-1] + step
        if max_panel is not None:
            nxt = min(nxt, high_edges[-1] + max_panel)
        step *= 2.0
        if nxt >= cutoff or cutoff - nxt < 0.25 * (nxt - high_edges[-1]):
            nxt = cutoff
        high_edges.append(nxt)
    n_panels_out = (len(low_edges) - 1) + (len(high_edges) - 1)
    m_out = _even_at_least(n_outer / n_panels_out)
    x_lo, w_lo = _composite(low_edges, m_out)
    x_hi, w_hi = _composite(np.array(high_edges), m_out)

    nodes = np.concatenate([x_lo, x_in, x_hi])
    weights = np.concatenate([w_lo, w_in, w_hi])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    key = (float(mu), float(cutoff), int(n_outer), int(n_inner), float(w_min),
           float(window), None if max_panel is None else float(max_panel))
    return QuadratureGrid(nodes, weights, float(cutoff), kf, window,
                          (int(n_outer), int(n_inner)), core, key)


@dataclass
class SpectralResult:
    eigenvalue: float
    eigenvector: np.ndarray
    residual_norm: float
    # set by callers that compare two discretisation levels
    grid_converged: bool | None = None
    refined_eigenvalue: float | None = None


def _check_symmetric(m, rtol=1e-12):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ContractError("matrix must be square with dimension >= 1")
    scale = np.max(np.abs(m)) if m.size else 0.0
    if np.max(np.abs(m - m.T)) > rtol * max(scale, np.finfo(float).tiny):
        raise ContractError("matrix is not symmetric")
    return m


def lowest_eigenpair(matrix, tol: float = 1e-12) -> SpectralResult:
    """Smallest eigenvalue and unit eigenvector of a dense real symmetric matrix.

    Raises ``ContractError`` for non-symmetric input and ``ConvergenceError``
    (carrying the computed pair) if ``||Mv - theta v|| > tol * ||M||_F``.
    """
    m = _check_symmetric(matrix)
    m = 0.5 * (m + m.T)
    vals, vecs = scipy.linalg.eigh(m, subset_by_index=[0, 0])
    theta = float(vals[0])
    v = vecs[:, 0]
    v = v / np.linalg.norm(v)
    # fix the sign so results are reproducible
    k = int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v
    res = float(np.linalg.norm(m @ v - theta * v))
    norm = float(np.linalg.norm(m))
    result = SpectralResult(theta, v, res)
    if res > tol * max(norm, np.finfo(float).tiny):
        raise ConvergenceError(
            f"eigenpair residual {res:.3e} exceeds {tol:.1e}*||M||", best=result)
    return result


def jacobi_eigh(matrix, tol: float = 1e-14, max_sweeps: int = 60):
    """Full eigen-decomposition by cyclic Jacobi rotations.

    Slow, but independent of LAPACK; used as a reference decomposition.
    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    as columns.
    """
    a = _check_symmetric(matrix).copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * max(scale, np.finfo(float).tiny):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * (abs(a[p, p]) + abs(a[q, q])):
                    # negligible against the diagonal: drop instead of rotating
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise ConvergenceError("Jacobi sweeps did not converge", best=(np.diag(a), v))
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], v[:, order]


@dataclass
class BisectionResult:
    root: float
    bracket: tuple
    samples: list
    monotone: bool = True
    warnings: list = field(default_factory=list)

    def __float__(self):
        return float(self.root)


def bisect_monotone(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-6,
    log_scale: bool = False,
    max_iter: int = 400,
    mono_rtol: float = 1e-10,
    mono_atol: float = 0.0,
) -> BisectionResult:
    """Bisection for a nondecreasing ``f`` with ``f(lo) < 0 <= f(hi)``.

    With ``log_scale`` the midpoint is geometric and the stopping rule is
    ``hi / lo - 1 <= tol``; otherwise ``hi - lo <= tol * |x|``. Samples that
    contradict monotonicity are collected and reported through a
    ``MonotonicityWarning``; differences below ``mono_atol`` plus
    ``mono_rtol`` times the sample magnitude are treated as ties.
    """
    if not lo < hi:
        raise ParameterError("need lo < hi")
    if log_scale and lo <= 0:
        raise ParameterError("log-scale bisection needs lo > 0")
    flo, fhi = f(lo), f(hi)
    if not (flo < 0 <= fhi):
        raise BracketError(f"root not bracketed: f({lo:g})={flo:g}, f({hi:g})={fhi:g}")
    samples = [(lo, flo), (hi, fhi)]
    notes = []

    def mid(a, b):
        return math.sqrt(a * b) if log_scale else 0.5 * (a + b)

    def narrow(a, b):
        if log_scale:
            return b / a - 1.0 <= tol
        return b - a <= tol * abs(mid(a, b))

    for _ in range(max_iter):
        if narrow(lo, hi):
            break
        x = mid(lo, hi)
        fx = f(x)
        for xs, fs in samples:
            slack = mono_atol + mono_rtol * max(abs(fs), abs(fx))
            if (xs < x and fs > fx + slack) or (xs > x and fs < fx - slack):
                notes.append(f"f({xs:.6g})={fs:.6g} vs f({x:.6g})={fx:.6g}")
                break
        samples.append((x, fx))
        if fx < 0:
            lo = x
        else:
            hi = x
    else:
        raise ConvergenceError("bisection budget exhausted", best=mid(lo, hi))
    if notes:
        warnings.warn("non-monotone samples: " + "; ".join(notes[:3]), MonotonicityWarning,
                      stacklevel=2)
    samples.sort()
    return BisectionResult(mid(lo, hi), (lo, hi), samples, not notes, notes)
