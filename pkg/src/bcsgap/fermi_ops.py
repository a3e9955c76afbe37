"""Fermi-sphere operators and scalar functionals.

* channel eigenvalues of the Fermi-sphere operator ``V_mu`` (Funk-Hecke),
* the s-wave quadratic form ``<u|W_mu|u>`` for constant ``u``,
* the effective scattering length ``b_mu(lambda)`` and its Born counterpart ``a_0``,
* the scalar functions ``m_mu(T)`` and ``m~_mu(Delta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import AccuracyError, ParameterError, UnsupportedRegimeError
from .linear_criterion import k_symbol
from .numerics import build_fermi_grid, gauss_legendre
from .potentials import RadialPotential, angular_kernel

__all__ = [
    "ChannelSpectrum",
    "BmuReport",
    "vmu_channel_eigenvalue",
    "emu",
    "fermi_amplitude",
    "wmu_swave",
    "bmu",
    "coulomb_double_integral",
    "born_a0",
    "mmu",
    "mtilde",
]


def vmu_channel_eigenvalue(V: RadialPotential, mu: float, ell: int, order: int = 64,
                           tol: float = 1e-12) -> float:
    """Eigenvalue of ``V_mu`` on spherical harmonics of degree ``ell``.

    ``e_l = sqrt(mu / 2 pi) * int_{-1}^{1} V_hat(sqrt(2 mu (1 - t))) P_l(t) dt``,
    integrated with Gauss-Legendre until two successive orders agree.
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    if ell < 0:
        raise ParameterError("ell must be >= 0")
    pref = math.sqrt(mu / (2.0 * math.pi))

    def rule(n):
        t, w = gauss_legendre(n)
        vals = V.fourier(np.sqrt(2.0 * mu * (1.0 - t)))
        return pref * float(np.sum(w * vals * special.eval_legendre(ell, t)))

    n = order
    prev = rule(n)
    while n < 8192:
        n *= 2
        cur = rule(n)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise AccuracyError("Funk-Hecke integral did not converge", (prev, cur))


@dataclass
class ChannelSpectrum:
    mu: float
    entries: list
    argmin_ell: int
    truncation_stable: bool = True

    @property
    def e_mu(self) -> float:
        return min(e for _, e in self.entries)

    def value(self, ell):
        return dict(self.entries)[ell]


def emu(V: RadialPotential, mu: float, ell_max: int = 8) -> ChannelSpectrum:
    """Channel eigenvalues of ``V_mu`` for ``l = 0..ell_max``.

    The truncation is checked against ``2 * ell_max``; if a higher channel is
    lower, the table is extended and ``truncation_stable`` is cleared.
    """
    if ell_max < 0:
        raise ParameterError("ell_max must be >= 0")
    entries = [(ell, vmu_channel_eigenvalue(V, mu, ell)) for ell in range(ell_max + 1)]
    extra = [(ell, vmu_channel_eigenvalue(V, mu, ell))
             for ell in range(ell_max + 1, 2 * max(ell_max, 1) + 1)]
    stable = not extra or min(e for _, e in extra) >= min(e for _, e in entries)
    if not stable:
        entries = entries + extra
    values = np.array([e for _, e in entries])
    # ties resolve to the smallest ell (argmin returns the first occurrence)
    return ChannelSpectrum(float(mu), entries, int(np.argmin(values)), stable)


def fermi_amplitude(V: RadialPotential, mu: float, r):
    """``Phi(r) = int_{S^2} |phi_hat(r w)|^2 dw`` for the constant state ``u = (4 pi mu)^{-1/2}``.

    With ``phi_hat(p) = (2 pi)^{-3/2} int_{Omega_mu} V_hat(p - q) u(q) dw(q)``
    this reduces to ``mu * V_0(r, sqrt(mu))^2``.
    """
    k = angular_kernel(V, 0, np.asarray(r, dtype=float), math.sqrt(mu))
    return mu * k * k


def _panels_toward(a, b, toward_a, order=16, cap=None):
    """Composite GL on [a, b] with panel widths doubling away from one end."""
    length = b - a
    edges = [0.0]
    # first panel at the accumulation end scales with the interval itself
    step = length / 1024.0
    while edges[-1] < length:
        nxt = edges[-1] + step
        if cap is not None:
            nxt = min(nxt, edges[-1] + cap)
        if nxt >= length or length - nxt < 0.25 * (nxt - edges[-1]):
            nxt = length
        edges.append(nxt)
        step *= 2.0
    edges = np.array(edges)
    if toward_a:
        edges = a + edges
    else:
        edges = (b - edges)[::-1]
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(order, lo, hi)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _well_tail(V, mu, upper):
    """``int_upper^inf Phi dr`` from the large-r form of square-well amplitudes.

    Each well contributes ``V_hat ~ -sqrt(2/pi) A R cos(kR) / k^2``, so
    ``Phi ~ (4 / pi^2 r^4) (sum_i A_i sin(kf R_i) cos(R_i r))^2``.
    """
    wells = [c for c in V.parts if c.variant == "square_well"]
    if not wells:
        return 0.0
    kf = math.sqrt(mu)
    coef = [(c.amplitude * math.sin(kf * c.length), c.length) for c in wells]
    total = 0.0
    for ci, ri in coef:
        for cj, rj in coef:
            for a in (ri - rj, ri + rj):
                a = abs(a)
                if a == 0.0:
                    val = 1.0 / (3.0 * upper**3)
                else:
                    val = integrate.quad(lambda r: r**-4, upper, np.inf, weight="cos", wvar=a)[0]
                total += 0.5 * ci * cj * val
    return 4.0 / math.pi**2 * total


def _wbar_at_window(V, mu, w, upper):
    kf = math.sqrt(mu)
    phi0 = float(fermi_amplitude(V, mu, kf))
    cap = 0.5 / V.min_length

    def f(r):
        r = np.asarray(r, dtype=float)
        return r * r * (fermi_amplitude(V, mu, r) - phi0) / np.abs(r * r - mu) + phi0

    def f_far(r):
        # r > sqrt(mu): (r^2 Phi - mu Phi0) / (r^2 - mu), exact large-r form
        r = np.asarray(r, dtype=float)
        return (r * r * fermi_amplitude(V, mu, r) - mu * phi0) / (r * r - mu)

    x, wt = _panels_toward(0.0, kf - w, toward_a=False)
    below = float(np.sum(wt * f(x)))
    split = min(kf + max(0.5 * kf, 1.0 / V.max_length), upper)
    x, wt = _panels_toward(kf + w, split, toward_a=True)
    near_above = float(np.sum(wt * f(x)))
    x, wt = _panels_toward(split, upper, toward_a=True, cap=cap)
    far_above = float(np.sum(wt * f_far(x)))
    tail = -mu * phi0 * math.log((upper + kf) / (upper - kf)) / (2.0 * kf)
    # window |r - kf| < w: linear model through one-sided extrapolated limits
    fl = f([kf - w, kf - 2 * w])
    fr = f([kf + w, kf + 2 * w])
    window = 0.5 * w * (3.0 * fl[0] - fl[1]) + 0.5 * w * (3.0 * fr[0] - fr[1])
    return below + near_above + far_above + tail + window + _well_tail(V, mu, upper)


@lru_cache(maxsize=256)
def _wmu_cached(V, mu, cutoff, tol):
    kf = math.sqrt(mu)
    upper = cutoff
    w = 1e-2 * kf
    prev = _wbar_at_window(V, mu, w, upper)
    history = [prev]
    while w > 1e-7 * kf:
        w *= 0.5
        cur = _wbar_at_window(V, mu, w, upper)
        history.append(cur)
        scale = max(abs(cur), float(fermi_amplitude(V, mu, kf)) * kf, 1e-300)
        if abs(cur - prev) <= tol * scale:
            return cur
        prev = cur
    raise AccuracyError("W_mu form not stable under window halving", history[-2:])


def wmu_swave(V: RadialPotential, mu: float, cutoff: float | None = None,
              tol: float = 1e-10) -> float:
    """``<u|W_mu|u>`` for the normalised constant function on the Fermi sphere.

    Evaluates the absolutely convergent combined integrand

        int_0^inf [ r^2 (Phi(r) - Phi(sqrt mu)) / |r^2 - mu| + Phi(sqrt mu) ] dr

    excluding a window ``|r - sqrt(mu)| < w`` that is filled from one-sided
    linear extrapolation; ``w`` is halved until the value is stable to ``tol``.
    Beyond ``cutoff`` only the analytic ``-mu Phi(sqrt mu) / (r^2 - mu)`` tail
    remains.
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    if V.is_zero:
        return 0.0
    if cutoff is None:
        cutoff = 2.0 * V.default_cutoff(mu)
    if not cutoff > 2.0 * math.sqrt(mu):
        raise ParameterError("cutoff must exceed 2 sqrt(mu)")
    return _wmu_cached(V, float(mu), float(cutoff), float(tol))


@dataclass
class BmuReport:
    mu: float
    lam: float
    e_mu: float
    w_bar: float
    b_mu: float
    a0: float
    lambda_star: float

    @property
    def negative(self):
        return self.b_mu < 0


def bmu(V: RadialPotential, mu: float, lam: float, ell_max: int = 8) -> BmuReport:
    """Second-order effective scattering length ``<u|B_mu|u>``.

    ``b_mu = lambda pi e_mu / (2 sqrt mu) - lambda^2 pi <u|W_mu|u> / (2 mu)``
    for the constant eigenfunction ``u``. Refuses potentials whose lowest
    Fermi-sphere channel is not ``l = 0``.
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    if not lam > 0:
        raise ParameterError("lambda must be positive")
    spec = emu(V, mu, ell_max)
    if spec.argmin_ell != 0:
        raise UnsupportedRegimeError(
            f"lowest V_mu channel is l={spec.argmin_ell}; only the constant-eigenfunction case is supported")
    e0 = spec.value(0)
    wbar = wmu_swave(V, mu)
    b = lam * math.pi * e0 / (2.0 * math.sqrt(mu)) - lam**2 * math.pi * wbar / (2.0 * mu)
    # b < 0 for every lambda unless the second-order term has the opposite sign
    lam_star = abs(e0) * math.sqrt(mu) / abs(wbar) if (e0 < 0 and wbar < 0) else math.inf
    return BmuReport(float(mu), float(lam), e0, wbar, b, born_a0(V, lam), lam_star)


def coulomb_double_integral(V: RadialPotential) -> float:
    """``int int V(x) V(y) / |x - y| dx dy = 16 pi^2 int_0^inf V_hat(k)^2 dk``."""
    if V.is_zero:
        return 0.0
    per = {"gaussian": 14.0, "exponential": 400.0, "square_well": 2000.0}
    kmax = max(per[c.variant] / c.length for c in V.parts)
    width = 0.5 / V.max_length
    x, w = _panels_toward(0.0, kmax, toward_a=True, cap=width)
    vals = V.fourier(x)
    total = float(np.sum(w * vals * vals))
    if any(c.variant == "square_well" for c in V.parts):
        # oscillation-averaged k^-4 tail of the discontinuous well
        amp = sum(c.amplitude * 4.0 * math.pi / (2.0 * math.pi) ** 1.5 / c.length ** -1
                  for c in V.parts if c.variant == "square_well")
        total += 0.5 * amp**2 / (3.0 * kmax**3)
    return 16.0 * math.pi**2 * total


def born_a0(V: RadialPotential, lam: float) -> float:
    """Scattering length of ``2 lambda V`` to second order in the Born series.

    ``a_0 = (lambda / 4 pi) int V - (lambda / 4 pi)^2 int int V(x) V(y) / |x - y|``.
    """
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    iv = (2.0 * math.pi) ** 1.5 * float(V.fourier(0.0))
    c = lam / (4.0 * math.pi)
    return c * iv - c * c * coulomb_double_integral(V)


def _tail(mu, cutoff):
    kf = math.sqrt(mu)
    return 0.5 * kf * math.log((cutoff + kf) / (cutoff - kf))


def mmu(mu: float, T: float, n_inner: int = 480, n_outer: int = 200) -> float:
    """``m_mu(T) = max{ (1/mu) int_0^inf (r^2 / K_{T,mu}(r) - 1) dr, 0 }``."""
    if not mu > 0:
        raise ParameterError("mu must be positive")
    if not T > 0:
        raise ParameterError("temperature must be positive")
    kf = math.sqrt(mu)
    cutoff = 2.0 * kf + math.sqrt(mu + 100.0 * T)
    w_min = min(max(T / (20.0 * mu), 2e-14), 5e-2)
    grid = build_fermi_grid(mu, cutoff, n_outer, n_inner, w_min)
    r = grid.nodes
    vals = r * r / k_symbol(r * r, mu, T) - 1.0
    total = grid.integrate(vals) + _tail(mu, cutoff)
    return max(total / mu, 0.0)


def mtilde(gap, mu: float) -> float:
    """``m~_mu(Delta) = max{ (1/mu) int_0^inf (r^2 / E(r) - 1) dr, 0 }``.

    ``gap`` supplies ``grid`` and node ``values``; beyond the grid cutoff the
    gap is taken as zero, which leaves the analytic ``mu / (r^2 - mu)`` tail.
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    grid = gap.grid
    r = grid.nodes
    d = np.asarray(gap.values, dtype=float)
    d_fermi = float(np.interp(math.sqrt(mu), r, d))
    if not abs(d_fermi) > 0:
        raise ParameterError("gap vanishes on the Fermi surface: m~ diverges logarithmically")
    e = np.sqrt((r * r - mu) ** 2 + d * d)
    total = grid.integrate(r * r / e - 1.0) + _tail(mu, grid.cutoff)
    return max(total / mu, 0.0)
