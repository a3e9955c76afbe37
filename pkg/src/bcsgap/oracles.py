"""Brute-force reference computations used to cross-check the production routes.

Each oracle takes a different numerical path from the code it checks:

* ``sphere_diagonalization``: dense eigen-decomposition of ``V_mu`` sampled on a
  product grid on the Fermi sphere (no Funk-Hecke reduction);
* ``bipolar_coulomb``: ``int int V(x) V(y) / |x - y|`` in position space via the
  shell rule ``1 / max(r, s)``;
* ``wmu_finite_T``: the ``<u|W_mu|u>`` form as the ``T -> 0`` limit of the
  thermal expression, using adaptive quadrature throughout.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .fermi_ops import _well_tail
from .numerics import gauss_legendre
from .potentials import RadialPotential

__all__ = ["sphere_diagonalization", "sphere_channel_check", "bipolar_coulomb",
           "wmu_finite_T", "wmu_extrapolated"]


def _sphere_points(mu, n_theta, n_phi):
    t, wt = gauss_legendre(n_theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(t, phi, indexing="ij")
    st = np.sqrt(1.0 - tt * tt)
    kf = math.sqrt(mu)
    pts = kf * np.stack([st * np.cos(pp), st * np.sin(pp), tt], axis=-1).reshape(-1, 3)
    w = (mu * np.outer(wt, np.full(n_phi, 2.0 * math.pi / n_phi))).ravel()
    return pts, w, tt.ravel(), pp.ravel()


def sphere_diagonalization(V: RadialPotential, mu: float, n_theta: int = 24, n_phi: int = 48):
    """Eigenvalues of ``V_mu`` from a Nystrom matrix on the Fermi sphere.

    The kernel ``(2 pi)^{-3/2} mu^{-1/2} V_hat(p - q)`` is sampled on
    Gauss-Legendre nodes in ``cos(theta)`` times equispaced ``phi`` and
    symmetrised with the square roots of the surface weights.

    Returns
    -------
    eigenvalues : ndarray
    matrix, points, weights, cos_theta, phi
        The discretisation, for projections onto sampled harmonics.
    """
    pts, w, ct, ph = _sphere_points(mu, n_theta, n_phi)
    diff = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    kern = V.fourier(diff) / ((2.0 * math.pi) ** 1.5 * math.sqrt(mu))
    sw = np.sqrt(w)
    m = sw[:, None] * kern * sw[None, :]
    m = 0.5 * (m + m.T)
    return np.linalg.eigvalsh(m), m, pts, w, ct, ph


def sphere_channel_check(V: RadialPotential, mu: float, ells=(0, 1, 2), n_theta: int = 24,
                         n_phi: int = 48) -> dict:
    """Per channel: the sampled-harmonic Rayleigh quotients and the nearest eigenvalues.

    For each ``ell`` every ``Y_{ell m}`` (real form) is sampled on the grid and
    its Rayleigh quotient computed; the ``2 ell + 1`` eigenvalues closest to
    their mean are also reported.
    """
    evals, m, _pts, w, ct, ph = sphere_diagonalization(V, mu, n_theta, n_phi)
    sw = np.sqrt(w)
    theta = np.arccos(np.clip(ct, -1.0, 1.0))
    out = {}
    for ell in ells:
        quotients = []
        for mm in range(-ell, ell + 1):
            y = special.sph_harm_y(ell, abs(mm), theta, ph) if hasattr(special, "sph_harm_y") \
                else special.sph_harm(abs(mm), ell, ph, theta)
            y = np.sqrt(2.0) * (y.imag if mm < 0 else y.real) if mm != 0 else y.real
            v = sw * y
            quotients.append(float(v @ m @ v / (v @ v)))
        mean = float(np.mean(quotients))
        near = np.sort(evals[np.argsort(np.abs(evals - mean))[: 2 * ell + 1]])
        out[ell] = {"quotients": quotients, "eigenvalues": near.tolist()}
    return out


def bipolar_coulomb(V: RadialPotential) -> float:
    """``int int V(x) V(y) / |x - y| dx dy = 32 pi^2 int_0^inf r V(r) C(r) dr``.

    ``C(r) = int_0^r s^2 V(s) ds``; both radial integrals use adaptive
    quadrature with breakpoints at the square-well radii.
    """
    if V.is_zero:
        return 0.0
    ext = V.real_space_extent()
    breaks = sorted({c.length for c in V.parts if c.variant == "square_well"})

    def inner(r):
        pts = [b for b in breaks if b < r]
        edges = [0.0] + pts + [r]
        return sum(integrate.quad(lambda s: s * s * V(s), a, b, epsabs=0.0, epsrel=1e-13,
                                  limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))

    def outer(r):
        return r * float(V(r)) * inner(r)

    edges = [0.0] + [b for b in breaks if b < ext] + [ext]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(outer, a, b, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    return 32.0 * math.pi**2 * total


def _phi_amplitude(V, mu, r):
    """``Phi(r) = 4 pi |phi_hat(r)|^2`` with the ``t``-integral done adaptively."""
    kf = math.sqrt(mu)
    val = integrate.quad(lambda t: float(V.fourier(math.sqrt(max(r * r + mu - 2 * kf * r * t, 0.0)))),
                         -1.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    amp = kf / (2.0 ** 1.5 * math.pi) * val
    return 4.0 * math.pi * amp * amp


def wmu_finite_T(V: RadialPotential, mu: float, T: float, r_max: float | None = None) -> float:
    """Thermal form ``int r^2 Phi / K_T dr - Phi(sqrt mu) int (r^2 / K_T - 1) dr``."""
    kf = math.sqrt(mu)
    phi0 = _phi_amplitude(V, mu, kf)
    if r_max is None:
        r_max = 2.0 * V.default_cutoff(mu)

    def kinv(r):
        x = r * r - mu
        if abs(x) < 1e-8 * T:
            return 1.0 / (2.0 * T)
        return math.tanh(x / (2.0 * T)) / x

    # breakpoints resolve the thermal layer |r - kf| ~ T / kf geometrically
    w = T / kf
    near = sorted({kf + s * w * 2.0**j for s in (-1, 1) for j in range(0, 60)
                   if 0 < kf + s * w * 2.0**j < min(2 * kf, r_max) and w * 2.0**j < 0.5 * kf})
    edges = [0.0] + near + [kf] + [2.0 * kf]
    edges = sorted(set(edges))
    far = list(np.geomspace(2.0 * kf, r_max, 24))
    edges = edges + far[1:]

    def f1(r):
        return r * r * _phi_amplitude(V, mu, r) * kinv(r)

    def f2(r):
        return r * r * kinv(r) - 1.0

    i1 = i2 = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        i1 += integrate.quad(f1, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
        i2 += integrate.quad(f2, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    # beyond r_max: r^2 / K - 1 -> mu / (r^2 - mu), Phi only through its square-well tail
    i2 += 0.5 * kf * math.log((r_max + kf) / (r_max - kf))
    i1 += _well_tail(V, mu, r_max)
    return i1 - phi0 * i2


def wmu_extrapolated(V: RadialPotential, mu: float, temps=(1e-6, 1e-7)) -> dict:
    """Linear extrapolation in ``T`` of :func:`wmu_finite_T` to ``T = 0``."""
    (t1, t2) = (temps[0] * mu, temps[1] * mu)
    w1, w2 = wmu_finite_T(V, mu, t1), wmu_finite_T(V, mu, t2)
    limit = w2 + (w2 - w1) * t2 / (t1 - t2)
    return {"values": (w1, w2), "temps": (t1, t2), "limit": limit}
