"""Radial pair potentials, their Fourier transforms and partial-wave kernels.

Conventions: ``V_hat(k) = (2 pi)^(-3/2) * int V(x) exp(-i k.x) dx`` and the
partial-wave kernel

    V_l(p, q) = (2 pi)^(-3/2) * 2 pi * int_{-1}^{1} V_hat(|p - q|) P_l(t) dt,

with ``|p - q|^2 = p^2 + q^2 - 2 p q t``, so that on radial functions
``(V f)(p) = int_0^inf V_l(p, q) f(q) q^2 dq``.
"""

from __future__ import annotations

import math
import re
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import AccuracyError, ParameterError
from .numerics import gauss_legendre

__all__ = [
    "RadialPotential",
    "IntegrabilityReport",
    "gaussian",
    "square_well",
    "exponential",
    "mix",
    "zero",
    "CATALOG",
    "parse_potential",
    "fourier_transform",
    "angular_kernel",
    "kernel_matrix",
    "integrability_report",
]

TWO_PI_32 = (2.0 * math.pi) ** 1.5
VARIANTS = ("gaussian", "square_well", "exponential", "mix")


@dataclass(frozen=True)
class RadialPotential:
    """Parametric radial interaction ``V(r)``.

    ``length`` is the range (gaussian, exponential) or radius (square well).
    A ``mix`` is the sum of its ``components``.
    """

    variant: str
    amplitude: float = 0.0
    length: float = 1.0
    components: tuple = ()

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown potential variant {self.variant!r}")
        if self.variant == "mix":
            if not self.components:
                raise ParameterError("mix needs at least one component")
            if any(c.variant == "mix" for c in self.components):
                raise ParameterError("nested mix is not supported")
        elif not (self.length > 0 and math.isfinite(self.length)):
            raise ParameterError("range/radius must be positive")
        if not math.isfinite(self.amplitude):
            raise ParameterError("amplitude must be finite")

    # -- structure -------------------------------------------------------
    @property
    def parts(self):
        return self.components if self.variant == "mix" else (self,)

    @property
    def is_zero(self):
        return all(c.amplitude == 0.0 for c in self.parts)

    @property
    def min_length(self):
        return min(c.length for c in self.parts)

    @property
    def max_length(self):
        return max(c.length for c in self.parts)

    def default_cutoff(self, mu: float) -> float:
        """Momentum cutoff beyond which ``V_hat`` is negligible for the kernels."""
        per = {"gaussian": 13.0, "exponential": 150.0, "square_well": 60.0}
        k = max(per[c.variant] / c.length for c in self.parts)
        return 2.0 * math.sqrt(mu) + k

    def real_space_extent(self) -> float:
        ext = {"gaussian": 8.4, "exponential": 70.0, "square_well": 1.0}
        return max(ext[c.variant] * c.length for c in self.parts)

    # -- evaluation ------------------------------------------------------
    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for c in self.parts:
            if c.variant == "gaussian":
                out = out + c.amplitude * np.exp(-(r / c.length) ** 2)
            elif c.variant == "exponential":
                out = out + c.amplitude * np.exp(-r / c.length)
            else:
                out = out + np.where(r < c.length, c.amplitude, 0.0)
        return out

    def fourier(self, k):
        """Closed-form ``V_hat(k)``."""
        k = np.abs(np.asarray(k, dtype=float))
        out = np.zeros_like(k)
        for c in self.parts:
            a, R = c.amplitude, c.length
            if c.variant == "gaussian":
                out = out + a * R**3 * 2.0**-1.5 * np.exp(-0.25 * (k * R) ** 2)
            elif c.variant == "exponential":
                out = out + a * 8.0 * math.pi * R**3 / TWO_PI_32 / (1.0 + (k * R) ** 2) ** 2
            else:
                x = k * R
                small = x < 1e-3
                xs = np.where(small, 1.0, x)
                g = np.where(small, 1.0 / 3.0 - x**2 / 30.0 + x**4 / 840.0,
                             (np.sin(xs) - xs * np.cos(xs)) / xs**3)
                out = out + a * 4.0 * math.pi * R**3 / TWO_PI_32 * g
        return out

    def spec(self) -> str:
        """Normalised specification string (inverse of :func:`parse_potential`)."""
        if self.variant == "mix":
            return "mix:[" + ";".join(c.spec() for c in self.components) + "]"
        key = "radius" if self.variant == "square_well" else "range"
        return f"{self.variant}:amp={_fmt(self.amplitude)},{key}={_fmt(self.length)}"

    def __str__(self):
        return self.spec()


def _fmt(x: float) -> str:
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def gaussian(amp: float, range: float = 1.0) -> RadialPotential:  # noqa: A002
    """``V(r) = amp * exp(-(r/range)^2)``."""
    return RadialPotential("gaussian", float(amp), float(range))


def square_well(amp: float, radius: float = 1.0) -> RadialPotential:
    """``V(r) = amp`` for ``r < radius``, zero outside."""
    return RadialPotential("square_well", float(amp), float(radius))


def exponential(amp: float, range: float = 1.0) -> RadialPotential:  # noqa: A002
    """``V(r) = amp * exp(-r/range)``."""
    return RadialPotential("exponential", float(amp), float(range))


def mix(*components: RadialPotential) -> RadialPotential:
    return RadialPotential("mix", components=tuple(components))


def zero() -> RadialPotential:
    return gaussian(0.0, 1.0)


CATALOG = {
    "gaussian": gaussian(-5.0, 1.0),
    "exponential": exponential(-3.0, 0.8),
    "square_well": square_well(-2.0, 1.5),
    # attractive on average, repulsive Fourier components at large k
    "mix": mix(gaussian(-5.0, 1.0), gaussian(3.0, 0.4)),
}

_SIMPLE = re.compile(r"^\s*(gaussian|square_well|exponential)\s*:\s*(.*)$")


def parse_potential(text: str) -> RadialPotential:
    """Parse ``gaussian:amp=-5,range=1``-style specifications.

    Grammar::

        spec   := simple | "mix:[" simple (";" simple)* "]"
        simple := variant ":" key "=" number ("," key "=" number)*
        keys   := amp, and range (gaussian, exponential) or radius (square_well)
    """
    text = text.strip()
    if text.startswith("mix:"):
        body = text[4:].strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ParameterError("mix must be written as mix:[spec;spec;...]")
        items = [s for s in body[1:-1].split(";") if s.strip()]
        return mix(*(parse_potential(s) for s in items))
    m = _SIMPLE.match(text)
    if not m:
        raise ParameterError(f"cannot parse potential {text!r}")
    variant, rest = m.groups()
    length_key = "radius" if variant == "square_well" else "range"
    values = {}
    for item in rest.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ParameterError(f"potential parameter {item!r} lacks '='")
        k, v = (s.strip() for s in item.split("=", 1))
        if k not in ("amp", length_key):
            raise ParameterError(f"unknown potential parameter {k!r} for {variant}")
        try:
            values[k] = float(v)
        except ValueError:
            raise ParameterError(f"potential parameter {k!r} is not a number") from None
    if "amp" not in values:
        raise ParameterError("potential needs amp=")
    return RadialPotential(variant, values["amp"], values.get(length_key, 1.0))


# -- Fourier transform ---------------------------------------------------

def _sine_transform(V: RadialPotential, k: np.ndarray) -> np.ndarray:
    """``(2 pi)^(-3/2) (4 pi / k) int_0^inf r V(r) sin(k r) dr`` by composite Gauss-Legendre."""
    kmax = float(np.max(k)) if k.size else 0.0
    width = min(0.25 * V.min_length, 1.0 / max(kmax, 1e-300))
    breaks = sorted({c.length for c in V.parts if c.variant == "square_well"}
                    | {V.real_space_extent()})
    edges = [0.0]
    for b in breaks:
        n = max(1, int(math.ceil((b - edges[-1]) / width)))
        edges.extend(np.linspace(edges[-1], b, n + 1)[1:])
    r_all, w_all = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(16, a, b)
        r_all.append(x)
        w_all.append(w)
    r = np.concatenate(r_all)
    w = np.concatenate(w_all)
    f = w * r * r * V(r)
    # sin(kr)/k = r sinc(kr/pi), finite at k = 0
    s = np.sinc(np.outer(k, r) / math.pi)
    return 4.0 * math.pi / TWO_PI_32 * (s @ f)


def fourier_transform(V: RadialPotential, k, method: str = "closed"):
    """Fourier transform ``V_hat(k)``.

    ``method="closed"`` uses the analytic transform of each variant,
    ``method="numeric"`` the radial sine quadrature.
    """
    k = np.abs(np.asarray(k, dtype=float))
    if method == "closed":
        return V.fourier(k)
    if method == "numeric":
        flat = k.ravel()
        return _sine_transform(V, flat).reshape(k.shape)
    raise ParameterError(f"unknown method {method!r}")


# -- partial-wave kernel -------------------------------------------------

def _gaussian_kernel(V, ell, p, q):
    # int e^{z t} P_l(t) dt = 2 i_l(z), evaluated with exponential scaling
    out = 0.0
    pq = p * q
    for c in V.parts:
        R = c.length
        pref = c.amplitude * R**3 * 2.0**-1.5
        z = 0.5 * R * R * pq
        zs = np.maximum(z, 1e-300)
        il_scaled = np.sqrt(math.pi / (2.0 * zs)) * special.ive(ell + 0.5, zs)
        if ell == 0:
            il_scaled = np.where(z < 1e-8, np.exp(-z) * (1.0 + z * z / 6.0), il_scaled)
        else:
            il_scaled = np.where(z < 1e-300, 0.0, il_scaled)
        out = out + pref * 2.0 * np.exp(-0.25 * R * R * (p - q) ** 2) * il_scaled
    return out / math.sqrt(2.0 * math.pi)


def _swave_part(c, p, q):
    """``int_{-1}^{1} V_hat(|p - q|_t) dt`` for one non-gaussian component."""
    a, R = c.amplitude, c.length
    if c.variant == "exponential":
        # int (alpha - beta t)^-2 dt = 2 / ((alpha - beta)(alpha + beta))
        pref = a * 8.0 * math.pi * R**3 / TWO_PI_32
        return pref * 2.0 / ((1.0 + (R * (p - q)) ** 2) * (1.0 + (R * (p + q)) ** 2))
    # square well: substitute k, then int k j1(kR)/(kR) dk = -j0(kR) / R^2
    pref = a * 4.0 * math.pi * R**3 / TWO_PI_32
    x1, x2 = R * np.abs(p - q), R * (p + q)
    pq = np.maximum(p * q, 1e-300)
    exact = (special.spherical_jn(0, x1) - special.spherical_jn(0, x2)) / (R * R * pq)
    # narrow k-range: direct 8-point rule avoids the cancellation above
    kk, ww = gauss_legendre(8)
    lo, hi = np.abs(p - q), p + q
    k = 0.5 * (hi - lo)[..., None] * kk + 0.5 * (hi + lo)[..., None]
    g = _sw_shape(R * k)
    narrow = (0.5 * (hi - lo)[..., None] * ww * g * k).sum(-1) / pq
    return pref * np.where(x2 - x1 < 1e-3, narrow, exact)


def _sw_shape(x):
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 / 3.0 - x**2 / 30.0 + x**4 / 840.0,
                    (np.sin(xs) - xs * np.cos(xs)) / xs**3)


def _swave_closed(V, p, q):
    out = 0.0
    gauss = [c for c in V.parts if c.variant == "gaussian"]
    if gauss:
        out = out + _gaussian_kernel(RadialPotential("mix", 0.0, 1.0, tuple(gauss))
                                     if len(gauss) > 1 else gauss[0], 0, p, q)
    for c in V.parts:
        if c.variant != "gaussian":
            out = out + _swave_part(c, p, q) / math.sqrt(2.0 * math.pi)
    return out


def _quadrature_kernel(V, ell, p, q, order, chunk=64):
    """Angular projection as an integral over ``k = |p - q|``.

    ``int P_l(t) V_hat(k(t)) dt = (pq)^-1 int_{|p-q|}^{p+q} V_hat(k) P_l(t(k)) k dk``,
    with ``s = ln(1 + k R)`` as integration variable so that both decaying
    and oscillating transforms are smooth in ``s``. Entries with
    ``min(p, q) << max(p, q)`` are integrated in ``t`` directly.
    """
    R = V.min_length
    p, q = np.broadcast_arrays(p, q)
    lo, hi = np.abs(p - q), p + q
    pq = p * q
    narrow = (hi - lo) < 1e-3 * np.maximum(hi, 1e-300)
    s_lo, s_hi = np.log1p(lo * R), np.log1p(hi * R)
    x, w = gauss_legendre(order)
    half = 0.5 * (s_hi - s_lo)
    mid = 0.5 * (s_hi + s_lo)
    safe_pq = np.where(narrow, 1.0, np.maximum(pq, 1e-300))
    out = np.zeros(p.shape)
    # accumulate over node chunks to bound memory
    for i in range(0, order, chunk):
        sv = mid[..., None] + half[..., None] * x[i:i + chunk]
        k = np.expm1(sv) / R
        t = np.clip(((p * p + q * q)[..., None] - k * k) / (2.0 * safe_pq[..., None]), -1.0, 1.0)
        jac = (k + 1.0 / R) * half[..., None]
        out = out + (V.fourier(k) * special.eval_legendre(ell, t) * k * jac) @ w[i:i + chunk]
    out = out / safe_pq
    if np.any(narrow):
        tq, wq = gauss_legendre(64)
        s2 = (p * p + q * q)[narrow][:, None] - 2.0 * pq[narrow][:, None] * tq
        out[narrow] = V.fourier(np.sqrt(np.maximum(s2, 0.0))) @ (special.eval_legendre(ell, tq) * wq)
    return out / math.sqrt(2.0 * math.pi)


def angular_kernel(V: RadialPotential, ell: int, p, q, order: int = 64, tol: float = 1e-11,
                   method: str = "auto"):
    """Partial-wave projected kernel ``V_l(p, q)``.

    ``method="quadrature"`` integrates over the angle with Gauss-Legendre,
    doubling ``order`` until two successive orders agree to ``tol``;
    ``"closed"`` uses modified spherical Bessel functions for gaussians (any
    ``l``) and the elementary s-wave antiderivatives of the exponential and
    square-well transforms; ``"auto"`` picks the closed form when available.
    """
    ell = int(ell)
    if ell < 0:
        raise ParameterError("ell must be >= 0")
    p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
    all_gauss = all(c.variant == "gaussian" for c in V.parts)
    if method == "auto":
        method = "closed" if (all_gauss or ell == 0) else "quadrature"
    if method == "closed":
        if all_gauss:
            return _gaussian_kernel(V, ell, p, q)
        if ell != 0:
            raise ParameterError("closed-form kernel for l > 0 only for gaussian potentials")
        return _swave_closed(V, p, q)
    if method != "quadrature":
        raise ParameterError(f"unknown method {method!r}")
    n = int(order)
    prev = _quadrature_kernel(V, ell, p, q, n)
    while True:
        n *= 2
        cur = _quadrature_kernel(V, ell, p, q, n)
        scale = max(float(np.max(np.abs(cur))) if cur.size else 0.0, 1e-300)
        if cur.size == 0 or np.max(np.abs(cur - prev)) <= tol * max(scale, 1.0):
            return cur
        if n >= 1024:
            raise AccuracyError("angular quadrature failed to converge",
                                (float(np.max(np.abs(prev))), float(np.max(np.abs(cur)))))
        prev = cur


_KERNEL_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_KERNEL_LOCK = threading.Lock()
_KERNEL_CACHE_SIZE = 48


def kernel_matrix(V: RadialPotential, ell: int, nodes, cache_key=None) -> np.ndarray:
    """Symmetric matrix ``V_l(p_i, p_j)`` on the given nodes.

    Evaluated row-block by row-block; the upper triangle is mirrored so the
    result is exactly symmetric. ``cache_key`` (e.g. a grid key) enables
    memoisation.
    """
    key = None if cache_key is None else (V, int(ell), cache_key)
    if key is not None:
        with _KERNEL_LOCK:
            hit = _KERNEL_CACHE.get(key)
            if hit is not None:
                _KERNEL_CACHE.move_to_end(key)
                return hit
    x = np.asarray(nodes, dtype=float)
    n = x.size
    out = np.empty((n, n))
    block = max(1, 50_000 // max(n, 1))
    for start in range(0, n, block):
        rows = slice(start, min(n, start + block))
        out[rows] = angular_kernel(V, ell, x[rows, None], x[None, :])
    out = np.triu(out) + np.triu(out, 1).T
    out.setflags(write=False)
    if key is not None:
        with _KERNEL_LOCK:
            _KERNEL_CACHE[key] = out
            while len(_KERNEL_CACHE) > _KERNEL_CACHE_SIZE:
                _KERNEL_CACHE.popitem(last=False)
    return out


# -- integrability ---------------------------------------------------------

@dataclass
class IntegrabilityReport:
    integral: float
    abs_integral: float
    l32_norm: float
    weighted_l65_norm: float
    finite: bool
    weight_decay: bool
    has_negative_integral: bool
    fourier_nonpositive: bool
    fourier_identity_error: float


def _radial_integral(V, g):
    pts = sorted({c.length for c in V.parts if c.variant == "square_well"})
    ext = V.real_space_extent()
    total = 0.0
    edges = [0.0] + [p for p in pts if p < ext] + [ext]
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(g, a, b, limit=400, epsabs=0.0, epsrel=1e-13)
        total += val
    tail, _ = integrate.quad(g, ext, np.inf, limit=400, epsabs=1e-300, epsrel=1e-12)
    return 4.0 * math.pi * (total + tail)


def _certify_nonpositive(V) -> bool:
    if V.is_zero:
        return True
    known = all(c.variant in ("gaussian", "exponential") and c.amplitude <= 0 for c in V.parts)
    k = np.linspace(0.0, 40.0 / V.min_length, 4096)
    sampled = bool(np.all(V.fourier(k) <= 0.0))
    return known or (sampled and all(c.variant != "square_well" for c in V.parts))


def integrability_report(V: RadialPotential) -> IntegrabilityReport:
    """Numerical integrability diagnostics for ``V``.

    Reports ``int V``, ``int |V|``, the L^{3/2} norm, the L^{6/5} norm of
    ``V(x)|x|``, the sign flags, and the error of ``int V = (2 pi)^{3/2} V_hat(0)``.
    """
    if V.is_zero:
        return IntegrabilityReport(0.0, 0.0, 0.0, 0.0, True, True, False, True, 0.0)
    iv = _radial_integral(V, lambda r: r * r * V(r))
    iabs = _radial_integral(V, lambda r: r * r * abs(V(r)))
    l32 = _radial_integral(V, lambda r: r * r * abs(V(r)) ** 1.5) ** (2.0 / 3.0)
    l65 = _radial_integral(V, lambda r: r * r * (abs(V(r)) * r) ** 1.2) ** (5.0 / 6.0)
    finite = all(math.isfinite(x) for x in (iv, iabs, l32))
    ident = abs(iv - TWO_PI_32 * float(V.fourier(0.0))) / max(abs(iv), 1e-300)
    return IntegrabilityReport(
        integral=iv, abs_integral=iabs, l32_norm=l32, weighted_l65_norm=l65,
        finite=finite, weight_decay=math.isfinite(l65), has_negative_integral=iv < 0,
        fourier_nonpositive=_certify_nonpositive(V), fourier_identity_error=ident)
