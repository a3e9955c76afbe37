"""Nonlinear gap equation in the s-wave channel and the derived BCS state.

The fixed point solved here is

    Delta(p) = -lambda int_0^inf V_0(p, q) Delta(q) / E(q) * tanh(E(q) / 2T) q^2 dq,

with ``E = sqrt((p^2 - mu)^2 + Delta^2)`` and the ``tanh`` factor set to one at
``T = 0``. ``V_0`` is the s-wave kernel from :func:`bcsgap.potentials.angular_kernel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, FitError, ParameterError
from .linear_criterion import _quantized_wmin, k_symbol
from .numerics import QuadratureGrid, build_fermi_grid
from .potentials import RadialPotential, _certify_nonpositive, angular_kernel, kernel_matrix

__all__ = [
    "GapFunction",
    "BCSState",
    "gap_grid",
    "solve_gap",
    "refined_residual",
    "derive_state",
    "energy_gap",
    "continuity_diagnostic",
    "free_energy",
    "hessian_form_T0",
    "hessian_form_normal",
    "gap_shape_check",
    "gap_vanishing_temperature",
    "NORMAL_THRESHOLD",
]

NORMAL_THRESHOLD = 1e-12


def _thermal_factor(e, T):
    if T == 0:
        return np.ones_like(e)
    return np.tanh(e / (2.0 * T))


@dataclass
class GapFunction:
    """Gap ``Delta(p)`` sampled on the nodes of ``grid``."""

    grid: QuadratureGrid
    values: np.ndarray
    mu: float
    lam: float
    T: float
    potential: RadialPotential | None = None
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0
    flags: list = field(default_factory=list)

    @property
    def nodes(self):
        return self.grid.nodes

    @property
    def fermi_value(self) -> float:
        return float(np.interp(math.sqrt(self.mu), self.grid.nodes, self.values))

    @property
    def is_normal(self) -> bool:
        return not np.any(self.values > 0)

    def energy(self, p=None):
        if p is None:
            p, d = self.grid.nodes, self.values
        else:
            p = np.asarray(p, dtype=float)
            d = self(p)
        return np.sqrt((p * p - self.mu) ** 2 + d * d)

    def nystrom(self, p):
        """Right-hand side of the gap equation evaluated at arbitrary ``p``."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if self.potential is None or self.is_normal:
            return np.zeros_like(p)
        q, w = self.grid.nodes, self.grid.weights
        e = self.energy()
        src = self.values / e * _thermal_factor(e, self.T) * q * q * w
        k = angular_kernel(self.potential, 0, p[:, None], q[None, :])
        return -self.lam * (k @ src)

    def __call__(self, p):
        """Linear interpolation on the grid, kernel quadrature beyond the cutoff."""
        p = np.asarray(p, dtype=float)
        out = np.interp(p, self.grid.nodes, self.values)
        far = p > self.grid.cutoff
        if np.any(far):
            out = np.array(out, copy=True)
            out[far] = self.nystrom(p[far])
        return out


def gap_grid(V: RadialPotential, mu: float, scale: float, n_outer: int = 200,
             n_inner: int = 240) -> QuadratureGrid:
    """Fermi-refined grid whose central panel resolves the energy ``scale``."""
    return build_fermi_grid(mu, V.default_cutoff(mu), n_outer, n_inner,
                            _quantized_wmin(scale, mu, 20.0), max_panel=2.0 / V.min_length)


def _gap_map(kmat, grid, delta, mu, lam, T):
    q = grid.nodes
    e = np.sqrt((q * q - mu) ** 2 + delta * delta)
    src = delta / e * _thermal_factor(e, T) * q * q * grid.weights
    return -lam * (kmat @ src)


def _initial_guess(V, mu, lam):
    try:
        from .asymptotics import predict_xi
        guess = predict_xi(V, mu, lam)
        if math.isfinite(guess) and guess > 0:
            return min(guess, mu)
    except Exception:  # noqa: BLE001 - any failure falls back to the constant guess
        pass
    return 0.1 * mu


def solve_gap(V: RadialPotential, mu: float, lam: float, T: float = 0.0,
              grid: QuadratureGrid | None = None, damping: float = 0.5, tol: float = 1e-10,
              max_iter: int = 500, initial=None, n_outer: int = 200,
              n_inner: int = 240) -> GapFunction:
    """Solve the gap equation by damped fixed-point iteration.

    Parameters
    ----------
    V : RadialPotential
        Must have ``V_hat <= 0`` and ``V_hat(0) < 0``.
    mu, lam, T : float
        Chemical potential, coupling and temperature.
    grid : QuadratureGrid, optional
        Fixed grid. When omitted the grid follows ``max(Delta(sqrt mu), T)``
        and is rebuilt whenever that scale drifts by a factor of 4.
    damping : float
        Mixing ``Delta <- (1 - damping) Delta + damping G(Delta)``.
    tol : float
        Stop when ``sup|G(Delta) - Delta| <= tol * sup|Delta|``.
    initial : float or array, optional
        Starting gap (constant or on-grid values). Defaults to the asymptotic
        prediction of the energy gap, else ``0.1 mu``.
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    if T < 0:
        raise ParameterError("temperature must be >= 0")
    if not 0 < damping <= 1:
        raise ParameterError("damping must lie in (0, 1]")
    fixed = grid is not None

    if V.is_zero or lam == 0:
        g = grid or gap_grid(V if not V.is_zero else _DUMMY, mu, max(T, 1e-3 * mu), n_outer, n_inner)
        return GapFunction(g, np.zeros(len(g)), mu, lam, T, V, True, 0, 0.0, ["normal state"])
    if not (_certify_nonpositive(V) and float(V.fourier(0.0)) < 0):
        raise ContractError("gap solver requires V_hat <= 0 with V_hat(0) < 0")

    if initial is None:
        initial = _initial_guess(V, mu, lam)
    init = np.asarray(initial, dtype=float)
    scale = max(float(init) if init.ndim == 0 else float(np.max(init)), T)
    if grid is None:
        grid = gap_grid(V, mu, scale, n_outer, n_inner)
    delta = np.full(len(grid), float(init)) if init.ndim == 0 else init.copy()
    if delta.shape != grid.nodes.shape:
        raise ParameterError("initial gap does not match the grid")
    kmat = kernel_matrix(V, 0, grid.nodes, cache_key=grid.key)

    flags = []
    kf = math.sqrt(mu)
    residual = math.inf
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        new = _gap_map(kmat, grid, delta, mu, lam, T)
        if np.any(new < -1e-13 * max(np.max(np.abs(new)), 1e-300)):
            flags.append("positivity violated")
        top = float(np.max(np.abs(new)))
        residual = float(np.max(np.abs(new - delta))) / max(top, 1e-300)
        delta = (1.0 - damping) * delta + damping * new
        d_f = float(np.interp(kf, grid.nodes, delta))
        if np.max(np.abs(delta)) < NORMAL_THRESHOLD * mu:
            delta = np.zeros_like(delta)
            residual = 0.0
            converged = True
            flags.append("normal state")
            if T == 0:
                flags.append("suspicious collapse at T = 0")
            break
        if residual <= tol:
            converged = True
            break
        if not fixed:
            s = max(d_f, T)
            if s > 4.0 * scale or s < 0.25 * scale:
                scale = s
                new_grid = gap_grid(V, mu, scale, n_outer, n_inner)
                delta = np.interp(new_grid.nodes, grid.nodes, delta)
                grid = new_grid
                kmat = kernel_matrix(V, 0, grid.nodes, cache_key=grid.key)
    if not converged:
        flags.append("max_iter exceeded")
    return GapFunction(grid, delta, float(mu), float(lam), float(T), V, converged, it,
                       residual, sorted(set(flags)))


class _Dummy:
    # stand-in for grid sizing when V vanishes identically
    min_length = 1.0

    @staticmethod
    def default_cutoff(mu):
        return 2.0 * math.sqrt(mu) + 13.0


_DUMMY = _Dummy()


def refined_residual(gap: GapFunction, n_factor: int = 2) -> float:
    """Fixed-point residual of ``gap`` re-evaluated on a grid with more nodes.

    Returns ``sup|G(Delta) - Delta| / sup|Delta|`` on the refined grid, with
    ``Delta`` carried over by its Nystrom extension.
    """
    if gap.is_normal:
        return 0.0
    g = gap.grid
    finer = build_fermi_grid(gap.mu, g.cutoff, n_factor * g.counts[0], n_factor * g.counts[1],
                             g.key[4] / 2.0, g.inner_window, g.key[6])
    d = gap.nystrom(finer.nodes)
    kmat = kernel_matrix(gap.potential, 0, finer.nodes, cache_key=finer.key)
    new = _gap_map(kmat, finer, d, gap.mu, gap.lam, gap.T)
    return float(np.max(np.abs(new - d)) / np.max(np.abs(new)))


@dataclass
class BCSState:
    gap: GapFunction
    xi: float
    alpha: np.ndarray
    gamma: np.ndarray
    free_energy: float
    gamma_jump: float


def _alpha_gamma(p, d, mu, T):
    x = p * p - mu
    e = np.sqrt(x * x + d * d)
    if T > 0:
        th = np.tanh(e / (2.0 * T))
        safe = np.where(e > 0, e, 1.0)
        alpha = np.where(e > 0, d * th / (2.0 * safe), 0.0)
        gamma = np.where(e > 0, 0.5 - x * th / (2.0 * safe), 0.5)
        return alpha, gamma
    safe = np.where(e > 0, e, 1.0)
    alpha = np.where(e > 0, d / (2.0 * safe), 0.5)
    root = np.sqrt(np.clip(1.0 - 4.0 * alpha * alpha, 0.0, 1.0))
    gamma = np.where(x < 0, 0.5 * (1.0 + root), 0.5 * (1.0 - root))
    return alpha, gamma


def _one_sided(p, y, x0):
    """Linear extrapolation of ``y`` to ``x0`` from the two nodes on each side."""
    below = np.nonzero(p < x0)[0][-2:]
    above = np.nonzero(p > x0)[0][:2]

    def extrap(idx):
        (a, b) = idx
        return y[a] + (y[b] - y[a]) * (x0 - p[a]) / (p[b] - p[a])

    return extrap(below), extrap(above)


def gamma_jump(p, gamma, mu) -> float:
    left, right = _one_sided(np.asarray(p), np.asarray(gamma), math.sqrt(mu))
    return float(abs(right - left))


def derive_state(gap: GapFunction) -> BCSState:
    """Momentum distribution, pair amplitude, energy gap and free energy of ``gap``."""
    p = gap.grid.nodes
    d = np.asarray(gap.values, dtype=float)
    if gap.is_normal:
        d = np.zeros_like(d)
    alpha, gamma = _alpha_gamma(p, d, gap.mu, gap.T)
    if gap.is_normal:
        alpha = np.zeros_like(alpha)
        x = p * p - gap.mu
        if gap.T == 0:
            gamma = (x < 0).astype(float)
        else:
            gamma = 1.0 / (np.exp(np.clip(x / gap.T, -700, 700)) + 1.0)
    V = gap.potential
    if gap.T == 0:
        fe = free_energy(alpha, V, gap.mu, gap.lam, 0.0, grid=gap.grid)
    else:
        fe = free_energy((gamma, alpha), V, gap.mu, gap.lam, gap.T, grid=gap.grid)
    return BCSState(gap, energy_gap(gap), alpha, gamma, fe, gamma_jump(p, gamma, gap.mu))


def energy_gap(gap: GapFunction, n_fine: int = 4001) -> float:
    """``Xi = min_p sqrt((p^2 - mu)^2 + Delta(p)^2)`` on the nodes plus a fine Fermi mesh."""
    if gap.is_normal:
        return 0.0
    kf = math.sqrt(gap.mu)
    d_f = abs(gap.fermi_value)
    half = min(4.0 * d_f / kf + 4.0 * gap.grid.min_halfwidth, 0.5 * kf)
    fine = np.linspace(kf - half, kf + half, n_fine)
    e_nodes = gap.energy()
    e_fine = np.sqrt((fine * fine - gap.mu) ** 2 + gap(fine) ** 2)
    return float(min(np.min(e_nodes), np.min(e_fine)))


def continuity_diagnostic(state: BCSState, tol: float = 1e-3) -> dict:
    """Compare ``Xi > 0`` with continuity of ``gamma`` at the Fermi surface."""
    mu = state.gap.mu
    gapped = state.xi > NORMAL_THRESHOLD * mu
    continuous = state.gamma_jump < tol
    return {"xi": state.xi, "gamma_jump": state.gamma_jump, "gapped": gapped,
            "continuous": continuous, "agree": gapped == continuous}


def _default_grid(V, mu, T):
    return gap_grid(V, mu, max(T, 1e-3 * mu))


def _potential_term(V, grid, alpha):
    """``int V |alpha|^2 dx`` for radial ``alpha`` given in momentum space."""
    if V is None or V.is_zero:
        return 0.0
    p, w = grid.nodes, grid.weights
    f = alpha * p * p * w
    kmat = kernel_matrix(V, 0, p, cache_key=grid.key)
    return 4.0 * math.pi * float(f @ kmat @ f)


def free_energy(fields, V: RadialPotential, mu: float, lam: float, T: float = 0.0,
                grid: QuadratureGrid | None = None) -> float:
    """BCS free energy of radial fields on ``grid``.

    At ``T = 0`` ``fields`` is ``alpha`` and the zero-temperature functional
    with ``gamma`` eliminated is returned. At ``T > 0`` ``fields`` is the pair
    ``(gamma, alpha)`` and the entropy uses the eigenvalues
    ``1/2 +- sqrt((gamma - 1/2)^2 + alpha^2)`` of the 2x2 density matrix.
    """
    if grid is None:
        grid = _default_grid(V, mu, T)
    p = grid.nodes
    meas = 4.0 * math.pi * p * p
    x = p * p - mu
    if T == 0:
        alpha = np.asarray(fields, dtype=float)
        if np.any(np.abs(alpha) > 0.5 + 1e-12):
            raise ContractError("|alpha| must not exceed 1/2")
        root = np.sqrt(np.clip(1.0 - 4.0 * alpha * alpha, 0.0, 1.0))
        kin = 0.5 * grid.integrate(meas * np.abs(x) * (1.0 - root))
        return kin + lam * _potential_term(V, grid, alpha)
    gamma, alpha = (np.asarray(f, dtype=float) for f in fields)
    if np.any(gamma < -1e-12) or np.any(gamma > 1 + 1e-12):
        raise ContractError("gamma must lie in [0, 1]")
    if np.any(alpha * alpha > gamma * (1 - gamma) + 1e-12):
        raise ContractError("|alpha|^2 must not exceed gamma (1 - gamma)")
    r = np.sqrt((gamma - 0.5) ** 2 + alpha * alpha)
    ent = np.zeros_like(r)
    for lam_pm in (0.5 + r, 0.5 - r):
        v = np.clip(lam_pm, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ent -= np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)
    kin = grid.integrate(meas * x * gamma)
    return kin + lam * _potential_term(V, grid, alpha) - T * grid.integrate(meas * ent)


def hessian_form_T0(g, gap: GapFunction) -> float:
    """Second variation of the zero-temperature functional at ``alpha = Delta / 2E``.

    ``2 <g|E + lambda V|g> + 8 int |p^2 - mu| (alpha g)^2 / (1 - 4 alpha^2)^{3/2}``
    for a real radial test function ``g`` sampled on the gap grid.
    """
    grid = gap.grid
    p, w = grid.nodes, grid.weights
    g = np.asarray(g, dtype=float)
    x = p * p - gap.mu
    e = gap.energy()
    alpha = np.where(e > 0, gap.values / (2.0 * np.where(e > 0, e, 1.0)), 0.0)
    meas = 4.0 * math.pi * p * p
    one = 2.0 * (grid.integrate(meas * e * g * g) + gap.lam * _potential_term(gap.potential, grid, g))
    denom = np.clip(1.0 - 4.0 * alpha * alpha, 1e-300, None) ** 1.5
    two = 8.0 * grid.integrate(meas * np.abs(x) * (alpha * g) ** 2 / denom)
    return one + two


def hessian_form_normal(g, V: RadialPotential, mu: float, lam: float, T: float,
                        grid: QuadratureGrid) -> float:
    """Second variation of ``F_T`` at the normal state: ``2 <g|K_{T,mu} + lambda V|g>``."""
    p = grid.nodes
    g = np.asarray(g, dtype=float)
    meas = 4.0 * math.pi * p * p
    return 2.0 * (grid.integrate(meas * k_symbol(p * p, mu, T) * g * g)
                  + lam * _potential_term(V, grid, g))


def gap_shape_check(gap: GapFunction, V: RadialPotential | None = None) -> dict:
    """Compare ``Delta`` with the Fermi-ring integral ``A(p)`` of ``V_hat``.

    ``A(p) = 2 pi mu int_{-1}^{1} V_hat(sqrt(p^2 + mu - 2 sqrt(mu) p t)) dt``.
    Returns the least-squares ``f`` in ``Delta ~ -f A`` and the sup deviation of
    the normalised shapes ``Delta / Delta(sqrt mu)`` and ``A / A(sqrt mu)``.
    """
    V = V or gap.potential
    mu = gap.mu
    kf = math.sqrt(mu)
    p = gap.grid.nodes
    scale = mu * (2.0 * math.pi) ** 1.5
    a = scale * angular_kernel(V, 0, p, kf)
    a_f = scale * float(angular_kernel(V, 0, kf, kf))
    if a_f == 0:
        raise FitError("ring integral vanishes on the Fermi surface")
    d = gap.values
    wts = gap.grid.weights * p * p
    f = -float(np.sum(wts * d * a) / np.sum(wts * a * a))
    dev = float(np.max(np.abs(d / gap.fermi_value - a / a_f)))
    return {"f": f, "sup_deviation": dev}


def gap_vanishing_temperature(V: RadialPotential, mu: float, lam: float, t_ref: float,
                              offsets=(0.01, 0.02, 0.04), tol: float = 1e-12,
                              max_iter: int = 200000, damping: float = 1.0) -> dict:
    """Temperature at which the finite-T gap closes.

    ``Delta(sqrt mu)^2`` is computed at ``T = t_ref (1 - d)`` for each offset
    and extrapolated to zero with a quadratic in ``T``; ``t_ref`` only places
    the samples. Samples in the normal state are discarded.
    """
    temps, sq = [], []
    runs = []
    for off in offsets:
        T = t_ref * (1.0 - off)
        gap = solve_gap(V, mu, lam, T, damping=damping, tol=tol, max_iter=max_iter)
        runs.append(gap)
        if not gap.is_normal:
            temps.append(T)
            sq.append(gap.fermi_value ** 2)
    if len(temps) < 3:
        raise FitError("fewer than three superfluid samples below t_ref")
    t = np.array(temps)
    coef = np.polyfit(t - t_ref, np.array(sq), 2)
    roots = np.roots(coef)
    real = [r.real + t_ref for r in roots if abs(r.imag) < 1e-14 and r.real > -t_ref * 0.5]
    if not real:
        raise FitError("no real root near t_ref")
    root = min(real, key=lambda r: abs(r - t_ref))
    lin = np.polyfit(t, np.array(sq), 1)
    return {"T_vanish": float(root), "T_vanish_linear": float(-lin[1] / lin[0]),
            "samples": list(zip(temps, sq)), "converged": all(g.converged for g in runs),
            "iterations": [g.iterations for g in runs]}
