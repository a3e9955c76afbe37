"""Linear criterion for superfluidity: lowest eigenvalue of ``K_{T,mu} + lambda V``.

The operator is block diagonal in partial waves for radial ``V``. In channel
``l`` it is discretised on a Fermi-refined radial grid and symmetrised as

    M_ij = K(p_i) delta_ij + lambda * V_l(p_i, p_j) * p_i p_j sqrt(w_i w_j).

``T_c`` is the temperature at which the lowest eigenvalue crosses zero; the
crossing is located by bisection in ``ln T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, BracketError, ParameterError
from .numerics import QuadratureGrid, SpectralResult, bisect_monotone, build_fermi_grid, lowest_eigenpair
from .potentials import RadialPotential, _certify_nonpositive, kernel_matrix

__all__ = [
    "k_symbol",
    "ChannelOperator",
    "TcResult",
    "thermal_grid",
    "assemble_channel_operator",
    "lowest_eigenvalue_KV",
    "critical_temperature",
    "TC_FLOOR",
    "TC_CEILING",
]

TC_FLOOR = 1e-12
TC_CEILING = 10.0


def k_symbol(p2, mu: float, T: float):
    """``K_{T,mu}(p) = (p^2 - mu) coth((p^2 - mu) / 2T)``; ``|p^2 - mu|`` at ``T = 0``."""
    x = np.asarray(p2, dtype=float) - mu
    if T < 0:
        raise ParameterError("temperature must be >= 0")
    if T == 0:
        return np.abs(x)
    y = x / (2.0 * T)
    small = np.abs(x) < 1e-6 * T
    ys = np.where(small, 1.0, y)
    with np.errstate(over="ignore"):
        regular = x / np.tanh(ys)
    series = 2.0 * T * (1.0 + y * y / 3.0)
    return np.where(small, series, regular)


def _quantized_wmin(scale: float, mu: float, factor: float = 10.0) -> float:
    w = scale / (factor * mu)
    w = min(max(w, 2e-14), 1e-2)
    return 2.0 ** math.floor(math.log2(w))


def thermal_grid(V: RadialPotential, mu: float, T: float, n_outer: int = 200,
                 n_inner: int = 240, cutoff: float | None = None) -> QuadratureGrid:
    """Grid whose central panel resolves the thermal width ``T / sqrt(mu)``.

    The relative core width is ``T / (10 mu)`` rounded down to a power of two,
    so nearby temperatures share a grid (and its cached kernel).
    """
    lam_cut = V.default_cutoff(mu) if cutoff is None else cutoff
    return build_fermi_grid(mu, lam_cut, n_outer, n_inner, _quantized_wmin(T, mu),
                            max_panel=2.0 * V.min_length ** -1)


@dataclass
class ChannelOperator:
    grid: QuadratureGrid
    ell: int
    mu: float
    T: float
    lam: float
    matrix: np.ndarray

    @property
    def diagonal_floor(self):
        return float(np.min(k_symbol(self.grid.nodes**2, self.mu, self.T)))


def _coupling_block(V, ell, grid):
    s = grid.nodes * np.sqrt(grid.weights)
    return kernel_matrix(V, ell, grid.nodes, cache_key=grid.key) * np.outer(s, s)


def assemble_channel_operator(V: RadialPotential, ell: int, mu: float, T: float, lam: float,
                              grid: QuadratureGrid | None = None) -> ChannelOperator:
    if not mu > 0:
        raise ParameterError("mu must be positive")
    if T < 0:
        raise ParameterError("temperature must be >= 0")
    if grid is None:
        grid = thermal_grid(V, mu, max(T, TC_FLOOR * mu))
    if 0 < T < 1e-3 * mu and grid.min_halfwidth > T / math.sqrt(mu):
        raise AccuracyError("grid does not resolve the thermal width near the Fermi surface",
                            (grid.min_halfwidth, T / math.sqrt(mu)))
    m = np.diag(k_symbol(grid.nodes**2, mu, T))
    if lam != 0 and not V.is_zero:
        m = m + lam * _coupling_block(V, ell, grid)
    return ChannelOperator(grid, int(ell), float(mu), float(T), float(lam), m)


def lowest_eigenvalue_KV(V: RadialPotential, ell: int, mu: float, T: float, lam: float,
                         grid: QuadratureGrid | None = None, check_grid: bool = False,
                         tol: float = 1e-12) -> SpectralResult:
    """Lowest eigenpair of the channel operator.

    With ``check_grid`` the computation is repeated on a grid with doubled
    node counts; ``grid_converged`` is set when the two agree to ``1e-8``
    relative or ``1e-12 mu`` absolute. Disagreement raises ``AccuracyError``.
    """
    op = assemble_channel_operator(V, ell, mu, T, lam, grid)
    res = lowest_eigenpair(op.matrix, tol)
    if check_grid:
        g = op.grid
        finer = build_fermi_grid(mu, g.cutoff, 2 * g.counts[0], 2 * g.counts[1],
                                 g.key[4] / 4.0, g.inner_window, g.key[6])
        ref = lowest_eigenpair(assemble_channel_operator(V, ell, mu, T, lam, finer).matrix, tol)
        diff = abs(ref.eigenvalue - res.eigenvalue)
        ok = diff <= max(1e-8 * abs(ref.eigenvalue), 1e-12 * mu)
        res.grid_converged = ok
        res.refined_eigenvalue = ref.eigenvalue
        if not ok:
            raise AccuracyError("eigenvalue not converged under grid refinement",
                                (res.eigenvalue, ref.eigenvalue))
    return res


@dataclass
class TcResult:
    tc: float
    bracket: tuple
    channel: int | None
    eigen_trace: list
    grid_report: dict = field(default_factory=dict)
    per_channel: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    monotone: bool = True

    @property
    def superfluid(self):
        return self.tc > 0


def critical_temperature(V: RadialPotential, mu: float, lam: float, ell_set=None,
                         tol: float = 1e-6, n_outer: int = 200, n_inner: int = 240,
                         check_grid: bool = True) -> TcResult:
    """Critical temperature ``T_c = inf{T : K_{T,mu} + lambda V >= 0}``.

    Each channel in ``ell_set`` is bisected in ``ln T`` on
    ``[1e-12 mu, 10 mu]``; channels whose eigenvalue is already nonnegative
    at the best crossing found so far are skipped. Returns ``tc = 0`` with a
    flag when no channel is negative at the floor.

    ``ell_set`` defaults to ``0..4``; for ``V_hat <= 0`` the kernel of
    ``-V`` is positivity improving, the ground state is radial and only
    ``l = 0`` is scanned.
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    if not lam > 0:
        raise ParameterError("lambda must be positive")
    floor, ceiling = TC_FLOOR * mu, TC_CEILING * mu
    s_wave_only = ell_set is None and _certify_nonpositive(V)
    if ell_set is None:
        ell_set = (0,) if s_wave_only else range(5)
    ells = sorted({int(ell) for ell in ell_set})

    best = None
    per_channel = {}
    for ell in ells:
        trace = []

        def f(T, ell=ell, trace=trace):
            grid = thermal_grid(V, mu, T, n_outer, n_inner)
            val = lowest_eigenvalue_KV(V, ell, mu, T, lam, grid).eigenvalue
            trace.append((T, val))
            return val

        lo = floor if best is None else max(floor, best.root * (1.0 + tol))
        if V.is_zero or f(lo) >= 0:
            # no crossing above lo; None marks a channel dominated by an earlier one
            per_channel[ell] = 0.0 if best is None else None
            continue
        if f(ceiling) < 0:
            raise BracketError(f"channel {ell} still negative at T = 10 mu; unphysical input")
        # grids differ between temperatures; saturated low-T samples agree only to ~1e-7 mu
        bis = bisect_monotone(f, lo, ceiling, tol=tol, log_scale=True, mono_rtol=1e-6,
                              mono_atol=1e-6 * mu)
        per_channel[ell] = bis.root
        if best is None or bis.root > best.root:
            best = bis
            best.ell = ell
            best.trace = sorted(trace)

    if best is None:
        return TcResult(0.0, (0.0, floor), None, [], per_channel=per_channel,
                        flags=["no superfluid phase above the temperature floor"])
    report = {"n_outer": n_outer, "n_inner": n_inner}
    if check_grid:
        t_lo, t_hi = best.bracket
        grid = thermal_grid(V, mu, t_lo, n_outer, n_inner)
        report["lo"] = _refinement_check(V, best.ell, mu, t_lo, lam, grid)
        report["hi"] = _refinement_check(V, best.ell, mu, t_hi, lam, grid)
        report["converged"] = report["lo"]["converged"] and report["hi"]["converged"]
        report["sign_consistent"] = (report["lo"]["refined"] < 0 <= report["hi"]["refined"])
    flags = [] if best.monotone else ["non-monotone eigenvalue samples"]
    if s_wave_only:
        flags.append("s-wave only (V_hat <= 0)")
    return TcResult(best.root, best.bracket, best.ell, best.trace, report, per_channel,
                    flags, best.monotone)


def _refinement_check(V, ell, mu, T, lam, grid):
    try:
        res = lowest_eigenvalue_KV(V, ell, mu, T, lam, grid, check_grid=True)
        return {"T": T, "eigenvalue": res.eigenvalue, "refined": res.refined_eigenvalue,
                "converged": True}
    except AccuracyError as exc:
        base, ref = exc.values
        return {"T": T, "eigenvalue": base, "refined": ref, "converged": False}
