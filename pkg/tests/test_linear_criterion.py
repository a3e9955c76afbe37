import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcsgap import fermi_ops as fo
from bcsgap.errors import AccuracyError, ParameterError
from bcsgap.linear_criterion import (
    assemble_channel_operator,
    critical_temperature,
    k_symbol,
    lowest_eigenvalue_KV,
    thermal_grid,
)
from bcsgap.numerics import build_fermi_grid, lowest_eigenpair
from bcsgap.potentials import CATALOG, zero

GAUSS = CATALOG["gaussian"]


def test_k_symbol_examples():
    assert float(k_symbol(1.0, 1.0, 0.37)) == pytest.approx(0.74, rel=1e-15)
    assert float(k_symbol(2.0, 1.0, 0.0)) == 1.0
    assert float(k_symbol(11.0, 1.0, 0.1)) == pytest.approx(10.0, rel=1e-15)


def test_k_symbol_rejects_negative_T():
    with pytest.raises(ParameterError):
        k_symbol(1.0, 1.0, -1.0)


@given(x=st.floats(-50.0, 50.0), T=st.floats(1e-8, 10.0))
@settings(max_examples=200, deadline=None)
def test_k_symbol_bounds(x, T):
    k = float(k_symbol(1.0 + x, 1.0, T))
    x = (1.0 + x) - 1.0  # the offset the function actually sees
    assert k >= 2 * T * (1 - 1e-12)
    assert k >= abs(x) * (1 - 1e-12)


def test_k_symbol_series_branch_continuous():
    T = 1e-3
    x = np.array([0.999e-6 * T, 1.001e-6 * T])
    k = k_symbol(1.0 + x, 1.0, T)
    assert abs(k[1] - k[0]) <= 1e-12 * k[0]


def test_zero_potential_operator_is_diagonal():
    g = thermal_grid(GAUSS, 1.0, 0.01, 60, 60)
    op = assemble_channel_operator(zero(), 0, 1.0, 0.01, 0.5, g)
    assert np.array_equal(op.matrix, np.diag(np.diag(op.matrix)))
    assert np.allclose(np.diag(op.matrix), k_symbol(g.nodes**2, 1.0, 0.01), rtol=0, atol=0)


def test_operator_symmetric():
    g = thermal_grid(GAUSS, 1.0, 0.01, 80, 80)
    m = assemble_channel_operator(GAUSS, 0, 1.0, 0.01, 0.5, g).matrix
    assert np.array_equal(m, m.T)


def test_rayleigh_quotient_bound():
    T, lam = 0.01, 0.5
    g = thermal_grid(GAUSS, 1.0, T)
    m = assemble_channel_operator(GAUSS, 0, 1.0, T, lam, g).matrix
    bump = np.exp(-((g.nodes - 1.0) / 0.05) ** 2) * g.nodes * np.sqrt(g.weights)
    rq = bump @ m @ bump / (bump @ bump)
    assert rq >= lowest_eigenpair(m).eigenvalue


def test_unrefined_grid_rejected_at_low_T():
    g = build_fermi_grid(1.0, GAUSS.default_cutoff(1.0), 60, 60, 1e-2)
    with pytest.raises(AccuracyError):
        assemble_channel_operator(GAUSS, 0, 1.0, 1e-6, 0.5, g)


def test_zero_potential_eigenvalue_is_2T():
    for T in (1e-4, 0.01, 0.3):
        r = lowest_eigenvalue_KV(zero(), 0, 1.0, T, 0.5, thermal_grid(GAUSS, 1.0, T))
        assert r.eigenvalue >= 2 * T * (1 - 1e-10)


def test_eigenvalue_increasing_in_T():
    temps = [0.01, 0.02, 0.05, 0.1]
    vals = [lowest_eigenvalue_KV(GAUSS, 0, 1.0, T, 0.3, thermal_grid(GAUSS, 1.0, T)).eigenvalue
            for T in temps]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_eigenvalue_increasing_in_T_on_fixed_grid():
    g = thermal_grid(GAUSS, 1.0, 1e-3)
    vals = [lowest_eigenvalue_KV(GAUSS, 0, 1.0, T, 0.3, g).eigenvalue
            for T in (1e-3, 2e-3, 5e-3, 1e-2)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_strong_coupling_negative_at_low_T():
    T = 1e-3
    r = lowest_eigenvalue_KV(GAUSS, 0, 1.0, T, 1.0, thermal_grid(GAUSS, 1.0, T), check_grid=True)
    assert r.eigenvalue < 0 and r.grid_converged


def test_zero_potential_has_no_tc():
    r = critical_temperature(zero(), 1.0, 0.5)
    assert r.tc == 0.0 and not r.superfluid
    assert any("no superfluid" in f for f in r.flags)


@pytest.fixture(scope="module")
def tc_gauss():
    return critical_temperature(GAUSS, 1.0, 0.5, tol=1e-8)


def test_tc_bracket_and_flags(tc_gauss):
    r = tc_gauss
    assert 0 < r.tc < 10.0
    lo, hi = r.bracket
    assert lo <= r.tc <= hi and hi / lo - 1 <= 1e-8
    assert r.channel == 0
    assert "s-wave only (V_hat <= 0)" in r.flags
    assert r.grid_report["converged"] and r.grid_report["sign_consistent"]


def test_tc_sign_change_around_root(tc_gauss):
    tc = tc_gauss.tc
    tol = 1e-8
    above = tc * (1 + 10 * tol)
    below = tc * (1 - 10 * tol)
    ev = [lowest_eigenvalue_KV(GAUSS, 0, 1.0, T, 0.5, thermal_grid(GAUSS, 1.0, T)).eigenvalue
          for T in (below, above)]
    assert ev[0] < 0 <= ev[1]


def test_tc_matches_dense_sweep(tc_gauss):
    temps = np.geomspace(0.5 * tc_gauss.tc, 2.0 * tc_gauss.tc, 41)
    vals = [lowest_eigenvalue_KV(GAUSS, 0, 1.0, T, 0.5, thermal_grid(GAUSS, 1.0, T)).eigenvalue
            for T in temps]
    i = int(np.nonzero(np.diff(np.sign(vals)))[0][0])
    assert temps[i] <= tc_gauss.tc <= temps[i + 1]


def test_tc_all_channels_agrees_with_swave_shortcut(tc_gauss):
    full = critical_temperature(GAUSS, 1.0, 0.5, ell_set=range(3), tol=1e-8, check_grid=False)
    assert full.channel == 0
    assert full.tc == pytest.approx(tc_gauss.tc, rel=1e-7)


def test_tc_nondecreasing_in_lambda():
    tcs = [critical_temperature(GAUSS, 1.0, lam, check_grid=False).tc for lam in (0.15, 0.3, 0.6)]
    assert all(t > 0 for t in tcs)
    assert tcs[0] <= tcs[1] <= tcs[2]


@pytest.mark.parametrize("name", ["exponential", "square_well"])
def test_tc_positive_for_attractive_catalog(name):
    V = CATALOG[name]
    assert fo.emu(V, 1.0).e_mu < 0
    assert critical_temperature(V, 1.0, 0.5, ell_set=(0,), check_grid=False).tc > 0


def test_first_order_consistency_improves_along_ladder():
    e0 = fo.vmu_channel_eigenvalue(GAUSS, 1.0, 0)
    errs = []
    for lam in (0.6, 0.3, 0.15):
        tc = critical_temperature(GAUSS, 1.0, lam, check_grid=False).tc
        # lambda m(T1) e0 = -1 with m ~ ln(1/T) + const, solved by bracketing in ln T
        lo, hi = 1e-12, 10.0
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if lam * fo.mmu(1.0, mid) * e0 + 1 < 0:
                lo = mid
            else:
                hi = mid
        # leading order only: the relative log error shrinks as lambda -> 0
        errs.append(abs(math.log(mid) - math.log(tc)) / abs(math.log(tc)))
    assert errs[0] > errs[1] > errs[2]


def test_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        critical_temperature(GAUSS, -1.0, 0.5)
    with pytest.raises(ParameterError):
        critical_temperature(GAUSS, 1.0, 0.0)
