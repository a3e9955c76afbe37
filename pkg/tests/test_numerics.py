import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from bcsgap.errors import BracketError, ContractError, MonotonicityWarning, ParameterError
from bcsgap.numerics import bisect_monotone, build_fermi_grid, jacobi_eigh, lowest_eigenpair


@pytest.fixture(scope="module")
def grid():
    return build_fermi_grid(1.0, 10.0, 200, 200, 1e-10)


def test_grid_invariants(grid):
    x, w = grid.nodes, grid.weights
    assert np.all(x > 0) and np.all(x < 10.0)
    assert np.all(np.diff(x) > 0)
    assert np.all(w > 0)
    assert np.count_nonzero(grid.inner_mask()) >= 200
    assert abs(grid.integrate(np.ones_like(x)) - 10.0) / 10.0 <= 1e-12


def test_grid_clusters_at_fermi_momentum(grid):
    assert np.min(np.abs(grid.nodes - 1.0)) < 1e-9
    assert grid.min_halfwidth <= 1e-10


def test_grid_polynomial_exactness(grid):
    assert abs(grid.integrate(grid.nodes**2) - 1000.0 / 3.0) / (1000.0 / 3.0) <= 1e-10


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_grid_near_singular_integrand(grid):
    def f(p):
        return 1.0 / (np.abs(p * p - 1.0) + 1e-6)

    pts = [1.0 - 10.0**-k for k in range(1, 8)] + [1.0] + [1.0 + 10.0**-k for k in range(7, 0, -1)]
    edges = [0.0] + pts + [10.0]
    ref = sum(integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=500)[0]
              for a, b in zip(edges[:-1], edges[1:]))
    assert abs(grid.integrate(f(grid.nodes)) - ref) / ref <= 1e-6


def test_grid_deterministic():
    a = build_fermi_grid(2.0, 12.0, 100, 120, 1e-8)
    b = build_fermi_grid(2.0, 12.0, 100, 120, 1e-8)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.weights, b.weights)


@pytest.mark.parametrize("kwargs", [
    dict(mu=-1.0, cutoff=10.0),
    dict(mu=1.0, cutoff=1.5),
    dict(mu=1.0, cutoff=10.0, w_min=1e-15),
    dict(mu=1.0, cutoff=10.0, w_min=0.5),
])
def test_grid_rejects_bad_bounds(kwargs):
    with pytest.raises(ParameterError):
        build_fermi_grid(**kwargs)


@given(mu=st.floats(0.01, 50.0), factor=st.floats(2.1, 30.0),
       n_inner=st.integers(20, 300), w_exp=st.floats(-13.5, -1.5))
@settings(max_examples=40, deadline=None)
def test_grid_invariants_property(mu, factor, n_inner, w_exp):
    cutoff = factor * math.sqrt(mu)
    g = build_fermi_grid(mu, cutoff, 60, n_inner, 10.0**w_exp)
    assert np.all(np.diff(g.nodes) > 0) and g.nodes[0] > 0 and g.nodes[-1] < cutoff
    assert np.all(g.weights > 0)
    assert np.count_nonzero(g.inner_mask()) >= n_inner
    assert abs(np.sum(g.weights) - cutoff) / cutoff <= 1e-12


def test_lowest_eigenpair_diagonal():
    r = lowest_eigenpair(np.diag([3.0, 1.0, 2.0]))
    assert r.eigenvalue == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(r.eigenvector, [0.0, 1.0, 0.0], atol=1e-14)


def test_lowest_eigenpair_offdiagonal():
    r = lowest_eigenpair(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert r.eigenvalue == pytest.approx(-1.0, abs=1e-14)
    assert abs(np.linalg.norm(r.eigenvector) - 1.0) < 1e-14


def test_lowest_eigenpair_against_jacobi():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(50, 50))
    m = 0.5 * (a + a.T)
    r = lowest_eigenpair(m)
    vals, vecs = jacobi_eigh(m)
    assert abs(r.eigenvalue - vals[0]) <= 1e-10
    assert abs(abs(r.eigenvector @ vecs[:, 0]) - 1.0) <= 1e-10
    assert r.residual_norm <= 1e-12 * np.linalg.norm(m)


def test_lowest_eigenpair_rejects_nonsymmetric():
    with pytest.raises(ContractError):
        lowest_eigenpair(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ContractError):
        lowest_eigenpair(np.zeros((2, 3)))


@given(n=st.integers(1, 12), shift=st.floats(-100, 100), seed=st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_lowest_eigenpair_shift(n, shift, seed):
    a = np.random.default_rng(seed).normal(size=(n, n))
    m = a + a.T
    base = lowest_eigenpair(m).eigenvalue
    shifted = lowest_eigenpair(m + shift * np.eye(n)).eigenvalue
    assert shifted == pytest.approx(base + shift, abs=1e-10 * (1 + abs(shift) + np.abs(m).max()))


@given(n=st.integers(1, 10), seed=st.integers(0, 2**31))
@settings(max_examples=25, deadline=None)
def test_jacobi_matches_lapack(n, seed):
    a = np.random.default_rng(seed).normal(size=(n, n))
    m = a + a.T
    vals, vecs = jacobi_eigh(m)
    assert np.allclose(vals, np.linalg.eigvalsh(m), atol=1e-10)
    assert np.allclose(vecs.T @ vecs, np.eye(n), atol=1e-10)


def test_bisect_linear():
    r = bisect_monotone(lambda x: x - 2.0, 0.0, 5.0, tol=1e-12)
    assert r.root == pytest.approx(2.0, rel=2e-12)
    assert r.monotone


def test_bisect_log():
    r = bisect_monotone(math.log, 0.1, 10.0, tol=1e-10, log_scale=True)
    assert r.root == pytest.approx(1.0, rel=2e-10)


def test_bisect_bracket_error():
    with pytest.raises(BracketError):
        bisect_monotone(lambda x: x + 1.0, 0.0, 5.0)


def test_bisect_reports_non_monotone_samples():
    def f(x):
        # samples 2.5, 1.25, 1.875: f(1.875) < f(1.25)
        return -1.0 if x < 1.5 else (-2.0 if x < 2.0 else 1.0)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        r = bisect_monotone(f, 0.0, 5.0, tol=1e-6)
    assert not r.monotone
    assert any(issubclass(w.category, MonotonicityWarning) for w in caught)


@given(root=st.floats(0.5, 4.5), slope=st.floats(0.1, 10.0))
@settings(max_examples=40, deadline=None)
def test_bisect_bracket_doubling_invariance(root, slope):
    tol = 1e-9

    def f(x):
        return slope * (x - root)

    a = bisect_monotone(f, 0.0, 5.0, tol=tol).root
    b = bisect_monotone(f, 0.0, 10.0, tol=tol).root
    assert abs(a - b) <= 2 * tol * abs(a)
