import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcsgap import asymptotics as asym
from bcsgap.errors import FitError, UnsupportedRegimeError
from bcsgap.potentials import CATALOG, gaussian

GAUSS = CATALOG["gaussian"]


def test_constants():
    assert asym.TC_PREFACTOR == pytest.approx(0.6139, abs=1e-4)
    assert asym.XI_PREFACTOR == pytest.approx(1.0827, abs=1e-4)
    assert asym.UNIVERSAL_RATIO == pytest.approx(1.7639, abs=1e-4)
    assert asym.DRIFT_TC_LIMIT == pytest.approx(0.4880, abs=1e-4)
    assert asym.DRIFT_XI_LIMIT == pytest.approx(-0.0794, abs=1e-4)


@given(b=st.floats(-50.0, -1e-3), mu=st.floats(1e-3, 10.0))
@settings(max_examples=100, deadline=None)
def test_prediction_ratio_identity(b, mu):
    tc = asym.predict_tc(GAUSS, mu, 0.3, b)
    xi = asym.predict_xi(GAUSS, mu, 0.3, b)
    if tc > 0:
        assert xi / tc == pytest.approx(asym.UNIVERSAL_RATIO, rel=1e-14)


def test_prediction_vanishes_as_b_to_zero():
    vals = [asym.predict_tc(GAUSS, 1.0, 0.3, b) for b in (-1.0, -0.1, -0.01)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert asym.predict_tc(GAUSS, 1.0, 0.3, -1e-4) == 0.0


def test_prediction_requires_negative_b():
    with pytest.raises(UnsupportedRegimeError):
        asym.predict_tc(GAUSS, 1.0, 0.3, 0.1)
    with pytest.raises(UnsupportedRegimeError):
        asym.predict_xi(GAUSS, 1.0, 0.3, 0.0)


def test_prediction_uses_bmu():
    from bcsgap.fermi_ops import bmu

    b = bmu(GAUSS, 1.0, 0.3).b_mu
    assert asym.predict_tc(GAUSS, 1.0, 0.3) == asym.predict_tc(GAUSS, 1.0, 0.3, b)
    assert math.isfinite(asym.predict_tc(GAUSS, 1.0, 0.3))


def test_extract_limit_linear():
    fit = asym.extract_limit([(lam, 1 + 2 * lam) for lam in (0.1, 0.2, 0.4)])
    assert fit.limit == pytest.approx(1.0, abs=1e-14)
    assert fit.slope == pytest.approx(2.0, abs=1e-13)
    assert fit.residual <= 1e-14


def test_extract_limit_constant():
    fit = asym.extract_limit([(lam, 3.0) for lam in (0.1, 0.2, 0.4, 0.5)])
    assert fit.slope == pytest.approx(0.0, abs=1e-13)
    assert fit.limit == pytest.approx(3.0, abs=1e-14)


@pytest.mark.parametrize("points", [
    [(0.1, 1.0), (0.2, 2.0)],
    [(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)],
])
def test_extract_limit_degenerate(points):
    with pytest.raises(FitError):
        asym.extract_limit(points)


@given(c0=st.floats(-10, 10), c1=st.floats(-10, 10),
       lams=st.lists(st.floats(0.01, 1.0), min_size=3, max_size=8, unique=True))
@settings(max_examples=100, deadline=None)
def test_extract_limit_recovers_lines(c0, c1, lams):
    if max(lams) - min(lams) < 1e-3:
        return
    fit = asym.extract_limit([(x, c0 + c1 * x) for x in lams])
    assert fit.limit == pytest.approx(c0, abs=1e-8 * (1 + abs(c0) + abs(c1)))


def test_ladder_entry_bookkeeping():
    e = asym.LadderEntry(0.3, 0.04, 0.07, -0.5)
    gap = e.drift_tc(1.0) - e.drift_xi(1.0)
    assert gap == pytest.approx(math.log(e.xi / e.tc), rel=1e-14)
    # drift difference = gamma - ln pi + ln(Xi / T_c) shifted by the universal constant
    assert gap - math.log(asym.UNIVERSAL_RATIO) == pytest.approx(
        asym.EULER_GAMMA - math.log(math.pi) + math.log(e.xi / e.tc), rel=1e-12)


def test_report_from_entries_drops_and_warns():
    entries = [asym.LadderEntry(lam, math.exp(-1 / lam), 1.76 * math.exp(-1 / lam), -lam)
               for lam in (0.6, 0.45, 0.3)]
    entries.append(asym.LadderEntry(0.01, 0.0, 0.0, -0.01))
    with pytest.warns(UserWarning, match="dropped"):
        rep = asym.asymptotic_report(GAUSS, 1.0, [e.lam for e in entries], entries=entries)
    assert rep.dropped == [0.01]
    assert [e.lam for e in rep.ladder] == [0.6, 0.45, 0.3]
    assert set(rep.extrapolated) == {"drift_tc", "drift_xi", "ratio", "leading"}
    assert rep.ratio == pytest.approx([1.76] * 3)
    d = rep.as_dict()
    assert d["ladder"][0][0] == 0.6 and "extrapolated" in d


def test_report_requires_negative_emu():
    with pytest.raises(UnsupportedRegimeError):
        asym.asymptotic_report(gaussian(2.0, 1.0), 1.0, entries=[])


@pytest.fixture(scope="module")
def short_ladder():
    return asym.asymptotic_report(GAUSS, 1.0, (0.6, 0.45, 0.3), jobs=3)


def test_report_deterministic(short_ladder):
    again = asym.asymptotic_report(GAUSS, 1.0, (0.6, 0.45, 0.3), jobs=1)
    assert again.as_dict() == short_ladder.as_dict()


def test_report_ratio_approaches_universal(short_ladder):
    dev = [abs(r - asym.UNIVERSAL_RATIO) for r in short_ladder.ratio]
    assert dev[0] > dev[1] > dev[2]


def test_prediction_against_computed(short_ladder):
    e = short_ladder.ladder[-1]
    pred = asym.predict_tc(GAUSS, 1.0, e.lam, e.b_mu)
    # the prediction is exact only as lambda -> 0; same order of magnitude here
    assert 0.3 < pred / e.tc < 3.0
    assert np.isfinite(pred)
