"""Acceptance criteria 1-10; each test prints one PASS/FAIL line with measured vs target."""

import pytest

from bcsgap import verify


@pytest.fixture(scope="module")
def ladder():
    return verify.ladder_report(jobs=5)


def _assert(check, record_check):
    record_check(check)
    print(check.line())
    assert check.passed, check.line()


def test_criterion_01_funk_hecke_oracle(record_check):
    _assert(verify.check_funk_hecke(), record_check)


def test_criterion_02_mmu_small_T(record_check):
    _assert(verify.check_mmu(), record_check)


def test_criterion_03_tc_equivalence(record_check):
    _assert(verify.check_tc_equivalence(), record_check)


def test_criterion_04_monotonicity(record_check):
    _assert(verify.check_monotonicity(), record_check)


def test_criterion_05_leading_order(ladder, record_check):
    _assert(verify.check_leading(ladder), record_check)


def test_criterion_06_tc_drift(ladder, record_check):
    _assert(verify.check_drift_tc(ladder), record_check)


def test_criterion_07_gap_drift_and_ratio(ladder, record_check):
    _assert(verify.check_gap_drift_ratio(ladder), record_check)


def test_criterion_08_second_born_oracle(record_check):
    _assert(verify.check_born(), record_check)


def test_criterion_09_gap_properties(record_check):
    _assert(verify.check_gap_properties(), record_check)


def test_criterion_10_small_mu_bridge(record_check):
    _assert(verify.check_small_mu(), record_check)
