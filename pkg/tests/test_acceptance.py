"""Acceptance criteria; each test records one PASS/FAIL line printed at the end of the run.

Criteria 2, 5, 6, 7 and two items of 8 fail. Their failures are genuine
properties of the formulas and the data, analysed in the README, not
defects to be tuned away.
"""

import pytest

import acceptance_checks as checks

RESULTS = {}


def run(key):
    ok, detail = checks.CRITERIA[key][1]()
    RESULTS[key] = checks.line(key, ok, detail)
    assert ok, RESULTS[key]


def test_criterion_1_convergence_table():
    run("1")


def test_criterion_2_direct_recovery_stated_points():
    run("2")


def test_criterion_3_objective_floors():
    run("3")


def test_criterion_4_grid_scan():
    run("4")


def test_criterion_5_two_parameter_fits():
    run("5")


def test_criterion_6_eight_parameter_fit():
    run("6")


def test_criterion_6_local_minimum_qualitative():
    run("6q")


def test_criterion_7_reduced_fit():
    run("7")


@pytest.mark.parametrize("check", checks.PROPERTY_CHECKS, ids=lambda c: c.__name__.removeprefix("check_"))
def test_criterion_8_property(check):
    ok, detail = check()
    RESULTS.setdefault("8", [])
    RESULTS["8"].append((ok, detail))
    assert ok, detail
