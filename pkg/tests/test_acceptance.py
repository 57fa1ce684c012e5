"""Acceptance gate: runs the full battery once and asserts every criterion.

Each test prints a single PASS/FAIL line with the measured violation and the
pinned tolerance, so the gate's verdict is visible in plain test output.
"""

import pytest

from riskdesk.acceptance import run_all

SEED = 0

BUDGETS = {
    "minimal-penalty-conjugacy": 30.0,
    "time-consistency-equivalence": 60.0,
    "robust-dp-oracle": 10.0,
    "pasting-stability": 10.0,
    "band-pricing": None,
    "supermartingale": None,
    "capacity-duality": None,
    "path-metric": 10.0,
}


@pytest.fixture(scope="module")
def reports():
    return {rep["name"]: rep for rep in run_all(SEED)}


def check(reports, name):
    rep = reports[name]
    status = "PASS" if rep["passed"] else "FAIL"
    print(f"{status} {name}: max_violation={rep['max_violation']:.3g} "
          f"tolerance={rep['tolerance']:.3g}")
    assert rep["passed"], (
        f"{name}: max_violation={rep['max_violation']} "
        f"exceeds tolerance={rep['tolerance']}; details={rep['details']}"
    )
    budget = BUDGETS[name]
    if budget is not None:
        assert rep["runtime_seconds"] <= budget, (
            f"{name} took {rep['runtime_seconds']:.1f}s, budget {budget}s"
        )


def test_criterion_minimal_penalty(reports):
    check(reports, "minimal-penalty-conjugacy")


def test_criterion_time_consistency(reports):
    check(reports, "time-consistency-equivalence")


def test_criterion_robust_dp(reports):
    check(reports, "robust-dp-oracle")


def test_criterion_pasting(reports):
    check(reports, "pasting-stability")


def test_criterion_band_pricing(reports):
    check(reports, "band-pricing")


def test_criterion_supermartingale(reports):
    check(reports, "supermartingale")


def test_criterion_capacity(reports):
    check(reports, "capacity-duality")


def test_criterion_path_metric(reports):
    check(reports, "path-metric")
