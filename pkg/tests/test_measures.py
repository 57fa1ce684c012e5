import numpy as np
import pytest

from riskdesk.fixtures import (
    fix_a_family,
    fix_a_lattice,
    iid_binary_measure,
    random_family,
    random_lattice,
    random_measure,
    random_rv,
)
from riskdesk.lattice import RandomVariable, coordinate_process
from riskdesk.measures import (
    Measure,
    MeasureFamily,
    capacity,
    charged_mask,
    check_restriction,
    conditional_expectation,
    dual_witness,
    family_from_json,
    family_to_json,
    measure_from_json,
    measure_to_json,
    mix_measures,
    reference_measure,
)
from riskdesk.stability import all_stopping_times


def test_conditional_expectation_martingale():
    lat, q1, _, _ = fix_a_family()
    B2 = coordinate_process(lat, 2)
    assert np.allclose(conditional_expectation(B2, q1, 1).values, [1.0, -1.0])


def test_conditional_expectation_biased_mean():
    # E_{Q2} B_2 = 2 * (0.6 - 0.4), enumerated over the 4 paths
    lat, _, q2, _ = fix_a_family()
    B2 = coordinate_process(lat, 2)
    assert np.allclose(conditional_expectation(B2, q2, 0).values, [0.4])


def test_conditional_expectation_constant():
    lat, q1, _, _ = fix_a_family()
    k = RandomVariable(lat, 2, np.full(4, 3.25))
    assert np.allclose(conditional_expectation(k, q1, 0).values, [3.25])


def test_tower_property_random():
    rng = np.random.default_rng(11)
    for _ in range(20):
        lat = random_lattice(rng)
        Q = random_measure(lat, rng)
        X = random_rv(lat, lat.terminal, rng)
        mid = conditional_expectation(X, Q, 1)
        direct = conditional_expectation(X, Q, 0)
        towered = conditional_expectation(mid, Q, 0)
        assert np.max(np.abs(direct.values - towered.values)) <= 1e-12


def test_capacity_fix_a():
    lat, _, _, fam = fix_a_family(p=1.0)
    B2 = coordinate_process(lat, 2)
    assert capacity(B2, fam) == pytest.approx(1.04, abs=1e-12)
    zero = RandomVariable(lat, 2, np.zeros(4))
    assert capacity(zero, fam) == 0.0
    single = MeasureFamily((fam.members[0],), p=1.0)
    assert capacity(B2, single) == pytest.approx(1.0, abs=1e-12)


def test_reference_measure_weights_and_root_kernel():
    _, q1, q2, fam = fix_a_family()
    ref = reference_measure(fam)
    assert np.allclose(ref.weights, [2.0 / 3.0, 1.0 / 3.0])
    expected_up = (2.0 / 3.0) * 0.5 + (1.0 / 3.0) * 0.6
    assert ref.measure.kernels[0][0][0] == pytest.approx(expected_up, abs=1e-12)


def test_reference_measure_degenerate_and_three_members():
    lat, q1, q2, _ = fix_a_family()
    single = reference_measure(MeasureFamily((q1,), p=1.0))
    assert np.allclose(single.weights, [1.0])
    assert np.allclose(single.measure.kernels[0][0], q1.kernels[0][0])
    q3 = iid_binary_measure(lat, 0.3)
    three = reference_measure(MeasureFamily((q1, q2, q3), p=1.0))
    assert np.allclose(three.weights, [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0])


def test_reference_charges_all_member_charged_nodes():
    rng = np.random.default_rng(5)
    for _ in range(10):
        lat = random_lattice(rng)
        fam = random_family(lat, rng, 3)
        ref = reference_measure(fam)
        for t in range(lat.n_times):
            member_charged = np.any(
                [charged_mask(Q, t) for Q in fam.members], axis=0)
            assert np.all(charged_mask(ref.measure, t) | ~member_charged)


def test_dual_witness_p2():
    lat, _, _, fam = fix_a_family(p=2.0)
    B2 = coordinate_process(lat, 2)
    w = dual_witness(B2, fam)
    c = capacity(B2, fam)
    paired = RandomVariable(lat, 2, np.abs(B2.values) * w.g0.values)
    attained = max(Q.expectation(paired) for Q in fam.members)
    assert attained == pytest.approx(c, abs=1e-9)
    gq = RandomVariable(lat, 2, w.g0.values ** fam.q)
    assert max(Q.expectation(gq) for Q in fam.members) <= 1.0 + 1e-9


def test_dual_witness_degenerate_and_null():
    lat, _, _, fam = fix_a_family(p=1.0)
    B2 = coordinate_process(lat, 2)
    w = dual_witness(B2, fam)
    assert w.degenerate and np.all(w.g0.values == 1.0)
    assert w.value == pytest.approx(capacity(B2, fam))
    with pytest.raises(ValueError, match="null element"):
        dual_witness(RandomVariable(lat, 2, np.zeros(4)), fam)


def test_check_restriction_cases():
    lat, q1, q2, fam = fix_a_family()
    assert check_restriction(q1, q1, 2) == "equal"
    ref = reference_measure(fam)
    assert check_restriction(q2, ref, 1) == "absolutely_continuous"
    degenerate = Measure(lat, ((np.array([1.0, 0.0]),),
                               tuple(np.array([0.5, 0.5]) for _ in range(2))))
    assert check_restriction(q1, degenerate, 1) == "neither"


def test_capacity_norm_axioms_random():
    rng = np.random.default_rng(21)
    for _ in range(30):
        lat = random_lattice(rng)
        fam = random_family(lat, rng, 2, p=float(rng.choice([1.0, 2.0])))
        T = lat.terminal
        X, Y = random_rv(lat, T, rng), random_rv(lat, T, rng)
        assert capacity(X + Y, fam) <= capacity(X, fam) + capacity(Y, fam) + 1e-9
        a = float(rng.uniform(-3, 3))
        assert capacity(a * X, fam) == pytest.approx(abs(a) * capacity(X, fam), abs=1e-9)
        assert capacity(X, fam) >= 0.0


def test_convex_combination_dominated_by_capacity():
    # p = 1: any mixture R of the members satisfies E_R|X| <= c(X)
    rng = np.random.default_rng(8)
    for _ in range(20):
        lat = random_lattice(rng)
        fam = random_family(lat, rng, 3, p=1.0)
        R = mix_measures(fam.members, rng.dirichlet(np.ones(3)))
        X = random_rv(lat, lat.terminal, rng)
        absX = RandomVariable(lat, lat.terminal, np.abs(X.values))
        assert R.expectation(absX) <= capacity(X, fam) + 1e-12


def test_stop_set_probabilities_sum_to_one():
    lat, q1, q2, _ = fix_a_family()
    for tau in all_stopping_times(lat):
        for Q in (q1, q2):
            total = sum(Q.node_probabilities(n.t)[n.i] for n in tau.stops)
            assert total == pytest.approx(1.0, abs=1e-12)


def test_measure_json_round_trip():
    lat, _, q2, fam = fix_a_family()
    back = measure_from_json(measure_to_json(q2), lat)
    for k in range(2):
        for i in range(lat.n_nodes(k)):
            assert np.allclose(back.kernels[k][i], q2.kernels[k][i])
    fam_back = family_from_json(family_to_json(fam), lat)
    assert fam_back.p == fam.p and len(fam_back.members) == 2


def test_kernel_validation():
    lat = fix_a_lattice()
    bad = ((np.array([0.7, 0.7]),), tuple(np.array([0.5, 0.5]) for _ in range(2)))
    with pytest.raises(ValueError):
        Measure(lat, bad)
    negative = ((np.array([1.5, -0.5]),), tuple(np.array([0.5, 0.5]) for _ in range(2)))
    with pytest.raises(ValueError):
        Measure(lat, negative)
