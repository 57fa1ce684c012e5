import json

import numpy as np
import pytest

from riskdesk.fixtures import fix_a_lattice, random_lattice, trinomial_tree
from riskdesk.lattice import (
    NodeRef,
    RandomVariable,
    StoppingTime,
    build_lattice,
    coordinate_process,
    lattice_from_json,
    lattice_to_json,
    lift,
    uniform_tree,
    validate_stopping_time,
)


def test_fix_a_node_counts():
    lat = fix_a_lattice()
    assert [lat.n_nodes(t) for t in range(3)] == [1, 2, 4]
    assert lat.times == (0.0, 1.0, 2.0)


def test_trinomial_node_counts():
    lat = trinomial_tree(h=0.1, steps=3)
    assert [lat.n_nodes(t) for t in range(4)] == [1, 3, 9, 27]


def test_single_time_point_rejected():
    with pytest.raises(ValueError):
        build_lattice([0.0], [])


def test_duplicate_time_points_rejected():
    with pytest.raises(ValueError):
        uniform_tree((0.0, 1.0, 1.0), [1.0, -1.0])


def test_empty_branching_rejected():
    with pytest.raises(ValueError):
        build_lattice([0.0, 1.0], [[np.zeros((0, 1))]])


def test_lift_ancestor_copy():
    lat = fix_a_lattice()
    X = RandomVariable(lat, 1, np.array([1.0, -1.0]))
    assert np.array_equal(lift(X, 2).values, [1.0, 1.0, -1.0, -1.0])


def test_lift_identity_and_constant():
    lat = fix_a_lattice()
    X = RandomVariable(lat, 1, np.array([3.0, 7.0]))
    assert lift(X, 1) is X
    five = RandomVariable(lat, 0, np.array([5.0]))
    assert np.array_equal(lift(five, 2).values, np.full(4, 5.0))


def test_lift_composes_and_is_linear():
    rng = np.random.default_rng(3)
    lat = random_lattice(rng)
    T = lat.terminal
    X = RandomVariable(lat, 0, rng.normal(size=1))
    Y = RandomVariable(lat, 0, rng.normal(size=1))
    assert np.array_equal(lift(lift(X, 1), T).values, lift(X, T).values)
    assert np.array_equal(lift(X + Y, T).values, (lift(X, T) + lift(Y, T)).values)
    with pytest.raises(ValueError):
        lift(RandomVariable(lat, T, np.zeros(lat.n_nodes(T))), 0)


def test_coordinate_process_values():
    lat = fix_a_lattice()
    assert np.array_equal(coordinate_process(lat, 0).values, [0.0])
    assert np.array_equal(coordinate_process(lat, 1).values, [1.0, -1.0])
    assert np.array_equal(coordinate_process(lat, 2).values, [2.0, 0.0, 0.0, -2.0])


def test_stopping_time_validation():
    lat = fix_a_lattice()
    ok, _ = validate_stopping_time(lat, StoppingTime.deterministic(lat, 1).stops)
    assert ok
    # first-hit style: stop at u, else at the two descendants of d
    first_hit = {NodeRef(1, 0), NodeRef(2, 2), NodeRef(2, 3)}
    assert validate_stopping_time(lat, first_hit)[0]
    # the path through u would be stopped twice
    double = {NodeRef(1, 0), NodeRef(2, 0), NodeRef(2, 2), NodeRef(2, 3)}
    ok, witness = validate_stopping_time(lat, double)
    assert not ok and witness is not None


def test_lattice_json_round_trip():
    lat = fix_a_lattice()
    text = lattice_to_json(lat)
    back = lattice_from_json(text)
    assert back.times == lat.times
    assert back.n_nodes(2) == 4
    doc = json.loads(text)
    assert set(doc) == {"times", "dimension", "nodes"}
    for t in range(3):
        assert np.array_equal(back.values[t], lat.values[t])
