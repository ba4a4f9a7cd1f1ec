import numpy as np
import pytest

from seisfrag import RandomStream


def test_same_seed_index_same_draws():
    a = RandomStream(1234, 7).generator().standard_normal(100)
    b = RandomStream(1234, 7).generator().standard_normal(100)
    assert np.array_equal(a, b)


def test_different_index_different_draws():
    a = RandomStream(1234, 0).generator().standard_normal(100)
    b = RandomStream(1234, 1).generator().standard_normal(100)
    assert not np.array_equal(a, b)


def test_children_are_independent_of_evaluation_order():
    parent = RandomStream(9, 3)
    first = parent.child(2).generator().standard_normal(10)
    parent.child(5).generator().standard_normal(10)
    again = parent.child(2).generator().standard_normal(10)
    assert np.array_equal(first, again)


def test_child_differs_from_parent_and_siblings():
    parent = RandomStream(9, 3)
    draws = {tuple(parent.generator().standard_normal(5))}
    for k in range(4):
        draws.add(tuple(parent.child(k).generator().standard_normal(5)))
    assert len(draws) == 5


def test_seed_range_checked():
    with pytest.raises(ValueError):
        RandomStream(-1, 0)
    with pytest.raises(ValueError):
        RandomStream(2 ** 64, 0)
