import pytest
from hypothesis import given
from hypothesis import strategies as st

from cheesetower.errors import MissingDictionary
from cheesetower.surface.rational import RationalFunction
from cheesetower.surface.schedule import (
    checkpoint_levels,
    dictionary_source,
    schedule,
    sigma,
    sigma_inverse,
)
from cheesetower.surface.tower import TowerSpec, next_function

from conftest import disc_spec
from oracles import brute_schedule


@pytest.mark.parametrize("N, pair", [(1, (0, 0)), (2, (1, 1)), (3, (2, 1)), (4, (2, 2)), (5, (3, 1))])
def test_first_stages(N, pair):
    assert tuple(schedule(N)) == pair


def test_matches_brute_force_enumeration():
    expected = brute_schedule(10**4)
    assert [tuple(schedule(N)) for N in range(1, 10**4 + 1)] == expected


@given(st.integers(min_value=0, max_value=10**12))
def test_sigma_round_trip(i):
    r, s = sigma_inverse(i)
    assert sigma(r, s) == i
    assert schedule(i + 1).valid


@given(st.integers(min_value=1, max_value=10**9))
def test_sigma_is_order_preserving(N):
    assert tuple(schedule(N)) < tuple(schedule(N + 1))


def test_rejects_nonpositive_stage():
    with pytest.raises(ValueError):
        schedule(0)
    with pytest.raises(ValueError):
        sigma(2, 3)


def test_sources_walk_each_small_entry_once():
    seen = [dictionary_source(N) for N in range(1, 21)]
    assert len(seen) == len(set(seen))
    # every pair is (sigma(s, s), j) with s = 0 meaning level 0
    for N, (level, j) in enumerate(seen, start=1):
        r, s = schedule(N)
        if r == s:
            assert (level, j) == (0, r + 1)
        else:
            assert (level, j) == (sigma(s, s), r - s)
            assert j >= 1


def test_checkpoint_levels():
    assert checkpoint_levels(3) == [0, 1]
    assert checkpoint_levels(1) == [0]


def _dummy_tower():
    d0 = [RationalFunction.constant(v + 2) for v in range(3)]
    d1 = [RationalFunction.constant(10 + v, arity=2) for v in range(3)]
    return TowerSpec("exponential", disc_spec(), [], {0: d0, 1: d1}, {}, {})


def test_next_function_wiring():
    tower = _dummy_tower()
    assert next_function(tower, 1) == tower.dictionaries[0][0].with_arity(1)
    assert next_function(tower, 3) == tower.dictionaries[1][0].with_arity(3)
    assert next_function(tower, 3).arity == 3


def test_missing_dictionary():
    tower = TowerSpec("exponential", disc_spec(), [], {}, {}, {})
    with pytest.raises(MissingDictionary):
        next_function(tower, 1)
