import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from droptune.space import (DimensionMismatch, ParamDef, SearchSpace, coordinate_from_json,
                            coordinate_to_json, enumerate_space, neighbors, size)


def example_space():
    return SearchSpace((ParamDef("unroll", (1, 2, 3, 4, 5), "unroll"),
                        ParamDef("tile", (1, 2, 4, 8, 16), "tile")))


def at(space, **values):
    return tuple(space.params[space.index_of(k)].values.index(v) for k, v in values.items())


def as_values(space, coords):
    return {tuple(space.values_of(c).values()) for c in coords}


def test_worked_neighborhood():
    sp = example_space()
    got = neighbors(sp, at(sp, unroll=3, tile=8))
    assert as_values(sp, got) == {(2, 8), (4, 8), (3, 4), (3, 16)}
    assert len(got) == 4


def test_neighbor_order_is_dimension_major_minus_first():
    sp = example_space()
    assert neighbors(sp, (2, 3)) == [(1, 3), (3, 3), (2, 2), (2, 4)]


def test_neighbors_singleton_and_corner():
    assert neighbors(SearchSpace((ParamDef("a", (1,)),)), (0,)) == []
    sp = SearchSpace((ParamDef("a", (1, 2)), ParamDef("b", (1, 2))))
    assert as_values(sp, neighbors(sp, (0, 0))) == {(2, 1), (1, 2)}


@pytest.mark.parametrize("bad", [(0,), (0, 0, 0), (5, 0), (0, -1)])
def test_invalid_coordinate_raises(bad):
    with pytest.raises(DimensionMismatch):
        neighbors(example_space(), bad)


def test_sizes():
    assert size(example_space()) == 25
    assert size(SearchSpace()) == 1
    sp = SearchSpace((ParamDef("a", (1, 2)), ParamDef("b", (1, 2, 4)), ParamDef("c", (0, 16))))
    assert size(sp) == 12


def test_enumerate_row_major():
    assert list(enumerate_space(SearchSpace((ParamDef("a", (1, 2)),)))) == [(0,), (1,)]
    sp = SearchSpace((ParamDef("a", (1, 2)), ParamDef("b", (1, 2))))
    assert list(sp.enumerate()) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert len(set(example_space().enumerate())) == 25
    assert list(SearchSpace().enumerate()) == [()]


def test_enumerate_matches_itertools_product():
    sp = SearchSpace((ParamDef("a", (1, 2, 3)), ParamDef("b", (5, 6)), ParamDef("c", (0, 9, 10))))
    assert list(sp.enumerate()) == list(itertools.product(range(3), range(2), range(3)))


def test_enumerate_overflow():
    huge = SearchSpace(tuple(ParamDef(f"p{i}", tuple(range(1000))) for i in range(8)))
    with pytest.raises(OverflowError):
        huge.enumerate()


def test_paramdef_validation():
    with pytest.raises(ValueError):
        ParamDef("x", ())
    with pytest.raises(ValueError):
        ParamDef("x", (1, 1))
    with pytest.raises(ValueError):
        ParamDef("x", (2, 1))
    with pytest.raises(ValueError):
        ParamDef("x", (1,), "bogus")
    with pytest.raises(ValueError):
        SearchSpace((ParamDef("x", (1,)), ParamDef("x", (2,))))


def test_json_roundtrip():
    sp = example_space()
    doc = sp.to_json()
    assert doc["params"][1] == {"name": "tile", "kind": "tile", "values": [1, 2, 4, 8, 16]}
    assert SearchSpace.from_json(doc) == sp
    assert coordinate_from_json(coordinate_to_json((3, 1))) == (3, 1)
    assert coordinate_from_json("[1, 2]") == (1, 2)


# -- properties ---------------------------------------------------------------

@st.composite
def space_and_coord(draw):
    cards = draw(st.lists(st.integers(1, 7), min_size=0, max_size=6))
    sp = SearchSpace(tuple(ParamDef(f"p{i}", tuple(range(0, 3 * k, 3))) for i, k in enumerate(cards)))
    c = tuple(draw(st.integers(0, k - 1)) for k in cards)
    return sp, c


@settings(max_examples=1000, deadline=None)
@given(space_and_coord())
def test_neighborhood_properties(args):
    sp, c = args
    nb = sp.neighbors(c)
    boundary = sum((i == 0) + (i == k - 1) for i, k in zip(c, sp.cardinalities))
    assert len(nb) == 2 * sp.dimension - boundary
    assert len(set(nb)) == len(nb) and c not in nb
    for n in nb:
        assert sum(abs(a - b) for a, b in zip(n, c)) == 1
        assert c in sp.neighbors(n)


@settings(max_examples=200, deadline=None)
@given(space_and_coord())
def test_flat_index_roundtrip(args):
    sp, c = args
    assert sp.from_flat(sp.to_flat(c)) == c
    assert list(sp.enumerate())[sp.to_flat(c)] == c
