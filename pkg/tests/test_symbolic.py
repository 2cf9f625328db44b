import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from gdmeasure.errors import ConfigError
from gdmeasure.symbolic import (
    IfsGeometry,
    NadicInterval,
    Word,
    cylinder_interval,
    entropy,
    entropy_max,
    geometry_constants,
    project,
)


def test_word_basics():
    w = Word((0, 1, 1), 2)
    assert len(w) == 3
    assert str(w) == "011"
    assert list(w) == [0, 1, 1]
    assert w.append(0).symbols == (0, 1, 1, 0)
    assert w.prefix(2) == Word((0, 1), 2)


def test_word_from_string_matches_from_symbols():
    assert Word.from_string("2101", 3) == Word.from_symbols([2, 1, 0, 1], 3)


def test_word_rejects_bad_symbols():
    with pytest.raises(ConfigError):
        Word((0, 2), 2)
    with pytest.raises(ConfigError):
        Word((0, -1), 2)
    with pytest.raises(ConfigError):
        Word((), 1)


def test_project_left_endpoint():
    assert project(Word((0, 1), 2)) == Fraction(1, 4)
    assert project(Word((2,), 3)) == Fraction(2, 3)
    with pytest.raises(ConfigError):
        project(Word((), 2))


def test_cylinder_interval_known_values():
    iv = cylinder_interval(Word((1, 0), 2))
    assert (iv.left, iv.right) == (Fraction(1, 2), Fraction(3, 4))
    assert iv.width == Fraction(1, 4)
    # empty word addresses the whole parameter interval
    root = cylinder_interval(Word((), 2))
    assert (root.left, root.right) == (0, 1)


def test_nadic_interval_validation():
    with pytest.raises(ConfigError):
        NadicInterval(4, 2, 2)  # only 4 cells at depth 2
    with pytest.raises(ConfigError):
        NadicInterval(-1, 2, 2)


words = st.integers(2, 5).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, n - 1), min_size=1, max_size=12), st.just(n)
    )
)


@given(words)
def test_cylinder_nesting_and_projection(data):
    symbols, n = data
    w = Word(tuple(symbols), n)
    iv = cylinder_interval(w)
    assert iv.contains_point(project(w))
    assert project(w) == iv.left
    # children tile the parent exactly
    kids = [cylinder_interval(w.append(s)) for s in range(n)]
    assert kids[0].left == iv.left
    assert kids[-1].right == iv.right
    for a, b in zip(kids, kids[1:]):
        assert a.right == b.left
    assert all(iv.contains_interval(k) for k in kids)


@given(words)
def test_prefix_cylinders_nest(data):
    symbols, n = data
    w = Word(tuple(symbols), n)
    outer = cylinder_interval(w.prefix(len(w) - 1))
    assert outer.contains_interval(cylinder_interval(w))


@given(
    st.integers(2, 6).flatmap(
        lambda k: st.lists(
            st.floats(0.0, 1.0, allow_nan=False), min_size=k, max_size=k
        )
    )
)
def test_entropy_bounds(raw):
    total = sum(raw)
    if total <= 0:
        return
    probs = [x / total for x in raw]
    h = entropy(probs, sum_tol=1e-9)
    assert -1e-12 <= h <= entropy_max(len(probs)) + 1e-12


def test_entropy_known_values():
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    assert entropy([1.0, 0.0]) == 0.0  # 0 log 0 = 0 convention
    assert entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-15)


def test_entropy_rejects_garbage():
    for bad in ([0.5], [0.6, 0.6], [1.2, -0.2], [float("nan"), 1.0]):
        with pytest.raises(ConfigError):
            entropy(bad)


def test_geometry_table():
    interval = geometry_constants("interval", 2)
    assert interval.contraction == Fraction(1, 2)
    assert interval.overlap_bound == 3
    assert interval.log_inv_contraction == pytest.approx(math.log(2))

    gasket = geometry_constants("gasket")
    assert (gasket.alphabet_size, gasket.overlap_bound) == (3, 8)
    square = geometry_constants("square")
    assert (square.alphabet_size, square.overlap_bound) == (4, 9)
    carpet = geometry_constants("carpet")
    assert (carpet.alphabet_size, carpet.contraction) == (8, Fraction(1, 3))

    with pytest.raises(ConfigError):
        geometry_constants("interval")  # needs a branch count
    with pytest.raises(ConfigError):
        geometry_constants("gasket", alphabet_size=4)
    with pytest.raises(ConfigError):
        geometry_constants("dodecahedron")


def test_geometry_is_frozen():
    g = geometry_constants("square")
    assert isinstance(g, IfsGeometry)
    with pytest.raises(Exception):
        g.overlap_bound = 1
