import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gdmeasure import derham
from gdmeasure.errors import ConfigError
from gdmeasure.measure import (
    cylinder_mass,
    distribution_function,
    interval_mass,
    log_cylinder_mass,
    martingale_trace,
    run_paths,
    sample_path,
    trace_csv_rows,
)
from gdmeasure.symbolic import Word
from gdmeasure.systems import from_config, make_adf, make_linear


@pytest.fixture(scope="module")
def adf():
    return make_adf()


@pytest.fixture(scope="module")
def minkowski():
    return from_config({"kind": "minkowski"})


def test_cylinder_mass_accepts_word_string_and_list(adf):
    w = Word((0, 1, 0), 2)
    m = cylinder_mass(adf, None, w)
    assert cylinder_mass(adf, None, "010") == m
    assert cylinder_mass(adf, None, [0, 1, 0]) == m
    assert isinstance(m, Fraction)


def test_empty_word_has_unit_mass(adf):
    assert cylinder_mass(adf, None, "") == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=0, max_size=10))
def test_mass_splits_exactly_over_children(symbols):
    system = make_adf()
    w = Word(tuple(symbols), 2)
    parent = cylinder_mass(system, None, w)
    kids = [cylinder_mass(system, None, w.append(s)) for s in (0, 1)]
    assert parent == kids[0] + kids[1]
    assert parent >= 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=8))
def test_log_mass_matches_exact_mass(symbols):
    system = make_adf()
    m = cylinder_mass(system, None, symbols)
    if m > 0:
        assert log_cylinder_mass(system, None, symbols) == pytest.approx(
            math.log(m), abs=1e-12
        )


def test_mass_against_matrix_engine(minkowski):
    # the same family is evaluated by the matrix product in derham
    ds = minkowski.lft
    for word in ("0", "1", "01", "110", "0101", "11011"):
        left, right, mass = derham.curve_eval(ds, word)
        assert cylinder_mass(minkowski, None, word) == mass


def test_adf_interval_two_fifths(adf):
    out = interval_mass(adf, None, Fraction(1, 2))
    assert out.exact
    assert out.value == Fraction(2, 5)
    full = interval_mass(adf, None, Fraction(1))
    assert full.exact and full.value == 1
    nothing = interval_mass(adf, None, Fraction(0))
    assert nothing.exact and nothing.value == 0


def test_interval_mass_lower_endpoint(adf):
    a = interval_mass(adf, None, Fraction(1, 4))
    b = interval_mass(adf, None, Fraction(1, 2), lower=Fraction(1, 4))
    c = interval_mass(adf, None, Fraction(1, 2))
    assert a.exact and b.exact
    assert a.value + b.value == c.value


def test_interval_mass_truncates_at_irrational_endpoints(adf):
    out = interval_mass(adf, None, 1 / math.sqrt(2), depth_limit=24)
    assert not out.exact
    assert 0 < out.truncation_bound < 1e-4
    # value brackets the true mass from below by construction
    assert 0 < float(out.value) < 1


def test_distribution_function_monotone(adf, minkowski):
    grid = [Fraction(k, 32) for k in range(33)]
    for system in (adf, minkowski):
        rows = distribution_function(system, None, grid)
        assert [t for t, _ in rows] == grid
        values = [v for _, v in rows]
        assert float(values[0]) == 0.0
        assert float(values[-1]) == 1.0
        assert all(float(b) >= float(a) for a, b in zip(values, values[1:]))


def test_sample_path_is_reproducible(adf):
    a = sample_path(adf, None, 50, seed=3, path_index=2)
    b = sample_path(adf, None, 50, seed=3, path_index=2)
    assert a.word == b.word
    assert np.array_equal(a.log_mass, b.log_mass)
    c = sample_path(adf, None, 50, seed=3, path_index=4)
    assert a.word != c.word  # different stream


def test_sample_path_martingale_recompute(adf):
    trace = sample_path(adf, None, 200, seed=1)
    again = martingale_trace(trace)
    assert np.allclose(again, trace.martingale, atol=1e-12)
    assert trace.martingale[0] == 0.0
    assert len(trace.martingale) == 201


def test_trace_csv_rows_shape(adf):
    trace = sample_path(adf, None, 20, seed=0)
    rows = trace_csv_rows(trace)
    assert len(rows) == 20
    # n, symbol, state, p_0, p_1, log_mass, M_n
    assert all(len(r) == 7 for r in rows)
    assert rows[0][0] == 1 and rows[-1][0] == 20


@pytest.mark.parametrize("kind", ["adf", "kusuoka", "minkowski",
                                  "toy:three_state", "toy:sqrt_perturbed"])
def test_vectorized_paths_match_scalar_paths(kind):
    system = from_config({"kind": kind})
    stats = run_paths(system, 250, 6, seed=5)
    for i in range(6):
        trace = sample_path(system, None, 250, seed=5, path_index=i)
        assert stats.neg_log_mass[i] == pytest.approx(-trace.log_mass[-1], abs=1e-9)
        assert stats.martingale_final[i] == pytest.approx(
            trace.martingale[-1], abs=1e-9
        )


def test_run_paths_thread_count_is_invisible():
    system = make_linear([Fraction(1, 3), Fraction(2, 3)])
    one = run_paths(system, 400, 16, seed=9, threads=1)
    four = run_paths(system, 400, 16, seed=9, threads=4)
    assert np.array_equal(one.neg_log_mass, four.neg_log_mass)
    assert np.array_equal(one.entropy_sum, four.entropy_sum)
    assert np.array_equal(one.martingale_final, four.martingale_final)


def test_run_paths_validates_budget():
    system = make_linear([Fraction(1, 2), Fraction(1, 2)])
    with pytest.raises(ConfigError):
        run_paths(system, 0, 5, seed=0)
    from gdmeasure.errors import BudgetError

    with pytest.raises(BudgetError):
        run_paths(system, 10**6, 10**4, seed=0)


def test_linear_mass_is_product_of_weights():
    system = make_linear([Fraction(1, 4), Fraction(3, 4)])
    assert cylinder_mass(system, None, "011") == Fraction(1, 4) * Fraction(3, 4) ** 2
