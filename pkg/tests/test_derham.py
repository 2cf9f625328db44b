"""Exact checks for the self-affine curve layer: knots, masses, closed forms."""
import math
from fractions import Fraction as F

import pytest

from oracles import stern_brocot_values
from gdmeasure import derham
from gdmeasure.errors import ValidationError
from gdmeasure.measure import cylinder_mass
from gdmeasure.symbolic import Word


@pytest.fixture(scope="module")
def mink():
    return derham.minkowski_system()


def test_question_mark_anchor_points(mink):
    table = dict(derham.curve_table(mink, 2))
    assert table[F(1, 4)] == F(1, 3)
    assert table[F(1, 2)] == F(1, 2)
    assert table[F(3, 4)] == F(2, 3)
    assert table[F(0)] == 0 and table[F(1)] == 1


def test_question_mark_matches_mediant_oracle(mink):
    table = dict(derham.curve_table(mink, 10))
    oracle = stern_brocot_values(10)
    assert set(table) == set(oracle)
    for t, val in oracle.items():
        assert table[t] == val


def test_curve_eval_masses_are_interval_increments(mink):
    for word in ([], [0], [1], [0, 1], [1, 0, 1], [0, 0, 0, 1]):
        left, right, mass = derham.curve_eval(mink, word)
        assert mass == right - left > 0
    assert derham.curve_eval(mink, [])[2] == 1


def test_curve_eval_agrees_with_driven_mass(mink):
    system = derham.derived_system(mink, label="minkowski", kind="minkowski")
    for word in ([0], [1, 1], [0, 1, 0], [1, 0, 0, 1, 1]):
        mass = derham.curve_eval(mink, word)[2]
        assert cylinder_mass(system, None, Word(tuple(word), 2)) == mass


def test_curve_table_is_a_monotone_graph(mink):
    rows = derham.curve_table(mink, 6)
    assert rows[0] == (0, 0) and rows[-1] == (1, 1)
    assert all(a[0] < b[0] and a[1] < b[1] for a, b in zip(rows, rows[1:]))


def test_matrix_normalization_is_projective(mink):
    raw = derham.matrices_from_json([[["1", "0"], ["1", "1"]],
                                     [["0", "1"], ["-1", "2"]]])
    # stored form may be rescaled; the transforms must agree pointwise
    for m_raw, m_sys in zip(raw, mink.matrices):
        for z in (F(0), F(1, 3), F(1, 2), F(1)):
            assert derham.phi_transform(m_raw, z) == derham.phi_transform(m_sys, z)


def test_validate_rejects_bad_families():
    def build(rows):
        return derham.matrices_from_json(rows)

    with pytest.raises(ValidationError) as exc:
        derham.validate(build([[["1", "1"], ["1", "1"]], [["0", "1"], ["-1", "2"]]]))
    assert exc.value.condition == "A2"  # singular branch
    with pytest.raises(ValidationError) as exc:
        derham.validate(build([[["1", "1"], ["0", "2"]], [["1", "0"], ["0", "2"]]]))
    assert exc.value.condition == "A1"  # endpoints out of place
    assert exc.value.index == 0
    with pytest.raises(ValidationError) as exc:
        derham.validate(build([[["2", "0"], ["0", "1"]], [["1", "1"], ["0", "2"]]]))
    assert exc.value.condition == "A3"  # expanding branch


def test_flags_distinguish_strict_contraction(mink):
    assert mink.flags["A1"] and mink.flags["A2"] and mink.flags["A3"]
    assert not mink.flags["sA3"]  # parabolic branches, no strict bound
    halves = derham.linear_system([F(1, 2), F(1, 2)])
    assert halves.flags["sA3"]


def test_moebius_family_closed_form():
    system = derham.moebius_system(1, 2)
    c = derham.detect_moebius_case(system)
    assert c == 1
    table = derham.curve_table(system, 10)
    assert len(table) == 1025
    for t, value in table:
        assert value == derham.moebius_distribution(c, t)
        assert value == t / (2 - t)


def test_moebius_distribution_values():
    assert derham.moebius_distribution(F(1), F(1, 2)) == F(1, 3)
    assert derham.moebius_distribution(F(1, 2), F(1, 2)) == F(2, 5)
    assert derham.moebius_distribution(F(1), F(0)) == 0
    assert derham.moebius_distribution(F(1), F(1)) == 1


def test_moebius_case_needs_weak_contraction():
    derham.moebius_system(F(1, 2), 3)  # fine
    with pytest.raises(ValidationError) as exc:
        derham.moebius_system(2, 2)
    assert exc.value.condition == "A3"


def test_bernoulli_equivalence_round_trip():
    system = derham.bernoulli_equivalence_params([F(1, 2), F(1, 2)], 1)
    got = derham.is_ac_with_bernoulli(system)
    assert got == (F(1, 2), F(1, 2))
    # the balanced e0=1 family is exactly the unit-parameter moebius curve
    assert system.matrices == derham.moebius_system(1, 2).matrices


def test_detection_refuses_non_moebius_systems(mink):
    assert derham.detect_moebius_case(mink) is None
    assert derham.is_ac_with_bernoulli(mink) is None
    lin = derham.linear_system([F(1, 3), F(2, 3)])
    assert derham.detect_moebius_case(lin) is None


def test_linear_system_knots_follow_weights():
    lin = derham.linear_system([F(1, 4), F(1, 4), F(1, 2)])
    assert lin.knots == (F(0), F(1, 4), F(1, 2), F(1))
    assert derham.curve_eval(lin, [2]) == (F(1, 2), F(1), F(1, 2))
    # constant-weight families sit at a single fixed state
    assert derham.state_interval(lin) == (0, 0)


def test_state_interval_minkowski(mink):
    lo, hi = derham.state_interval(mink)
    assert lo == -1 and hi == math.inf


def test_derived_system_weights_match_increments(mink):
    system = derham.derived_system(mink, label="minkowski", kind="minkowski")
    assert system.kind == "minkowski"
    y = system.y0
    probs = system.probs(y)
    for i, p in enumerate(probs):
        assert p == derham.curve_eval(mink, [i])[2]


def test_long_words_stay_exact(mink):
    left, right, mass = derham.curve_eval(mink, [0, 1] * 30)
    assert mass == right - left
    assert 0 < mass < F(1, 2) ** 30
