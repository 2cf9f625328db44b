from fractions import Fraction

import pytest

from gdmeasure.conditions import (
    FAILS_WITH_WITNESS,
    HOLDS_AT_RESOLUTION,
    check_A,
    check_B,
    check_multisep2,
    check_sB,
    check_wA,
    orbit,
    verify_kigami,
    verify_witness,
)
from gdmeasure.errors import ConfigError
from gdmeasure.systems import from_config, make_linear, make_toy


@pytest.fixture(scope="module")
def minkowski():
    return from_config({"kind": "minkowski"})


@pytest.fixture(scope="module")
def l3():
    return make_toy("l3_counterexample")


# --- orbit ------------------------------------------------------------------


def test_orbit_dedups_shared_states(l3):
    # both branch maps coincide, so each level adds exactly one new state
    orb = orbit(l3, depth=10)
    assert len(orb.states) == 11
    assert not orb.truncated
    assert orb.root == l3.y0


def test_orbit_respects_state_cap(minkowski):
    orb = orbit(minkowski, depth=14, max_states=40)
    assert orb.truncated
    assert len(orb.states) == 40


def test_orbit_word_replay(minkowski):
    orb = orbit(minkowski, depth=6)
    # replaying any node's word from the root must land on its state
    for idx in (0, 1, len(orb.states) // 2, len(orb.states) - 1):
        y = orb.root
        for s in orb.word_for(idx):
            y = minkowski.step(y, s)
        assert float(y) == pytest.approx(float(orb.states[idx]), abs=1e-12)


# --- interior conditions ------------------------------------------------------


def test_linear_weights_hold_everything():
    system = make_linear([Fraction(1, 3), Fraction(2, 3)])
    assert check_A(system).holds
    assert check_wA(system).holds
    assert check_B(system).holds
    assert check_sB(system).holds


def test_minkowski_boundary_escape(minkowski):
    verdict = check_A(minkowski)
    assert verdict.status == FAILS_WITH_WITNESS
    w = verdict.witness
    assert w["kind"] == "trend"
    assert w["boundary"] == 1.0
    # the escape rides a single symbol with weights increasing monotonically
    vals = w["values"]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert verify_witness(minkowski, verdict)


def test_minkowski_weak_condition_fails_too(minkowski):
    verdict = check_wA(minkowski)
    assert verdict.status == FAILS_WITH_WITNESS
    # weak failure needs evidence on every coordinate
    assert isinstance(verdict.witness, list)
    assert len(verdict.witness) == minkowski.alphabet_size
    assert verify_witness(minkowski, verdict)


def test_epsilon_escape_fails_interior_conditions():
    system = from_config({"kind": "toy:epsilon_escape"})
    a = check_A(system)
    wa = check_wA(system)
    assert a.status == FAILS_WITH_WITNESS
    assert wa.status == FAILS_WITH_WITNESS
    assert verify_witness(system, a)
    assert verify_witness(system, wa)


def test_implications_on_defaults():
    # A implies wA and sB implies B, verdict by verdict
    kinds = ["adf", "kusuoka", "minkowski", "toy:l3_counterexample",
             "toy:fixedpoint_half", "toy:sqrt_perturbed", "toy:three_state"]
    for kind in kinds:
        system = from_config({"kind": kind})
        if check_A(system).holds:
            assert check_wA(system).holds, kind
        if check_sB(system).holds:
            assert check_B(system).holds, kind


# --- separation conditions ----------------------------------------------------


def test_l3_block_length_ladder(l3):
    assert check_B(l3, eps0=Fraction(1, 8), l=1).status == FAILS_WITH_WITNESS
    assert check_B(l3, eps0=Fraction(1, 8), l=2).status == FAILS_WITH_WITNESS
    assert check_B(l3, eps0=Fraction(1, 24), l=3).status == HOLDS_AT_RESOLUTION


def test_l3_failure_witness_replays(l3):
    verdict = check_B(l3, eps0=Fraction(1, 8), l=1)
    assert verify_witness(l3, verdict)


def test_minkowski_strong_separation_at_block_two(minkowski):
    verdict = check_sB(minkowski, eps0=Fraction(1, 16), l=2)
    assert verdict.status == HOLDS_AT_RESOLUTION
    assert verdict.resolution["l"] == 2
    # the wider default width is violated somewhere on the orbit
    wide = check_sB(minkowski, eps0=Fraction(1, 8), l=2)
    assert wide.status == FAILS_WITH_WITNESS
    assert verify_witness(minkowski, wide)


def test_separation_rejects_bad_width(l3):
    with pytest.raises(ConfigError):
        check_B(l3, eps0=Fraction(2, 3), l=1)  # (0, 1/N) for two symbols
    with pytest.raises(ConfigError):
        check_B(l3, eps0=Fraction(0), l=1)
    with pytest.raises(ConfigError):
        check_B(l3, eps0=Fraction(1, 8), l=0)


def test_multisep2_validation(minkowski):
    with pytest.raises(ConfigError):
        check_multisep2(minkowski, Fraction(0), (Fraction(1, 2),),
                        Fraction(1, 8), (0,))
    with pytest.raises(ConfigError):
        check_multisep2(minkowski, Fraction(0),
                        (Fraction(1, 2), Fraction(1, 2)), Fraction(3, 4), (0,))


def test_multisep2_accepts_a_real_certificate():
    system = from_config({"kind": "adf"})
    p = (Fraction(1, 2), Fraction(1, 2))
    verdict = check_multisep2(system, system.y0, p, Fraction(1, 32), (0,))
    assert verdict.status == HOLDS_AT_RESOLUTION
    assert verdict.condition == "multisep2"


# --- carrier geometry ---------------------------------------------------------


@pytest.mark.parametrize("name,alphabet", [
    ("interval", 2), ("interval", 3), ("square", None),
    ("gasket", None), ("carpet", None),
])
def test_verify_kigami_bounds_hold(name, alphabet):
    report = verify_kigami(name, alphabet_size=alphabet)
    assert report["diam_ok"]
    assert report["overlap_ok"]
    assert report["max_overlap_observed"] <= report["D"]
    assert report["levels"]


def test_verify_kigami_interval_overlap_is_exactly_three():
    report = verify_kigami("interval", alphabet_size=2)
    assert report["max_overlap_observed"] == 3
