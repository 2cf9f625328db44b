import math
from fractions import Fraction

import pytest

from oracles import l1_sphere_entropy_sup
from gdmeasure.dimension import (
    dim_bounds,
    dim_hata,
    dim_kinney,
    dim_linear,
    dim_report_mc,
    entropy_average_exact,
    entropy_average_mc,
    key_deficit,
    pattern_frequency,
    wa_lower_bound,
)
from gdmeasure.errors import ConfigError
from gdmeasure.measure import sample_path
from gdmeasure.symbolic import geometry_constants
from gdmeasure.systems import make_kusuoka, make_linear


def s2(p: float) -> float:
    return -(p * math.log(p) + (1 - p) * math.log(1 - p))


def test_exact_entropy_average_kusuoka_first_level():
    # level-1 average over the three branches from the start state
    expected = -(0.6 * math.log(0.6) + 0.4 * math.log(0.2))
    got = entropy_average_exact(make_kusuoka(), n=1)
    assert got == pytest.approx(expected, abs=1e-12)


def test_exact_entropy_average_constant_weights():
    system = make_linear([Fraction(1, 3), Fraction(2, 3)])
    want = s2(1 / 3)
    for n in (1, 2, 5):
        assert entropy_average_exact(system, n=n) == pytest.approx(want, abs=1e-12)


def test_mc_entropy_average_matches_exact_for_constant_weights():
    system = make_linear([Fraction(1, 3), Fraction(2, 3)])
    mean, ci = entropy_average_mc(system, n=500, paths=50, seed=1)
    # constant weights: every path sees the same entropy, zero spread
    assert ci == 0.0
    assert mean == pytest.approx(s2(1 / 3), abs=1e-12)


def test_mc_entropy_average_thread_invariance():
    system = make_kusuoka()
    a = entropy_average_mc(system, n=300, paths=30, seed=4, threads=1)
    b = entropy_average_mc(system, n=300, paths=30, seed=4, threads=4)
    assert a == b


def test_dim_bounds_and_wa_floor():
    g = geometry_constants("interval", 2)
    upper, lower = dim_bounds(math.log(2), g)
    assert (upper, lower) == (1.0, 1.0)
    upper, lower = dim_bounds(0.5, g, ci_halfwidth=0.07)
    assert upper == pytest.approx(0.57 / math.log(2))
    assert lower == pytest.approx(0.43 / math.log(2))
    assert dim_bounds(-5.0, g)[1] == 0.0  # clamped at zero
    # analytic floor from a verified interior constant
    assert wa_lower_bound(1 / 15, g) == pytest.approx(s2(1 / 15) / math.log(2),
                                                      abs=1e-12)


def test_dim_report_mc_carries_bounds():
    report = dim_report_mc(make_kusuoka(), n=300, paths=40, seed=2)
    assert report.method == "entropy_mc"
    assert report.lower_bound < report.estimate < report.upper_bound
    assert report.ci_halfwidth > 0
    floor = dim_report_mc(make_kusuoka(), n=300, paths=40, seed=2,
                          wa_constant=1 / 15)
    assert floor.lower_bound >= wa_lower_bound(1 / 15, report_geometry())


def report_geometry():
    return geometry_constants("interval", 2)


# --- closed forms -------------------------------------------------------------


def test_dim_linear_values():
    assert dim_linear([0.5, 0.5]).estimate == 1.0
    report = dim_linear([Fraction(1, 3), Fraction(2, 3)])
    assert report.estimate == pytest.approx(s2(1 / 3) / math.log(2), abs=1e-15)
    with pytest.raises(ConfigError):
        dim_linear([0.7, 0.7])
    with pytest.raises(ConfigError):
        dim_linear([1.0])


def test_dim_hata_closed_form():
    report = dim_hata(2.0, 0.25)
    assert 0 < report.estimate < 1
    assert report.estimate == pytest.approx(0.8281444907572746, abs=1e-15)
    # weights (1/4, 3/4) aligned with scales (1/4, 3/4): full dimension
    assert dim_hata(4.0, 0.25).estimate == pytest.approx(1.0, abs=1e-15)
    # misaligned weights always lose (Gibbs)
    for h_sq in (1.5, 2.0, 3.0, 10.0):
        assert dim_hata(h_sq, 0.25).estimate <= 1.0 + 1e-12
    for h_sq, a_sq in ((0.5, 0.25), (1.0, 0.25), (2.0, 0.0), (2.0, 1.0)):
        with pytest.raises(ConfigError):
            dim_hata(h_sq, a_sq)


def test_dim_kinney_is_seeded():
    a = dim_kinney(samples=2000, seed=1)
    b = dim_kinney(samples=2000, seed=1)
    c = dim_kinney(samples=2000, seed=2)
    assert a.estimate == b.estimate
    assert a.estimate != c.estimate
    assert 0 < a.estimate < 1
    assert a.ci_halfwidth > 0


# --- constrained entropy sup ---------------------------------------------------


def test_key_deficit_two_symbol_closed_form():
    kd = key_deficit(2, 0.2)
    assert kd.sup_term == pytest.approx(s2(0.6), abs=1e-15)
    assert kd.maximizer == (0.6, 0.4)
    assert kd.cap == kd.sup_term  # block length one


def test_key_deficit_block_cap_and_rates():
    kd = key_deficit(2, 0.2, block_len=3)
    assert kd.cap == pytest.approx(2 * math.log(2) + kd.sup_term, abs=1e-15)
    assert kd.per_block_gap > 0
    assert kd.deficit_rate(0.5) == pytest.approx(
        (0.5 ** 3 / 2) * kd.per_block_gap / 3, abs=1e-15
    )


def test_key_deficit_vanishing_width_recovers_full_entropy():
    kd = key_deficit(2, 1e-9, block_len=2)
    assert kd.cap == pytest.approx(2 * math.log(2), abs=1e-8)


def test_key_deficit_matches_grid_search_spot():
    kd = key_deficit(3, 0.25)
    assert kd.sup_term == pytest.approx(l1_sphere_entropy_sup(3, 0.25), abs=1e-6)


def test_key_deficit_domain():
    with pytest.raises(ConfigError):
        key_deficit(1, 0.1)
    with pytest.raises(ConfigError):
        key_deficit(2, 0.0)
    with pytest.raises(ConfigError):
        key_deficit(2, 1.0)  # l1 radius of the 2-simplex around uniform
    with pytest.raises(ConfigError):
        key_deficit(2, 0.2, block_len=0)
    # wide but feasible widths stay in range
    assert key_deficit(4, 0.3).sup_term < math.log(4)


def test_key_deficit_monotone_in_width():
    vals = [key_deficit(3, e).sup_term for e in (0.05, 0.1, 0.2, 0.4)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(v < math.log(3) for v in vals)


# --- pattern frequency ----------------------------------------------------------


def test_pattern_frequency_fair_coin():
    system = make_linear([Fraction(1, 2), Fraction(1, 2)])
    trace = sample_path(system, None, 10_000, seed=0)
    freq = pattern_frequency(trace, "00")
    assert freq == pytest.approx(0.25, abs=0.02)
    assert freq >= (0.5 ** 2) / 2  # the liminf floor it is compared against


def test_pattern_frequency_rejects_short_traces():
    system = make_linear([Fraction(1, 2), Fraction(1, 2)])
    trace = sample_path(system, None, 25, seed=0)
    with pytest.raises(ConfigError):
        pattern_frequency(trace, "0000")
