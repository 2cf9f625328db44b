import json
import math
from fractions import Fraction

import numpy as np
import pytest

from gdmeasure.errors import ConfigError, StateSpaceError
from gdmeasure.systems import (
    DrivenSystem,
    HataParams,
    builtin_kinds,
    energy_matrices,
    evaluate_step,
    from_config,
    from_json,
    make_adf,
    make_kusuoka,
    make_kusuoka_from_harmonic,
    make_linear,
    make_toy,
)

MINKOWSKI_MATRICES = [[["1", "0"], ["1", "1"]], [["0", "1"], ["-1", "2"]]]

# one buildable config per kind that yields a DrivenSystem
DEFAULT_CONFIGS = {
    "adf": {"kind": "adf"},
    "kusuoka": {"kind": "kusuoka"},
    "linear": {"kind": "linear", "params": {"weights": ["1/3", "2/3"]}},
    "derham_lft": {"kind": "derham_lft",
                   "params": {"matrices": MINKOWSKI_MATRICES}},
    "minkowski": {"kind": "minkowski"},
    "moebius_ac": {"kind": "moebius_ac", "params": {"C": 1, "N": 2}},
    "bernoulli_lft": {"kind": "bernoulli_lft",
                      "params": {"p": ["1/2", "1/2"], "e0": 1}},
    "toy:l3_counterexample": {"kind": "toy:l3_counterexample"},
    "toy:fixedpoint_half": {"kind": "toy:fixedpoint_half"},
    "toy:sqrt_perturbed": {"kind": "toy:sqrt_perturbed"},
    "toy:epsilon_escape": {"kind": "toy:epsilon_escape"},
    "toy:three_state": {"kind": "toy:three_state"},
}


def default_systems():
    return [(k, from_config(c)) for k, c in DEFAULT_CONFIGS.items()]


def test_builtin_kinds_lists_everything():
    kinds = dict(builtin_kinds())
    assert set(kinds) == set(DEFAULT_CONFIGS) | {"hata"}
    assert all(desc for desc in kinds.values())


@pytest.mark.parametrize("kind", sorted(DEFAULT_CONFIGS))
def test_probabilities_sum_to_one_along_paths(kind):
    system = from_config(DEFAULT_CONFIGS[kind])
    assert isinstance(system, DrivenSystem)
    y = system.y0
    rng = np.random.default_rng(7)
    for _ in range(40):
        p, y_next = evaluate_step(system, y, int(rng.integers(system.alphabet_size)))
        total = sum(Fraction(q) if isinstance(q, Fraction) else Fraction(float(q))
                    for q in p) if system.exact else sum(float(q) for q in p)
        assert abs(float(total) - 1.0) < 1e-10
        assert all(float(q) >= -1e-15 for q in p)
        y = y_next


@pytest.mark.parametrize("kind", sorted(DEFAULT_CONFIGS))
def test_scalar_and_vectorized_engines_agree(kind):
    system = from_config(DEFAULT_CONFIGS[kind])
    rng = np.random.default_rng(3)
    symbols = rng.integers(0, system.alphabet_size, size=25)

    y = system.y0
    scalar_probs = []
    for s in symbols:
        p, y = evaluate_step(system, y, int(s))
        scalar_probs.append([float(q) for q in p])

    ys = system.init_states(1)
    vec_probs = []
    for s in symbols:
        vec_probs.append(system.probs_vec(ys)[0].tolist())
        ys = system.step_vec(ys, np.array([int(s)]))

    assert np.allclose(scalar_probs, vec_probs, atol=1e-9)


def test_adf_is_exact_fraction_arithmetic():
    system = make_adf()
    p, y1 = evaluate_step(system, Fraction(0), 1)
    assert all(isinstance(q, Fraction) for q in p)
    assert isinstance(y1, Fraction)
    assert sum(p) == 1


def test_adf_rejects_states_outside_unit_interval():
    system = make_adf()
    with pytest.raises(StateSpaceError):
        system.check_state(Fraction(3, 2))
    with pytest.raises(StateSpaceError):
        system.with_start(-0.25)


def test_energy_matrices_shape():
    mats = energy_matrices()
    assert mats.shape == (3, 2, 2)


def test_kusuoka_states_stay_on_circle():
    system = make_kusuoka()
    ys = system.init_states(64)
    rng = np.random.default_rng(11)
    for _ in range(200):
        syms = rng.integers(0, 3, size=64)
        ys = system.step_vec(ys, syms)
    norms = np.einsum("ij,ij->i", ys, ys)
    assert np.allclose(norms, 1.0, atol=1e-9)


def test_kusuoka_rejects_non_unit_start():
    system = make_kusuoka()
    with pytest.raises(StateSpaceError):
        system.with_start((1.0, 1.0))


def test_kusuoka_from_harmonic_smoke():
    system = make_kusuoka_from_harmonic([0.0, 1.0, 0.5])
    p = system.probs(system.y0)
    assert abs(sum(float(q) for q in p) - 1.0) < 1e-12


def test_linear_weights_validation():
    with pytest.raises(ConfigError):
        make_linear([Fraction(1, 2)])
    with pytest.raises(ConfigError):
        make_linear([Fraction(1, 2), Fraction(1, 3)])  # sums to 5/6
    with pytest.raises(ConfigError):
        make_linear([Fraction(3, 2), Fraction(-1, 2)])


def test_linear_probs_are_constant_and_lft_attached():
    system = make_linear([Fraction(1, 3), Fraction(2, 3)])
    assert system.probs(Fraction(0)) == (Fraction(1, 3), Fraction(2, 3))
    assert system.probs(Fraction(1, 2)) == (Fraction(1, 3), Fraction(2, 3))
    # the constant-weight family carries its affine matrix description
    assert system.lft is not None
    assert system.lft.alphabet_size == 2


def test_toy_defaults_and_param_override():
    base = make_toy("epsilon_escape")
    assert Fraction(base.params["eps"]) == Fraction(1, 2)
    other = make_toy("epsilon_escape", eps=Fraction(1, 4))
    assert Fraction(other.params["eps"]) == Fraction(1, 4)
    with pytest.raises(ConfigError):
        make_toy("epsilon_escape", nope=1)
    with pytest.raises(ConfigError):
        make_toy("no_such_toy")


def test_three_state_is_finite_state_kind():
    system = make_toy("three_state")
    assert system.state_kind == "finite"
    assert system.y0 in system.finite_states
    with pytest.raises(StateSpaceError):
        system.check_state(99)


def test_from_config_hata_returns_params_only():
    out = from_config({"kind": "hata", "params": {"h_sq": 2, "alpha_sq": "1/4"}})
    assert isinstance(out, HataParams)
    assert out.h_sq == 2
    assert out.alpha_sq == Fraction(1, 4)


def test_from_config_error_paths():
    with pytest.raises(ConfigError):
        from_config({"params": {}})
    with pytest.raises(ConfigError):
        from_config({"kind": "linear"})
    with pytest.raises(ConfigError):
        from_config({"kind": "wat"})
    with pytest.raises(ConfigError):
        from_config({"kind": "adf", "params": 3})
    with pytest.raises(ConfigError):
        from_config({"kind": "toy", "params": {}})
    with pytest.raises(ConfigError):
        from_config({"kind": "hata", "params": {"h_sq": 2}})


def test_from_json_round_trip():
    cfg = DEFAULT_CONFIGS["bernoulli_lft"]
    system = from_json(json.dumps(cfg))
    assert system.alphabet_size == 2
    assert system.kind == "bernoulli_lft"


def test_from_config_accepts_explicit_start_state():
    system = from_config({"kind": "minkowski", "params": {"y0": "1/3"}})
    assert system.y0 == Fraction(1, 3)


def test_evaluate_step_rejects_bad_symbol():
    system = make_adf()
    with pytest.raises(ConfigError):
        evaluate_step(system, Fraction(0), 2)


def test_epsilon_escape_weights_pin_once_escaped():
    system = make_toy("epsilon_escape", eps=Fraction(1, 2))
    # from y >= eps the first branch weight is 0 and symbol 1 divides by eps
    p = system.probs(Fraction(3, 4))
    assert p[0] == 0
    assert p[1] == 1


def test_l3_state_map_contracts_to_five_ninths():
    system = make_toy("l3_counterexample")
    y = system.y0
    for _ in range(60):
        y = system.step(y, 0)
    assert abs(float(y) - 5.0 / 9.0) < 1e-9
