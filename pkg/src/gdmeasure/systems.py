"""Driven systems: per-state branch probabilities and state maps.

A driven system assigns to each state y a probability vector over the N
branches together with N maps sending y to the next state. The built-in
families cover the energy-measure system on the circle, the harmonic
restriction on [0, 1], constant-weight systems, and a handful of small
piecewise examples used as regression cases.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from .errors import ConfigError, StateSpaceError
from .symbolic import IfsGeometry, geometry_constants

STATE_TOL = 1e-10
_SQRT3 = math.sqrt(3.0)


def _as_number(v):
    """Parse a config number: strings become exact Fractions, floats stay floats."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise ConfigError(f"not a number: {v!r}")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    if isinstance(v, str):
        try:
            return Fraction(v)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse number {v!r}") from exc
    raise ConfigError(f"cannot parse number {v!r}")


@dataclass(frozen=True)
class DrivenSystem:
    """Branch probabilities and state maps, with scalar and vectorized entry points.

    ``probs``/``step`` accept a single state (Fraction arithmetic is preserved
    when ``exact`` is set); ``probs_vec``/``step_vec`` operate on numpy arrays
    of states for the Monte-Carlo engines.
    """

    kind: str
    label: str
    alphabet_size: int
    state_kind: str  # "scalar" | "circle" | "finite"
    y0: Any
    probs: Callable[[Any], tuple]
    step: Callable[[Any, int], Any]
    probs_vec: Callable[[np.ndarray], np.ndarray]
    step_vec: Callable[[np.ndarray, np.ndarray], np.ndarray]
    geometry: IfsGeometry
    exact: bool
    state_lo: float = -math.inf
    state_hi: float = math.inf
    finite_states: tuple | None = None
    params: dict = field(default_factory=dict)
    lft: Any = None  # validated matrix family for curve operations, if any

    def check_state(self, y) -> None:
        if self.state_kind == "scalar":
            v = float(y)
            if math.isnan(v):
                raise StateSpaceError(f"state {y!r} outside state space of {self.label}")
            if not (self.state_lo - STATE_TOL <= v <= self.state_hi + STATE_TOL):
                raise StateSpaceError(f"state {y!r} outside state space of {self.label}")
        elif self.state_kind == "circle":
            arr = np.asarray(y, dtype=float)
            if arr.shape != (2,) or abs(float(arr @ arr) - 1.0) > 2e-10:
                raise StateSpaceError(f"state {y!r} is not a unit vector")
        elif self.state_kind == "finite":
            if y not in self.finite_states:
                raise StateSpaceError(f"state {y!r} not in {self.finite_states}")
        else:  # pragma: no cover - construction bug
            raise StateSpaceError(f"unknown state kind {self.state_kind}")

    def init_states(self, count: int) -> np.ndarray:
        if self.state_kind == "scalar":
            return np.full(count, float(self.y0))
        if self.state_kind == "circle":
            return np.tile(np.asarray(self.y0, dtype=float), (count, 1))
        return np.full(count, int(self.y0), dtype=np.int64)

    def with_start(self, y0) -> "DrivenSystem":
        self.check_state(y0)
        return replace(self, y0=y0)


def evaluate_step(system: DrivenSystem, y, symbol: int):
    """One step of the system: (probability vector at y, next state).

    Validates the state, the symbol, and that the probabilities sum to one.
    """
    if not (0 <= symbol < system.alphabet_size):
        raise ConfigError(f"symbol {symbol} outside alphabet of {system.label}")
    system.check_state(y)
    p = system.probs(y)
    total = float(sum(float(q) for q in p))
    if abs(total - 1.0) > 1e-10:
        raise StateSpaceError(
            f"branch probabilities at {y!r} sum to {total}, not 1"
        )
    return p, system.step(y, symbol)


# ---------------------------------------------------------------------------
# harmonic restriction on [0, 1]


def make_adf(y0=Fraction(0)) -> DrivenSystem:
    """Two-branch system on [0, 1] from restricting harmonic functions.

    g0(y) = (2+y)/5, and the two state maps push y to (1+2y)/(2+y) and
    y/(3-y). All maps preserve [0, 1] and keep rational states rational.
    """
    y0 = _as_number(y0)
    if not (0 <= y0 <= 1):
        raise ConfigError("start state must lie in [0, 1]")

    def probs(y):
        g0 = (2 + y) / 5
        return (g0, 1 - g0)

    def step(y, i):
        if i == 0:
            return (1 + 2 * y) / (2 + y)
        return y / (3 - y)

    def probs_vec(ys):
        g0 = (2.0 + ys) / 5.0
        return np.stack([g0, 1.0 - g0], axis=1)

    def step_vec(ys, syms):
        return np.where(syms == 0, (1.0 + 2.0 * ys) / (2.0 + ys), ys / (3.0 - ys))

    return DrivenSystem(
        kind="adf",
        label="adf",
        alphabet_size=2,
        state_kind="scalar",
        y0=y0,
        probs=probs,
        step=step,
        probs_vec=probs_vec,
        step_vec=step_vec,
        geometry=geometry_constants("interval", 2),
        exact=isinstance(y0, Fraction),
        state_lo=0.0,
        state_hi=1.0,
        params={"y0": str(y0)},
    )


# ---------------------------------------------------------------------------
# energy-measure system on the circle

_ENERGY_MATS = np.array(
    [
        [[0.6, 0.0], [0.0, 0.2]],
        [[0.3, _SQRT3 / 10.0], [_SQRT3 / 10.0, 0.5]],
        [[0.3, -_SQRT3 / 10.0], [-_SQRT3 / 10.0, 0.5]],
    ]
)


def energy_matrices() -> np.ndarray:
    """The three symmetric 2x2 matrices driving the circle system (copy)."""
    return _ENERGY_MATS.copy()


def make_kusuoka(y0=(1.0, 0.0)) -> DrivenSystem:
    """Three-branch system on the unit circle from energy measures.

    Branch probabilities are (5/3)·|A_i y|^2 and the state maps normalize
    A_i y back to the circle. Probabilities sum to one because the squared
    matrices add up to (3/5)·Id.
    """
    arr = np.asarray(y0, dtype=float)
    if arr.shape != (2,):
        raise ConfigError("circle state must be a 2-vector")
    nrm = float(np.hypot(arr[0], arr[1]))
    if abs(nrm - 1.0) > 1e-12:
        raise ConfigError(f"start state must be a unit vector, |y0| = {nrm}")
    start = (float(arr[0] / nrm), float(arr[1] / nrm))

    def probs(y):
        v = _ENERGY_MATS @ np.asarray(y, dtype=float)
        return tuple((5.0 / 3.0) * (v * v).sum(axis=1))

    def step(y, i):
        v = _ENERGY_MATS[i] @ np.asarray(y, dtype=float)
        n = float(np.hypot(v[0], v[1]))
        return (float(v[0] / n), float(v[1] / n))

    def probs_vec(ys):
        v = np.einsum("kij,mj->mki", _ENERGY_MATS, ys)
        return (5.0 / 3.0) * (v * v).sum(axis=2)

    def step_vec(ys, syms):
        v = np.einsum("mij,mj->mi", _ENERGY_MATS[syms], ys)
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    return DrivenSystem(
        kind="kusuoka",
        label="kusuoka",
        alphabet_size=3,
        state_kind="circle",
        y0=start,
        probs=probs,
        step=step,
        probs_vec=probs_vec,
        step_vec=step_vec,
        geometry=geometry_constants("gasket"),
        exact=False,
        params={"y0": [start[0], start[1]]},
    )


def make_kusuoka_from_harmonic(boundary: Sequence[float]) -> DrivenSystem:
    """Circle system for the energy measure of the harmonic function with the
    given three boundary values.

    The harmonic function is decomposed in the orthonormal energy basis; only
    the direction of the coefficient vector matters, so the result is scale
    invariant and the sign is canonicalized (first nonzero coordinate > 0).
    Constant boundary data has zero energy and is rejected.
    """
    vals = [float(v) for v in boundary]
    if len(vals) != 3:
        raise ConfigError("need exactly three boundary values")
    f0, f1, f2 = vals
    v1 = (f1 + f2 - 2.0 * f0) / (2.0 * math.sqrt(2.0))
    v2 = (f1 - f2) / (2.0 * math.sqrt(2.0 / 3.0))
    nrm = math.hypot(v1, v2)
    if nrm <= 1e-14 * (1.0 + max(abs(x) for x in vals)):
        raise ConfigError("energy measure undefined: boundary values are constant (zero energy)")
    y = (v1 / nrm, v2 / nrm)
    lead = y[0] if abs(y[0]) > 1e-14 else y[1]
    if lead < 0:
        y = (-y[0], -y[1])
    sys = make_kusuoka(y)
    return replace(sys, params={"y0": [y[0], y[1]], "boundary": vals})


# ---------------------------------------------------------------------------
# constant weights


def make_linear(weights: Sequence) -> DrivenSystem:
    """State-independent branch weights; the single state is 0."""
    w = tuple(_as_number(x) for x in weights)
    if len(w) < 2:
        raise ConfigError("need at least two weights")
    exact = all(isinstance(x, Fraction) for x in w)
    total = sum(Fraction(x) if exact else x for x in w)
    if (exact and total != 1) or (not exact and abs(float(total) - 1.0) > 1e-12):
        raise ConfigError("weights must sum to 1")
    if any(x < 0 for x in w):
        raise ConfigError("weights must be nonnegative")
    n = len(w)
    wf = np.array([float(x) for x in w])

    def probs(y):
        return w

    def step(y, i):
        return y

    def probs_vec(ys):
        return np.tile(wf, (len(ys), 1))

    def step_vec(ys, syms):
        return ys

    # Constant weights have an affine curve family: branch i maps the value
    # interval onto [w_0+..+w_{i-1}, w_0+..+w_i].  Attaching it makes the
    # density/dimension machinery available for product measures too.
    lft = None
    if exact and all(x > 0 for x in w):
        from . import derham
        lft = derham.linear_system(w)

    return DrivenSystem(
        kind="linear",
        label=f"linear({','.join(str(x) for x in w)})",
        alphabet_size=n,
        state_kind="scalar",
        y0=Fraction(0) if exact else 0.0,
        probs=probs,
        step=step,
        probs_vec=probs_vec,
        step_vec=step_vec,
        geometry=geometry_constants("interval", n),
        exact=exact,
        state_lo=0.0,
        state_hi=0.0,
        lft=lft,
        params={"weights": [str(x) for x in w]},
    )


# ---------------------------------------------------------------------------
# small piecewise examples

_HALF = Fraction(1, 2)
_SIXTH = Fraction(1, 6)


def _toy_l3(y0) -> DrivenSystem:
    # Both state maps coincide; the interest is in how often the branch
    # probabilities revisit the balanced vector along the single orbit.
    y0 = _as_number(y0)

    def g0(x):
        if x < 0 or x > 1:
            return _SIXTH if isinstance(x, Fraction) else float(_SIXTH)
        if x <= _HALF:
            return x + _SIXTH
        return Fraction(7, 6) - x

    def probs(y):
        a = g0(y)
        return (a, 1 - a)

    def step(y, i):
        return (5 - 3 * y) / 6

    def probs_vec(ys):
        a = np.where(
            (ys < 0.0) | (ys > 1.0),
            1.0 / 6.0,
            np.where(ys <= 0.5, ys + 1.0 / 6.0, 7.0 / 6.0 - ys),
        )
        return np.stack([a, 1.0 - a], axis=1)

    def step_vec(ys, syms):
        return (5.0 - 3.0 * ys) / 6.0

    return DrivenSystem(
        kind="toy:l3_counterexample",
        label="l3_counterexample",
        alphabet_size=2,
        state_kind="scalar",
        y0=y0,
        probs=probs,
        step=step,
        probs_vec=probs_vec,
        step_vec=step_vec,
        geometry=geometry_constants("interval", 2),
        exact=isinstance(y0, Fraction),
        params={"y0": str(y0)},
    )


def _toy_fixedpoint_half(y0) -> DrivenSystem:
    y0 = _as_number(y0)
    if not (0 <= y0 <= 1):
        raise ConfigError("start state must lie in [0, 1]")
    q1, q3 = Fraction(1, 4), Fraction(3, 4)

    def clampmap(x):
        if x < q1:
            return q1 if isinstance(x, Fraction) else 0.25
        if x > q3:
            return q3 if isinstance(x, Fraction) else 0.75
        return x

    def probs(y):
        a = clampmap(y)
        return (a, 1 - a)

    def step(y, i):
        a = clampmap(y)
        return a if i == 0 else 1 - a

    def probs_vec(ys):
        a = np.clip(ys, 0.25, 0.75)
        return np.stack([a, 1.0 - a], axis=1)

    def step_vec(ys, syms):
        a = np.clip(ys, 0.25, 0.75)
        return np.where(syms == 0, a, 1.0 - a)

    return DrivenSystem(
        kind="toy:fixedpoint_half",
        label="fixedpoint_half",
        alphabet_size=2,
        state_kind="scalar",
        y0=y0,
        probs=probs,
        step=step,
        probs_vec=probs_vec,
        step_vec=step_vec,
        geometry=geometry_constants("interval", 2),
        exact=isinstance(y0, Fraction),
        state_lo=0.0,
        state_hi=1.0,
        params={"y0": str(y0)},
    )


def _toy_sqrt_perturbed(p, y0) -> DrivenSystem:
    p = _as_number(p)
    if not (0 < p < 1):
        raise ConfigError("p must lie strictly between 0 and 1")
    bound = float(min(p, 1 - p)) ** 2
    y0 = _as_number(y0)
    if abs(float(y0)) > bound + STATE_TOL:
        raise ConfigError(f"start state must lie in [-{bound}, {bound}]")
    pf = float(p)

    def probs(y):
        a = pf + math.sqrt(abs(float(y)))
        return (a, 1.0 - a)

    def step(y, i):
        ay = abs(y)
        return ay / (ay + 1)

    def probs_vec(ys):
        a = pf + np.sqrt(np.abs(ys))
        return np.stack([a, 1.0 - a], axis=1)

    def step_vec(ys, syms):
        ay = np.abs(ys)
        return ay / (ay + 1.0)

    return DrivenSystem(
        kind="toy:sqrt_perturbed",
        label=f"sqrt_perturbed({p})",
        alphabet_size=2,
        state_kind="scalar",
        y0=y0,
        probs=probs,
        step=step,
        probs_vec=probs_vec,
        step_vec=step_vec,
        geometry=geometry_constants("interval", 2),
        exact=False,
        state_lo=-bound,
        state_hi=bound,
        params={"p": str(p), "y0": str(y0)},
    )


def _toy_epsilon_escape(eps, y0) -> DrivenSystem:
    eps = _as_number(eps)
    if not (0 < eps < 1):
        raise ConfigError("escape rate must lie strictly between 0 and 1")
    y0 = _as_number(y0)

    def probs(y):
        a = max(_HALF - abs(y), 0)
        return (a, 1 - a)

    def step(y, i):
        if i == 0:
            return (1 - eps) * y
        return y / eps

    def probs_vec(ys):
        a = np.maximum(0.5 - np.abs(ys), 0.0)
        return np.stack([a, 1.0 - a], axis=1)

    # Once |y| >= 1/2 the weights are frozen at (0, 1), so escaping float
    # states can be capped without changing anything observable; this keeps
    # long vectorized runs from overflowing float64.  The scalar step stays
    # exact for Fraction states.
    cap = 1e12

    def step_vec(ys, syms):
        e = float(eps)
        shrunk = (1.0 - e) * ys
        grown = np.clip(ys, -cap * e, cap * e) / e
        return np.where(syms == 0, shrunk, grown)

    return DrivenSystem(
        kind="toy:epsilon_escape",
        label=f"epsilon_escape({eps})",
        alphabet_size=2,
        state_kind="scalar",
        y0=y0,
        probs=probs,
        step=step,
        probs_vec=probs_vec,
        step_vec=step_vec,
        geometry=geometry_constants("interval", 2),
        exact=isinstance(eps, Fraction) and isinstance(y0, Fraction),
        params={"eps": str(eps), "y0": str(y0)},
    )


def _toy_three_state(p, y0) -> DrivenSystem:
    """Three frozen states: the root splits evenly into a subtree that copies
    the (p, 1-p) product weights and a subtree with balanced weights.

    Against the (p, 1-p) comparison the resulting measure has a nontrivial
    absolutely continuous part and a nontrivial singular part, so neither
    certifier may fire on it.
    """
    p = _as_number(p)
    if not (0 < p < 1):
        raise ConfigError("p must lie strictly between 0 and 1")
    y0 = int(y0)
    if y0 not in (0, 1, 2):
        raise ConfigError("start state must be 0, 1, or 2")
    table = (( _HALF, _HALF), (p, 1 - p), (_HALF, _HALF))
    nxt = ((1, 2), (1, 1), (2, 2))  # nxt[state][symbol]
    probs_table = np.array([[float(a), float(b)] for a, b in table])
    next_table = np.array(nxt, dtype=np.int64)

    def probs(y):
        return table[int(y)]

    def step(y, i):
        return nxt[int(y)][i]

    def probs_vec(ys):
        return probs_table[ys]

    def step_vec(ys, syms):
        return next_table[ys, syms]

    return DrivenSystem(
        kind="toy:three_state",
        label=f"three_state({p})",
        alphabet_size=2,
        state_kind="finite",
        y0=y0,
        probs=probs,
        step=step,
        probs_vec=probs_vec,
        step_vec=step_vec,
        geometry=geometry_constants("interval", 2),
        exact=isinstance(p, Fraction),
        finite_states=(0, 1, 2),
        params={"p": str(p), "y0": y0},
    )


_TOY_DEFAULTS = {
    "l3_counterexample": {"y0": Fraction(1, 3)},
    "fixedpoint_half": {"y0": Fraction(1, 2)},
    "sqrt_perturbed": {"p": Fraction(3, 10), "y0": Fraction(0)},
    "epsilon_escape": {"eps": Fraction(1, 2), "y0": Fraction(1, 4)},
    "three_state": {"p": Fraction(3, 10), "y0": 0},
}


def make_toy(name: str, **params) -> DrivenSystem:
    if name not in _TOY_DEFAULTS:
        raise ConfigError(f"unknown toy system {name!r}")
    kwargs = dict(_TOY_DEFAULTS[name])
    for key, val in params.items():
        if key not in kwargs:
            raise ConfigError(f"toy {name!r} has no parameter {key!r}")
        kwargs[key] = val
    maker = {
        "l3_counterexample": _toy_l3,
        "fixedpoint_half": _toy_fixedpoint_half,
        "sqrt_perturbed": _toy_sqrt_perturbed,
        "epsilon_escape": _toy_epsilon_escape,
        "three_state": _toy_three_state,
    }[name]
    return maker(**kwargs)


# ---------------------------------------------------------------------------
# config parsing


@dataclass(frozen=True)
class HataParams:
    """Parameters of the closed-form tree dimension: |h|^2 and |alpha|^2."""

    h_sq: Fraction | float
    alpha_sq: Fraction | float


def builtin_kinds() -> list[tuple[str, str]]:
    """(kind token, short description) pairs for every constructible system."""
    return [
        ("adf", "two-branch harmonic restriction on [0,1]"),
        ("kusuoka", "energy-measure system on the circle (three branches)"),
        ("linear", "constant branch weights (product measure)"),
        ("derham_lft", "curve system from a fractional-linear matrix family"),
        ("minkowski", "question-mark curve system (integer matrices)"),
        ("moebius_ac", "one-parameter family with an absolutely continuous curve"),
        ("bernoulli_lft", "matrix family equivalent to a chosen product measure"),
        ("hata", "closed-form tree dimension from |h|^2 and |alpha|^2"),
        ("toy:l3_counterexample", "single-orbit system separating block lengths"),
        ("toy:fixedpoint_half", "balanced fixed point at 1/2"),
        ("toy:sqrt_perturbed", "square-root perturbation of constant weights"),
        ("toy:epsilon_escape", "weights hit zero as states escape"),
        ("toy:three_state", "mixed absolutely-continuous/singular regression case"),
    ]


def from_config(cfg: dict):
    """Build a system from a parsed JSON config {"kind": ..., "params": {...}}.

    Returns a DrivenSystem, or HataParams for the closed-form-only kind.
    """
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("config must be an object with a 'kind' field")
    kind = cfg["kind"]
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("'params' must be an object")

    if kind == "adf":
        return make_adf(params.get("y0", Fraction(0)))
    if kind == "kusuoka":
        if "boundary" in params:
            return make_kusuoka_from_harmonic(params["boundary"])
        return make_kusuoka(params.get("y0", (1.0, 0.0)))
    if kind == "linear":
        if "weights" not in params:
            raise ConfigError("linear system needs 'weights'")
        return make_linear(params["weights"])
    if kind == "hata":
        if "h_sq" not in params or "alpha_sq" not in params:
            raise ConfigError("hata needs 'h_sq' and 'alpha_sq'")
        return HataParams(_as_number(params["h_sq"]), _as_number(params["alpha_sq"]))
    if isinstance(kind, str) and kind.startswith("toy:"):
        return make_toy(kind[4:], **params)
    if kind == "toy":
        p = dict(params)
        name = p.pop("name", None)
        if name is None:
            raise ConfigError("toy config needs a 'name'")
        return make_toy(name, **p)

    # matrix-family kinds live in derham.py; imported lazily to avoid a cycle
    from . import derham

    if kind == "derham_lft":
        if "matrices" not in params:
            raise ConfigError("derham_lft needs 'matrices'")
        ds = derham.validate(derham.matrices_from_json(params["matrices"]))
        sys = derham.derived_system(ds)
        if "y0" in params:
            sys = sys.with_start(_as_number(params["y0"]))
        return sys
    if kind == "minkowski":
        sys = derham.derived_system(derham.minkowski_system(),
                                    label="minkowski", kind="minkowski")
        if "y0" in params:
            sys = sys.with_start(_as_number(params["y0"]))
        return sys
    if kind == "moebius_ac":
        c = _as_number(params.get("C", 1))
        n = int(params.get("N", 2))
        sys = derham.derived_system(derham.moebius_system(c, n),
                                    label=f"moebius_ac(C={c})",
                                    kind="moebius_ac")
        if "y0" in params:
            sys = sys.with_start(_as_number(params["y0"]))
        return sys
    if kind == "bernoulli_lft":
        if "p" not in params:
            raise ConfigError("bernoulli_lft needs 'p'")
        weights = [_as_number(x) for x in params["p"]]
        e0 = _as_number(params.get("e0", 1))
        ds = derham.bernoulli_equivalence_params(weights, e0)
        sys = derham.derived_system(ds, label="bernoulli_lft",
                                    kind="bernoulli_lft")
        if "y0" in params:
            sys = sys.with_start(_as_number(params["y0"]))
        return sys
    raise ConfigError(f"unknown system kind {kind!r}")


def from_json(text: str):
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON config: {exc}") from exc
    return from_config(cfg)
