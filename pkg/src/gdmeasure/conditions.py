"""Semi-decision checkers for the driving-orbit conditions.

The driving orbit of a system is the set of states reachable from the start
state by finite compositions of the state maps. The interesting conditions
(branch weights bounded away from 0 and 1; separation of the weight vector
from the uniform or a target vector before/after a fixed word) quantify over
this infinite set, so a finite computation can only certify them at a
resolution: an enumeration depth, a dedup tolerance, and a margin. Verdicts
are therefore three-valued, and every FAILS verdict carries a concrete witness
that re-verifies from scratch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .symbolic import IfsGeometry, geometry_constants
from .systems import DrivenSystem, evaluate_step

HOLDS_AT_RESOLUTION = "HOLDS_AT_RESOLUTION"
FAILS_WITH_WITNESS = "FAILS_WITH_WITNESS"
UNKNOWN = "UNKNOWN"

DEFAULT_DEPTH = 12
DEFAULT_DEDUP_TOL = 1e-9
DEFAULT_MARGIN = 1e-6
DEFAULT_FAIL_TOL = 0.05
RIDE_STEPS = 64
DEFAULT_MAX_STATES = 50_000


# ---------------------------------------------------------------------------
# orbit enumeration


class _StateDedup:
    """Grid-bucket dedup: states closer than tol collapse to one index."""

    def __init__(self, tol: float, kind: str):
        self.tol = tol
        self.kind = kind
        self.buckets: dict = {}

    def _key_and_neighbors(self, v):
        if self.kind == "finite":
            k = (int(v),)
            return k, (k,)
        if self.kind == "circle":
            x, y = float(v[0]), float(v[1])
            cx, cy = round(x / self.tol), round(y / self.tol)
            key = (cx, cy)
            neigh = tuple((cx + dx, cy + dy) for dx in (-1, 0, 1)
                          for dy in (-1, 0, 1))
            return key, neigh
        x = float(v)
        if math.isinf(x):
            key = ("inf", x > 0)
            return key, (key,)
        c = round(x / self.tol)
        return (c,), ((c - 1,), (c,), (c + 1,))

    def _close(self, a, b) -> bool:
        if self.kind == "finite":
            return int(a) == int(b)
        if self.kind == "circle":
            return (float(a[0]) - float(b[0])) ** 2 + \
                (float(a[1]) - float(b[1])) ** 2 <= self.tol ** 2
        xa, xb = float(a), float(b)
        if math.isinf(xa) or math.isinf(xb):
            return xa == xb
        return abs(xa - xb) <= self.tol

    def find(self, v):
        key, neigh = self._key_and_neighbors(v)
        for k in neigh:
            for idx, existing in self.buckets.get(k, ()):
                if self._close(existing, v):
                    return idx
        return None

    def add(self, v, idx):
        key, _ = self._key_and_neighbors(v)
        self.buckets.setdefault(key, []).append((idx, v))


@dataclass(frozen=True)
class OrbitApproximation:
    """Deduplicated breadth-first enumeration of the driving orbit.

    The start state itself is index 0; ``parents`` and ``last_symbols`` let a
    generating word be reconstructed for any state.
    """

    root: object
    depth: int
    states: tuple
    dedup_tolerance: float
    truncated: bool
    parents: tuple = field(repr=False, default=())
    last_symbols: tuple = field(repr=False, default=())

    def word_for(self, index: int) -> tuple[int, ...]:
        out = []
        while index != 0:
            out.append(self.last_symbols[index])
            index = self.parents[index]
        return tuple(reversed(out))

    def __len__(self) -> int:
        return len(self.states)


def orbit(system: DrivenSystem, y=None, depth: int = DEFAULT_DEPTH, *,
          dedup_tol: float = DEFAULT_DEDUP_TOL,
          max_states: int = DEFAULT_MAX_STATES) -> OrbitApproximation:
    """All states reachable from y by at most ``depth`` state-map steps."""
    if depth < 1:
        raise ConfigError("orbit depth must be at least 1")
    if y is None:
        y = system.y0
    system.check_state(y)
    dedup = _StateDedup(dedup_tol, system.state_kind)
    states = [y]
    parents = [-1]
    last_symbols = [-1]
    dedup.add(y, 0)
    frontier = [0]
    truncated = False
    for _ in range(depth):
        if truncated or not frontier:
            break
        nxt_frontier = []
        for idx in frontier:
            z = states[idx]
            for j in range(system.alphabet_size):
                nz = system.step(z, j)
                if dedup.find(nz) is not None:
                    continue
                if len(states) >= max_states:
                    truncated = True
                    break
                states.append(nz)
                parents.append(idx)
                last_symbols.append(j)
                dedup.add(nz, len(states) - 1)
                nxt_frontier.append(len(states) - 1)
            if truncated:
                break
        frontier = nxt_frontier
    return OrbitApproximation(
        root=y,
        depth=depth,
        states=tuple(states),
        dedup_tolerance=dedup_tol,
        truncated=truncated,
        parents=tuple(parents),
        last_symbols=tuple(last_symbols),
    )


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class ConditionVerdict:
    """Three-valued outcome of a condition check at a stated resolution."""

    condition: str
    status: str
    bounds: dict
    resolution: dict
    witness: object = None

    @property
    def holds(self) -> bool:
        return self.status == HOLDS_AT_RESOLUTION

    @property
    def fails(self) -> bool:
        return self.status == FAILS_WITH_WITNESS

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "status": self.status,
            "resolution": self.resolution,
            "bounds": self.bounds,
            "witness": self.witness,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.as_dict(), default=_jsonable, **kwargs)


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (tuple, set)):
        return list(v)
    raise TypeError(f"not JSON-serializable: {type(v)}")


def _state_repr(z):
    if isinstance(z, tuple) or isinstance(z, np.ndarray):
        return tuple(float(c) for c in z)
    if isinstance(z, Fraction):
        return str(z)
    return float(z) if not isinstance(z, int) else z


def _gvec_float(system: DrivenSystem, z) -> tuple:
    return tuple(float(p) for p in system.probs(z))


# ---------------------------------------------------------------------------
# boundedness conditions


def _ride(system: DrivenSystem, z0, symbol: int, coord: int, steps: int):
    """G_coord along the single-symbol chain z, H_j(z), H_j^2(z), ..."""
    vals = [float(system.probs(z0)[coord])]
    z = z0
    for _ in range(steps):
        z = system.step(z, symbol)
        vals.append(float(system.probs(z)[coord]))
    return vals


def _monotone_toward(vals, boundary: float, fail_tol: float) -> bool:
    eps = 1e-12
    if boundary == 1.0:
        increasing = all(b >= a - eps for a, b in zip(vals, vals[1:]))
        return increasing and vals[-1] > vals[0] + 1e-15 and \
            vals[-1] >= 1.0 - fail_tol
    decreasing = all(b <= a + eps for a, b in zip(vals, vals[1:]))
    return decreasing and vals[-1] < vals[0] - 1e-15 and vals[-1] <= fail_tol


def _boundary_evidence(system: DrivenSystem, orb: OrbitApproximation,
                       gvecs: list, coord: int, side: float,
                       fail_tol: float, ride_steps: int):
    """Evidence that inf (side=0) or sup (side=1) of G_coord on the full
    orbit reaches the boundary: an exact hit, or a monotone single-symbol
    chain ending within fail_tol of it."""
    n_states = len(orb.states)
    vals = [g[coord] for g in gvecs]
    if side == 1.0:
        extreme_idx = max(range(n_states), key=lambda i: vals[i])
        if vals[extreme_idx] >= 1.0:
            return {"kind": "boundary_hit", "coordinate": coord, "boundary": 1.0,
                    "state": _state_repr(orb.states[extreme_idx]),
                    "word": list(orb.word_for(extreme_idx)),
                    "value": vals[extreme_idx]}
    else:
        extreme_idx = min(range(n_states), key=lambda i: vals[i])
        if vals[extreme_idx] <= 0.0:
            return {"kind": "boundary_hit", "coordinate": coord, "boundary": 0.0,
                    "state": _state_repr(orb.states[extreme_idx]),
                    "word": list(orb.word_for(extreme_idx)),
                    "value": vals[extreme_idx]}
    z0 = orb.states[extreme_idx]
    for j in range(system.alphabet_size):
        chain = _ride(system, z0, j, coord, ride_steps)
        if _monotone_toward(chain, side, fail_tol):
            return {"kind": "trend", "coordinate": coord, "boundary": side,
                    "ridden_symbol": j,
                    "start_state": _state_repr(z0),
                    "start_word": list(orb.word_for(extreme_idx)),
                    "values": chain}
    return None


def _orbit_bounds(gvecs: list, n: int) -> dict:
    per = []
    for i in range(n):
        col = [g[i] for g in gvecs]
        per.append((min(col), max(col)))
    return {
        "inf": min(lo for lo, _ in per),
        "sup": max(hi for _, hi in per),
        "per_symbol": per,
    }


def _resolution(orb: OrbitApproximation, **extra) -> dict:
    out = {"depth": orb.depth, "dedup_tolerance": orb.dedup_tolerance,
           "n_states": len(orb.states), "truncated": orb.truncated}
    out.update(extra)
    return out


def check_A(system: DrivenSystem, y=None, depth: int = DEFAULT_DEPTH, *,
            margin: float = DEFAULT_MARGIN, fail_tol: float = DEFAULT_FAIL_TOL,
            ride_steps: int = RIDE_STEPS,
            dedup_tol: float = DEFAULT_DEDUP_TOL,
            max_states: int = DEFAULT_MAX_STATES,
            orb: OrbitApproximation | None = None) -> ConditionVerdict:
    """Are all branch weights bounded strictly inside (0,1) over the orbit?

    ``orb`` lets callers reuse a precomputed orbit of the same system/start.
    """
    if orb is None:
        orb = orbit(system, y, depth, dedup_tol=dedup_tol, max_states=max_states)
    gvecs = [_gvec_float(system, z) for z in orb.states]
    n = system.alphabet_size
    bounds = _orbit_bounds(gvecs, n)
    res = _resolution(orb, margin=margin, fail_tol=fail_tol)
    for coord in range(n):
        # Escapes toward 1 first: they ride the dominant branch and give the
        # cleaner witness (weights increasing along a single-symbol chain).
        for side in (1.0, 0.0):
            ev = _boundary_evidence(system, orb, gvecs, coord, side,
                                    fail_tol, ride_steps)
            if ev is not None:
                return ConditionVerdict("A", FAILS_WITH_WITNESS, bounds, res, ev)
    if bounds["inf"] >= margin and bounds["sup"] <= 1.0 - margin:
        return ConditionVerdict("A", HOLDS_AT_RESOLUTION, bounds, res)
    return ConditionVerdict("A", UNKNOWN, bounds, res)


def check_wA(system: DrivenSystem, y=None, depth: int = DEFAULT_DEPTH, *,
             margin: float = DEFAULT_MARGIN,
             fail_tol: float = DEFAULT_FAIL_TOL,
             ride_steps: int = RIDE_STEPS,
             dedup_tol: float = DEFAULT_DEDUP_TOL,
             max_states: int = DEFAULT_MAX_STATES,
             orb: OrbitApproximation | None = None) -> ConditionVerdict:
    """Is SOME single branch weight bounded strictly inside (0,1)?"""
    if orb is None:
        orb = orbit(system, y, depth, dedup_tol=dedup_tol, max_states=max_states)
    gvecs = [_gvec_float(system, z) for z in orb.states]
    n = system.alphabet_size
    bounds = _orbit_bounds(gvecs, n)
    res = _resolution(orb, margin=margin, fail_tol=fail_tol)
    # Escape evidence (a boundary hit or a monotone ride toward 0 or 1)
    # disqualifies a coordinate even when the truncated orbit still looks
    # interior, so gather it for every coordinate before trusting margins.
    per_symbol_evidence: dict[int, dict] = {}
    for coord in range(n):
        for side in (1.0, 0.0):
            ev = _boundary_evidence(system, orb, gvecs, coord, side,
                                    fail_tol, ride_steps)
            if ev is not None:
                per_symbol_evidence[coord] = ev
                break
    for coord in range(n):
        if coord in per_symbol_evidence:
            continue
        lo, hi = bounds["per_symbol"][coord]
        if lo >= margin and hi <= 1.0 - margin:
            return ConditionVerdict(
                "wA", HOLDS_AT_RESOLUTION, bounds,
                dict(res, interior_symbol=coord))
    if len(per_symbol_evidence) == n:
        return ConditionVerdict("wA", FAILS_WITH_WITNESS, bounds, res,
                                [per_symbol_evidence[i] for i in range(n)])
    return ConditionVerdict("wA", UNKNOWN, bounds, res)


# ---------------------------------------------------------------------------
# separation conditions


def _exact_gvec(system: DrivenSystem, z):
    return tuple(system.probs(z))


def _in_box(gvec, centers, radius) -> bool:
    return all(abs(g - c) <= radius for g, c in zip(gvec, centers))


def _walk(system: DrivenSystem, z, word) -> object:
    for j in word:
        z = system.step(z, j)
    return z


def _all_words(n: int, length: int):
    if length == 0:
        yield ()
        return
    for head in _all_words(n, length - 1):
        for j in range(n):
            yield head + (j,)


def _orbit_gvecs(system: DrivenSystem, orb: OrbitApproximation) -> list:
    """Weight vector at every orbit state (exact when the system is exact).

    Computed once per orbit and shared across all (eps0, l) attempts — the
    vectors themselves do not depend on the box being tested.
    """
    if system.exact:
        return [_exact_gvec(system, z) for z in orb.states]
    return [_gvec_float(system, z) for z in orb.states]


def _scan_words(system: DrivenSystem, orb: OrbitApproximation, centers,
                eps0, words, margin: float, start_gv: list):
    """For each word: the first state violating the separation (both the
    state's weight vector and the post-word weight vector inside the box),
    plus whether the inflated box is clear everywhere."""
    exact = system.exact
    if exact:
        centers_x = tuple(Fraction(c) for c in centers)
        eps_x = Fraction(eps0)
    centers_f = tuple(float(c) for c in centers)
    eps_f = float(eps0)
    infl = eps_f + margin

    start_in_strict = []
    start_in_margin = []
    for gv in start_gv:
        gv_f = tuple(float(g) for g in gv)
        if exact:
            start_in_strict.append(_in_box(gv, centers_x, eps_x))
        else:
            start_in_strict.append(_in_box(gv_f, centers_f, eps_f))
        start_in_margin.append(_in_box(gv_f, centers_f, infl))

    candidates = [i for i, m in enumerate(start_in_margin) if m]
    results = []
    for word in words:
        violator = None
        margin_clear = True
        for idx in candidates:
            z = orb.states[idx]
            zend = _walk(system, z, word)
            gv_end = _exact_gvec(system, zend) if exact \
                else _gvec_float(system, zend)
            gv_end_f = tuple(float(g) for g in gv_end)
            if _in_box(gv_end_f, centers_f, infl):
                margin_clear = False
            end_strict = _in_box(gv_end, centers_x, eps_x) if exact \
                else _in_box(gv_end_f, centers_f, eps_f)
            if violator is None and start_in_strict[idx] and end_strict:
                violator = {
                    "word": list(word),
                    "state": _state_repr(z),
                    "state_word": list(orb.word_for(idx)),
                    "g_state": [float(g) for g in start_gv[idx]],
                    "end_state": _state_repr(zend),
                    "g_end": [float(g) for g in gv_end],
                }
            if violator is not None and not margin_clear:
                # both outcomes for this word are already settled
                break
        results.append({"word": word, "violator": violator,
                        "margin_clear": margin_clear and violator is None})
    return results


def _combo_B(system, orb, centers, eps0, length, margin, start_gv):
    words = list(_all_words(system.alphabet_size, length))
    scans = _scan_words(system, orb, centers, eps0, words, margin, start_gv)
    clear = [s for s in scans if s["margin_clear"]]
    if clear:
        return HOLDS_AT_RESOLUTION, clear[0]["word"], None
    if all(s["violator"] is not None for s in scans):
        return FAILS_WITH_WITNESS, None, [s["violator"] for s in scans]
    return UNKNOWN, None, None


def _combo_sB(system, orb, centers, eps0, length, margin, start_gv):
    words = list(_all_words(system.alphabet_size, length))
    scans = _scan_words(system, orb, centers, eps0, words, margin, start_gv)
    if all(s["margin_clear"] for s in scans):
        return HOLDS_AT_RESOLUTION, None, None
    bad = [s for s in scans if s["violator"] is not None]
    if bad:
        return FAILS_WITH_WITNESS, bad[0]["word"], bad[0]["violator"]
    return UNKNOWN, None, None


def _default_grid(n: int):
    return [Fraction(1, 4 * n), Fraction(9, 20 * n)]


def _check_separation(kind: str, system: DrivenSystem, y, eps0, length,
                      depth, margin, dedup_tol, max_states,
                      orb=None) -> ConditionVerdict:
    n = system.alphabet_size
    centers = tuple(Fraction(1, n) for _ in range(n))
    if orb is None:
        orb = orbit(system, y, depth, dedup_tol=dedup_tol, max_states=max_states)
    combo_fn = _combo_B if kind == "B" else _combo_sB

    eps_grid = [eps0] if eps0 is not None else _default_grid(n)
    for e in eps_grid:
        if not 0 < float(e) < 1.0 / n:
            raise ConfigError(
                f"separation width {e} outside (0, 1/{n})")
    if length is not None and int(length) < 1:
        raise ConfigError(f"block length {length} must be at least 1")
    l_grid = [length] if length is not None else [1, 2, 3]
    start_gv = _orbit_gvecs(system, orb)

    attempts = []
    fail_witness = None
    fail_detail = None
    all_failed = True
    for ell in l_grid:
        for e in eps_grid:
            status, word, witness = combo_fn(system, orb, centers, e,
                                             ell, margin, start_gv)
            attempts.append({"eps0": float(e), "l": ell, "status": status,
                             "word": list(word) if word else None})
            if status == HOLDS_AT_RESOLUTION:
                res = _resolution(orb, margin=margin, eps0=float(e), l=ell,
                                  word=list(word) if word else None,
                                  attempts=attempts)
                return ConditionVerdict(kind, HOLDS_AT_RESOLUTION,
                                        {"eps0": float(e)}, res)
            if status == FAILS_WITH_WITNESS and fail_witness is None:
                fail_witness = witness
                fail_detail = (float(e), ell, word)
            if status != FAILS_WITH_WITNESS:
                all_failed = False
    if all_failed and fail_witness is not None:
        e, ell, word = fail_detail
        res = _resolution(orb, margin=margin, eps0=e, l=ell,
                          word=list(word) if word else None,
                          attempts=attempts)
        return ConditionVerdict(kind, FAILS_WITH_WITNESS, {"eps0": e}, res,
                                fail_witness)
    res = _resolution(orb, margin=margin, attempts=attempts)
    return ConditionVerdict(kind, UNKNOWN, {}, res)


def check_B(system: DrivenSystem, y=None, eps0=None, l=None,
            depth: int = DEFAULT_DEPTH, *, margin: float = DEFAULT_MARGIN,
            dedup_tol: float = DEFAULT_DEDUP_TOL,
            max_states: int = DEFAULT_MAX_STATES,
            orb: OrbitApproximation | None = None) -> ConditionVerdict:
    """Does SOME word of the given length separate the weight vector from
    uniform across the orbit (no state inside the uniform box both before and
    after the word)? Searches a default (eps0, l) grid when not pinned."""
    return _check_separation("B", system, y, eps0, l, depth, margin,
                             dedup_tol, max_states, orb=orb)


def check_sB(system: DrivenSystem, y=None, eps0=None, l=None,
             depth: int = DEFAULT_DEPTH, *, margin: float = DEFAULT_MARGIN,
             dedup_tol: float = DEFAULT_DEDUP_TOL,
             max_states: int = DEFAULT_MAX_STATES,
             orb: OrbitApproximation | None = None) -> ConditionVerdict:
    """Does EVERY word of the given length separate the weight vector from
    uniform across the orbit?"""
    return _check_separation("sB", system, y, eps0, l, depth, margin,
                             dedup_tol, max_states, orb=orb)


def check_multisep2(system: DrivenSystem, y, target_p, eps0, word,
                    depth: int = DEFAULT_DEPTH, *,
                    margin: float = DEFAULT_MARGIN,
                    dedup_tol: float = DEFAULT_DEDUP_TOL,
                    max_states: int = DEFAULT_MAX_STATES) -> ConditionVerdict:
    """Separation from a target weight vector: no orbit state has its weight
    vector within eps0 of target_p both before and after the given word."""
    n = system.alphabet_size
    target = tuple(Fraction(p) if not isinstance(p, float) else p
                   for p in target_p)
    if len(target) != n:
        raise ConfigError("target vector length does not match the alphabet")
    tf = [float(p) for p in target]
    if any(p <= 0 for p in tf) or abs(sum(tf) - 1.0) > 1e-9:
        raise ConfigError("target must be a strictly positive probability vector")
    if not 0 < float(eps0) < min(tf):
        raise ConfigError(
            f"separation width {eps0} must lie in (0, min target) = (0, {min(tf)})")
    word = tuple(int(j) for j in word)
    for j in word:
        if not 0 <= j < n:
            raise ConfigError(f"symbol {j} outside alphabet")
    orb = orbit(system, y, depth, dedup_tol=dedup_tol, max_states=max_states)
    scans = _scan_words(system, orb, target, eps0, [word], margin,
                        _orbit_gvecs(system, orb))
    s = scans[0]
    res = _resolution(orb, margin=margin, eps0=float(eps0), l=len(word),
                      word=list(word), target=[float(p) for p in tf])
    if s["margin_clear"]:
        return ConditionVerdict("multisep2", HOLDS_AT_RESOLUTION,
                                {"eps0": float(eps0)}, res)
    if s["violator"] is not None:
        return ConditionVerdict("multisep2", FAILS_WITH_WITNESS,
                                {"eps0": float(eps0)}, res, s["violator"])
    return ConditionVerdict("multisep2", UNKNOWN, {"eps0": float(eps0)}, res)


# ---------------------------------------------------------------------------
# witness re-verification


def verify_witness(system: DrivenSystem, verdict: ConditionVerdict,
                   tol: float = 1e-10) -> bool:
    """Recompute every numeric claim in a FAILS witness through
    evaluate_step; True when all reproduce within tol."""
    if verdict.status != FAILS_WITH_WITNESS:
        raise ConfigError("only FAILS verdicts carry witnesses")

    def replay_state(entry_word):
        z = system.y0
        for j in entry_word:
            _, z = evaluate_step(system, z, j)
        return z

    def branch_probs(z):
        # the symbol argument only selects the next state, which is unused
        p, _ = evaluate_step(system, z, 0)
        return [float(q) for q in p]

    def check_entry(entry) -> bool:
        if entry["kind"] == "boundary_hit":
            z = replay_state(entry["word"])
            got = branch_probs(z)[entry["coordinate"]]
            return abs(got - entry["value"]) <= tol
        if entry["kind"] == "trend":
            z = replay_state(entry["start_word"])
            coord = entry["coordinate"]
            for i, v in enumerate(entry["values"]):
                if i:
                    _, z = evaluate_step(system, z, entry["ridden_symbol"])
                if abs(branch_probs(z)[coord] - v) > tol:
                    return False
            return True
        # separation violator
        z = replay_state(entry["state_word"])
        got = branch_probs(z)
        for coord, claimed in enumerate(entry["g_state"]):
            if abs(got[coord] - claimed) > tol:
                return False
        for j in entry["word"]:
            _, z = evaluate_step(system, z, j)
        got = branch_probs(z)
        for coord, claimed in enumerate(entry["g_end"]):
            if abs(got[coord] - claimed) > tol:
                return False
        return True

    w = verdict.witness
    entries = w if isinstance(w, list) else [w]
    for entry in entries:
        if "kind" not in entry:
            entry = dict(entry, kind="separation")
        if not check_entry(entry):
            return False
    return True


# ---------------------------------------------------------------------------
# carrier geometry verification


def _planar_cells(name: str, m: int):
    """(offsets array (n,2), cell size) of the level-m cells of a planar
    carrier on the unit square / unit-side triangle."""
    if name == "square":
        k = 2 ** m
        idx = np.arange(k)
        offs = np.stack(np.meshgrid(idx, idx, indexing="ij"), axis=-1)
        offs = offs.reshape(-1, 2).astype(float) / k
        return offs, 1.0 / k
    if name == "carpet":
        k = 3 ** m
        valid = []
        for i in range(k):
            for j in range(k):
                a, b = i, j
                ok = True
                for _ in range(m):
                    if a % 3 == 1 and b % 3 == 1:
                        ok = False
                        break
                    a //= 3
                    b //= 3
                if ok:
                    valid.append((i, j))
        offs = np.array(valid, dtype=float) / k
        return offs, 1.0 / k
    if name == "gasket":
        verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
        offs = np.zeros((1, 2))
        for level in range(m):
            scale = 2.0 ** -(level + 1)
            offs = (offs[:, None, :] + verts[None, :, :] * scale).reshape(-1, 2)
        return offs, 2.0 ** -m
    raise ConfigError(f"unknown planar carrier {name!r}")


def _dist_to_squares(p: np.ndarray, offs: np.ndarray, s: float) -> np.ndarray:
    lo = offs
    hi = offs + s
    cl = np.clip(p[None, :], lo, hi)
    d = p[None, :] - cl
    return np.einsum("ij,ij->i", d, d)


def _dist_to_triangles(p: np.ndarray, offs: np.ndarray, s: float) -> np.ndarray:
    # upward unit-orientation triangles with vertices off, off+(s,0),
    # off+(s/2, s*sqrt(3)/2); distance 0 inside, else min over the 3 edges
    v0 = offs
    v1 = offs + np.array([s, 0.0])
    v2 = offs + np.array([s / 2, s * math.sqrt(3) / 2])
    out = np.empty(len(offs))
    # inside iff left of all edges (counterclockwise orientation)
    inside = np.ones(len(offs), dtype=bool)
    for a, b in ((v0, v1), (v1, v2), (v2, v0)):
        e = b - a
        w = p[None, :] - a
        cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
        inside &= cross >= 0
    out[inside] = 0.0
    rest = ~inside
    if rest.any():
        best = np.full(rest.sum(), np.inf)
        for a, b in ((v0, v1), (v1, v2), (v2, v0)):
            av = a[rest]
            ev = (b - a)[rest]
            wv = p[None, :] - av
            ee = np.einsum("ij,ij->i", ev, ev)
            t = np.clip(np.einsum("ij,ij->i", wv, ev) / ee, 0.0, 1.0)
            proj = av + t[:, None] * ev
            dd = p[None, :] - proj
            best = np.minimum(best, np.einsum("ij,ij->i", dd, dd))
        out[rest] = best
    return out


def _planar_max_overlap(name: str, m: int, seed: int = 7,
                        center_budget: int = 4000) -> int:
    offs, s = _planar_cells(name, m)
    n_cells = len(offs)
    rng = np.random.Generator(np.random.Philox(key=[seed, m]))
    if n_cells > center_budget // 8:
        pick = rng.choice(n_cells, size=center_budget // 8, replace=False)
    else:
        pick = np.arange(n_cells)
    base = offs[pick]
    if name == "gasket":
        shapes = [(0.0, 0.0), (1.0, 0.0), (0.5, math.sqrt(3) / 2),
                  (0.5, 0.0), (0.75, math.sqrt(3) / 4),
                  (0.25, math.sqrt(3) / 4), (0.5, math.sqrt(3) / 6),
                  (0.47, 0.21), (0.13, 0.05)]
    else:
        shapes = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0),
                  (0.5, 0.5), (0.5, 0.0), (0.0, 0.5),
                  (0.35, 0.35), (0.65, 0.35), (0.08, 0.92)]
    centers = np.concatenate([base + np.array(sh) * s for sh in shapes])
    centers = np.unique(np.round(centers / (s * 1e-9)) * (s * 1e-9), axis=0)
    dist_fn = _dist_to_triangles if name == "gasket" else _dist_to_squares
    r2 = (s * (1.0 - 1e-9)) ** 2
    best = 0
    for p in centers:
        d2 = dist_fn(p, offs, s)
        best = max(best, int((d2 < r2).sum()))
    return best


def _interval_max_overlap(n: int, m: int) -> int:
    scale = n ** m
    best = 0
    for i in range(0, 4 * scale + 1):
        t = Fraction(i, 4)  # ball center in cell units, quarter-cell steps
        kmin = max(0, math.floor(t - 2) + 1)
        kmax = min(scale - 1, math.ceil(t + 1) - 1)
        best = max(best, kmax - kmin + 1)
    return best


_DEFAULT_KIGAMI_DEPTH = {"interval": 8, "square": 5, "gasket": 6, "carpet": 4}


def verify_kigami(geometry, max_depth: int | None = None,
                  alphabet_size: int | None = None) -> dict:
    """Check the carrier-regularity assumption by direct cell enumeration:
    level-m cells have diameter c1*r^m, and an open ball of radius r^m meets
    at most D of them. Returns a per-level report."""
    if isinstance(geometry, IfsGeometry):
        geo = geometry
    else:
        geo = geometry_constants(str(geometry), alphabet_size)
    if max_depth is None:
        max_depth = _DEFAULT_KIGAMI_DEPTH.get(geo.name, 4)
    r = float(geo.contraction)
    levels = []
    max_seen = 0
    for m in range(1, max_depth + 1):
        if geo.name == "interval":
            diam = float(Fraction(1, geo.alphabet_size ** m))
            diam_ok = abs(diam - geo.diameter * r ** m) < 1e-15
            overlap = _interval_max_overlap(geo.alphabet_size, m)
        else:
            offs, s = _planar_cells(geo.name, m)
            if geo.name == "gasket":
                cell_diam = s  # unit-side triangle: diameter = side
            else:
                cell_diam = s * math.sqrt(2.0)
            diam = cell_diam
            diam_ok = abs(cell_diam - geo.diameter * r ** m) < 1e-12
            overlap = _planar_max_overlap(geo.name, m)
        levels.append({"m": m, "diameter": diam, "diam_ok": diam_ok,
                       "max_overlap": overlap})
        max_seen = max(max_seen, overlap)
    return {
        "geometry": geo.name,
        "alphabet_size": geo.alphabet_size,
        "r": r,
        "c1": geo.diameter,
        "D": geo.overlap_bound,
        "levels": levels,
        "max_overlap_observed": max_seen,
        "diam_ok": all(lv["diam_ok"] for lv in levels),
        "overlap_ok": max_seen <= geo.overlap_bound,
    }
