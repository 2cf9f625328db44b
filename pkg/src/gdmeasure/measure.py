"""Cylinder masses, interval masses, distribution tables, and path sampling.

The symbolic measure of a cylinder is the product of the branch probabilities
collected while the word drives the state forward. Interval masses on [0, 1]
reduce to sums of cylinder masses over a canonical base-N decomposition, and
the Monte-Carlo side samples words from the same step rule with a per-path
counter-based generator so parallel and serial runs agree exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BudgetError, ConfigError
from .symbolic import Word, entropy
from .systems import DrivenSystem, evaluate_step

EXACT_WORD_LIMIT = 64


def _as_word(system: DrivenSystem, word) -> Word:
    if isinstance(word, Word):
        if word.alphabet_size != system.alphabet_size:
            raise ConfigError(
                f"word alphabet {word.alphabet_size} does not match system "
                f"alphabet {system.alphabet_size}"
            )
        return word
    if isinstance(word, str):
        return Word.from_string(word, system.alphabet_size)
    return Word.from_symbols(word, system.alphabet_size)


def cylinder_mass(system: DrivenSystem, y0, word):
    """Mass of the cylinder addressed by ``word``, starting the state at y0.

    Exact rational on rational-valued systems for words up to length 64;
    floating point (via log accumulation) beyond that. The empty word has
    mass 1.
    """
    w = _as_word(system, word)
    if y0 is None:
        y0 = system.y0
    if system.exact and len(w) <= EXACT_WORD_LIMIT:
        y = y0
        mass = Fraction(1)
        for s in w:
            p, y = evaluate_step(system, y, s)
            mass *= p[s]
            if mass == 0:
                return Fraction(0)
        return mass
    log_mass = log_cylinder_mass(system, y0, w)
    return 0.0 if log_mass == -math.inf else math.exp(log_mass)


def log_cylinder_mass(system: DrivenSystem, y0, word) -> float:
    """Natural log of cylinder_mass; -inf for mass exactly 0."""
    w = _as_word(system, word)
    y = system.y0 if y0 is None else y0
    total = 0.0
    for s in w:
        p, y_next = evaluate_step(system, y, s)
        q = float(p[s])
        if q <= 0.0:
            return -math.inf
        total += math.log(q)
        y = y_next
    return total


def _decompose(lo: Fraction, hi: Fraction, n: int, depth_limit: int):
    """Maximal base-n cylinders covering [lo, hi) down to depth_limit.

    Returns (full_words, straddle_words): cylinders entirely inside [lo, hi),
    and depth-limit cylinders that cross an endpoint (at most two).
    """
    full: list[tuple[int, ...]] = []
    straddle: list[tuple[int, ...]] = []
    stack = [(Fraction(0), Fraction(1), ())]
    while stack:
        left, right, word = stack.pop()
        if right <= lo or hi <= left:
            continue
        if lo <= left and right <= hi:
            full.append(word)
            continue
        if len(word) >= depth_limit:
            straddle.append(word)
            continue
        width = (right - left) / n
        for j in range(n - 1, -1, -1):
            stack.append((left + j * width, left + (j + 1) * width, word + (j,)))
    return full, straddle


@dataclass(frozen=True)
class IntervalMass:
    """Mass of [0, t) (or [lo, hi)) with an explicit truncation bound.

    ``value`` sums the cylinders found entirely inside the interval;
    ``truncation_bound`` is the total mass of the depth-limit cylinders that
    straddle an endpoint (zero when the endpoints are base-N rationals within
    the depth limit, making ``value`` exact).
    """

    value: object
    truncation_bound: object

    @property
    def exact(self) -> bool:
        return self.truncation_bound == 0


def interval_mass(system: DrivenSystem, y0, t, depth_limit: int = 32,
                  lower=None) -> IntervalMass:
    """Mass assigned to [0, t) (or [lower, t) when ``lower`` is given).

    Exact when the endpoints are base-N rationals of depth ≤ depth_limit;
    otherwise the straddling cylinders' mass is reported as the truncation
    bound rather than silently dropped.
    """
    if depth_limit < 1:
        raise ConfigError("depth limit must be at least 1")
    hi = Fraction(t)
    lo = Fraction(0) if lower is None else Fraction(lower)
    if not (0 <= lo <= hi <= 1):
        raise ConfigError("interval endpoints must satisfy 0 <= lo <= hi <= 1")
    full, straddle = _decompose(lo, hi, system.alphabet_size, depth_limit)
    if system.exact:
        value = sum(
            (cylinder_mass(system, y0, Word.from_symbols(w, system.alphabet_size))
             for w in full),
            Fraction(0),
        )
        bound = sum(
            (cylinder_mass(system, y0, Word.from_symbols(w, system.alphabet_size))
             for w in straddle),
            Fraction(0),
        )
    else:
        value = float(
            sum(cylinder_mass(system, y0, Word.from_symbols(w, system.alphabet_size))
                for w in full)
        )
        bound = float(
            sum(cylinder_mass(system, y0, Word.from_symbols(w, system.alphabet_size))
                for w in straddle)
        )
    return IntervalMass(value, bound)


def distribution_function(system: DrivenSystem, y0, grid: Sequence,
                          depth_limit: int = 32):
    """Table (t, mass of [0, t)) over a sorted grid in [0, 1].

    Values are exact at base-N grid points; elsewhere the straddling cylinder
    bound is resolved by reporting the midpoint of the enclosing bracket.
    """
    rows = []
    prev = None
    for t in grid:
        tq = Fraction(t)
        if prev is not None and tq < prev:
            raise ConfigError("grid must be sorted nondecreasing")
        prev = tq
        im = interval_mass(system, y0, tq, depth_limit)
        if im.exact:
            rows.append((tq, im.value))
        else:
            rows.append((tq, float(im.value) + float(im.truncation_bound) / 2.0))
    return rows


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class MassTrace:
    """Record of one sampled path: word, visited states, step probabilities,
    running log cylinder mass, and the centered log-mass martingale."""

    word: Word
    states: list
    prob_vectors: np.ndarray
    log_mass: np.ndarray
    martingale: np.ndarray
    seed: int
    path_index: int


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """The per-path random stream: same (seed, path index) ⇒ same draws."""
    return np.random.Generator(np.random.Philox(key=[seed, path_index]))


def draw_symbols(u: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Map uniforms u ∈ [0,1) to symbols by the cumulative rule, one row each.

    Never selects a zero-probability branch: the raw index is clamped into
    range and moved left past empty cells.
    """
    cum = np.cumsum(probs, axis=1)
    idx = (u[:, None] >= cum).sum(axis=1)
    idx = np.minimum(idx, probs.shape[1] - 1)
    # u can land at/after the last positive cell's cumulative sum through
    # rounding; step left while the selected branch has zero probability
    sel = np.take_along_axis(probs, idx[:, None], axis=1)[:, 0]
    while np.any((sel <= 0.0) & (idx > 0)):
        bad = (sel <= 0.0) & (idx > 0)
        idx = np.where(bad, idx - 1, idx)
        sel = np.take_along_axis(probs, idx[:, None], axis=1)[:, 0]
    return idx


def _float_state(system: DrivenSystem, y):
    """Float representation of a state, so long sampled paths never drag
    exact rational arithmetic (whose denominators grow without bound)."""
    if system.state_kind == "scalar":
        return float(y)
    if system.state_kind == "circle":
        return tuple(float(c) for c in y)
    return int(y)


def sample_path(system: DrivenSystem, y0, n: int, seed: int,
                path_index: int = 0) -> MassTrace:
    """Draw a length-n word with P(next symbol = j | state y) = G_j(y)."""
    if n < 1:
        raise ConfigError("path length must be at least 1")
    if y0 is None:
        y0 = system.y0
    system.check_state(y0)
    y0 = _float_state(system, y0)
    gen = path_generator(seed, path_index)
    u = gen.random(n)
    nsym = system.alphabet_size
    states = [y0]
    symbols = np.empty(n, dtype=np.int64)
    pv = np.empty((n, nsym))
    log_mass = np.empty(n)
    mart = np.empty(n + 1)
    mart[0] = 0.0
    y = y0
    total = 0.0
    for k in range(n):
        p = system.probs(y)
        pf = np.array([float(q) for q in p])
        pv[k] = pf
        cum = np.cumsum(pf)
        j = int((u[k] >= cum).sum())
        j = min(j, nsym - 1)
        while pf[j] <= 0.0 and j > 0:
            j -= 1
        symbols[k] = j
        total += math.log(pf[j])
        log_mass[k] = total
        mart[k + 1] = mart[k] + (-math.log(pf[j]) - entropy(pf))
        y = system.step(y, j)
        states.append(y)
    return MassTrace(
        word=Word.from_symbols(symbols, nsym),
        states=states,
        prob_vectors=pv,
        log_mass=log_mass,
        martingale=mart,
        seed=seed,
        path_index=path_index,
    )


def martingale_trace(trace: MassTrace) -> np.ndarray:
    """Centered log-mass increments, recomputed from the stored vectors.

    M_n sums (-log of the chosen branch probability) minus the entropy of the
    step's full probability vector; M_0 = 0.
    """
    n = len(trace.word)
    out = np.empty(n + 1)
    out[0] = 0.0
    prev_log = 0.0
    for k, s in enumerate(trace.word):
        p = trace.prob_vectors[k]
        if p[s] <= 0.0:
            raise ConfigError(
                f"trace step {k} chose a zero-probability branch {s}"
            )
        step_log = trace.log_mass[k] - prev_log
        prev_log = trace.log_mass[k]
        out[k + 1] = out[k] + (-step_log - entropy(p))
    return out


@dataclass(frozen=True)
class PathStats:
    """Vectorized multi-path summary: per-path -log mass, entropy sums,
    final martingale values, and final states."""

    n_steps: int
    n_paths: int
    neg_log_mass: np.ndarray
    entropy_sum: np.ndarray
    martingale_final: np.ndarray
    final_states: np.ndarray

    @property
    def mean_step_entropy(self) -> float:
        return float(self.entropy_sum.mean() / self.n_steps)


def _entropy_rows(pv: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pv > 0.0, -pv * np.log(np.where(pv > 0.0, pv, 1.0)), 0.0)
    return terms.sum(axis=1)


def _run_chunk(system: DrivenSystem, n_steps: int, seed: int,
               lo: int, hi: int) -> tuple:
    count = hi - lo
    u = np.empty((count, n_steps))
    for i in range(count):
        u[i] = path_generator(seed, lo + i).random(n_steps)
    states = system.init_states(count)
    neg_log = np.zeros(count)
    ent_sum = np.zeros(count)
    mart = np.zeros(count)
    rows = np.arange(count)
    for k in range(n_steps):
        pv = system.probs_vec(states)
        syms = draw_symbols(u[:, k], pv)
        chosen = pv[rows, syms]
        step_log = -np.log(chosen)
        step_ent = _entropy_rows(pv)
        neg_log += step_log
        ent_sum += step_ent
        mart += step_log - step_ent
        states = system.step_vec(states, syms)
    return neg_log, ent_sum, mart, states


def run_paths(system: DrivenSystem, n_steps: int, n_paths: int, seed: int,
              threads: int = 1) -> PathStats:
    """Run n_paths independent sampled paths for n_steps steps each.

    Deterministic in (seed, path index) regardless of thread count: paths are
    chunked contiguously and results reassembled in path order.
    """
    if n_steps < 1 or n_paths < 1:
        raise ConfigError("need at least one step and one path")
    if n_steps * n_paths > 5e9:
        raise BudgetError("path budget exceeded (steps × paths > 5e9)")
    threads = max(1, int(threads))
    if threads == 1:
        parts = [_run_chunk(system, n_steps, seed, 0, n_paths)]
    else:
        bounds = np.linspace(0, n_paths, threads + 1, dtype=int)
        spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            parts = list(
                pool.map(lambda s: _run_chunk(system, n_steps, seed, *s), spans)
            )
    neg_log = np.concatenate([p[0] for p in parts])
    ent_sum = np.concatenate([p[1] for p in parts])
    mart = np.concatenate([p[2] for p in parts])
    finals = np.concatenate([p[3] for p in parts])
    return PathStats(
        n_steps=n_steps,
        n_paths=n_paths,
        neg_log_mass=neg_log,
        entropy_sum=ent_sum,
        martingale_final=mart,
        final_states=finals,
    )


def trace_csv_rows(trace: MassTrace):
    """Plot-ready rows (n, symbol, state, p_0..p_{N-1}, log_mass, M_n)."""
    rows = []
    for k, s in enumerate(trace.word):
        state = trace.states[k]
        if isinstance(state, tuple):
            state_repr = "(" + ",".join(f"{float(c):.17g}" for c in state) + ")"
        else:
            state_repr = f"{float(state):.17g}"
        rows.append(
            (k + 1, int(s), state_repr)
            + tuple(f"{v:.17g}" for v in trace.prob_vectors[k])
            + (f"{trace.log_mass[k]:.17g}", f"{trace.martingale[k + 1]:.17g}")
        )
    return rows
