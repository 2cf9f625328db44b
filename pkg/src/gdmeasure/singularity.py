"""Classification of a driven-system measure against comparison measures.

Three routes, in decreasing strength:
  * exact parameter identities on matrix families (certified equivalence /
    certified singularity vs the whole product-measure family),
  * separation certificates (a box around the comparison weights that the
    orbit provably clears before/after some word ⇒ certified singularity),
  * the Hellinger partial-sum test (a numeric heuristic from the
    square-root affinity of step weights along comparison-sampled paths).

Heuristic verdicts are labeled as such, and INCONCLUSIVE is a first-class
outcome — there are measures that are neither absolutely continuous nor
singular against a given comparison, and the three-state toy reproduces one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError
from .conditions import (
    HOLDS_AT_RESOLUTION,
    check_multisep2,
)
from .measure import path_generator
from .systems import DrivenSystem

AC_CERTIFIED = "AC_CERTIFIED"
SINGULAR_CERTIFIED = "SINGULAR_CERTIFIED"
AC_HEURISTIC = "AC_HEURISTIC"
SINGULAR_HEURISTIC = "SINGULAR_HEURISTIC"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class SingularityReport:
    """Verdict on one measure against one comparison (a weight vector, the
    whole product-measure family, or Lebesgue)."""

    comparison: object
    verdict: str
    evidence: object = None
    hellinger_partial_sums: tuple = ()
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "comparison": self.comparison,
            "verdict": self.verdict,
            "evidence": self.evidence,
            "hellinger_partial_sums": [
                [int(n), float(s)] for n, s in self.hellinger_partial_sums
            ],
            "params": self.params,
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


def partial_sums_csv_rows(report: SingularityReport):
    """Plot-ready (n, partial_sum) rows of the mean Hellinger trajectory."""
    return [(int(n), f"{float(s):.17g}")
            for n, s in report.hellinger_partial_sums]


def _validate_comparison(p, n: int) -> np.ndarray:
    arr = np.array([float(x) for x in p], dtype=float)
    if len(arr) != n:
        raise ConfigError(
            f"comparison vector has {len(arr)} entries for alphabet size {n}")
    if (arr <= 0).any() or abs(arr.sum() - 1.0) > 1e-9:
        raise ConfigError(
            "comparison must be a strictly positive probability vector")
    return arr


# ---------------------------------------------------------------------------
# Hellinger / Kakutani partial-sum heuristic


def hellinger_test(system: DrivenSystem, y0=None, p=None, T: int = 10_000,
                   paths: int = 50, seed: int = 0, *,
                   tail_tol: float = 1e-3, slope_tol: float = 1e-4,
                   consensus: float = 0.9,
                   n_checkpoints: int = 200) -> SingularityReport:
    """Partial sums of 1 - sum_i sqrt(p_i G_i(state)) along paths whose
    symbols are drawn i.i.d. from the comparison vector p.

    Summable sums indicate absolute continuity of the system's word measure
    with respect to the product measure, linear growth indicates mutual
    singularity; each path is classified by its tail behaviour and the
    verdict requires a consensus fraction.
    """
    if T < 1000:
        raise ConfigError("need at least 1000 steps for the Hellinger test")
    if paths < 1:
        raise ConfigError("need at least one path")
    if p is None:
        raise ConfigError("comparison vector p is required")
    n = system.alphabet_size
    pv_cmp = _validate_comparison(p, n)
    if y0 is not None:
        system = system.with_start(y0)
    sqrt_p = np.sqrt(pv_cmp)
    cum = np.cumsum(pv_cmp)

    u = np.empty((paths, T))
    for j in range(paths):
        u[j] = path_generator(seed, j).random(T)

    states = system.init_states(paths)
    S = np.zeros(paths)
    n_tail = max(1, T // 10)
    n_half = max(1, T // 2)
    S_tail = np.zeros(paths)
    S_half = np.zeros(paths)
    step_marks = sorted(set(
        [max(1, (k + 1) * T // n_checkpoints) for k in range(n_checkpoints)]))
    trajectory = []
    mark_pos = 0
    for k in range(T):
        syms = np.minimum(np.searchsorted(cum, u[:, k], side="right"), n - 1)
        states = system.step_vec(states, syms)
        gv = np.clip(system.probs_vec(states), 0.0, None)
        S += 1.0 - (np.sqrt(gv) * sqrt_p[None, :]).sum(axis=1)
        step_no = k + 1
        if step_no == n_tail:
            S_tail[:] = S
        if step_no == n_half:
            S_half[:] = S
        if mark_pos < len(step_marks) and step_no == step_marks[mark_pos]:
            trajectory.append((step_no, float(S.mean())))
            mark_pos += 1

    tail_growth = S - S_tail
    slope = (S - S_half) / max(1, T - n_half)
    ac_like = tail_growth < tail_tol
    sing_like = slope >= slope_tol
    frac_ac = float(ac_like.mean())
    frac_sing = float(sing_like.mean())
    if frac_ac >= consensus:
        verdict = AC_HEURISTIC
    elif frac_sing >= consensus:
        verdict = SINGULAR_HEURISTIC
    else:
        verdict = INCONCLUSIVE
    return SingularityReport(
        comparison=[float(x) for x in pv_cmp],
        verdict=verdict,
        hellinger_partial_sums=tuple(trajectory),
        params={
            "T": T, "paths": paths, "seed": seed,
            "tail_tol": tail_tol, "slope_tol": slope_tol,
            "consensus": consensus,
            "fraction_ac_like": frac_ac,
            "fraction_singular_like": frac_sing,
            "mean_final_sum": float(S.mean()),
            "label": system.label,
        },
    )


# ---------------------------------------------------------------------------
# certified singularity via separation boxes


def certify_singular(system: DrivenSystem, y0=None, p=None, *,
                     eps_grid=None, max_len: int = 3, depth: int = 12,
                     word_budget: int = 200,
                     margin: float = 1e-6) -> SingularityReport:
    """Search for a separation certificate against the comparison vector p:
    an eps0-box around p and a word such that no orbit state keeps its weight
    vector in the box both before and after the word. A HOLDS verdict is a
    singularity certificate."""
    if p is None:
        raise ConfigError("comparison vector p is required")
    n = system.alphabet_size
    pv = _validate_comparison(p, n)
    minp = float(pv.min())
    if eps_grid is None:
        # Coarse boxes first (strongest certificates), then finer ones so
        # weakly separated systems still certify within the word budget.
        eps_grid = [minp / 4.0, 0.45 * minp, minp / 8.0, minp / 16.0,
                    minp / 32.0]
    attempts = []
    words_tried = 0
    for length in range(1, max_len + 1):
        words = _words_upto(n, length)
        for eps0 in eps_grid:
            for word in words:
                if words_tried >= word_budget:
                    break
                words_tried += 1
                verdict = check_multisep2(system, y0, tuple(pv), eps0, word,
                                          depth, margin=margin)
                attempts.append({"eps0": float(eps0), "word": list(word),
                                 "status": verdict.status})
                if verdict.status == HOLDS_AT_RESOLUTION:
                    return SingularityReport(
                        comparison=[float(x) for x in pv],
                        verdict=SINGULAR_CERTIFIED,
                        evidence={
                            "eps0": float(eps0),
                            "word": list(word),
                            "separation": verdict.as_dict(),
                        },
                        params={"depth": depth, "attempts": len(attempts),
                                "label": system.label},
                    )
    return SingularityReport(
        comparison=[float(x) for x in pv],
        verdict=INCONCLUSIVE,
        evidence={"attempts": attempts[-20:], "note":
                  "no separation certificate found at this resolution"},
        params={"depth": depth, "attempts": len(attempts),
                "label": system.label},
    )


def _words_upto(n: int, length: int):
    words = [()]
    for _ in range(length):
        words = [w + (j,) for w in words for j in range(n)]
    return words


# ---------------------------------------------------------------------------
# exact classification of matrix-family curve measures


def classify_derham(ds) -> SingularityReport:
    """Exact dichotomies for a validated matrix family: equivalence with a
    product measure via the parameter identities, and the Lebesgue verdict
    via the one-parameter closed-form detector."""
    from . import derham

    if not isinstance(ds, derham.DeRhamSystem):
        raise ConfigError("classify_derham needs a validated DeRhamSystem")
    c = derham.detect_moebius_case(ds)
    if c is not None:
        lebesgue = {
            "verdict": AC_CERTIFIED,
            "C": str(c),
            "distribution_function": "x / (1 - C*(x-1))",
            "dimension": 1.0,
        }
    else:
        lebesgue = {
            "verdict": SINGULAR_CERTIFIED,
            "note": "closed-form family identities fail, so the curve "
                    "measure has dimension < 1 and is singular",
        }

    mats = ds.matrices
    a0 = mats[0].a
    params = {"lebesgue": lebesgue, "n": ds.alphabet_size}
    recovered = derham.is_ac_with_bernoulli(ds)
    if recovered is not None:
        e0 = mats[0].c / (1 - a0)
        return SingularityReport(
            comparison=[float(x) for x in recovered],
            verdict=AC_CERTIFIED,
            evidence={
                "p": [str(x) for x in recovered],
                "e0": str(e0),
                "identities": "all three parameter families verified exactly",
            },
            params=params,
        )
    if a0 < 1:
        e0 = mats[0].c / (1 - a0)
        evidence = _bernoulli_failure_evidence(ds, e0)
        return SingularityReport(
            comparison="every-bernoulli",
            verdict=SINGULAR_CERTIFIED,
            evidence=evidence,
            params=params,
        )
    # first branch has unit slope at the left end: the fixed-point identities
    # are unavailable, so certify against a grid of comparison vectors
    system = derham.derived_system(ds)
    grid = _comparison_grid(ds.alphabet_size)
    certificates = []
    for q in grid:
        rep = certify_singular(system, Fraction(0), q)
        certificates.append({"q": [float(x) for x in q],
                             "verdict": rep.verdict,
                             "evidence": rep.evidence if
                             rep.verdict == SINGULAR_CERTIFIED else None})
        if rep.verdict != SINGULAR_CERTIFIED:
            return SingularityReport(
                comparison="bernoulli-grid",
                verdict=INCONCLUSIVE,
                evidence={"certificates": certificates},
                params=params,
            )
    return SingularityReport(
        comparison="bernoulli-grid",
        verdict=SINGULAR_CERTIFIED,
        evidence={"certificates": certificates,
                  "note": "each grid point carries an exact separation "
                          "witness; the family statement holds analytically"},
        params=params,
    )


def _bernoulli_failure_evidence(ds, e0: Fraction) -> dict:
    """Why no product measure is equivalent: locate the first exact identity
    failure, which doubles as a separation-style witness at the fixed point
    of the first state map."""
    from . import derham

    mats = ds.matrices
    n = ds.alphabet_size
    partial = [Fraction(0)]
    for i in range(1, n):
        den = 1 + mats[i].b * e0
        if den == 0:
            return {"e0": str(e0), "failure": f"degenerate recovery at index {i}"}
        partial.append(mats[i].b * (1 + e0) / den)
    partial.append(Fraction(1))
    p = [partial[i + 1] - partial[i] for i in range(n)]
    if any(x <= 0 or x >= 1 for x in p):
        return {"e0": str(e0), "candidate_p": [str(x) for x in p],
                "failure": "recovered weights leave (0,1)"}
    sys_d = derham.derived_system(ds)
    gv = sys_d.probs(e0)
    hv = [sys_d.step(e0, i) for i in range(n)]
    mismatch_g = [i for i in range(n) if gv[i] != p[i]]
    mismatch_h = [i for i in range(n) if hv[i] != e0]
    return {
        "e0": str(e0),
        "candidate_p": [str(x) for x in p],
        "weights_at_fixed_point": [str(g) for g in gv],
        "branch_weight_mismatches": mismatch_g,
        "state_map_fixed_point_mismatches": mismatch_h,
        "failure": "parameter identities do not hold for the recovered "
                   "candidate, and no other weight vector is possible",
    }


def _comparison_grid(n: int):
    if n == 2:
        return [(Fraction(k, 10), Fraction(10 - k, 10)) for k in range(1, 10)]
    out = [tuple(Fraction(1, n) for _ in range(n))]
    rest = Fraction(4, 10 * (n - 1))
    for i in range(n):
        q = [rest] * n
        q[i] = Fraction(6, 10)
        out.append(tuple(q))
    return out
