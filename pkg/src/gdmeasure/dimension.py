"""Dimension estimates and closed forms.

The Hausdorff dimension of a driven-system measure on a self-similar carrier
with contraction ratio r is governed by the Cesàro average of step entropies
along sampled words: dimension = (entropy average)/log(1/r) up to limsup vs
liminf. This module provides the Monte Carlo and exact-tree estimators of
that average, the translation into upper/lower bounds, the entropy-deficit
cap forced by a separation width, pattern-frequency diagnostics, and the
closed-form dimensions of the product-weight, question-mark, and complex-tree
families.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetError, ConfigError
from .symbolic import IfsGeometry, Word, entropy
from .systems import DrivenSystem
from .measure import MassTrace, path_generator, run_paths

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class DimReport:
    """One dimension estimate with its provenance."""

    method: str
    estimate: float
    ci_halfwidth: float = 0.0
    upper_bound: float | None = None
    lower_bound: float | None = None
    bounds_note: str = ""
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "estimate": self.estimate,
            "ci_halfwidth": self.ci_halfwidth,
            "upper_bound": self.upper_bound,
            "lower_bound": self.lower_bound,
            "bounds_note": self.bounds_note,
            "params": self.params,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.as_dict(), **kwargs)


# ---------------------------------------------------------------------------
# entropy averages


def entropy_average_mc(system: DrivenSystem, y0=None, n: int = 2000,
                       paths: int = 200, seed: int = 0,
                       threads: int = 1) -> tuple[float, float]:
    """Mean over sampled paths of the Cesàro step-entropy average, with a 95%
    across-path confidence half-width."""
    if n < 100:
        raise ConfigError("need at least 100 steps for the MC average")
    if paths < 10:
        raise ConfigError("need at least 10 paths for the MC average")
    if y0 is not None:
        system = system.with_start(y0)
    stats = run_paths(system, n_steps=n, n_paths=paths, seed=seed,
                      threads=threads)
    per_path = stats.entropy_sum / n
    mean = float(per_path.mean())
    ci = 1.96 * float(per_path.std(ddof=1)) / math.sqrt(paths)
    return mean, ci


def entropy_average_exact(system: DrivenSystem, y0=None, n: int = 8) -> float:
    """Exact expectation of the Cesàro step-entropy average by full tree
    enumeration, weighting every length-<n word by its cylinder mass."""
    if n < 1:
        raise ConfigError("need n >= 1")
    nsym = system.alphabet_size
    if nsym ** n > 10 ** 7:
        raise BudgetError(
            f"full enumeration of {nsym}^{n} words exceeds the budget")
    if y0 is None:
        y0 = system.y0
    system.check_state(y0)
    exact = system.exact
    total = 0.0
    stack = [(y0, Fraction(1) if exact else 1.0, 0)]
    while stack:
        y, w, depth = stack.pop()
        p = system.probs(y)
        pf = [float(q) for q in p]
        total += float(w) * entropy(pf)
        if depth + 1 < n:
            for j in range(nsym):
                if pf[j] > 0.0:
                    stack.append((system.step(y, j), w * p[j], depth + 1))
    return total / n


def dim_bounds(mean_entropy: float, geometry: IfsGeometry,
               ci_halfwidth: float = 0.0) -> tuple[float, float]:
    """Translate an entropy average into (upper, lower) dimension bounds
    through the carrier's contraction ratio."""
    scale = geometry.log_inv_contraction
    upper = (mean_entropy + ci_halfwidth) / scale
    lower = max(0.0, (mean_entropy - ci_halfwidth) / scale)
    return upper, lower


def wa_lower_bound(c: float, geometry: IfsGeometry) -> float:
    """Analytic dimension floor from a verified two-sided single-branch
    weight bound c <= G_i <= 1-c."""
    cf = float(c)
    if not 0 < cf <= 0.5:
        raise ConfigError("the weight bound must lie in (0, 1/2]")
    return entropy([cf, 1.0 - cf]) / geometry.log_inv_contraction


# ---------------------------------------------------------------------------
# entropy-deficit cap from a separation width


def _s(t: float) -> float:
    return 0.0 if t <= 0.0 else -t * math.log(t)


@dataclass(frozen=True)
class KeyDeficit:
    """Entropy cap for an l-block whose weight vector leaves the eps0-box
    around uniform at least once."""

    n_symbols: int
    eps0: float
    block_len: int
    sup_term: float  # sup of s_N over the complement of the box
    cap: float  # (l-1) log N + sup_term
    maximizer: tuple  # the weight vector attaining the sup

    @property
    def per_block_gap(self) -> float:
        return self.block_len * math.log(self.n_symbols) - self.cap

    def deficit_rate(self, c_tilde: float) -> float:
        """Asymptotic per-step entropy deficit when disjoint l-blocks leave
        the box with liminf frequency c_tilde^l / 2."""
        freq = c_tilde ** self.block_len / 2.0
        return freq * self.per_block_gap / self.block_len


def key_deficit(n_symbols: int, eps0: float, block_len: int = 1) -> KeyDeficit:
    """Closed-form sup of the entropy over weight vectors at l1 distance at
    least eps0 from uniform, and the induced per-block cap.

    The constrained maximizer raises a coordinates by eps0/(2a) and lowers b
    coordinates by eps0/(2b) (equal within each group, the rest pinned at
    1/N); the best (a, b) pattern is taken. For N = 2 this is the familiar
    two-coordinate split (1/2 + eps0/2, 1/2 - eps0/2).
    """
    n = int(n_symbols)
    e = float(eps0)
    if n < 2:
        raise ConfigError("need at least two symbols")
    if not 0.0 < e < 2.0 * (n - 1) / n:
        # The l1 sphere of radius eps0 around uniform is nonempty inside the
        # simplex exactly on this range.
        raise ConfigError(
            f"separation width must lie in (0, 2(N-1)/N) = (0, {2 * (n - 1)}/{n})"
        )
    if block_len < 1:
        raise ConfigError("block length must be at least 1")
    u = 1.0 / n
    best = -1.0
    best_p = None
    for a in range(1, n):
        for b in range(1, n - a + 1):
            hi = u + e / (2 * a)
            lo = u - e / (2 * b)
            if lo <= 0.0 or hi >= 1.0:
                continue
            val = a * _s(hi) + b * _s(lo) + (n - a - b) * _s(u)
            if val > best:
                best = val
                best_p = (hi,) * a + (lo,) * b + (u,) * (n - a - b)
    if best_p is None:
        raise ConfigError("no feasible maximizer (width too large)")
    cap = (block_len - 1) * math.log(n) + best
    return KeyDeficit(
        n_symbols=n,
        eps0=e,
        block_len=block_len,
        sup_term=best,
        cap=cap,
        maximizer=best_p,
    )


def pattern_frequency(trace: MassTrace, pattern) -> float:
    """Fraction of sliding positions at which the word contains the pattern."""
    symbols = trace.word.symbols
    if isinstance(pattern, Word):
        pat = pattern.symbols
    elif isinstance(pattern, str):
        pat = tuple(int(ch) for ch in pattern)
    else:
        pat = tuple(int(s) for s in pattern)
    l = len(pat)
    if l == 0:
        return 1.0
    n = len(symbols)
    if n < 10 * l:
        raise ConfigError("trace too short for this pattern length")
    hits = sum(1 for i in range(n - l + 1) if symbols[i:i + l] == pat)
    return hits / (n - l + 1)


# ---------------------------------------------------------------------------
# closed forms


def dim_linear(weights) -> DimReport:
    """Dimension of the constant-weight (product) measure on base-N digits."""
    w = [float(x) for x in weights]
    n = len(w)
    if n < 2 or any(x <= 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
        raise ConfigError("weights must be positive and sum to 1")
    val = entropy(w) / math.log(n)
    return DimReport(
        method="closed_form_linear",
        estimate=val,
        params={"weights": w, "n_symbols": n},
    )


def dim_kinney(samples: int = 100_000, seed: int = 0) -> DimReport:
    """Dimension of the question-mark curve measure: log2 over twice the mean
    of log(1+x) with x drawn from that measure.

    x is sampled by pushing 64 uniform bits through the curve's matrix
    products; the integer entries stay below 2^53, so float64 arithmetic is
    exact and the dyadic-truncation bias is below 2^-64.
    """
    if samples < 1000:
        raise ConfigError("need at least 1000 samples")
    gen = path_generator(seed, 0)
    p = np.ones(samples)
    q = np.zeros(samples)
    r = np.zeros(samples)
    s = np.ones(samples)
    for _ in range(64):
        bits = gen.integers(0, 2, size=samples)
        one = bits == 1
        zero = ~one
        # right-multiply the running product by the branch matrix
        p0, q0, r0, s0 = p[zero], q[zero], r[zero], s[zero]
        p[zero], q[zero], r[zero], s[zero] = p0 + q0, q0, r0 + s0, s0
        p1, q1, r1, s1 = p[one], q[one], r[one], s[one]
        p[one], q[one], r[one], s[one] = -q1, p1 + 2 * q1, -s1, r1 + 2 * s1
    x = q / s
    vals = np.log1p(x)
    mean = float(vals.mean())
    if mean <= 1e-12:
        raise ConfigError("divergent input: mean of log(1+x) is not positive")
    se = 1.96 * float(vals.std(ddof=1)) / math.sqrt(samples)
    est = LOG2 / (2.0 * mean)
    ci = est * se / mean  # first-order propagation through 1/mean
    return DimReport(
        method="kinney",
        estimate=est,
        ci_halfwidth=ci,
        lower_bound=0.5,
        bounds_note="analytic floor 1/2; estimate from MC mean of log(1+x)",
        params={"samples": samples, "seed": seed, "depth": 64,
                "mean_log1p": mean},
    )


def dim_hata(h_modulus_sq: float, alpha_modulus_sq: float) -> DimReport:
    """Dimension of the boundary-harmonic image measure on the complex tree
    with contraction pair (alpha, beta): weights (|h|^-2, 1-|h|^-2) against
    scales (|alpha|^2, 1-|alpha|^2)."""
    h2 = float(h_modulus_sq)
    a2 = float(alpha_modulus_sq)
    if h2 <= 1.0:
        raise ConfigError("|h|^2 must exceed 1")
    if not 0.0 < a2 < 1.0:
        raise ConfigError("|alpha|^2 must lie in (0, 1)")
    w = 1.0 / h2
    num = entropy([w, 1.0 - w])
    den = -w * math.log(a2) - (1.0 - w) * math.log(1.0 - a2)
    return DimReport(
        method="hata",
        estimate=num / den,
        params={"h_modulus_sq": h2, "alpha_modulus_sq": a2},
    )


def dim_report_mc(system: DrivenSystem, y0=None, n: int = 2000,
                  paths: int = 200, seed: int = 0,
                  wa_constant: float | None = None,
                  threads: int = 1) -> DimReport:
    """Assemble a DimReport from the MC entropy average and the carrier."""
    mean, ci = entropy_average_mc(system, y0, n, paths, seed, threads=threads)
    geo = system.geometry
    upper, lower = dim_bounds(mean, geo, ci)
    note = "upper/lower from entropy average through log(1/r)"
    if wa_constant is not None:
        floor = wa_lower_bound(wa_constant, geo)
        lower = max(lower, floor)
        note += f"; analytic floor {floor:.6f} from weight bound"
    return DimReport(
        method="entropy_mc",
        estimate=mean / geo.log_inv_contraction,
        ci_halfwidth=ci / geo.log_inv_contraction,
        upper_bound=upper,
        lower_bound=lower,
        bounds_note=note,
        params={"n": n, "paths": paths, "seed": seed,
                "r": float(geo.contraction), "mean_entropy": mean,
                "label": system.label},
    )


__all__ = [
    "DimReport", "KeyDeficit", "entropy_average_mc", "entropy_average_exact",
    "dim_bounds", "wa_lower_bound", "key_deficit", "pattern_frequency",
    "dim_linear", "dim_kinney", "dim_hata", "dim_report_mc",
]
