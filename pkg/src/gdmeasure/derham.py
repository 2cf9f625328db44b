"""Curve systems driven by fractional linear transformations.

A family of 2x2 matrices acts on [0, 1] through z ↦ (az+b)/(cz+d). When the
family passes the junction, orientation, and contraction checks, it defines a
continuous curve; the induced driven system produces the curve's pushforward
measure, and several exact detectors classify that measure (absolutely
continuous closed form, equivalence with a product measure).

All arithmetic here is exact rational; matrix products are guarded by an
entry-size budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BudgetError, ConfigError, ValidationError
from .symbolic import Word, geometry_constants
from .systems import DrivenSystem

INF = math.inf
ENTRY_BIT_BUDGET = 4096


def _rat(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise ConfigError(f"not a number: {v!r}")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse rational {v!r}") from exc
    if isinstance(v, float):
        return Fraction(v)
    raise ConfigError(f"cannot parse rational {v!r}")


@dataclass(frozen=True)
class LftMatrix:
    """Exact 2x2 matrix acting as the transform z ↦ (az+b)/(cz+d)."""

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction

    @classmethod
    def from_rows(cls, rows) -> "LftMatrix":
        try:
            (a, b), (c, d) = rows
        except (TypeError, ValueError) as exc:
            raise ConfigError("matrix must be a 2x2 row-major array") from exc
        return cls(_rat(a), _rat(b), _rat(c), _rat(d))

    @property
    def det(self) -> Fraction:
        return self.a * self.d - self.b * self.c

    def scaled(self, factor: Fraction) -> "LftMatrix":
        return LftMatrix(self.a * factor, self.b * factor,
                         self.c * factor, self.d * factor)

    def normalized(self) -> "LftMatrix":
        if self.d == 0:
            raise ConfigError("cannot normalize a matrix with vanishing corner d")
        return self.scaled(Fraction(1) / self.d)

    def matmul(self, other: "LftMatrix") -> "LftMatrix":
        return LftMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def rows(self) -> tuple:
        return ((self.a, self.b), (self.c, self.d))


IDENTITY = LftMatrix(Fraction(1), Fraction(0), Fraction(0), Fraction(1))


def phi_transform(A: LftMatrix, z):
    """Exact value of (az+b)/(cz+d); z may be +inf (giving a/c, or +inf)."""
    if z == INF:
        if A.c == 0:
            return INF
        return A.a / A.c
    zq = _rat(z)
    den = A.c * zq + A.d
    if den == 0:
        raise ConfigError(f"pole of the transform at z = {zq}")
    return (A.a * zq + A.b) / den


def matrices_from_json(items) -> tuple[LftMatrix, ...]:
    if not isinstance(items, (list, tuple)) or len(items) < 2:
        raise ConfigError("need a list of at least two 2x2 matrices")
    return tuple(LftMatrix.from_rows(m) for m in items)


def _exact_sqrt(x: Fraction):
    """Fraction square root when x is a perfect square of a rational, else None."""
    if x < 0:
        return None
    pn = math.isqrt(x.numerator)
    pd = math.isqrt(x.denominator)
    if pn * pn == x.numerator and pd * pd == x.denominator:
        return Fraction(pn, pd)
    return None


@dataclass(frozen=True)
class DeRhamSystem:
    """Validated matrix family, normalized to corner entry d = 1."""

    matrices: tuple[LftMatrix, ...]
    alpha: object  # Fraction, or float when the defining square root is irrational
    beta: object  # Fraction, float, or +inf
    flags: dict
    knots: tuple[Fraction, ...]  # curve values at 0 = knots[0], ..., knots[N] = 1
    c_moebius: Fraction | None
    balance_point: Fraction  # the unique state where the first branch weight is 1/N

    @property
    def alphabet_size(self) -> int:
        return len(self.matrices)


def validate(matrices: Sequence[LftMatrix]) -> DeRhamSystem:
    """Check the junction/orientation/contraction conditions and assemble the
    validated family.

    Raises ValidationError naming the first failed condition ("A1", "A2",
    "A3") and the offending matrix index. The strict variant "sA3" and the
    per-branch weak-contraction property are recorded as flags.
    """
    mats = tuple(m if isinstance(m, LftMatrix) else LftMatrix.from_rows(m)
                 for m in matrices)
    n = len(mats)
    if n < 2:
        raise ConfigError("need at least two matrices")

    for i, m in enumerate(mats):
        if m.det <= 0:
            raise ValidationError("A2", i, f"determinant {m.det} is not positive")
        bound = min(m.d, m.c + m.d)
        if bound < 0 or m.det > bound * bound:
            raise ValidationError(
                "A3", i,
                f"sqrt(det) = sqrt({m.det}) exceeds min(d, c+d) = {bound}",
            )

    norm = tuple(m.normalized() for m in mats)

    if norm[0].b != 0:
        raise ValidationError("A1", 0, f"left endpoint maps to {norm[0].b}, not 0")
    last = norm[-1]
    if last.a + last.b != last.c + 1:
        raise ValidationError(
            "A1", n - 1,
            f"right endpoint maps to {(last.a + last.b) / (last.c + 1)}, not 1",
        )
    for i in range(1, n):
        prev = norm[i - 1]
        junction = (prev.a + prev.b) / (prev.c + 1)
        if junction != norm[i].b:
            raise ValidationError(
                "A1", i,
                f"junction mismatch: branch {i - 1} ends at {junction}, "
                f"branch {i} starts at {norm[i].b}",
            )

    sa3 = all(
        min(m.d, m.c + m.d) > 0 and m.det < min(m.d, m.c + m.d) ** 2 for m in norm
    )
    # each branch z ↦ (az+b)/(cz+1) has slope det/(cz+1)^2, maximal at an
    # endpoint of [0,1]; slope ≤ 1 everywhere is exactly the contraction bound
    weak = all(m.det <= 1 and m.det <= (m.c + 1) ** 2 for m in norm)

    candidates_lo: list = [Fraction(0)]
    candidates_hi: list = [Fraction(0)]
    a0, c0 = norm[0].a, norm[0].c
    if a0 == 1:
        candidates_lo.append(Fraction(-1))
        candidates_hi.append(INF)
    else:
        fix0 = c0 / (1 - a0)
        candidates_lo.append(fix0)
        candidates_hi.append(fix0)
    for m in norm[1:]:
        disc = (1 - m.a) ** 2 + 4 * m.b * m.c
        root = _exact_sqrt(disc)
        if root is not None:
            val = (m.a - 1 + root) / (2 * m.b)
        else:
            val = (float(m.a) - 1.0 + math.sqrt(float(disc))) / (2.0 * float(m.b))
        candidates_lo.append(val)
        candidates_hi.append(val)
    alpha = min(candidates_lo)
    beta = max(candidates_hi)

    knots = tuple(m.b for m in norm) + (Fraction(1),)

    nq = Fraction(n)
    balance = (1 + norm[0].c - norm[0].a * nq) / (norm[0].a * (nq - 1))
    c_val = norm[0].c * nq / (nq - 1)
    is_moebius = all(
        norm[i].b == Fraction(i) / ((nq - i) * c_val + nq)
        and norm[i].a == ((nq + 1) * c_val * norm[i].b + 1) / nq
        and norm[i].c == c_val * (nq - 1 - c_val * norm[i].b) / nq
        for i in range(n)
    )

    return DeRhamSystem(
        matrices=norm,
        alpha=alpha,
        beta=beta,
        flags={"A1": True, "A2": True, "A3": True, "sA3": sa3,
               "weak_contraction": weak},
        knots=knots,
        c_moebius=c_val if is_moebius else None,
        balance_point=balance,
    )


def state_interval(system: DeRhamSystem) -> tuple:
    """Endpoints of the state space; the upper end is +inf when the first
    branch has unit slope at the left endpoint (a_0 = 1)."""
    a0 = system.matrices[0].a
    alpha, beta = system.alpha, system.beta
    if a0 == 1:
        assert alpha == -1 and beta == INF
    else:
        assert beta != INF
    return alpha, beta


def detect_moebius_case(system: DeRhamSystem) -> Fraction | None:
    """The one-parameter value C making the curve's distribution function
    x/(1 - C(x-1)), or None — in which case the measure has dimension < 1."""
    return system.c_moebius


def moebius_distribution(C: Fraction, x):
    """Closed-form distribution function x/(1 - C(x-1)) of the detected case."""
    xq = _rat(x)
    return xq / (1 - _rat(C) * (xq - 1))


def derived_system(ds: DeRhamSystem, label: str = "derham_lft",
                   kind: str = "derham_lft") -> DrivenSystem:
    """Driven system of the validated family: branch weights and state maps.

    Branch weights are computed through two algebraically equal forms (the
    determinant form and the knot-difference form) and cross-checked on every
    scalar evaluation; the vectorized path uses the knot form.
    """
    n = ds.alphabet_size
    mats = ds.matrices
    a = [m.a for m in mats]
    b = [m.b for m in mats]
    c = [m.c for m in mats]
    det = [m.det for m in mats]
    kn = ds.knots
    af = np.array([float(x) for x in a])
    bf = np.array([float(x) for x in b])
    cf = np.array([float(x) for x in c])
    knf = np.array([float(x) for x in kn])
    unit_row = np.zeros(n)
    unit_row[0] = 1.0
    inf_next = np.array([INF] + [float(a[k] / b[k]) for k in range(1, n)])

    def probs(y):
        if y == INF:
            out = [Fraction(0)] * n
            out[0] = Fraction(1)
            return tuple(out)
        vals = []
        for k in range(n):
            direct = det[k] * (y + 1) / ((b[k] * y + 1) * ((a[k] + b[k]) * y + c[k] + 1))
            knotform = (y + 1) * (kn[k + 1] - kn[k]) / ((kn[k + 1] * y + 1) * (kn[k] * y + 1))
            if isinstance(direct, Fraction) and isinstance(knotform, Fraction):
                if direct != knotform:
                    raise ConfigError(
                        f"internal inconsistency: branch weight forms disagree at y={y}"
                    )
            elif abs(float(direct) - float(knotform)) > 1e-12:
                raise ConfigError(
                    f"internal inconsistency: branch weight forms disagree at y={y}"
                )
            vals.append(direct)
        return tuple(vals)

    def step(y, i):
        if y == INF:
            return INF if i == 0 else a[i] / b[i]
        return (a[i] * y + c[i]) / (b[i] * y + 1)

    def probs_vec(ys):
        finite = np.isfinite(ys)
        yv = np.where(finite, ys, 0.0)
        num = yv + 1.0
        out = np.empty((len(ys), n))
        for k in range(n):
            out[:, k] = num * (knf[k + 1] - knf[k]) / (
                (knf[k + 1] * yv + 1.0) * (knf[k] * yv + 1.0)
            )
        out[~finite] = unit_row
        return out

    def step_vec(ys, syms):
        finite = np.isfinite(ys)
        yv = np.where(finite, ys, 0.0)
        nxt = (af[syms] * yv + cf[syms]) / (bf[syms] * yv + 1.0)
        return np.where(finite, nxt, inf_next[syms])

    return DrivenSystem(
        kind=kind,
        label=label,
        alphabet_size=n,
        state_kind="scalar",
        y0=Fraction(0),
        probs=probs,
        step=step,
        probs_vec=probs_vec,
        step_vec=step_vec,
        geometry=geometry_constants("interval", n),
        exact=True,
        state_lo=float(ds.alpha),
        state_hi=float(ds.beta),
        params={"matrices": [[[str(v) for v in row] for row in m.rows()]
                             for m in mats]},
        lft=ds,
    )


def _word_symbols(word, n: int) -> tuple[int, ...]:
    if isinstance(word, Word):
        if word.alphabet_size != n:
            raise ConfigError("word alphabet does not match the matrix family")
        return word.symbols
    if isinstance(word, str):
        return tuple(int(ch) for ch in word)
    return tuple(int(s) for s in word)


def _check_budget(m: LftMatrix) -> None:
    for v in (m.a, m.b, m.c, m.d):
        if v.numerator.bit_length() > ENTRY_BIT_BUDGET or \
                v.denominator.bit_length() > ENTRY_BIT_BUDGET:
            raise BudgetError(
                "matrix product entries exceed the 4096-bit exact-arithmetic budget"
            )


def curve_eval(system: DeRhamSystem, word) -> tuple:
    """(curve value at the word's left endpoint, value at its right endpoint,
    cylinder mass), all exact rationals.

    The mass is computed both as the endpoint difference and through the
    product-matrix determinant formula; the two must agree exactly.
    """
    symbols = _word_symbols(word, system.alphabet_size)
    for s in symbols:
        if not (0 <= s < system.alphabet_size):
            raise ConfigError(f"symbol {s} outside alphabet")
    prod = IDENTITY
    for s in symbols:
        prod = prod.matmul(system.matrices[s])
        _check_budget(prod)
    left = phi_transform(prod, Fraction(0))
    right = phi_transform(prod, Fraction(1))
    p, q, r, s_ = prod.a, prod.b, prod.c, prod.d
    mass = (p * s_ - q * r) / (s_ * (r + s_))
    if mass != right - left:
        raise ConfigError("internal inconsistency: cylinder mass formulas disagree")
    return left, right, mass


def curve_table(system: DeRhamSystem, depth: int):
    """(parameter, curve value) at all base-N points of the given depth."""
    n = system.alphabet_size
    rows = [(Fraction(0), Fraction(0))]

    def rec(prod: LftMatrix, left: Fraction, width: Fraction, level: int):
        if level == depth:
            rows.append((left + width, phi_transform(prod, Fraction(1))))
            return
        for s in range(n):
            rec(prod.matmul(system.matrices[s]), left + s * width / n,
                width / n, level + 1)

    rec(IDENTITY, Fraction(0), Fraction(1), 0)
    return rows


# ---------------------------------------------------------------------------
# named families


def minkowski_system() -> DeRhamSystem:
    """The integer pair whose curve inverts the classical question-mark map."""
    return validate([
        LftMatrix(Fraction(1), Fraction(0), Fraction(1), Fraction(1)),
        LftMatrix(Fraction(0), Fraction(1), Fraction(-1), Fraction(2)),
    ])


def moebius_system(C, N: int = 2) -> DeRhamSystem:
    """The one-parameter family whose curve has the closed-form distribution
    x/(1 - C(x-1)); C = 0 gives the uniform affine family."""
    cq = _rat(C)
    nq = Fraction(int(N))
    if nq < 2:
        raise ConfigError("need at least two branches")
    mats = []
    for i in range(int(N)):
        den = (nq - i) * cq + nq
        if den == 0:
            raise ConfigError(f"parameter C = {cq} degenerates branch {i}")
        b_i = Fraction(i) / den
        a_i = ((nq + 1) * cq * b_i + 1) / nq
        c_i = cq * (nq - 1 - cq * b_i) / nq
        mats.append(LftMatrix(a_i, b_i, c_i, Fraction(1)))
    ds = validate(mats)
    if ds.c_moebius != cq:
        raise ConfigError(
            f"internal inconsistency: constructed family detects C = {ds.c_moebius}"
        )
    return ds


def linear_system(weights) -> DeRhamSystem:
    """Affine matrices realizing constant branch weights."""
    w = [_rat(x) for x in weights]
    if len(w) < 2 or any(x <= 0 for x in w) or sum(w) != 1:
        raise ConfigError("weights must be positive rationals summing to 1")
    mats = []
    acc = Fraction(0)
    for wi in w:
        mats.append(LftMatrix(wi, acc, Fraction(0), Fraction(1)))
        acc += wi
    return validate(mats)


def bernoulli_equivalence_params(p, e0) -> DeRhamSystem:
    """Matrix family whose curve measure is equivalent to the product measure
    with weights p, built from the exact parameter identities; e0 is the fixed
    point of the first state map."""
    pq = [_rat(x) for x in p]
    if len(pq) < 2:
        raise ConfigError("need at least two weights")
    if any(x <= 0 or x >= 1 for x in pq) or sum(pq) != 1:
        raise ConfigError("weights must lie in (0,1) and sum to 1")
    e = _rat(e0)
    mats = []
    acc = Fraction(0)  # running sum p_0 + ... + p_{i-1}
    for pi in pq:
        den = (1 - acc) * e + 1
        if den == 0:
            raise ConfigError(f"fixed point parameter e0 = {e} degenerates the family")
        s_i = acc + pi
        a_i = (pi + e * s_i) / den
        b_i = acc / den
        c_i = e * ((1 - s_i) * e + 1 - pi) / den
        mats.append(LftMatrix(a_i, b_i, c_i, Fraction(1)))
        acc = s_i
    try:
        ds = validate(mats)
    except ValidationError as exc:
        raise ConfigError(
            f"equivalence parameters (p={[str(x) for x in pq]}, e0={e}) "
            f"produce an invalid family: condition {exc.condition} fails at "
            f"index {exc.index}"
        ) from exc
    recovered = is_ac_with_bernoulli(ds)
    if recovered != tuple(pq):
        raise ConfigError("internal inconsistency: equivalence round trip failed")
    return ds


def is_ac_with_bernoulli(system: DeRhamSystem):
    """Exact detector: the product-measure weights the curve measure is
    equivalent to, or None when no such weights exist.

    Inverts the parameter identities from the first-branch fixed point and
    re-verifies all of them; requires the first branch to be a strict
    contraction at the left end (a_0 < 1).
    """
    mats = system.matrices
    n = len(mats)
    a0 = mats[0].a
    if a0 >= 1:
        return None
    e = mats[0].c / (1 - a0)
    partial = [Fraction(0)]
    for i in range(1, n):
        den = 1 + mats[i].b * e
        if den == 0:
            return None
        partial.append(mats[i].b * (1 + e) / den)
    partial.append(Fraction(1))
    p = [partial[i + 1] - partial[i] for i in range(n)]
    if any(x <= 0 or x >= 1 for x in p):
        return None
    acc = Fraction(0)
    for i in range(n):
        den = (1 - acc) * e + 1
        s_i = acc + p[i]
        if den == 0:
            return None
        if mats[i].a != (p[i] + e * s_i) / den:
            return None
        if mats[i].b != acc / den:
            return None
        if mats[i].c != e * ((1 - s_i) * e + 1 - p[i]) / den:
            return None
        acc = s_i
    return tuple(p)
