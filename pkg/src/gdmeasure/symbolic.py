"""Symbol words, base-N interval addresses, Shannon entropy, and cell geometry data.

Everything here is exact: words map to rational points and intervals through
integer arithmetic, and the geometry table records the contraction ratio,
diameter, and ball-overlap bound used by the dimension estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import ConfigError


@dataclass(frozen=True)
class Word:
    """A finite word over the alphabet {0, ..., alphabet_size - 1}."""

    symbols: tuple[int, ...]
    alphabet_size: int

    def __post_init__(self):
        if self.alphabet_size < 2:
            raise ConfigError("alphabet size must be at least 2")
        for s in self.symbols:
            if not (0 <= s < self.alphabet_size):
                raise ConfigError(
                    f"symbol {s} outside alphabet of size {self.alphabet_size}"
                )

    @classmethod
    def from_symbols(cls, symbols: Iterable[int], alphabet_size: int) -> "Word":
        return cls(tuple(int(s) for s in symbols), alphabet_size)

    @classmethod
    def from_string(cls, text: str, alphabet_size: int) -> "Word":
        if alphabet_size > 10:
            raise ConfigError("string form only supports alphabets up to size 10")
        return cls(tuple(int(ch) for ch in text), alphabet_size)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def append(self, symbol: int) -> "Word":
        return Word(self.symbols + (int(symbol),), self.alphabet_size)

    def prefix(self, length: int) -> "Word":
        return Word(self.symbols[:length], self.alphabet_size)

    def __str__(self) -> str:
        return "".join(str(s) for s in self.symbols)


@dataclass(frozen=True)
class NadicInterval:
    """The half-open base-N interval [numerator/N^depth, (numerator+1)/N^depth)."""

    numerator: int
    depth: int
    alphabet_size: int

    def __post_init__(self):
        if self.depth < 0 or not (0 <= self.numerator < self.alphabet_size**self.depth or self.depth == 0):
            raise ConfigError("interval address out of range")

    @property
    def left(self) -> Fraction:
        return Fraction(self.numerator, self.alphabet_size**self.depth)

    @property
    def right(self) -> Fraction:
        return Fraction(self.numerator + 1, self.alphabet_size**self.depth)

    @property
    def width(self) -> Fraction:
        return Fraction(1, self.alphabet_size**self.depth)

    def contains_point(self, t) -> bool:
        return self.left <= t < self.right

    def contains_interval(self, other: "NadicInterval") -> bool:
        return self.left <= other.left and other.right <= self.right


def project(word: Word) -> Fraction:
    """Exact left endpoint of the interval addressed by ``word``.

    The empty word has no point address.
    """
    if len(word) == 0:
        raise ConfigError("empty word has no point address")
    n = word.alphabet_size
    num = 0
    for s in word.symbols:
        num = num * n + s
    return Fraction(num, n ** len(word))


def cylinder_interval(word: Word) -> NadicInterval:
    """Base-N interval addressed by ``word``; the empty word gives [0, 1)."""
    n = word.alphabet_size
    num = 0
    for s in word.symbols:
        num = num * n + s
    return NadicInterval(num, len(word), n)


def entropy(probs: Sequence, *, sum_tol: float = 1e-12) -> float:
    """Shannon entropy (natural log) of a probability vector, with 0·log 0 = 0."""
    vals = [float(p) for p in probs]
    if len(vals) < 2:
        raise ConfigError("not a probability vector")
    if any(math.isnan(p) or p < -1e-15 or p > 1 + 1e-12 for p in vals):
        raise ConfigError("not a probability vector")
    if abs(sum(vals) - 1.0) > sum_tol:
        raise ConfigError("not a probability vector")
    return -sum(p * math.log(p) for p in vals if p > 0.0)


def entropy_max(alphabet_size: int) -> float:
    return math.log(alphabet_size)


@dataclass(frozen=True)
class IfsGeometry:
    """Geometry data for one of the supported self-similar carriers.

    ``contraction`` is the common similarity ratio r of the level maps,
    ``diameter`` the diameter of the attractor, and ``overlap_bound`` a
    constant D such that a ball of radius r^m meets at most D level-m cells.
    """

    name: str
    alphabet_size: int
    contraction: Fraction
    diameter: float
    overlap_bound: int

    @property
    def log_inv_contraction(self) -> float:
        return -math.log(float(self.contraction))


@lru_cache(maxsize=None)
def _interval_overlap_verified(n: int) -> bool:
    # Exhaustive check that an open ball of radius n^-m meets at most 3 of the
    # closed cells [k/n^m, (k+1)/n^m], for every quarter-point center.
    # Depth is capped so the enumeration stays small; the bound is scale-free.
    m = 1
    while n**m <= 4096:
        scale = n**m
        centers = [Fraction(i, 4 * scale) for i in range(0, 4 * scale + 1)]
        for x in centers:
            t = x * scale
            # cell k meets (x - h, x + h) iff t - 2 < k < t + 1
            kmin = max(0, math.floor(t - 2) + 1)
            kmax = min(scale - 1, math.ceil(t + 1) - 1)
            if kmax - kmin + 1 > 3:
                return False
        m += 1
    return True


# Ball-overlap bounds for the planar carriers, checked by direct cell
# enumeration at small depths (see conditions.verify_kigami); corners of the
# square tiling are the worst case.
# (branch count, contraction, cell-diameter constant, overlap bound).  The
# overlap bounds are exact: a radius-s open ball centered at a cell midpoint
# meets the full 3x3 block of side-s squares (diagonal distance s/sqrt(2)),
# and no 1-d window ever spans four cells, so the square bound is 9; every
# 3x3 index window on the carpet contains a column and a row congruent to 1
# mod 3 whose cell is a hole, so the carpet bound is 8 (observed: 8); the
# gasket bound 8 is a safe cap (direct cell enumeration observes 5).
_PLANAR = {
    "square": (4, Fraction(1, 2), math.sqrt(2.0), 9),
    "gasket": (3, Fraction(1, 2), 1.0, 8),
    "carpet": (8, Fraction(1, 3), math.sqrt(2.0), 8),
}


def geometry_constants(name: str, alphabet_size: int | None = None) -> IfsGeometry:
    """Geometry table lookup; ``interval`` additionally needs the branch count."""
    if name == "interval":
        if alphabet_size is None or alphabet_size < 2:
            raise ConfigError("interval geometry needs an alphabet size >= 2")
        if not _interval_overlap_verified(alphabet_size):
            raise ConfigError("interval overlap bound failed enumeration")
        return IfsGeometry("interval", alphabet_size, Fraction(1, alphabet_size), 1.0, 3)
    if name in _PLANAR:
        n, r, diam, d = _PLANAR[name]
        if alphabet_size is not None and alphabet_size != n:
            raise ConfigError(f"{name} geometry has {n} branches, not {alphabet_size}")
        return IfsGeometry(name, n, r, diam, d)
    raise ConfigError(f"unknown geometry {name!r}")
