"""Independent exact-arithmetic reference for the MAC datapath.

Built from arbitrary-precision integers plus the (exhaustively tested)
``decode`` codec only; it shares no multiplier, accumulator or rounding
code with the engine, so engine-vs-oracle comparisons stay meaningful.
Deliberately simple rather than fast: values are looked up in a sorted
table of every decoded pattern of the target format.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .formats import (
    EncodedScalar,
    ExactReal,
    FormatDescriptor,
    Kind,
    RoundingMode,
    SpecialValue,
    decode,
)

__all__ = ["RationalAcc", "oracle_dot", "oracle_round"]


@dataclass(slots=True)
class RationalAcc:
    """Exact dyadic accumulator: num / 2**den_exp, den_exp minimal."""

    num: int = 0
    den_exp: int = 0

    def __post_init__(self):
        if self.den_exp < 0:
            self.num <<= -self.den_exp
            self.den_exp = 0
        if self.num == 0:
            self.den_exp = 0
        elif self.den_exp > 0:
            tz = (self.num & -self.num).bit_length() - 1
            drop = tz if tz < self.den_exp else self.den_exp
            if drop:
                self.num >>= drop
                self.den_exp -= drop

    def add(self, other: "RationalAcc") -> "RationalAcc":
        d = max(self.den_exp, other.den_exp)
        num = (self.num << (d - self.den_exp)) + (other.num << (d - other.den_exp))
        return RationalAcc(num, d)

    @classmethod
    def from_exact(cls, x: ExactReal) -> "RationalAcc":
        signed = x.sign * x.mag
        if x.exp >= 0:
            return cls(signed << x.exp, 0)
        return cls(signed, -x.exp)

    @classmethod
    def product(cls, a: ExactReal, b: ExactReal) -> "RationalAcc":
        mag = a.mag * b.mag
        exp = a.exp + b.exp
        signed = a.sign * b.sign * mag
        if exp >= 0:
            return cls(signed << exp, 0)
        return cls(signed, -exp)

    @property
    def is_zero(self) -> bool:
        return self.num == 0

    def to_fraction(self) -> Fraction:
        return Fraction(self.num, 1 << self.den_exp)

    def cmp_scaled(self, mag: int, exp: int) -> int:
        """Compare self against mag * 2**exp (mag signed)."""
        s = exp + self.den_exp
        if s >= 0:
            a, b = self.num, mag << s
        else:
            a, b = self.num << -s, mag
        return (a > b) - (a < b)


def oracle_dot(a: list[ExactReal], b: list[ExactReal]) -> RationalAcc:
    """Exact sum of elementwise products."""
    if len(a) != len(b):
        raise ValueError("length mismatch")
    # accumulate on raw (num, den_exp) pairs; one normalization at the end
    num, den = 0, 0
    for x, y in zip(a, b):
        p_num = x.sign * y.sign * (x.mag * y.mag)
        p_den = -(x.exp + y.exp)
        if p_den > den:
            num <<= p_den - den
            den = p_den
        num += p_num << (den - p_den)
    return RationalAcc(num, den)


# -- value tables -----------------------------------------------------------

# per format: (sorted int values at min_lsb_exp scale, matching patterns)
_TABLES: dict[FormatDescriptor, tuple[list[int], list[int], int]] = {}


def _value_table(f: FormatDescriptor) -> tuple[list[int], list[int], int]:
    cached = _TABLES.get(f)
    if cached is not None:
        return cached
    base = f.min_lsb_exp
    entries = []
    for bits in range(1 << f.total_bits):
        v = decode(EncodedScalar(bits, f))
        if isinstance(v, SpecialValue):
            continue
        entries.append((v.scaled_int(base), bits))
    entries.sort()
    # de-duplicate +0/-0 keeping the canonical +0 pattern
    vals, pats = [], []
    for v, b in entries:
        if vals and vals[-1] == v:
            if b < pats[-1]:
                pats[-1] = b
            continue
        vals.append(v)
        pats.append(b)
    out = (vals, pats, base)
    _TABLES[f] = out
    return out


def _bisect_scaled(vals: list[int], x: RationalAcc, base: int) -> int:
    """Index of the first table value >= x (exact comparison).

    The query and table share the relation  x >= v*2**base  iff
    num >= v << (base + den_exp); scaling happens on whichever side
    keeps the shift non-negative.
    """
    sh = base + x.den_exp
    if sh >= 0:
        num = x.num
        lo, hi = 0, len(vals)
        while lo < hi:
            mid = (lo + hi) // 2
            if num > vals[mid] << sh:
                lo = mid + 1
            else:
                hi = mid
        return lo
    num = x.num << -sh
    lo, hi = 0, len(vals)
    while lo < hi:
        mid = (lo + hi) // 2
        if num > vals[mid]:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _emit(vals: list[int], pats: list[int], idx: int, x: RationalAcc,
          f: FormatDescriptor) -> EncodedScalar:
    bits = pats[idx]
    if vals[idx] == 0 and x.num < 0 and f.kind in (Kind.FLOAT, Kind.BFLOAT):
        bits |= 1 << (f.total_bits - 1)  # nonzero input keeps its zero sign
    return EncodedScalar(bits, f)


def oracle_round(x: RationalAcc, f: FormatDescriptor,
                 mode: RoundingMode) -> EncodedScalar:
    """Round an exact value by scanning the format's decoded value table.

    A nonzero value that rounds to zero magnitude keeps its sign in the
    signed-zero formats (IEEE behaviour); an exactly-zero input encodes
    as canonical +0.
    """
    if x.is_zero:
        return EncodedScalar(0, f)
    vals, pats, base = _value_table(f)
    i = _bisect_scaled(vals, x, base)

    if mode is RoundingMode.TOWARD_POSITIVE:
        if i == len(vals):
            if f.kind in (Kind.FLOAT, Kind.BFLOAT) and f.has_inf:
                return EncodedScalar(f.inf_pattern(False), f)
            return EncodedScalar(pats[-1], f)  # saturate at max
        return _emit(vals, pats, i, x, f)

    # nearest-even
    if f.kind in (Kind.FLOAT, Kind.BFLOAT) and f.has_inf:
        # beyond max + half ulp of the top binade: to infinity
        top, below = vals[-1], vals[-2]
        thresh2 = 2 * top + (top - below)  # 2 * (max + ulp/2)
        if x.cmp_scaled(thresh2, base - 1) >= 0:
            return EncodedScalar(f.inf_pattern(False), f)
        if x.cmp_scaled(-thresh2, base - 1) <= 0:
            return EncodedScalar(f.inf_pattern(True), f)
    if i == len(vals):
        return EncodedScalar(pats[-1], f)
    if i == 0:
        return EncodedScalar(pats[0], f)
    if x.cmp_scaled(vals[i], base) == 0:
        return _emit(vals, pats, i, x, f)
    c = x.cmp_scaled(vals[i - 1] + vals[i], base - 1)  # against the midpoint
    if c > 0:
        return _emit(vals, pats, i, x, f)
    if c < 0:
        return _emit(vals, pats, i - 1, x, f)
    if pats[i - 1] & 1 == 0:
        return _emit(vals, pats, i - 1, x, f)
    if pats[i] & 1 == 0:
        return _emit(vals, pats, i, x, f)
    return _emit(vals, pats, i - 1, x, f)
