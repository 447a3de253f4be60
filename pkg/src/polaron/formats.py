"""Bit-exact number format codecs for the trans-precision datapath.

Supported formats: FxP4/8/16 (two's-complement fixed point with a
per-tensor fractional split), FP8 E4M3 (OFP8 conventions: no Inf, one
NaN pattern), FP8 E5M2, FP16 E5M10, FP16 E6M9 (bias 31), BF16 (E8M7)
and posit8/posit16 (default es=2, configurable).

Every finite value in every format is a dyadic rational, so decode
returns an exact ``ExactReal`` and all rounding decisions can be checked
against exact integer arithmetic.  All functions here are pure; the only
module state is internal memo tables for decode/unpack.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

__all__ = [
    "Kind",
    "RoundingMode",
    "SpecialValue",
    "FormatDescriptor",
    "EncodedScalar",
    "ExactReal",
    "UnpackedOperand",
    "PackResult",
    "FXP4",
    "FXP8",
    "FXP16",
    "FP8_E4M3",
    "FP8_E5M2",
    "FP16_E5M10",
    "FP16_E6M9",
    "BF16",
    "POSIT8",
    "POSIT16",
    "SUPPORTED_FORMATS",
    "fxp",
    "posit",
    "parse_format",
    "decode",
    "encode",
    "unpack",
    "pack_normalize_round",
    "conformance_table_csv",
    "exact_decimal_str",
]


class Kind(enum.Enum):
    FXP = "fxp"
    FLOAT = "float"
    BFLOAT = "bfloat"
    POSIT = "posit"


class RoundingMode(enum.Enum):
    NEAREST_EVEN = "nearest-even"
    TOWARD_POSITIVE = "toward-positive"


class SpecialValue(enum.Enum):
    """Non-finite decode results.  Posit NaR is kept distinct from NaN."""

    NAN = "nan"
    NAR = "nar"
    POS_INF = "inf"
    NEG_INF = "-inf"


# ── exact dyadic values ──────────────────────────────────────────


@dataclass(frozen=True)
class ExactReal:
    """Exact dyadic rational: sign * mag * 2**exp.

    mag is normalized to be odd (or 0); sign is +1/-1 and a negative
    sign with mag == 0 represents a float-style negative zero.  Equality
    and ordering are numeric (+0 == -0); use the ``sign`` field directly
    when the encoding of zero matters.
    """

    sign: int
    mag: int
    exp: int

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        if self.mag < 0:
            raise ValueError("mag must be non-negative")
        mag, exp = self.mag, self.exp
        if mag == 0:
            exp = 0
        else:
            tz = (mag & -mag).bit_length() - 1
            if tz:
                mag >>= tz
                exp += tz
        object.__setattr__(self, "mag", mag)
        object.__setattr__(self, "exp", exp)

    @classmethod
    def from_int(cls, value: int) -> "ExactReal":
        return cls(-1 if value < 0 else 1, abs(value), 0)

    @classmethod
    def from_signed_mag(cls, negative: bool, mag: int, exp: int) -> "ExactReal":
        return cls(-1 if negative else 1, mag, exp)

    @classmethod
    def from_float(cls, value: float) -> "ExactReal":
        f = Fraction(value)  # raises for inf/nan
        den_exp = f.denominator.bit_length() - 1
        sign = -1 if math.copysign(1.0, value) < 0 else 1
        return cls(sign, abs(f.numerator), -den_exp)

    @property
    def is_zero(self) -> bool:
        return self.mag == 0

    def to_fraction(self) -> Fraction:
        if self.exp >= 0:
            return Fraction(self.sign * (self.mag << self.exp))
        return Fraction(self.sign * self.mag, 1 << -self.exp)

    def to_float(self) -> float:
        return float(self.to_fraction())

    # signed integer view at a given lsb exponent (exact when possible)
    def scaled_int(self, lsb_exp: int) -> int:
        if self.mag == 0:
            return 0
        shift = self.exp - lsb_exp
        if shift < 0:
            raise ValueError("value not representable at this lsb")
        return self.sign * (self.mag << shift)

    def _cmp(self, other: "ExactReal") -> int:
        sa = 0 if self.mag == 0 else self.sign
        sb = 0 if other.mag == 0 else other.sign
        if sa != sb:
            return 1 if sa > sb else -1
        if sa == 0:
            return 0
        e = min(self.exp, other.exp)
        a = self.mag << (self.exp - e)
        b = other.mag << (other.exp - e)
        if a == b:
            return 0
        return sa if a > b else -sa

    def __eq__(self, other):
        if not isinstance(other, ExactReal):
            return NotImplemented
        return self._cmp(other) == 0

    def __hash__(self):
        if self.mag == 0:
            return hash(0)
        return hash((self.sign, self.mag, self.exp))

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __neg__(self):
        return ExactReal(-self.sign, self.mag, self.exp)

    def __abs__(self):
        return ExactReal(1, self.mag, self.exp)

    def __add__(self, other):
        if not isinstance(other, ExactReal):
            return NotImplemented
        e = min(self.exp, other.exp)
        total = (self.sign * self.mag << (self.exp - e)) + (
            other.sign * other.mag << (other.exp - e)
        )
        return ExactReal(-1 if total < 0 else 1, abs(total), e)

    def __mul__(self, other):
        if not isinstance(other, ExactReal):
            return NotImplemented
        return ExactReal(self.sign * other.sign, self.mag * other.mag,
                         self.exp + other.exp)

    def half(self) -> "ExactReal":
        return ExactReal(self.sign, self.mag, self.exp - 1)

    def __repr__(self):
        return f"ExactReal({self.to_fraction()})"


# ── format descriptors ───────────────────────────────────────────


@dataclass(frozen=True)
class FormatDescriptor:
    """Static description of one numeric format.

    ``exp_bits``/``mant_bits``/``bias`` apply to Float/Bfloat kinds,
    ``es`` to posits, ``frac_bits`` to FxP.  ``has_inf`` is False for
    OFP8 E4M3 (and trivially for FxP/posit).
    """

    kind: Kind
    total_bits: int
    exp_bits: int = 0
    mant_bits: int = 0
    es: int = 0
    frac_bits: int = 0
    bias: int = 0
    has_inf: bool = False

    def __post_init__(self):
        if self.total_bits not in (4, 8, 16):
            raise ValueError(f"unsupported width {self.total_bits}")
        if self.kind in (Kind.FLOAT, Kind.BFLOAT):
            if 1 + self.exp_bits + self.mant_bits != self.total_bits:
                raise ValueError("float field widths must fill total_bits")
        elif self.kind is Kind.FXP:
            if not 0 <= self.frac_bits <= self.total_bits - 1:
                raise ValueError("frac_bits out of range")
        elif self.kind is Kind.POSIT:
            if not 0 <= self.es <= 3:
                raise ValueError("posit es must be in [0, 3]")
        object.__setattr__(self, "_hash", hash(
            (self.kind.value, self.total_bits, self.exp_bits, self.mant_bits,
             self.es, self.frac_bits, self.bias, self.has_inf)))

    def __hash__(self):  # hot path: dict keys in codec memo tables
        return self._hash

    # -- canonical naming --------------------------------------------------

    @property
    def name(self) -> str:
        if self.kind is Kind.FXP:
            return f"fxp{self.total_bits}:f{self.frac_bits}"
        if self.kind is Kind.POSIT:
            base = f"posit{self.total_bits}"
            return base if self.es == 2 else f"{base}:e{self.es}"
        if self.kind is Kind.BFLOAT:
            return "bf16"
        prefix = "fp8" if self.total_bits == 8 else "fp16"
        return f"{prefix}e{self.exp_bits}m{self.mant_bits}"

    # -- datapath geometry -------------------------------------------------

    @property
    def sig_width(self) -> int:
        """Significand width the SIMD datapath provisions for this format.

        FxP uses the full word; floats carry the hidden bit; posits are
        provisioned for the widest fraction any es setting can produce
        (total_bits - 3 fraction bits plus the hidden bit).
        """
        if self.kind is Kind.FXP:
            return self.total_bits
        if self.kind is Kind.POSIT:
            return self.total_bits - 2
        return self.mant_bits + 1

    @property
    def posit_frac_norm(self) -> int:
        """Fraction width posit operands are normalized to when unpacked."""
        return self.total_bits - self.es - 2

    @property
    def unpacked_frac_width(self) -> int:
        if self.kind is Kind.FXP:
            return 0
        if self.kind is Kind.POSIT:
            return self.posit_frac_norm
        return self.mant_bits

    # -- value range -------------------------------------------------------

    @property
    def emax(self) -> int:
        if self.kind is Kind.POSIT:
            return (self.total_bits - 2) * (1 << self.es)
        if self.has_inf:
            return ((1 << self.exp_bits) - 2) - self.bias
        return ((1 << self.exp_bits) - 1) - self.bias

    @property
    def min_lsb_exp(self) -> int:
        """Exponent of the smallest nonzero value's unit bit."""
        if self.kind is Kind.FXP:
            return -self.frac_bits
        if self.kind is Kind.POSIT:
            return -self.emax
        return 1 - self.bias - self.mant_bits

    @property
    def max_finite(self) -> ExactReal:
        if self.kind is Kind.FXP:
            return ExactReal(1, (1 << (self.total_bits - 1)) - 1,
                             -self.frac_bits)
        if self.kind is Kind.POSIT:
            return ExactReal(1, 1, self.emax)
        m = self.mant_bits
        if not self.has_inf:
            # top mantissa pattern is NaN; the next one down is max finite
            return ExactReal(1, (1 << (m + 1)) - 2, self.emax - m)
        return ExactReal(1, (1 << (m + 1)) - 1, self.emax - m)

    @property
    def nan_pattern(self) -> int:
        if self.kind is Kind.POSIT:
            return 1 << (self.total_bits - 1)
        if self.kind in (Kind.FLOAT, Kind.BFLOAT):
            if not self.has_inf:
                return (1 << (self.total_bits - 1)) - 1  # 0x7F
            exp_all = ((1 << self.exp_bits) - 1) << self.mant_bits
            return exp_all | (1 << (self.mant_bits - 1))
        raise ValueError(f"{self.name} has no NaN encoding")

    def inf_pattern(self, negative: bool) -> int:
        if not self.has_inf:
            raise ValueError(f"{self.name} has no infinity encoding")
        bits = ((1 << self.exp_bits) - 1) << self.mant_bits
        if negative:
            bits |= 1 << (self.total_bits - 1)
        return bits

    def hex_digits(self) -> int:
        return max(1, self.total_bits // 4)

    def __repr__(self):
        return f"FormatDescriptor({self.name!r})"


def fxp(total_bits: int, frac_bits: int | None = None) -> FormatDescriptor:
    if frac_bits is None:
        frac_bits = total_bits - 2
    return FormatDescriptor(Kind.FXP, total_bits, frac_bits=frac_bits)


def _float_fmt(exp_bits: int, mant_bits: int, *, kind: Kind = Kind.FLOAT,
               has_inf: bool = True) -> FormatDescriptor:
    total = 1 + exp_bits + mant_bits
    bias = (1 << (exp_bits - 1)) - 1
    return FormatDescriptor(kind, total, exp_bits=exp_bits,
                            mant_bits=mant_bits, bias=bias, has_inf=has_inf)


def posit(total_bits: int, es: int = 2) -> FormatDescriptor:
    return FormatDescriptor(Kind.POSIT, total_bits, es=es)


FXP4 = fxp(4)
FXP8 = fxp(8)
FXP16 = fxp(16)
FP8_E4M3 = _float_fmt(4, 3, has_inf=False)   # OFP8: no Inf, single NaN class
FP8_E5M2 = _float_fmt(5, 2)
FP16_E5M10 = _float_fmt(5, 10)
FP16_E6M9 = _float_fmt(6, 9)                 # bias 2**5 - 1 = 31
BF16 = _float_fmt(8, 7, kind=Kind.BFLOAT)
POSIT8 = posit(8)
POSIT16 = posit(16)

SUPPORTED_FORMATS = (
    "fxp4:f<k>", "fxp8:f<k>", "fxp16:f<k>", "fp8e4m3", "fp8e5m2",
    "fp16e5m10", "fp16e6m9", "bf16", "posit8", "posit16",
)

_FIXED_NAMES = {
    "fp8e4m3": FP8_E4M3,
    "fp8e5m2": FP8_E5M2,
    "fp16e5m10": FP16_E5M10,
    "fp16e6m9": FP16_E6M9,
    "bf16": BF16,
    "posit8": POSIT8,
    "posit16": POSIT16,
}


def parse_format(name: str) -> FormatDescriptor:
    """Parse a canonical format string such as ``fxp8:f4`` or ``posit16``."""
    key = name.strip().lower()
    if key in _FIXED_NAMES:
        return _FIXED_NAMES[key]
    base, _, suffix = key.partition(":")
    try:
        if base in ("fxp4", "fxp8", "fxp16"):
            total = int(base[3:])
            if not suffix:
                return fxp(total)
            if suffix.startswith("f"):
                return fxp(total, int(suffix[1:]))
        if base in ("posit8", "posit16") and suffix.startswith("e"):
            return posit(int(base[5:]), int(suffix[1:]))
    except ValueError as exc:
        raise ValueError(
            f"bad format string {name!r}; supported: {', '.join(SUPPORTED_FORMATS)}"
        ) from exc
    raise ValueError(
        f"unknown format {name!r}; supported: {', '.join(SUPPORTED_FORMATS)}"
    )


# ── encoded scalars and unpacked operands ────────────────────────


class EncodedScalar(NamedTuple):
    """A bit pattern in a specific format; bits occupy the low total_bits."""

    bits: int
    fmt: FormatDescriptor

    def hex(self) -> str:
        return f"0x{self.bits:0{self.fmt.hex_digits()}X}"


def make_scalar(bits: int, fmt: FormatDescriptor) -> EncodedScalar:
    if not 0 <= bits < (1 << fmt.total_bits):
        raise ValueError(f"bits 0x{bits:X} out of range for {fmt.name}")
    return EncodedScalar(bits, fmt)


@dataclass(frozen=True)
class UnpackedOperand:
    """Sign / scale / significand decomposition of one scalar.

    For finite values:  value = (-1)**sign * significand * 2**(scale - frac_width).
    Float/posit significands carry the hidden bit; posit significands are
    left-aligned to the format's normalized fraction width so every
    operand of a format shares one fixed-point layout.
    """

    sign: bool
    scale: int
    significand: int
    frac_width: int
    fmt: FormatDescriptor
    is_zero: bool = False
    is_nar_or_nan: bool = False
    is_inf: bool = False
    is_subnormal: bool = False

    def value(self) -> ExactReal | SpecialValue:
        if self.is_nar_or_nan:
            return SpecialValue.NAR if self.fmt.kind is Kind.POSIT else SpecialValue.NAN
        if self.is_inf:
            return SpecialValue.NEG_INF if self.sign else SpecialValue.POS_INF
        return ExactReal.from_signed_mag(self.sign, self.significand,
                                         self.scale - self.frac_width)

    @property
    def lsb_exp(self) -> int:
        return self.scale - self.frac_width


class PackResult(NamedTuple):
    scalar: EncodedScalar
    overflow: bool
    inexact: bool


# ── decode ───────────────────────────────────────────────────────


def _sign_extend(bits: int, width: int) -> int:
    if bits & (1 << (width - 1)):
        return bits - (1 << width)
    return bits


def _decode_float(bits: int, f: FormatDescriptor) -> ExactReal | SpecialValue:
    m, eb = f.mant_bits, f.exp_bits
    sign = -1 if (bits >> (f.total_bits - 1)) & 1 else 1
    e = (bits >> m) & ((1 << eb) - 1)
    frac = bits & ((1 << m) - 1)
    exp_all = (1 << eb) - 1
    if not f.has_inf:
        if e == exp_all and frac == (1 << m) - 1:
            return SpecialValue.NAN
    elif e == exp_all:
        if frac:
            return SpecialValue.NAN
        return SpecialValue.POS_INF if sign > 0 else SpecialValue.NEG_INF
    if e == 0:
        return ExactReal(sign, frac, 1 - f.bias - m)
    return ExactReal(sign, (1 << m) | frac, e - f.bias - m)


def _posit_fields(body: int, n: int, es: int) -> tuple[int, int, int, int]:
    """Split a positive posit body into (k, e, frac, frac_len)."""
    i = n - 2
    first = (body >> i) & 1
    run = 0
    while i >= 0 and ((body >> i) & 1) == first:
        run += 1
        i -= 1
    if i >= 0:
        i -= 1  # terminator bit
    k = run - 1 if first else -run
    avail = i + 1
    t = min(es, avail)
    e = ((body >> (avail - t)) & ((1 << t) - 1)) << (es - t) if t else 0
    avail -= t
    frac = body & ((1 << avail) - 1)
    return k, e, frac, avail


def _decode_posit(bits: int, f: FormatDescriptor) -> ExactReal | SpecialValue:
    n, es = f.total_bits, f.es
    if bits == 0:
        return ExactReal(1, 0, 0)
    if bits == 1 << (n - 1):
        return SpecialValue.NAR
    sign = -1 if bits >> (n - 1) else 1
    body = bits if sign > 0 else (1 << n) - bits
    k, e, frac, frac_len = _posit_fields(body, n, es)
    scale = k * (1 << es) + e
    return ExactReal(sign, (1 << frac_len) | frac, scale - frac_len)


_DECODE_MEMO: dict[FormatDescriptor, dict[int, ExactReal | SpecialValue]] = {}


def decode(s: EncodedScalar) -> ExactReal | SpecialValue:
    """Exact value of a bit pattern; total over all patterns."""
    bits, f = s
    memo = _DECODE_MEMO.get(f)
    if memo is None:
        memo = _DECODE_MEMO[f] = {}
    hit = memo.get(bits)
    if hit is not None:
        return hit
    if not 0 <= bits < (1 << f.total_bits):
        raise ValueError(f"bits 0x{bits:X} out of range for {f.name}")
    if f.kind is Kind.FXP:
        raw = _sign_extend(bits, f.total_bits)
        out = ExactReal.from_signed_mag(raw < 0, abs(raw), -f.frac_bits)
    elif f.kind is Kind.POSIT:
        out = _decode_posit(bits, f)
    else:
        out = _decode_float(bits, f)
    memo[bits] = out
    return out


# ── unpack ───────────────────────────────────────────────────────


_UNPACK_MEMO: dict[FormatDescriptor, dict[int, UnpackedOperand]] = {}


def unpack(s: EncodedScalar) -> UnpackedOperand:
    """Field decomposition consistent with decode (Stage-I view)."""
    bits, f = s
    memo = _UNPACK_MEMO.get(f)
    if memo is None:
        memo = _UNPACK_MEMO[f] = {}
    hit = memo.get(bits)
    if hit is not None:
        return hit
    out = _unpack_impl(bits, f)
    memo[bits] = out
    return out


def _unpack_impl(bits: int, f: FormatDescriptor) -> UnpackedOperand:
    if f.kind is Kind.FXP:
        raw = _sign_extend(bits, f.total_bits)
        return UnpackedOperand(
            sign=raw < 0, scale=-f.frac_bits, significand=abs(raw),
            frac_width=0, fmt=f, is_zero=raw == 0)
    if f.kind is Kind.POSIT:
        n = f.total_bits
        if bits == 0:
            return UnpackedOperand(False, 0, 0, f.posit_frac_norm, f,
                                   is_zero=True)
        if bits == 1 << (n - 1):
            return UnpackedOperand(False, 0, 0, f.posit_frac_norm, f,
                                   is_nar_or_nan=True)
        neg = bool(bits >> (n - 1))
        body = (1 << n) - bits if neg else bits
        k, e, frac, frac_len = _posit_fields(body, n, f.es)
        scale = k * (1 << f.es) + e
        norm = f.posit_frac_norm
        sig = ((1 << frac_len) | frac) << (norm - frac_len)
        return UnpackedOperand(neg, scale, sig, norm, f)
    # float / bfloat
    m, eb = f.mant_bits, f.exp_bits
    neg = bool((bits >> (f.total_bits - 1)) & 1)
    e = (bits >> m) & ((1 << eb) - 1)
    frac = bits & ((1 << m) - 1)
    exp_all = (1 << eb) - 1
    if not f.has_inf and e == exp_all and frac == (1 << m) - 1:
        return UnpackedOperand(neg, 0, 0, m, f, is_nar_or_nan=True)
    if f.has_inf and e == exp_all:
        if frac:
            return UnpackedOperand(neg, 0, 0, m, f, is_nar_or_nan=True)
        return UnpackedOperand(neg, 0, 0, m, f, is_inf=True)
    if e == 0:
        if frac == 0:
            return UnpackedOperand(neg, 0, 0, m, f, is_zero=True)
        return UnpackedOperand(neg, 1 - f.bias, frac, m, f,
                               is_subnormal=True)
    return UnpackedOperand(neg, e - f.bias, (1 << m) | frac, m, f)


# ── rounding core ────────────────────────────────────────────────


def _round_shift(mag: int, shift: int, mode: RoundingMode,
                 negative: bool) -> tuple[int, bool]:
    """Round mag / 2**shift to an integer (shift >= 1) with the signed-value
    rounding direction applied to the magnitude."""
    q = mag >> shift
    rem = mag & ((1 << shift) - 1)
    if rem == 0:
        return q, False
    if mode is RoundingMode.TOWARD_POSITIVE:
        return (q if negative else q + 1), True
    half = 1 << (shift - 1)
    if rem > half or (rem == half and q & 1):
        q += 1
    return q, True


def _round_scaled(mag: int, shift: int, mode: RoundingMode,
                  negative: bool) -> tuple[int, bool]:
    """Round mag * 2**shift to an integer."""
    if shift >= 0:
        return mag << shift, False
    return _round_shift(mag, -shift, mode, negative)


def _cmp_mag(mag_a: int, exp_a: int, mag_b: int, exp_b: int) -> int:
    e = min(exp_a, exp_b)
    a = mag_a << (exp_a - e)
    b = mag_b << (exp_b - e)
    return (a > b) - (a < b)


def _encode_fxp(negative: bool, mag: int, exp: int, f: FormatDescriptor,
                mode: RoundingMode) -> tuple[int, bool, bool]:
    n = f.total_bits
    code, inexact = _round_scaled(mag, exp + f.frac_bits, mode, negative)
    signed = -code if negative else code
    lo, hi = -(1 << (n - 1)), (1 << (n - 1)) - 1
    overflow = False
    if signed > hi:
        signed, overflow, inexact = hi, True, True
    elif signed < lo:
        signed, overflow, inexact = lo, True, True
    return signed & ((1 << n) - 1), overflow, inexact


def _encode_float(negative: bool, mag: int, exp: int, f: FormatDescriptor,
                  mode: RoundingMode) -> tuple[int, bool, bool]:
    m = f.mant_bits
    sign_bit = (1 << (f.total_bits - 1)) if negative else 0
    mx = f.max_finite
    cmp_max = _cmp_mag(mag, exp, mx.mag, mx.exp)
    if cmp_max > 0:
        return _float_overflow(negative, mag, exp, f, mode)
    emin = 1 - f.bias
    e_val = exp + mag.bit_length() - 1
    if e_val < emin:
        # subnormal quantum
        sig, inexact = _round_scaled(mag, exp - (emin - m), mode, negative)
        if sig >= (1 << m):  # rounded up into the smallest normal
            return sign_bit | (1 << m) | (sig - (1 << m)), False, inexact
        return sign_bit | sig, False, inexact
    sig, inexact = _round_scaled(mag, exp - (e_val - m), mode, negative)
    if sig == 1 << (m + 1):
        sig >>= 1
        e_val += 1
    if e_val > f.emax:
        return _float_overflow(negative, mag, exp, f, mode)
    bits = sign_bit | ((e_val + f.bias) << m) | (sig - (1 << m))
    return bits, False, inexact


def _max_finite_bits(f: FormatDescriptor) -> int:
    m = f.mant_bits
    exp_all = (1 << f.exp_bits) - 1
    if f.has_inf:
        return ((exp_all - 1) << m) | ((1 << m) - 1)
    return (exp_all << m) | ((1 << m) - 2)


def _float_overflow(negative: bool, mag: int, exp: int, f: FormatDescriptor,
                    mode: RoundingMode) -> tuple[int, bool, bool]:
    mx = f.max_finite
    max_bits = _max_finite_bits(f)
    sign_bit = (1 << (f.total_bits - 1)) if negative else 0
    if not f.has_inf:
        return sign_bit | max_bits, True, True
    if mode is RoundingMode.TOWARD_POSITIVE:
        if negative:
            return sign_bit | max_bits, True, True
        return f.inf_pattern(False), True, True
    # nearest-even: beyond max + half ulp goes to infinity
    ulp_exp = f.emax - f.mant_bits
    thresh_mag = (mx.mag << (mx.exp - (ulp_exp - 1))) + 1  # max + ulp/2
    if _cmp_mag(mag, exp, thresh_mag, ulp_exp - 1) >= 0:
        return f.inf_pattern(negative), True, True
    return sign_bit | max_bits, True, True


def _posit_floor(n: int, es: int, s: int, frac_mag: int,
                 frac_exp: int) -> tuple[int, bool]:
    """Largest posit pattern <= the positive value (1 + frac) * 2**s.

    frac = frac_mag * 2**frac_exp in [0, 1).  Returns (pattern, inexact).
    """
    k, e = divmod(s, 1 << es)
    regime_len = k + 2 if k >= 0 else 1 - k
    f_avail = n - 1 - regime_len - es
    regime = (((1 << (k + 1)) - 1) << 1) if k >= 0 else 1
    base = (regime << es) | e
    if f_avail >= 0:
        t = frac_exp + f_avail
        if t >= 0:
            return (base << f_avail) | (frac_mag << t), False
        f_int = frac_mag >> -t
        inexact = (frac_mag & ((1 << -t) - 1)) != 0
        return (base << f_avail) | f_int, inexact
    cut = -f_avail
    q = base >> cut
    inexact = (base & ((1 << cut) - 1)) != 0 or frac_mag != 0
    return q, inexact


def _posit_body_to_bits(body: int, negative: bool, n: int) -> int:
    if negative and body:
        return ((1 << n) - body) & ((1 << n) - 1)
    return body


def _encode_posit(negative: bool, mag: int, exp: int, f: FormatDescriptor,
                  mode: RoundingMode) -> tuple[int, bool, bool]:
    n, es = f.total_bits, f.es
    maxpos = (1 << (n - 1)) - 1
    S = f.emax
    bl = mag.bit_length()
    s = exp + bl - 1  # floor(log2 |v|)
    pow2 = mag == 1 << (bl - 1)

    # saturation at the ends of the projective range
    if s > S or (s == S and not pow2):
        return _posit_body_to_bits(maxpos, negative, n), True, True
    if s == S:
        return _posit_body_to_bits(maxpos, negative, n), False, False
    if s < -S or (s == -S and pow2):
        if s == -S:  # exactly minpos
            return _posit_body_to_bits(1, negative, n), False, False
        if mode is RoundingMode.TOWARD_POSITIVE:
            return _posit_body_to_bits(0 if negative else 1, negative, n), False, True
        # nearest: compare against minpos / 2, ties fall to even (zero)
        if s > -S - 1 or (s == -S - 1 and not pow2):
            return _posit_body_to_bits(1, negative, n), False, True
        return 0, False, True
    frac_mag = mag - (1 << (bl - 1))  # fraction = frac_mag * 2**-(bl-1)
    lo, inexact = _posit_floor(n, es, s, frac_mag, 1 - bl)
    if not inexact:
        return _posit_body_to_bits(lo, negative, n), False, False
    if mode is RoundingMode.TOWARD_POSITIVE:
        body = lo if negative else lo + 1
        return _posit_body_to_bits(body, negative, n), False, True
    hi = lo + 1
    v = ExactReal(1, mag, exp)
    mid = (_decoded(lo, f) + _decoded(hi, f)).half()
    c = v._cmp(mid)
    if c > 0:
        body = hi
    elif c < 0:
        body = lo
    else:
        body = lo if lo & 1 == 0 else hi
    return _posit_body_to_bits(body, negative, n), False, True


def _decoded(bits: int, f: FormatDescriptor) -> ExactReal:
    out = decode(EncodedScalar(bits, f))
    assert isinstance(out, ExactReal)
    return out


def _round_to_format(negative: bool, mag: int, exp: int, f: FormatDescriptor,
                     mode: RoundingMode) -> tuple[int, bool, bool]:
    if mag == 0:
        if negative and f.kind in (Kind.FLOAT, Kind.BFLOAT):
            return 1 << (f.total_bits - 1), False, False
        return 0, False, False
    if f.kind is Kind.FXP:
        return _encode_fxp(negative, mag, exp, f, mode)
    if f.kind is Kind.POSIT:
        return _encode_posit(negative, mag, exp, f, mode)
    return _encode_float(negative, mag, exp, f, mode)


# ── encode / pack ────────────────────────────────────────────────


def encode(x: ExactReal | SpecialValue, f: FormatDescriptor,
           mode: RoundingMode = RoundingMode.NEAREST_EVEN) -> EncodedScalar:
    """Nearest (or upward) representable encoding of an exact value.

    Posits saturate to maxpos, FxP clamps to its two's-complement range,
    E4M3 saturates to +-448 (it has no infinities); the IEEE-style
    formats overflow to infinity per the rounding mode.
    """
    if isinstance(x, SpecialValue):
        if x in (SpecialValue.NAN, SpecialValue.NAR):
            return EncodedScalar(f.nan_pattern, f)
        if f.kind in (Kind.FLOAT, Kind.BFLOAT):
            neg = x is SpecialValue.NEG_INF
            if f.has_inf:
                return EncodedScalar(f.inf_pattern(neg), f)
            sign_bit = (1 << (f.total_bits - 1)) if neg else 0
            return EncodedScalar(sign_bit | _max_finite_bits(f), f)
        raise ValueError(f"cannot encode {x.value} in {f.name}")
    bits, _, _ = _round_to_format(x.sign < 0, x.mag, x.exp, f, mode)
    return EncodedScalar(bits, f)


def pack_normalize_round(sign: bool, wide_sum: int, scale_anchor: int,
                         f: FormatDescriptor,
                         mode: RoundingMode = RoundingMode.TOWARD_POSITIVE,
                         ) -> PackResult:
    """Normalize and round an accumulator value into a format.

    The accumulator holds the signed integer ``wide_sum`` whose unit bit
    weighs 2**scale_anchor; ``sign`` flips it (kept for sign-magnitude
    callers).  Normalization counts leading bits to find the shift, the
    exponent is adjusted and the result rounds toward +inf by default.
    Overflow saturates per the format's rule and reports a sticky flag.
    """
    value = -wide_sum if sign else wide_sum
    if value == 0:
        return PackResult(EncodedScalar(0, f), False, False)
    negative = value < 0
    bits, overflow, inexact = _round_to_format(negative, abs(value),
                                               scale_anchor, f, mode)
    return PackResult(EncodedScalar(bits, f), overflow, inexact)


# ── conformance tables ───────────────────────────────────────────


def exact_decimal_str(x: ExactReal) -> str:
    """Exact decimal rendering of a dyadic rational."""
    sign = "-" if (x.sign < 0 and x.mag != 0) else ""
    if x.exp >= 0:
        return f"{sign}{x.mag << x.exp}"
    k = -x.exp
    scaled = x.mag * 5 ** k
    digits = str(scaled).rjust(k + 1, "0")
    return f"{sign}{digits[:-k]}.{digits[-k:]}"


def _pattern_flags(bits: int, f: FormatDescriptor) -> str:
    u = unpack(EncodedScalar(bits, f))
    flags = []
    if u.is_zero:
        flags.append("zero")
    if u.is_nar_or_nan:
        flags.append("nar" if f.kind is Kind.POSIT else "nan")
    if u.is_inf:
        flags.append("inf")
    if u.is_subnormal:
        flags.append("subnormal")
    return ";".join(flags)


def conformance_table_csv(f: FormatDescriptor) -> str:
    """CSV dump ``bits_hex,value_decimal,flags`` over every pattern."""
    lines = ["bits_hex,value_decimal,flags"]
    digits = f.hex_digits()
    for bits in range(1 << f.total_bits):
        v = decode(EncodedScalar(bits, f))
        if isinstance(v, SpecialValue):
            text = v.value
        else:
            text = exact_decimal_str(v)
        lines.append(f"0x{bits:0{digits}X},{text},{_pattern_flags(bits, f)}")
    return "\n".join(lines) + "\n"
