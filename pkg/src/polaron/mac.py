"""Five-stage SIMD multiply-accumulate pipeline emulation.

The datapath is modeled functionally but bit-exactly: operands unpack to
sign/scale/significand form, significands multiply on a grid of 4-bit
radix-2 modified-Booth tiles, lane products either enter an exact wide
(quire/Kulisch style) accumulator or are aligned against the maximum
exponent with sticky-bit compression, reduce through modeled 4:2
compressor layers, and the final value is normalized and rounded toward
+inf once.  A cycle model tracks the 16x/4x/1x lane-scaling law
(fill latency 4, one vector op per cycle).

``dot_product`` runs an internal table-driven path for exact-wide
accumulation (lane contributions are memoized results of the real
Booth-tile stage); it is bit-identical to folding ``simd_mac_step`` over
packed ``VectorWord`` registers, which the test suite asserts.
"""

from __future__ import annotations

import csv
import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .formats import (
    EncodedScalar,
    FormatDescriptor,
    Kind,
    PackResult,
    RoundingMode,
    SpecialValue,
    UnpackedOperand,
    encode,
    pack_normalize_round,
    parse_format,
    unpack,
)

__all__ = [
    "PrecisionMode",
    "VectorWord",
    "WideAccumulator",
    "Accumulation",
    "MacConfig",
    "PipelineStats",
    "DotResult",
    "MacOp",
    "PipelineReport",
    "booth_multiply_4x4",
    "tile_multiply",
    "lane_multiply",
    "LaneProduct",
    "exponent_max_align",
    "csa_reduce",
    "simd_mac_step",
    "dot_product",
    "dot_product_many",
    "run_pipeline",
    "pipeline_trace",
    "read_vector_rows",
    "VectorRow",
    "pack_elements",
    "unpack_elements",
    "configured_threads",
]


# ── precision modes and registers ────────────────────────────────


class PrecisionMode(NamedTuple):
    """Lane allocation for one format on the shared 16-tile multiplier.

    tiles_per_lane = ceil(sig_width / 4)**2 and lanes = 16 // tiles,
    which yields 16 lanes for 4-bit significands (FxP4, FP8), 4 lanes
    for 8-bit ones (FxP8, posit8, BF16) and a single lane for the
    16-bit formats.
    """

    fmt: FormatDescriptor
    lanes: int
    tiles_per_lane: int

    @classmethod
    def for_format(cls, fmt: FormatDescriptor) -> "PrecisionMode":
        tiles = ((fmt.sig_width + 3) // 4) ** 2
        lanes = 16 // tiles
        if lanes not in (16, 4, 1):
            raise ValueError(f"no lane allocation for {fmt.name}")
        return cls(fmt, lanes, tiles)

    @property
    def tile_width(self) -> int:
        return 4 * ((self.fmt.sig_width + 3) // 4)


class VectorWord(NamedTuple):
    """Packed multi-lane operand register (128-bit container).

    Lane i occupies bits [i*total_bits, (i+1)*total_bits); unused high
    bits are zero.
    """

    payload: int
    mode: PrecisionMode

    @classmethod
    def pack(cls, lane_bits: Sequence[int], mode: PrecisionMode) -> "VectorWord":
        tb = mode.fmt.total_bits
        if len(lane_bits) > mode.lanes:
            raise ValueError("too many lanes for mode")
        payload = 0
        for i, b in enumerate(lane_bits):
            if not 0 <= b < (1 << tb):
                raise ValueError(f"lane {i} bits out of range")
            payload |= b << (i * tb)
        return cls(payload, mode)

    def lane(self, i: int) -> int:
        tb = self.mode.fmt.total_bits
        return (self.payload >> (i * tb)) & ((1 << tb) - 1)

    def lanes_list(self) -> list[int]:
        return [self.lane(i) for i in range(self.mode.lanes)]


class Accumulation(enum.Enum):
    EXACT_WIDE = "exact"
    ALIGN_TO_MAX = "align"


_QUIRE_PARAMS: dict[FormatDescriptor, tuple[int, int]] = {}


def _quire_params(fmt: FormatDescriptor) -> tuple[int, int]:
    params = _QUIRE_PARAMS.get(fmt)
    if params is None:
        params = _QUIRE_PARAMS[fmt] = WideAccumulator.quire_params(fmt)
    return params


class WideAccumulator(NamedTuple):
    """Exact wide fixed-point accumulator with sticky special flags.

    value * 2**unit_scale is the held sum.  Widths hold at least 2**16
    worst-case products; exceeding the width saturates and sets
    sticky_overflow.
    """

    value: int
    width_bits: int
    unit_scale: int
    sticky_overflow: bool = False
    has_nan: bool = False
    inf_sign: int = 0  # 0 none, +1/-1 single direction, 2 conflicting

    @staticmethod
    def quire_params(fmt: FormatDescriptor) -> tuple[int, int]:
        unit = 2 * fmt.min_lsb_exp
        if fmt.kind is Kind.FXP:
            return unit, 2 * fmt.total_bits + 32
        if fmt.kind is Kind.POSIT:
            # top product bit + 16-bit accumulation guard + sign
            needed = 2 * fmt.emax - unit + 18
            width = max(16 * fmt.total_bits, (needed + 63) // 64 * 64)
            return unit, width
        span = 2 * (fmt.emax - (1 - fmt.bias)) + 2 * fmt.sig_width + 32
        return unit, span

    @classmethod
    def for_format(cls, fmt: FormatDescriptor) -> "WideAccumulator":
        unit, width = _quire_params(fmt)
        return cls(0, width, unit)

    def _clamped(self, value: int) -> "WideAccumulator":
        limit = 1 << (self.width_bits - 1)
        if -limit <= value < limit:
            return WideAccumulator(value, self.width_bits, self.unit_scale,
                                   self.sticky_overflow, self.has_nan,
                                   self.inf_sign)
        clamped = limit - 1 if value >= limit else -limit
        return WideAccumulator(clamped, self.width_bits, self.unit_scale,
                               True, self.has_nan, self.inf_sign)


@dataclass(frozen=True)
class MacConfig:
    mode: PrecisionMode
    accumulation: Accumulation = Accumulation.EXACT_WIDE
    zero_skip: bool = True
    output_format: FormatDescriptor | None = None

    def __post_init__(self):
        if (self.accumulation is Accumulation.ALIGN_TO_MAX
                and self.mode.fmt.kind is Kind.FXP):
            raise ValueError("align-to-max accumulation needs an exponent; "
                             "FxP modes use exact accumulation")

    @classmethod
    def for_format(cls, fmt: FormatDescriptor, **kw) -> "MacConfig":
        return cls(PrecisionMode.for_format(fmt), **kw)

    @property
    def out_fmt(self) -> FormatDescriptor:
        return self.output_format or self.mode.fmt


class PipelineStats(NamedTuple):
    """Cycle accounting: fill latency 4, one vector op per cycle."""

    cycles: int
    vector_ops: int
    mac_ops: int
    skipped_lanes: int
    lane_utilization: float

    @classmethod
    def from_counts(cls, vector_ops: int, lanes: int, skipped_lanes: int,
                    extra_cycles: int = 0) -> "PipelineStats":
        if vector_ops == 0:
            return cls(0, 0, 0, 0, 0.0)
        mac_ops = vector_ops * lanes - skipped_lanes
        return cls(vector_ops + 4 + extra_cycles, vector_ops, mac_ops,
                   skipped_lanes, mac_ops / (vector_ops * lanes))


# ── stage II: Booth tile multiplier ──────────────────────────────


def _booth_digits(b: int) -> tuple[int, ...]:
    """Radix-2 modified-Booth recoding of a 4-bit two's-complement input."""
    d = []
    prev = 0
    for i in range(4):
        cur = (b >> i) & 1
        d.append(prev - cur)
        prev = cur
    return tuple(d)


def _booth_product(a: int, b: int) -> int:
    """Partial-product generation and reduction for one 4x4 Booth unit."""
    total = 0
    for i, d in enumerate(_booth_digits(b & 0xF)):
        if d:
            total += (d * a) << i
    return total


# combinational truth table of the 4x4 unit, indexed by raw bit patterns
_BOOTH_TABLE = [
    [_booth_product(a - 16 if a >= 8 else a, b) for b in range(16)]
    for a in range(16)
]


def booth_multiply_4x4(a: int, b: int) -> int:
    """Signed 4-bit product via radix-2 modified-Booth recoding."""
    if not (-8 <= a <= 7 and -8 <= b <= 7):
        raise ValueError("operands must be 4-bit signed")
    return _BOOTH_TABLE[a & 0xF][b & 0xF]


def tile_multiply(a: int, b: int, width: int) -> int:
    """Unsigned multiply built from signed 4x4 Booth tiles.

    Each operand splits into 4-bit digits; a digit with its top bit set
    reads as a negative signed input to the Booth tile, so a correction
    of +16 times the other digit (and +256 when both wrap) recombines
    the unsigned product.  Exact for all operands within ``width`` bits.
    """
    if width not in (4, 8, 12, 16):
        raise ValueError("width must be 4, 8, 12 or 16")
    if not (0 <= a < (1 << width) and 0 <= b < (1 << width)):
        raise ValueError("operands exceed tile width")
    d = width // 4
    total = 0
    for i in range(d):
        da = (a >> (4 * i)) & 0xF
        sa = da - 16 if da >= 8 else da
        row = _BOOTH_TABLE[da]
        for j in range(d):
            db = (b >> (4 * j)) & 0xF
            p = row[db]
            if db >= 8:
                p += sa << 4
            if da >= 8:
                p += (db - 16 if db >= 8 else db) << 4
                if db >= 8:
                    p += 256
            total += p << (4 * (i + j))
    return total


# ── lane products ────────────────────────────────────────────────


class LaneProduct(NamedTuple):
    neg: bool
    mag: int
    scale: int       # sum of operand scales
    lsb: int         # exponent of the product's unit bit
    is_zero: bool
    is_nan: bool
    inf: int         # 0 none, +1 / -1


_ZERO_PRODUCT = LaneProduct(False, 0, 0, 0, True, False, 0)
_NAN_PRODUCT = LaneProduct(False, 0, 0, 0, False, True, 0)


def lane_multiply(a: UnpackedOperand, b: UnpackedOperand,
                  mode: PrecisionMode) -> LaneProduct:
    """One lane: XOR sign, Booth-tile significand product, scale sum.

    NaN/NaR absorbs; inf times zero is NaN; zero lanes carry a zero flag.
    """
    if a.is_nar_or_nan or b.is_nar_or_nan:
        return _NAN_PRODUCT
    if a.is_inf or b.is_inf:
        if a.is_zero or b.is_zero:
            return _NAN_PRODUCT
        sign = a.sign ^ b.sign
        return LaneProduct(sign, 0, 0, 0, False, False, -1 if sign else 1)
    if a.is_zero or b.is_zero:
        return _ZERO_PRODUCT
    mag = tile_multiply(a.significand, b.significand, mode.tile_width)
    scale = a.scale + b.scale
    lsb = a.lsb_exp + b.lsb_exp
    return LaneProduct(a.sign ^ b.sign, mag, scale, lsb, False, False, 0)


_PROD_MEMO: dict[FormatDescriptor, dict[int, LaneProduct]] = {}

# per-format memo of quire contributions: key -> (addend, flags)
# flags: 1 zero, 2 nan, 4 +inf, 8 -inf
_ADDEND_MEMO: dict[FormatDescriptor, dict[int, tuple[int, int]]] = {}


def _lane_product_pair(a_bits: int, b_bits: int,
                       mode: PrecisionMode) -> LaneProduct:
    fmt = mode.fmt
    return lane_multiply(unpack(EncodedScalar(a_bits, fmt)),
                         unpack(EncodedScalar(b_bits, fmt)), mode)


def _addend_entry(key: int, mode: PrecisionMode, unit: int) -> tuple[int, int]:
    p = _lane_product_pair(key >> 16, key & 0xFFFF, mode)
    if p.is_zero:
        return 0, 1
    if p.is_nan:
        return 0, 2
    if p.inf:
        return 0, 4 if p.inf > 0 else 8
    mag, lsb = p.mag, p.lsb
    tz = (mag & -mag).bit_length() - 1
    if tz:
        mag >>= tz
        lsb += tz
    shift = lsb - unit
    if shift < 0:
        raise AssertionError("quire unit scale too coarse")
    return (-mag if p.neg else mag) << shift, 0


# ── stage III/IV: alignment and compressor reduction ─────────────


def exponent_max_align(products: Sequence[LaneProduct],
                       ) -> tuple[int, list[int]]:
    """Two's-complement lane products aligned to the maximum exponent.

    Each significand is negated per its sign, then right-shifted by
    (max_scale - scale) with every shifted-out bit ORed into the sticky
    LSB.  Zero lanes align to 0 and do not influence the maximum.
    Returns (max_scale, aligned integers).
    """
    live = [p for p in products if not p.is_zero]
    if not live:
        return 0, [0] * len(products)
    max_scale = max(p.scale for p in live)
    aligned = []
    for p in products:
        if p.is_zero:
            aligned.append(0)
            continue
        sv = -p.mag if p.neg else p.mag
        shift = max_scale - p.scale
        if shift:
            kept = sv >> shift
            if kept << shift != sv:
                kept |= 1  # sticky
            aligned.append(kept)
        else:
            aligned.append(sv)
    return max_scale, aligned


def _csa_3to2(a: int, b: int, c: int) -> tuple[int, int]:
    """Carry-save compressor: a+b+c == sum + carry, no carry propagation."""
    return a ^ b ^ c, ((a & b) | (a & c) | (b & c)) << 1


def csa_reduce(addends: Sequence[int], trace: list[str] | None = None) -> int:
    """Reduce addends through 4:2 compressor layers plus a final add.

    Functionally the exact integer sum; the layer structure is
    observable through the optional trace.
    """
    vals = list(addends)
    if not vals:
        return 0
    layer = 0
    while len(vals) > 2:
        nxt = []
        i = 0
        while i + 4 <= len(vals):
            s1, c1 = _csa_3to2(vals[i], vals[i + 1], vals[i + 2])
            s2, c2 = _csa_3to2(s1, c1, vals[i + 3])
            nxt.extend((s2, c2))
            i += 4
        rest = vals[i:]
        if len(rest) == 3:
            nxt.extend(_csa_3to2(*rest))
        else:
            nxt.extend(rest)
        if trace is not None:
            trace.append(f"csa layer={layer} in={len(vals)} out={len(nxt)}")
        vals = nxt
        layer += 1
    total = sum(vals)  # carry-select final addition
    if trace is not None:
        trace.append(f"csla out={total}")
    return total


# ── stage composition ────────────────────────────────────────────


def _word_products(va: VectorWord, vb: VectorWord,
                   cfg: MacConfig) -> list[LaneProduct]:
    mode = cfg.mode
    fmt = mode.fmt
    tb = fmt.total_bits
    mask = (1 << tb) - 1
    pa, pb = va.payload, vb.payload
    if tb <= 8:
        memo = _PROD_MEMO.get(fmt)
        if memo is None:
            memo = _PROD_MEMO[fmt] = {}
        out = []
        for i in range(mode.lanes):
            sh = i * tb
            key = (((pa >> sh) & mask) << 8) | ((pb >> sh) & mask)
            hit = memo.get(key)
            if hit is None:
                hit = _lane_product_pair(key >> 8, key & 0xFF, mode)
                memo[key] = hit
            out.append(hit)
        return out
    return [
        _lane_product_pair((pa >> (i * tb)) & mask, (pb >> (i * tb)) & mask,
                           mode)
        for i in range(mode.lanes)
    ]


def _accumulate(acc: WideAccumulator, products: Sequence[LaneProduct],
                cfg: MacConfig) -> WideAccumulator:
    has_nan = acc.has_nan
    inf_sign = acc.inf_sign
    live = []
    for p in products:
        if p.is_nan:
            has_nan = True
        elif p.inf:
            if inf_sign == 0:
                inf_sign = p.inf
            elif inf_sign != p.inf:
                inf_sign = 2
        elif not (p.is_zero and cfg.zero_skip):
            live.append(p)
    if has_nan != acc.has_nan or inf_sign != acc.inf_sign:
        acc = WideAccumulator(acc.value, acc.width_bits, acc.unit_scale,
                              acc.sticky_overflow, has_nan, inf_sign)
    if not live:
        return acc

    if cfg.accumulation is Accumulation.EXACT_WIDE:
        unit = acc.unit_scale
        addends = []
        for p in live:
            if p.is_zero:
                continue
            mag, lsb = p.mag, p.lsb
            tz = (mag & -mag).bit_length() - 1
            if tz:
                mag >>= tz
                lsb += tz
            shift = lsb - unit
            if shift < 0:
                raise AssertionError("quire unit scale too coarse")
            addends.append((-mag if p.neg else mag) << shift)
        if not addends:
            return acc
        addends.append(acc.value)
        return acc._clamped(csa_reduce(addends))

    # align-to-max: lane products against the max exponent, then the
    # running accumulator joins at the higher of the two anchors
    nonzero = [p for p in live if not p.is_zero]
    if not nonzero:
        return acc
    max_scale, aligned = exponent_max_align(nonzero)
    step = csa_reduce(aligned)
    step_lsb = max_scale - 2 * cfg.mode.fmt.unpacked_frac_width
    if acc.value == 0 and acc.unit_scale <= step_lsb:
        return WideAccumulator(acc.value, acc.width_bits, step_lsb,
                               acc.sticky_overflow, acc.has_nan,
                               acc.inf_sign)._clamped(step)
    anchor = max(acc.unit_scale, step_lsb)
    parts = []
    for v, lsb in ((acc.value, acc.unit_scale), (step, step_lsb)):
        shift = anchor - lsb
        if shift:
            kept = v >> shift
            if kept << shift != v:
                kept |= 1
            parts.append(kept)
        else:
            parts.append(v)
    return WideAccumulator(acc.value, acc.width_bits, anchor,
                           acc.sticky_overflow, acc.has_nan,
                           acc.inf_sign)._clamped(parts[0] + parts[1])


def simd_mac_step(va: VectorWord, vb: VectorWord, acc: WideAccumulator,
                  cfg: MacConfig) -> WideAccumulator:
    """One vector MAC: unpack, multiply, (skip), align, reduce, add."""
    if va.mode != cfg.mode or vb.mode != cfg.mode:
        raise ValueError("vector word mode does not match configuration")
    return _accumulate(acc, _word_products(va, vb, cfg), cfg)


class DotResult(NamedTuple):
    result: EncodedScalar
    stats: PipelineStats
    overflow: bool


def _finish(acc: WideAccumulator, out_fmt: FormatDescriptor) -> PackResult:
    if acc.has_nan or acc.inf_sign == 2:
        return PackResult(EncodedScalar(out_fmt.nan_pattern, out_fmt),
                          False, False)
    if acc.inf_sign:
        if out_fmt.kind is Kind.POSIT:
            return PackResult(EncodedScalar(out_fmt.nan_pattern, out_fmt),
                              True, False)
        if out_fmt.kind is Kind.FXP:
            bits = ((1 << (out_fmt.total_bits - 1)) - 1
                    if acc.inf_sign > 0 else 1 << (out_fmt.total_bits - 1))
            return PackResult(EncodedScalar(bits, out_fmt), True, False)
        if out_fmt.has_inf:
            return PackResult(
                EncodedScalar(out_fmt.inf_pattern(acc.inf_sign < 0), out_fmt),
                False, False)
        special = (SpecialValue.POS_INF if acc.inf_sign > 0
                   else SpecialValue.NEG_INF)
        return PackResult(encode(special, out_fmt), True, False)
    res = pack_normalize_round(False, acc.value, acc.unit_scale, out_fmt,
                               RoundingMode.TOWARD_POSITIVE)
    if acc.sticky_overflow:
        return PackResult(res.scalar, True, res.inexact)
    return res


def _dot_product_steps(a: Sequence[EncodedScalar], b: Sequence[EncodedScalar],
                       cfg: MacConfig,
                       trace: list[str] | None) -> DotResult:
    """Literal composition: pack VectorWords, fold simd_mac_step."""
    fmt = cfg.mode.fmt
    out_fmt = cfg.out_fmt
    n = len(a)
    lanes = cfg.mode.lanes
    vector_ops = -(-n // lanes)
    acc = WideAccumulator.for_format(fmt)
    skipped = vector_ops * lanes - n  # padding lanes are never useful
    pos = 0
    for _ in range(vector_ops):
        chunk_a = [s.bits for s in a[pos:pos + lanes]]
        chunk_b = [s.bits for s in b[pos:pos + lanes]]
        va = VectorWord.pack(chunk_a, cfg.mode)
        vb = VectorWord.pack(chunk_b, cfg.mode)
        if cfg.zero_skip:
            prods = _word_products(va, vb, cfg)
            skipped += sum(1 for p in prods[:len(chunk_a)] if p.is_zero)
            acc = _accumulate(acc, prods, cfg)
        else:
            acc = simd_mac_step(va, vb, acc, cfg)
        pos += lanes
    packed = _finish(acc, out_fmt)
    if trace is not None:
        trace.extend(pipeline_trace(vector_ops, cfg.mode))
    return DotResult(packed.scalar, PipelineStats.from_counts(
        vector_ops, lanes, skipped), packed.overflow)


def _dot_product_fast(a: Sequence[EncodedScalar], b: Sequence[EncodedScalar],
                      cfg: MacConfig) -> DotResult:
    """Exact-wide path via memoized Booth-tile lane contributions.

    Bit-identical to ``_dot_product_steps`` (asserted by tests): lane
    addends come from the same unpack/tile-multiply stages, the quire
    sum is associative, and the per-word saturation check is replayed
    at the same word boundaries.
    """
    mode = cfg.mode
    fmt = mode.fmt
    n = len(a)
    lanes = mode.lanes
    vector_ops = -(-n // lanes)
    unit, width = _quire_params(fmt)
    limit = 1 << (width - 1)
    memo = _ADDEND_MEMO.get(fmt)
    if memo is None:
        memo = _ADDEND_MEMO[fmt] = {}
    total = 0
    flags = 0
    zero_lanes = 0
    sticky = False
    memo_get = memo.get
    if vector_ops == 1:
        for sa, sb in zip(a, b):
            key = (sa[0] << 16) | sb[0]
            ent = memo_get(key)
            if ent is None:
                ent = _addend_entry(key, mode, unit)
                memo[key] = ent
            if ent[1]:
                flags |= ent[1]
                zero_lanes += ent[1] & 1
            else:
                total += ent[0]
        if not -limit <= total < limit:
            total = limit - 1 if total >= limit else -limit
            sticky = True
    else:
        pos = 0
        while pos < n:
            end = pos + lanes
            if end > n:
                end = n
            word_sum = 0
            for i in range(pos, end):
                key = (a[i].bits << 16) | b[i].bits
                ent = memo_get(key)
                if ent is None:
                    ent = _addend_entry(key, mode, unit)
                    memo[key] = ent
                ad, fl = ent
                if fl:
                    flags |= fl
                    zero_lanes += fl & 1
                else:
                    word_sum += ad
            total += word_sum
            if not -limit <= total < limit:
                total = limit - 1 if total >= limit else -limit
                sticky = True
            pos = end
    skipped = vector_ops * lanes - n
    if cfg.zero_skip:
        skipped += zero_lanes
    mac_ops = vector_ops * lanes - skipped
    stats = PipelineStats(vector_ops + 4, vector_ops, mac_ops, skipped,
                          mac_ops / (vector_ops * lanes))
    if flags & 12 or flags & 2:
        acc = WideAccumulator(total, width, unit, sticky, bool(flags & 2),
                              2 if (flags & 4 and flags & 8) else
                              (1 if flags & 4 else (-1 if flags & 8 else 0)))
        packed = _finish(acc, cfg.out_fmt)
        return DotResult(packed.scalar, stats, packed.overflow)
    packed = pack_normalize_round(False, total, unit, cfg.out_fmt,
                                  RoundingMode.TOWARD_POSITIVE)
    return DotResult(packed.scalar, stats, packed.overflow or sticky)


def dot_product(a: Sequence[EncodedScalar], b: Sequence[EncodedScalar],
                cfg: MacConfig, trace: list[str] | None = None) -> DotResult:
    """Full-vector dot product with a single final rounding.

    Inputs need not be lane multiples; the tail is padded with zero
    lanes which are always skipped and counted as non-useful.  With
    exact accumulation the result equals the correctly rounded
    (toward +inf) exact sum of products.
    """
    if len(a) != len(b):
        raise ValueError("vector length mismatch")
    if len(a) == 0:
        return DotResult(EncodedScalar(0, cfg.out_fmt),
                         PipelineStats.from_counts(0, cfg.mode.lanes, 0),
                         False)
    if trace is None and cfg.accumulation is Accumulation.EXACT_WIDE:
        return _dot_product_fast(a, b, cfg)
    return _dot_product_steps(a, b, cfg, trace)


def configured_threads() -> int:
    try:
        return max(1, int(os.environ.get("POLARON_THREADS", "1")))
    except ValueError:
        return 1


def dot_product_many(pairs: Sequence[tuple[Sequence[EncodedScalar],
                                           Sequence[EncodedScalar]]],
                     cfg: MacConfig,
                     threads: int | None = None) -> list[DotResult]:
    """Evaluate independent dot products, optionally across threads.

    Results are collected in submission order, so any thread count
    produces bit-identical output.
    """
    if threads is None:
        threads = configured_threads()
    if threads <= 1 or len(pairs) < 2:
        return [dot_product(a, b, cfg) for a, b in pairs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda p: dot_product(p[0], p[1], cfg), pairs))


# ── pipeline-level cycle accounting ──────────────────────────────


class MacOp(NamedTuple):
    """Descriptor for one issued vector MAC operation."""

    mode: PrecisionMode
    skipped_lanes: int = 0


class PipelineReport(NamedTuple):
    total: PipelineStats
    per_mode: dict[str, PipelineStats]


def run_pipeline(ops: Iterable[MacOp],
                 mode_switch_penalty: int = 0) -> PipelineReport:
    """Cycle accounting over a stream of vector MACs.

    The pipeline stays full across mode switches (penalty configurable,
    default 0).  Per-mode partitions are reported as standalone runs.
    """
    per_mode_counts: dict[str, list[int]] = {}
    per_mode_lanes: dict[str, int] = {}
    total_ops = 0
    switches = 0
    prev = None
    for op in ops:
        name = op.mode.fmt.name
        if prev is not None and name != prev:
            switches += 1
        prev = name
        cnt = per_mode_counts.setdefault(name, [0, 0])
        cnt[0] += 1
        cnt[1] += op.skipped_lanes
        per_mode_lanes[name] = op.mode.lanes
        total_ops += 1
    per_mode = {
        name: PipelineStats.from_counts(c[0], per_mode_lanes[name], c[1])
        for name, c in per_mode_counts.items()
    }
    total_skip = sum(c[1] for c in per_mode_counts.values())
    total_mac = sum(s.mac_ops for s in per_mode.values())
    if total_ops == 0:
        total = PipelineStats(0, 0, 0, 0, 0.0)
    else:
        denom = total_mac + total_skip
        total = PipelineStats(
            total_ops + 4 + mode_switch_penalty * switches,
            total_ops, total_mac, total_skip,
            total_mac / denom if denom else 0.0)
    return PipelineReport(total, per_mode)


_STAGES = ("S1-unpack", "S2-multiply", "S3-align", "S4-reduce", "S5-round")


def pipeline_trace(vector_ops: int, mode: PrecisionMode) -> list[str]:
    """One line per stage per cycle, stable field order."""
    lines = []
    name = mode.fmt.name
    for cycle in range(vector_ops + 4 if vector_ops else 0):
        for s, stage in enumerate(_STAGES):
            op = cycle - s
            if 0 <= op < vector_ops:
                lines.append(f"cycle={cycle} stage={stage} op={op} mode={name}")
    return lines


# ── vector test file format ──────────────────────────────────────


class VectorRow(NamedTuple):
    mode: str
    a_hex: str
    b_hex: str
    expect_hex: str


def pack_elements(elements: Sequence[int], fmt: FormatDescriptor) -> str:
    """Lane-packed hex payload: element i at bits [i*tb, (i+1)*tb)."""
    tb = fmt.total_bits
    payload = 0
    for i, e in enumerate(elements):
        if not 0 <= e < (1 << tb):
            raise ValueError("element out of range")
        payload |= e << (i * tb)
    digits = max(1, (len(elements) * tb + 3) // 4)
    return f"{payload:0{digits}x}"


def unpack_elements(hex_payload: str, fmt: FormatDescriptor) -> list[int]:
    tb = fmt.total_bits
    if (len(hex_payload) * 4) % tb:
        raise ValueError("payload length is not a whole number of lanes")
    count = len(hex_payload) * 4 // tb
    payload = int(hex_payload, 16)
    mask = (1 << tb) - 1
    return [(payload >> (i * tb)) & mask for i in range(count)]


def read_vector_rows(path: str) -> list[VectorRow]:
    """Parse a ``mode,a_hex,b_hex,expect_hex`` CSV vector file."""
    rows: list[VectorRow] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:4]] != [
                "mode", "a_hex", "b_hex", "expect_hex"]:
            raise ValueError(f"{path}: expected header mode,a_hex,b_hex,expect_hex")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                raise ValueError(f"{path}:{lineno}: need mode,a_hex,b_hex")
            expect = row[3].strip() if len(row) > 3 else ""
            parse_format(row[0].strip())  # validate early, with line info
            rows.append(VectorRow(row[0].strip(), row[1].strip(),
                                  row[2].strip(), expect))
    return rows
