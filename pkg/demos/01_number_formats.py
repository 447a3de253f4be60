"""Tour of the number format codecs.

Every supported format decodes to an exact dyadic rational, so we can
print exact values, inspect field decompositions and check rounding
behaviour without any floating-point fuzz.
"""

from polaron import (
    BF16,
    FP8_E4M3,
    POSIT8,
    EncodedScalar,
    ExactReal,
    RoundingMode,
    SpecialValue,
    decode,
    encode,
    fxp,
    unpack,
)
from polaron.formats import exact_decimal_str

print("=== decoding bit patterns ===")
for fmt, bits in [(POSIT8, 0x40), (POSIT8, 0x7F), (POSIT8, 0x01),
                  (FP8_E4M3, 0x7E), (BF16, 0x3F80), (fxp(8, 4), 0xF0)]:
    v = decode(EncodedScalar(bits, fmt))
    text = v.value if isinstance(v, SpecialValue) else exact_decimal_str(v)
    print(f"  {fmt.name:10s} 0x{bits:04X} -> {text}")

print("\n=== the posit NaR and float specials ===")
print("  posit8 0x80 ->", decode(EncodedScalar(0x80, POSIT8)))
print("  e4m3   0x7F ->", decode(EncodedScalar(0x7F, FP8_E4M3)))

print("\n=== field decomposition (unpack) ===")
u = unpack(EncodedScalar(0x44, FP8_E4M3))  # 3.0
print(f"  e4m3 0x44: sign={'-' if u.sign else '+'} scale={u.scale} "
      f"significand=0b{u.significand:b} (hidden bit explicit)")

print("\n=== rounding modes ===")
third = ExactReal(1, (1 << 64) // 3 + 1, -64)  # dyadic approx of 1/3
for mode in (RoundingMode.NEAREST_EVEN, RoundingMode.TOWARD_POSITIVE):
    s = encode(third, FP8_E4M3, mode)
    print(f"  1/3 in e4m3 under {mode.value}: {s.hex()} "
          f"= {exact_decimal_str(decode(s))}")

print("\n=== saturation at the ends ===")
huge = ExactReal(1, 1, 100)
print("  2^100 in posit8  ->", encode(huge, POSIT8).hex(), "(maxpos)")
print("  2^100 in e4m3    ->", encode(huge, FP8_E4M3).hex(), "(448, no inf)")

print("\nround-trip: every finite pattern encodes back to itself")
bad = 0
for bits in range(256):
    v = decode(EncodedScalar(bits, POSIT8))
    if isinstance(v, SpecialValue):
        continue
    if encode(v, POSIT8).bits != bits:
        bad += 1
print(f"  posit8: {256 - 1 - bad}/255 finite patterns round-trip exactly")
