"""The SIMD MAC pipeline: lane scaling, exact accumulation, zero skip.

Shows the 16x/4x/1x throughput law across formats, the single-rounding
guarantee of exact wide accumulation, and the cycle model.
"""

import random

from polaron import (
    EncodedScalar,
    ExactReal,
    MacConfig,
    MacOp,
    PrecisionMode,
    RoundingMode,
    decode,
    dot_product,
    encode,
    oracle_dot,
    oracle_round,
    parse_format,
    run_pipeline,
)

print("=== lane allocation (shared 16-tile multiplier) ===")
for name in ("fxp4:f2", "fp8e4m3", "fp8e5m2", "fxp8:f6", "posit8", "bf16",
             "fxp16:f14", "fp16e5m10", "fp16e6m9", "posit16"):
    mode = PrecisionMode.for_format(parse_format(name))
    print(f"  {name:11s} {mode.lanes:2d} lanes "
          f"({mode.tiles_per_lane} tiles per lane)")

print("\n=== throughput for 4096 MACs ===")
for name in ("fxp4:f2", "posit8", "posit16"):
    fmt = parse_format(name)
    one = encode(ExactReal.from_int(1), fmt)
    res = dot_product([one] * 4096, [one] * 4096, MacConfig.for_format(fmt))
    print(f"  {name:11s} {res.stats.vector_ops:5d} vector ops, "
          f"{res.stats.cycles} cycles")

print("\n=== single rounding: engine vs exact-arithmetic oracle ===")
fmt = parse_format("posit8")
cfg = MacConfig.for_format(fmt)
rng = random.Random(7)
finite = [b for b in range(256) if b != 0x80]
mismatches = 0
for _ in range(2000):
    ln = rng.randint(1, 32)
    a = [EncodedScalar(rng.choice(finite), fmt) for _ in range(ln)]
    b = [EncodedScalar(rng.choice(finite), fmt) for _ in range(ln)]
    got = dot_product(a, b, cfg).result
    want = oracle_round(
        oracle_dot([decode(s) for s in a], [decode(s) for s in b]),
        fmt, RoundingMode.TOWARD_POSITIVE)
    mismatches += got.bits != want.bits
print(f"  2000 random posit8 dot products: {mismatches} mismatches")

print("\n=== zero-skip transparency ===")
on = MacConfig.for_format(fmt, zero_skip=True)
off = MacConfig.for_format(fmt, zero_skip=False)
a = [EncodedScalar(rng.choice(finite + [0] * 40), fmt) for _ in range(64)]
b = [EncodedScalar(rng.choice(finite + [0] * 40), fmt) for _ in range(64)]
r_on, r_off = dot_product(a, b, on), dot_product(a, b, off)
print(f"  results identical: {r_on.result == r_off.result}; "
      f"skipped lanes {r_on.stats.skipped_lanes} vs "
      f"{r_off.stats.skipped_lanes}")

print("\n=== mixed-mode stream, no switch stall ===")
m8 = PrecisionMode.for_format(parse_format("fxp8:f6"))
m4 = PrecisionMode.for_format(parse_format("fxp4:f2"))
rep = run_pipeline([MacOp(m8)] * 10 + [MacOp(m4)] * 6)
print(f"  16 vector ops across a mode switch: {rep.total.cycles} cycles "
      f"(fill 4 + 16)")
for name, st in rep.per_mode.items():
    print(f"    {name}: {st.vector_ops} ops")
