"""Command-line front end: codecs, verification, MAC runs, quantization
and the execution simulator.

Exit codes: 0 success, 1 verification failure, 2 usage/config error.
All outputs are byte-stable for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

import numpy as np

from . import engine as eng
from .formats import (
    EncodedScalar,
    ExactReal,
    Kind,
    RoundingMode,
    SpecialValue,
    SUPPORTED_FORMATS,
    conformance_table_csv,
    decode,
    encode,
    exact_decimal_str,
    parse_format,
    unpack,
)
from .mac import (
    Accumulation,
    MacConfig,
    dot_product,
    dot_product_many,
    read_vector_rows,
    unpack_elements,
)
from .oracle import oracle_dot, oracle_round
from .quantize import PolicyConfig, QuantPlan, read_tensor, write_tensor

ALL_FORMAT_NAMES = ("fxp4:f2", "fxp8:f6", "fxp16:f14", "fp8e4m3", "fp8e5m2",
                    "fp16e5m10", "fp16e6m9", "bf16", "posit8", "posit16")


def _fail(msg: str, code: int = 2) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


# ── fmt ──────────────────────────────────────────────────────────


def cmd_fmt(args) -> int:
    try:
        fmt = parse_format(args.format)
    except ValueError as exc:
        return _fail(str(exc))
    if args.table:
        sys.stdout.write(conformance_table_csv(fmt))
        return 0
    mode = (RoundingMode.TOWARD_POSITIVE if args.round == "rtp"
            else RoundingMode.NEAREST_EVEN)
    if args.bits is not None:
        try:
            bits = int(args.bits, 0)
            s = EncodedScalar(bits, fmt)
            if not 0 <= bits < (1 << fmt.total_bits):
                raise ValueError(f"bits out of range for {fmt.name}")
        except ValueError as exc:
            return _fail(str(exc))
        v = decode(s)
        u = unpack(s)
        print(f"format {fmt.name}")
        print(f"bits {s.hex()}")
        if isinstance(v, SpecialValue):
            print(f"value {v.value}")
        else:
            print(f"value {exact_decimal_str(v)}")
        print(f"sign {'-' if u.sign else '+'}")
        print(f"scale {u.scale}")
        print(f"significand 0x{u.significand:X}")
        flags = [n for n, b in (("zero", u.is_zero),
                                ("nan_or_nar", u.is_nar_or_nan),
                                ("inf", u.is_inf),
                                ("subnormal", u.is_subnormal)) if b]
        print(f"flags {','.join(flags)}")
        return 0
    if args.value is not None:
        try:
            x = ExactReal.from_float(float(args.value))
        except (ValueError, OverflowError) as exc:
            return _fail(f"bad value {args.value!r}: {exc}")
        s = encode(x, fmt, mode)
        v = decode(s)
        print(f"format {fmt.name}")
        print(f"bits {s.hex()}")
        text = v.value if isinstance(v, SpecialValue) else exact_decimal_str(v)
        print(f"value {text}")
        return 0
    return _fail("need one of --bits, --value or --table")


# ── verify ───────────────────────────────────────────────────────


def _verify_codec_roundtrip() -> tuple[int, list[str]]:
    cases = 0
    bad: list[str] = []
    for name in ALL_FORMAT_NAMES:
        fmt = parse_format(name)
        prev_val = None
        order = _value_ordering(fmt)
        for bits in order:
            s = EncodedScalar(bits, fmt)
            v = decode(s)
            cases += 1
            if isinstance(v, SpecialValue):
                continue
            back = encode(v, fmt, RoundingMode.NEAREST_EVEN)
            if back.bits != bits:
                bad.append(f"{fmt.name} {s.hex()} -> {back.hex()}")
            if prev_val is not None and v < prev_val:
                bad.append(f"{fmt.name} order break at {s.hex()}")
            prev_val = v
    return cases, bad


def _value_ordering(fmt) -> list[int]:
    n = fmt.total_bits
    half = 1 << (n - 1)
    keep = []
    for b in range(1 << n):
        if isinstance(decode(EncodedScalar(b, fmt)), SpecialValue):
            continue
        keep.append(b)
    if fmt.kind in (Kind.POSIT, Kind.FXP):
        return sorted(keep, key=lambda b: b - (1 << n) if b >= half else b)
    return sorted(keep, key=lambda b: -(b & (half - 1)) if b & half
                  else (b & (half - 1)))


def _verify_dot_exact(trials: int, seed: int) -> tuple[int, list[str]]:
    rng = random.Random(seed)
    bad: list[str] = []
    cases = 0
    for name in ALL_FORMAT_NAMES:
        fmt = parse_format(name)
        cfg = MacConfig.for_format(fmt)
        finite = [b for b in range(1 << fmt.total_bits)
                  if not isinstance(decode(EncodedScalar(b, fmt)),
                                    SpecialValue)]
        pairs = []
        for _ in range(trials):
            ln = rng.randint(1, 32)
            pairs.append((
                [EncodedScalar(rng.choice(finite), fmt) for _ in range(ln)],
                [EncodedScalar(rng.choice(finite), fmt) for _ in range(ln)]))
        results = dot_product_many(pairs, cfg)
        for (av, bv), res in zip(pairs, results):
            cases += 1
            want = oracle_round(
                oracle_dot([decode(s) for s in av], [decode(s) for s in bv]),
                fmt, RoundingMode.TOWARD_POSITIVE)
            if res.result.bits != want.bits:
                bad.append(f"{fmt.name} got {res.result.hex()} "
                           f"want 0x{want.bits:X}")
    return cases, bad


def _verify_throughput() -> tuple[int, list[str]]:
    groups = {16: ("fxp4:f2", "fp8e4m3", "fp8e5m2"),
              4: ("fxp8:f6", "posit8", "bf16"),
              1: ("fxp16:f14", "fp16e5m10", "fp16e6m9", "posit16")}
    macs = 4096
    bad: list[str] = []
    cases = 0
    for lanes, names in groups.items():
        for name in names:
            fmt = parse_format(name)
            cfg = MacConfig.for_format(fmt)
            one = encode(ExactReal.from_int(1), fmt)
            vec = [one] * macs
            res = dot_product(vec, vec, cfg)
            cases += 1
            want = macs // lanes
            if res.stats.vector_ops != want:
                bad.append(f"{name}: vector_ops {res.stats.vector_ops} "
                           f"want {want}")
    return cases, bad


def cmd_verify(args) -> int:
    suites = {
        "codec-roundtrip": lambda: _verify_codec_roundtrip(),
        "dot-exact": lambda: _verify_dot_exact(args.trials, args.seed),
        "throughput": lambda: _verify_throughput(),
    }
    if args.suite == "all":
        selected = list(suites)
    elif args.suite in suites:
        selected = [args.suite]
    else:
        return _fail(f"unknown suite {args.suite!r}; "
                     f"choose from {', '.join(suites)} or all")
    failures = 0
    for name in selected:
        cases, bad = suites[name]()
        status = "pass" if not bad else "FAIL"
        print(f"{name}: {status} ({cases} cases)")
        for line in bad[:10]:
            print(f"  counterexample: {line}")
        failures += len(bad)
    return 1 if failures else 0


# ── mac ──────────────────────────────────────────────────────────


def cmd_mac(args) -> int:
    try:
        rows = read_vector_rows(args.vectors)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    accumulation = (Accumulation.ALIGN_TO_MAX if args.accumulation == "align"
                    else Accumulation.EXACT_WIDE)
    mismatches = 0
    for i, row in enumerate(rows, start=1):
        fmt = parse_format(row.mode)
        try:
            cfg = MacConfig.for_format(fmt, accumulation=accumulation,
                                       zero_skip=not args.no_zero_skip)
        except ValueError as exc:
            return _fail(f"row {i}: {exc}")
        try:
            a = [EncodedScalar(b, fmt) for b in unpack_elements(row.a_hex, fmt)]
            b = [EncodedScalar(x, fmt) for x in unpack_elements(row.b_hex, fmt)]
        except ValueError as exc:
            return _fail(f"row {i}: {exc}")
        if len(a) != len(b):
            return _fail(f"row {i}: operand length mismatch")
        trace: list[str] | None = [] if args.trace else None
        res = dot_product(a, b, cfg, trace=trace)
        st = res.stats
        line = (f"row={i} mode={fmt.name} result={res.result.hex()} "
                f"cycles={st.cycles} vector_ops={st.vector_ops} "
                f"mac_ops={st.mac_ops} skipped={st.skipped_lanes} "
                f"util={st.lane_utilization:.6f}")
        if row.expect_hex:
            want = int(row.expect_hex, 16)
            ok = want == res.result.bits
            line += f" expect=0x{want:X} match={'yes' if ok else 'NO'}"
            if not ok:
                mismatches += 1
        print(line)
        if trace:
            for t in trace:
                print(f"  {t}")
    return 1 if mismatches else 0


# ── quantize ─────────────────────────────────────────────────────


def cmd_quantize(args) -> int:
    try:
        model = eng.load_model(args.model)
        calib_x = read_tensor(f"{args.model}/calib_x.plrn")
        calib_y = read_tensor(f"{args.model}/calib_y.plrn").astype(np.int64)
    except (OSError, ValueError) as exc:
        return _fail(f"cannot load model/calibration: {exc}")
    rng = np.random.default_rng(args.seed)
    idx = rng.permutation(len(calib_x))[:args.calib_size]
    policy = PolicyConfig(p_low=args.p_low, p_high=args.p_high)
    try:
        plan = eng.build_plan(model, (calib_x[idx], calib_y[idx]), policy,
                              symmetric=args.compat_symmetric)
    except ValueError as exc:
        return _fail(str(exc))
    with open(args.out, "w") as fh:
        fh.write(plan.to_json())
    widths = {e.layer_id: e.n for e in plan.entries.values()}
    print(f"plan written to {args.out}: {widths}")
    return 0


# ── run ──────────────────────────────────────────────────────────


def cmd_run(args) -> int:
    try:
        model = eng.load_model(args.model)
        x = read_tensor(args.input)
        plan = None
        if args.plan:
            with open(args.plan) as fh:
                plan = QuantPlan.from_json(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        return _fail(f"cannot load inputs: {exc}")
    cfg = eng.EngineConfig()
    if args.train:
        try:
            labels = read_tensor(args.labels).astype(np.int64)
        except (OSError, ValueError, TypeError) as exc:
            return _fail(f"training needs --labels: {exc}")
        hyper = eng.TrainConfig(lr=args.lr, seed=args.seed)
        losses = eng.train_epochs(model, (x, labels), plan, hyper,
                                  args.epochs, cfg)
        acc = eng.evaluate(model, x, labels, plan, cfg)
        if args.out_model:
            eng.save_model(model, args.out_model)
        payload = {"losses": losses, "train_accuracy": acc}
        if args.stats:
            with open(args.stats, "w") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
        print(f"trained {args.epochs} epochs: "
              f"loss {losses[0]:.6f} -> {losses[-1]:.6f} acc {acc:.4f}")
        return 0
    try:
        out, stats = eng.run_inference(model, x, plan, cfg)
    except ValueError as exc:
        return _fail(str(exc))
    if args.output:
        write_tensor(args.output, out)
    if args.stats:
        with open(args.stats, "w") as fh:
            json.dump(stats.to_dict(), fh, indent=2)
            fh.write("\n")
    d = stats.to_dict()
    print(f"inference ok: cycles={d['cycles']} macs={d['macs']} "
          f"utilization={d['utilization']:.6f} conflicts={d['conflicts']}")
    return 0


# ── entry point ──────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="polaron",
        description="Trans-precision MAC emulator, quantizer and simulator")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fmt", help="encode/decode/inspect scalars")
    f.add_argument("--format", required=True,
                   help=f"one of: {', '.join(SUPPORTED_FORMATS)}")
    f.add_argument("--bits", help="bit pattern, e.g. 0x40")
    f.add_argument("--value", help="decimal value to encode")
    f.add_argument("--round", choices=("ne", "rtp"), default="ne")
    f.add_argument("--table", action="store_true",
                   help="dump the conformance CSV for the format")
    f.set_defaults(fn=cmd_fmt)

    v = sub.add_parser("verify", help="oracle-equivalence suites")
    v.add_argument("--suite", default="all",
                   help="codec-roundtrip | dot-exact | throughput | all")
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(fn=cmd_verify)

    m = sub.add_parser("mac", help="run dot products from a CSV vector file")
    m.add_argument("--vectors", required=True)
    m.add_argument("--accumulation", choices=("exact", "align"),
                   default="exact")
    m.add_argument("--no-zero-skip", action="store_true")
    m.add_argument("--trace", action="store_true")
    m.set_defaults(fn=cmd_mac)

    q = sub.add_parser("quantize", help="build a per-layer precision plan")
    q.add_argument("--model", required=True, help="model directory")
    q.add_argument("--out", required=True, help="plan JSON path")
    q.add_argument("--p-low", type=float, default=30.0)
    q.add_argument("--p-high", type=float, default=85.0)
    q.add_argument("--calib-size", type=int, default=64)
    q.add_argument("--compat-symmetric", action="store_true",
                   help="use the symmetric [-1,1] threshold mode")
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(fn=cmd_quantize)

    r = sub.add_parser("run", help="simulate inference or training")
    r.add_argument("--model", required=True)
    r.add_argument("--plan")
    r.add_argument("--input", required=True)
    r.add_argument("--output")
    r.add_argument("--stats")
    r.add_argument("--train", action="store_true")
    r.add_argument("--labels")
    r.add_argument("--out-model")
    r.add_argument("--epochs", type=int, default=1)
    r.add_argument("--lr", type=float, default=0.05)
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(fn=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
