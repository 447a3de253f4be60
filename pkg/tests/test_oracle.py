"""Exact-arithmetic reference: accumulator algebra and table rounding."""

import random
from fractions import Fraction

import pytest

from polaron.formats import (
    BF16,
    EncodedScalar,
    ExactReal,
    FP8_E4M3,
    FP8_E5M2,
    FXP8,
    POSIT8,
    RoundingMode,
    SpecialValue,
    decode,
    encode,
)
from polaron.oracle import RationalAcc, oracle_dot, oracle_round

NE = RoundingMode.NEAREST_EVEN
RTP = RoundingMode.TOWARD_POSITIVE


class TestRationalAcc:
    def test_minimal_denominator(self):
        x = RationalAcc(8, 5)
        assert x.num == 1 and x.den_exp == 2
        assert RationalAcc(0, 7).den_exp == 0

    def test_add(self):
        x = RationalAcc(3, 3).add(RationalAcc(-1, 1))  # 3/8 - 1/2
        assert x.to_fraction() == Fraction(-1, 8)

    def test_product(self):
        p = RationalAcc.product(ExactReal(1, 3, -3), ExactReal(-1, 1, 1))
        assert p.to_fraction() == Fraction(-3, 4)

    def test_cmp_scaled(self):
        x = RationalAcc(5, 2)  # 1.25
        assert x.cmp_scaled(1, 0) > 0
        assert x.cmp_scaled(5, -2) == 0
        assert x.cmp_scaled(3, 0) < 0

    def test_random_sums_match_fractions(self):
        rng = random.Random(17)
        for _ in range(500):
            n = rng.randint(0, 6)
            a = [ExactReal(rng.choice([1, -1]), rng.randint(0, 50),
                           rng.randint(-20, 8)) for _ in range(n)]
            b = [ExactReal(rng.choice([1, -1]), rng.randint(0, 50),
                           rng.randint(-20, 8)) for _ in range(n)]
            want = sum((x.to_fraction() * y.to_fraction()
                        for x, y in zip(a, b)), Fraction(0))
            assert oracle_dot(a, b).to_fraction() == want


class TestOracleDot:
    def test_empty(self):
        assert oracle_dot([], []).is_zero

    def test_single_identity(self):
        x = ExactReal(1, 5, -2)
        got = oracle_dot([ExactReal(1, 1, 0)], [x])
        assert got.to_fraction() == x.to_fraction()

    def test_hand_example(self):
        a = [ExactReal(1, 3, -3), ExactReal(-1, 1, -1)]  # 3/8, -1/2
        b = [ExactReal(1, 1, 1), ExactReal(1, 1, 2)]     # 2, 4
        assert oracle_dot(a, b).to_fraction() == Fraction(-5, 4)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            oracle_dot([ExactReal(1, 1, 0)], [])


class TestOracleRound:
    def test_exact_values_round_to_themselves(self):
        for f in (POSIT8, FP8_E4M3, FXP8):
            for bits in range(0, 1 << f.total_bits, 5):
                v = decode(EncodedScalar(bits, f))
                if isinstance(v, SpecialValue) or (v.mag == 0 and v.sign < 0):
                    continue
                x = RationalAcc.from_exact(v)
                assert oracle_round(x, f, NE).bits == bits
                assert oracle_round(x, f, RTP).bits == bits

    def test_midpoint_nearest_even(self):
        # e4m3 between 1.0 (0x38) and 1.125 (0x39): even mantissa wins
        mid = RationalAcc(17, 4)
        assert oracle_round(mid, FP8_E4M3, NE).bits == 0x38
        assert oracle_round(mid, FP8_E4M3, RTP).bits == 0x39

    @pytest.mark.parametrize("f", [POSIT8, FP8_E4M3, FP8_E5M2, FXP8, BF16],
                             ids=lambda f: f.name)
    def test_agrees_with_encode_on_random_rationals(self, f):
        rng = random.Random(23)
        for _ in range(1000):
            mag = rng.randint(1, 1 << 16)
            exp = rng.randint(-40, 20)
            sign = rng.choice([1, -1])
            x = ExactReal(sign, mag, exp)
            acc = RationalAcc.from_exact(x)
            for mode in (NE, RTP):
                got = oracle_round(acc, f, mode)
                want = encode(x, f, mode)
                assert got.bits == want.bits, (f.name, x, mode)

    @pytest.mark.parametrize("f", [POSIT8, FP8_E4M3, FP8_E5M2],
                             ids=lambda f: f.name)
    def test_half_ulp_perturbations_exhaustive(self, f):
        """Every finite value nudged by fractions of its neighbor gap."""
        vals = sorted(
            (decode(EncodedScalar(b, f)).to_fraction(), b)
            for b in range(1 << f.total_bits)
            if isinstance(decode(EncodedScalar(b, f)), ExactReal))
        for (v1, _), (v2, _) in zip(vals, vals[1:]):
            if v1 == v2:
                continue
            for num, den in ((1, 4), (1, 2), (3, 4)):
                q = v1 + (v2 - v1) * num / den
                x = ExactReal(1 if q >= 0 else -1, abs(q.numerator),
                              -(q.denominator.bit_length() - 1))
                assert x.to_fraction() == q
                for mode in (NE, RTP):
                    got = oracle_round(RationalAcc.from_exact(x), f, mode)
                    want = encode(x, f, mode)
                    assert got.bits == want.bits

    def test_overflow_behaviour(self):
        huge = RationalAcc(1 << 60)
        assert oracle_round(huge, FP8_E5M2, RTP).bits == 0x7C  # +inf
        assert oracle_round(huge, FP8_E4M3, RTP).bits == 0x7E  # saturate
        assert oracle_round(huge, POSIT8, RTP).bits == 0x7F
        neg = RationalAcc(-(1 << 60))
        assert oracle_round(neg, FP8_E5M2, RTP).bits == 0xFB  # -max finite
        assert oracle_round(neg, FP8_E5M2, NE).bits == 0xFC   # -inf

    def test_zero(self):
        assert oracle_round(RationalAcc(), FP8_E5M2, NE).bits == 0
        tiny_neg = RationalAcc(-1, 90)
        assert oracle_round(tiny_neg, FP8_E5M2, NE).bits == 0x80
