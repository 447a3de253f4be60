"""CORDIC activation unit against high-precision references."""

import math

import numpy as np
import pytest

from polaron.activations import (
    ActivationKind,
    SATURATION_BOUND,
    activation_apply,
    cordic_exp,
    cordic_sigmoid,
    cordic_sinh_cosh,
    cordic_tanh,
)

GRID = np.linspace(-8.0, 8.0, 4001)


def ref_sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class TestCordicCore:
    def test_sinh_cosh_small_args(self):
        for z in np.linspace(-0.34, 0.34, 41):
            s, c = cordic_sinh_cosh(float(z))
            assert s == pytest.approx(math.sinh(z), abs=1e-4)
            assert c == pytest.approx(math.cosh(z), abs=1e-4)

    def test_exp_range_reduction(self):
        for w in np.linspace(-8, 8, 201):
            assert cordic_exp(float(w)) == pytest.approx(
                math.exp(w), rel=1e-4)

    def test_more_iterations_tighter(self):
        errs = []
        for iters in (8, 16, 24):
            errs.append(abs(cordic_sigmoid(1.0, iters)
                            - 0.7310585786300049))
        assert errs[2] <= errs[0]

    def test_iterations_validated(self):
        with pytest.raises(ValueError):
            cordic_sigmoid(0.5, 0)


class TestSigmoidTanh:
    def test_symmetry_point(self):
        assert cordic_sigmoid(0.0) == pytest.approx(0.5, abs=5e-5)

    def test_saturation(self):
        assert cordic_sigmoid(SATURATION_BOUND + 1) == 1.0
        assert cordic_sigmoid(-SATURATION_BOUND - 1) == 0.0
        assert cordic_tanh(100.0) == 1.0

    def test_reference_point(self):
        assert abs(cordic_sigmoid(1.0) - 0.73105857863) <= 1e-3

    def test_sigmoid_bound_on_grid(self):
        got = np.array([cordic_sigmoid(v) for v in GRID])
        assert np.max(np.abs(got - ref_sigmoid(GRID))) <= 1e-3

    def test_tanh_bound_on_grid(self):
        got = np.array([cordic_tanh(v) for v in GRID])
        assert np.max(np.abs(got - np.tanh(GRID))) <= 1e-3


class TestActivationApply:
    def test_relu_exact(self):
        out = activation_apply(ActivationKind.RELU, np.array([-2.0, 0.0, 3.0]))
        np.testing.assert_array_equal(out, [0.0, 0.0, 3.0])

    def test_swish_bound(self):
        got = activation_apply(ActivationKind.SWISH, GRID)
        ref = GRID * ref_sigmoid(GRID)
        assert np.max(np.abs(got - ref)) <= 2e-3

    def test_gelu_bound_and_point(self):
        got = activation_apply(ActivationKind.GELU, GRID)
        c = math.sqrt(2 / math.pi)
        ref = 0.5 * GRID * (1 + np.tanh(c * (GRID + 0.044715 * GRID ** 3)))
        assert np.max(np.abs(got - ref)) <= 2e-3
        one = activation_apply(ActivationKind.GELU, np.array([1.0]))[0]
        assert one == pytest.approx(0.8411919906082768, abs=2e-3)

    def test_selu_constants_and_bound(self):
        got = activation_apply(ActivationKind.SELU, GRID)
        ref = np.where(GRID > 0, 1.0507 * GRID,
                       1.0507 * 1.6733 * (np.exp(GRID) - 1.0))
        assert np.max(np.abs(got - ref)) <= 1e-3

    def test_softmax_constant_vector(self):
        out = activation_apply(ActivationKind.SOFTMAX, np.full(6, 2.0))
        np.testing.assert_allclose(out, 1 / 6, rtol=1e-12)

    def test_softmax_bound_and_normalization(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(-8, 8, size=(100, 12))
        got = activation_apply(ActivationKind.SOFTMAX, x)
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        ref = e / e.sum(axis=-1, keepdims=True)
        assert np.max(np.abs(got - ref)) <= 2e-3
        assert np.max(np.abs(got.sum(axis=-1) - 1.0)) <= 1e-9

    def test_none_and_shape(self):
        x = np.arange(6, dtype=float).reshape(2, 3)
        out = activation_apply(ActivationKind.NONE, x)
        np.testing.assert_array_equal(out, x)
        assert activation_apply(ActivationKind.SIGMOID, x).shape == (2, 3)
