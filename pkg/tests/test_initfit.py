"""Rational fitting, gain estimation, init, and MLP transfer."""

import numpy as np
import pytest

from grkat.errors import ConfigError, DomainError
from grkat.initfit import (REFERENCE_GAINS, estimate_gain, fit_rational,
                           get_target, init_variance_preserving,
                           kan_default_variance, make_grkan_layer,
                           transfer_from_mlp, variance_profile)
from grkat.rational import RationalCoeffs, eval_batch


class TestTargets:
    def test_gated_units_compose_base_activations(self):
        xs = np.linspace(-3, 3, 11)
        gelu, silu = get_target("gelu"), get_target("silu")
        assert np.allclose(get_target("geglu")(xs), xs * gelu(xs))
        assert np.allclose(get_target("swishglu")(xs), xs * silu(xs))

    def test_unknown_target(self):
        with pytest.raises(ConfigError):
            get_target("mish")


class TestFit:
    def test_identity_fit_is_numerically_exact(self):
        fit = fit_rational("identity")
        assert fit.max_abs_err < 1e-8

    def test_gelu_fit_residual(self):
        fit = fit_rational("gelu")
        assert fit.max_abs_err < 1e-2

    def test_swish_fit_residual(self):
        fit = fit_rational("swish")
        assert fit.max_abs_err < 1e-2

    def test_cost_history_monotone_nonincreasing(self):
        fit = fit_rational("gelu", restarts=2)
        hist = np.asarray(fit.cost_history)
        assert np.all(np.diff(hist) <= 0)

    def test_fit_validation(self):
        with pytest.raises(ConfigError):
            fit_rational("gelu", grid=(2.0, -2.0))
        with pytest.raises(ConfigError):
            fit_rational("gelu", npoints=10)

    def test_custom_callable_target(self):
        fit = fit_rational(get_target("relu"), restarts=4)
        xs = np.linspace(-4, 4, 101)
        assert np.max(np.abs(eval_batch(fit.coeffs, xs)
                             - np.maximum(xs, 0))) < 0.1


class TestGain:
    def test_identity_gain_is_one(self):
        est = estimate_gain("identity", nsamples=1_000_000)
        assert abs(est.alpha - 1.0) < 0.01

    def test_relu_gain_is_two(self):
        est = estimate_gain("relu", nsamples=1_000_000)
        assert abs(est.alpha - 2.0) < 0.02

    def test_deterministic_for_fixed_seed(self):
        a = estimate_gain("gelu", nsamples=1_000_000, seed=7)
        b = estimate_gain("gelu", nsamples=1_000_000, seed=7)
        assert a.alpha == b.alpha

    def test_accepts_rational_coeffs(self):
        est = estimate_gain(RationalCoeffs.identity(), nsamples=1_000_000)
        assert abs(est.alpha - 1.0) < 0.01

    def test_sample_floor_enforced(self):
        with pytest.raises(ConfigError):
            estimate_gain("relu", nsamples=1000)

    def test_degenerate_activation_rejected(self):
        with pytest.raises(DomainError):
            estimate_gain(lambda x: np.zeros_like(x), nsamples=1_000_000)


class TestVarianceDiagnosis:
    def test_silu_second_moment(self):
        e_sq, _ = kan_default_variance(1.0)
        assert abs(e_sq - 0.355) < 0.005

    def test_default_edge_inflates_variance(self):
        _, var = kan_default_variance(1.0)
        assert 1.06 <= var <= 1.08  # != 1: not variance-preserving

    def test_sigma_validation(self):
        with pytest.raises(ConfigError):
            kan_default_variance(0.0)


class TestInitAndTransfer:
    def test_init_scales_with_gain(self):
        layer = make_grkan_layer(256, 256, 8, RationalCoeffs.identity(),
                                 alpha=2.0, seed=0)
        assert abs(layer.W.data.var() - 2.0 / 256) < 1e-3
        assert np.all(layer.bias.data == 0)

    def test_init_rejects_bad_gain(self):
        layer = make_grkan_layer(8, 8, 2, RationalCoeffs.identity(), 1.0)
        with pytest.raises(ConfigError):
            init_variance_preserving(layer, -1.0)

    def test_single_layer_preserves_variance(self):
        coeffs = RationalCoeffs.identity()
        layer = make_grkan_layer(512, 512, 8, coeffs, alpha=1.0, seed=0)
        # data stream must differ from the weight stream: with a shared
        # seed the first input rows coincide with weight rows bit-for-bit
        x = np.random.default_rng(1234).standard_normal((2048, 512))
        (var,) = variance_profile([layer], x)
        assert 0.9 < var < 1.1

    def test_identity_transfer_is_exact(self):
        rng = np.random.default_rng(0)
        w1, b1 = rng.normal(size=(32, 16)), rng.normal(size=32)
        w2, b2 = rng.normal(size=(16, 32)), rng.normal(size=16)
        l1, l2 = transfer_from_mlp((w1, b1), "identity", (w2, b2), g=4)
        x = rng.standard_normal((64, 16))
        out = l2.forward_vectorized(l1.forward_vectorized(x))
        reference = ((x @ w1.T + b1) @ w2.T + b2)
        assert np.abs(out - reference).max() < 1e-8

    def test_gelu_transfer_fidelity(self):
        rng = np.random.default_rng(3)
        d, hdim = 64, 256
        w1 = rng.normal(scale=(2.0 / d) ** 0.5, size=(hdim, d))
        b1 = rng.normal(scale=0.01, size=hdim)
        w2 = rng.normal(scale=(2.0 / hdim) ** 0.5, size=(d, hdim))
        b2 = rng.normal(scale=0.01, size=d)
        l1, l2 = transfer_from_mlp((w1, b1), "gelu", (w2, b2), g=8)
        x = rng.standard_normal((1000, d))
        reference = get_target("gelu")(x @ w1.T + b1) @ w2.T + b2
        out = l2.forward_vectorized(l1.forward_vectorized(x))
        assert np.abs(out - reference).max() < 0.1
        assert np.corrcoef(out.ravel(), reference.ravel())[0, 1] > 0.999

    def test_reference_gain_table_consistent_with_mc(self):
        # spot check one entry against a fresh estimate
        est = estimate_gain("gelu", nsamples=1_000_000, seed=2)
        assert abs(est.alpha - REFERENCE_GAINS["gelu"]) < 0.05
