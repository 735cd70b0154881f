"""Safe rational evaluation and analytic gradients."""

import numpy as np
import pytest

from grkat.errors import DomainError
from grkat.rational import (RationalCoeffs, eval_batch, eval_horner,
                            eval_naive, grad, grad_batch, polynomial_horner)


def random_coeffs(rng, m=5, n=4, scale=1.0):
    return RationalCoeffs(rng.normal(scale=scale, size=m + 1),
                          rng.normal(scale=scale, size=n))


class TestEvaluation:
    def test_identity_coeffs_reproduce_input(self):
        c = RationalCoeffs.identity()
        xs = np.linspace(-10, 10, 101)
        assert np.array_equal(eval_batch(c, xs), xs)

    def test_constant_numerator(self):
        c = RationalCoeffs([3.0], [])
        assert eval_horner(c, 7.0) == 3.0

    def test_denominator_never_below_one(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            c = random_coeffs(rng, scale=3.0)
            xs = rng.uniform(-50, 50, size=64)
            num = sum(ak * xs**k for k, ak in enumerate(c.a))
            f = eval_batch(c, xs)
            # |F| <= |P| because Q = 1 + |A| >= 1
            assert np.all(np.abs(f) <= np.abs(num) + 1e-12)
            assert np.all(np.isfinite(f))

    def test_horner_matches_naive(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            m = int(rng.integers(0, 8))
            n = int(rng.integers(0, 7))
            c = random_coeffs(rng, m=m, n=n, scale=2.0)
            x = float(rng.uniform(-10, 10))
            h, nv = eval_horner(c, x), eval_naive(c, x)
            assert abs(h - nv) < 1e-12 * max(1.0, abs(h))

    def test_batch_bitwise_equals_scalar_loop(self):
        rng = np.random.default_rng(2)
        c = random_coeffs(rng)
        xs = rng.uniform(-5, 5, size=(3, 17))
        batch = eval_batch(c, xs)
        loop = np.array([[eval_horner(c, float(v)) for v in row] for row in xs])
        assert np.array_equal(batch, loop)

    def test_non_finite_input_rejected(self):
        c = RationalCoeffs.identity()
        with pytest.raises(DomainError):
            eval_horner(c, float("nan"))
        with pytest.raises(DomainError):
            eval_batch(c, np.array([1.0, np.inf]))

    def test_non_finite_coeffs_rejected(self):
        with pytest.raises(ValueError):
            RationalCoeffs([np.nan, 1.0], [0.0])

    def test_polynomial_horner_matches_numpy(self):
        rng = np.random.default_rng(3)
        coeffs = rng.normal(size=6)
        xs = rng.uniform(-3, 3, size=50)
        expected = np.polynomial.polynomial.polyval(xs, coeffs)
        assert np.allclose(polynomial_horner(coeffs, xs), expected,
                           rtol=1e-13, atol=1e-13)


class TestGradients:
    def central(self, f, x0, h=1e-6):
        return (f(x0 + h) - f(x0 - h)) / (2 * h)

    def test_input_gradient_fd(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            c = random_coeffs(rng)
            x = float(rng.uniform(-3, 3))
            dx, _, _ = grad(c, x)
            fd = self.central(lambda t: eval_horner(c, t), x)
            assert abs(dx - fd) < 1e-6 * max(1.0, abs(fd))

    def test_coefficient_gradients_fd(self):
        rng = np.random.default_rng(5)
        c = random_coeffs(rng)
        x = 1.3
        _, da, db = grad(c, x)
        for k in range(c.m + 1):
            def f(t, k=k):
                a2 = c.a.copy(); a2[k] = t
                return eval_horner(RationalCoeffs(a2, c.b), x)
            assert abs(da[k] - self.central(f, float(c.a[k]))) < 1e-6
        for k in range(c.n):
            def f(t, k=k):
                b2 = c.b.copy(); b2[k] = t
                return eval_horner(RationalCoeffs(c.a, b2), x)
            assert abs(db[k] - self.central(f, float(c.b[k]))) < 1e-6

    def test_absolute_value_kink_uses_zero_subgradient(self):
        # with A(x) = 0 at x = 0, sign(0) = 0 removes the |.| term
        c = RationalCoeffs([0.0, 1.0], [1.0])
        dx, _, db = grad(c, 0.0)
        assert dx == 1.0
        assert np.all(db == 0.0)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(6)
        c = random_coeffs(rng)
        xs = rng.uniform(-4, 4, size=12)
        dxs, das, dbs = grad_batch(c, xs)
        for i, x in enumerate(xs):
            dx, da, db = grad(c, float(x))
            assert np.isclose(dxs[i], dx, rtol=1e-14)
            assert np.allclose(das[i], da, rtol=1e-14)
            assert np.allclose(dbs[i], db, rtol=1e-14)

    def test_identity_gradient(self):
        c = RationalCoeffs.identity()
        dx, da, db = grad(c, 2.5)
        assert dx == 1.0
        assert np.allclose(da, 2.5 ** np.arange(6))
