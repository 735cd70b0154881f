"""Safe Pade rational functions: evaluation and analytic derivatives.

The function family is

    F(x) = P(x) / Q(x),  P(x) = a0 + a1 x + ... + am x^m,
                         Q(x) = 1 + |b1 x + ... + bn x^n|

so the denominator is bounded below by 1 and F has no poles on the real
line.  Both the naive power-sum evaluation and the Horner form are
provided; the Horner form is the production path and the naive form
serves as its differential oracle.

The Horner core is written against a generic scalar protocol (``*``,
``+``, ``abs``, ``/``) so it also runs on numpy arrays and on the
op-counting scalar used by the FLOPs auditor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

DEFAULT_M = 5
DEFAULT_N = 4


@dataclass
class RationalCoeffs:
    """Coefficients of one safe rational function.

    a has m+1 entries (constant term first), b has n entries (b1..bn,
    no constant term: the denominator constant is pinned to 1).
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.a.ndim != 1 or self.a.size < 1:
            raise ValueError("numerator needs at least a constant coefficient")
        if self.b.ndim != 1:
            raise ValueError("denominator coefficients must be a 1-D array")
        if not (np.isfinite(self.a).all() and np.isfinite(self.b).all()):
            raise ValueError("coefficients must be finite")

    @property
    def m(self) -> int:
        return self.a.size - 1

    @property
    def n(self) -> int:
        return self.b.size

    @classmethod
    def identity(cls, m: int = DEFAULT_M, n: int = DEFAULT_N) -> "RationalCoeffs":
        """Coefficients for which F(x) == x exactly."""
        a = np.zeros(m + 1)
        a[1] = 1.0
        return cls(a, np.zeros(n))

    def copy(self) -> "RationalCoeffs":
        return RationalCoeffs(self.a.copy(), self.b.copy())


def polynomial_horner(coeffs, x):
    """Evaluate sum_k coeffs[k] * x^k in nested (Horner) form.

    coeffs is indexed constant-term first.  Costs len(coeffs)-1
    multiplications and as many additions.
    """
    acc = coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


def horner_rational(a, b, x, zero=0.0):
    """Horner-form rational evaluation on any scalar-protocol value.

    Numerator: m multiplications, m additions.  Denominator inner
    polynomial: n multiplications, n additions (zero constant term),
    plus one abs, one addition for 1 + |A(x)| and one division.

    `zero` seeds the denominator accumulator; symbolic evaluators (the
    op-counting scalar) pass their own typed zero so every arithmetic
    step stays observable.
    """
    num = a[-1]
    for ak in a[-2::-1]:
        num = num * x + ak
    inner = zero
    for bk in b[::-1]:
        inner = (inner + bk) * x
    den = 1.0 + abs(inner)
    return num / den


def _check_finite_x(x):
    if not np.all(np.isfinite(x)):
        raise DomainError("rational function evaluated at non-finite input")


def eval_horner(c: RationalCoeffs, x):
    """F(x) via nested (Horner) evaluation; scalar or elementwise array."""
    _check_finite_x(x)
    return horner_rational(c.a, c.b, x)


def eval_naive(c: RationalCoeffs, x):
    """F(x) via explicit power sums; independent oracle for eval_horner."""
    _check_finite_x(x)
    num = sum(ak * x**k for k, ak in enumerate(c.a))
    asum = sum(bk * x ** (k + 1) for k, bk in enumerate(c.b))
    return num / (1.0 + abs(asum))


def eval_batch(c: RationalCoeffs, xs: np.ndarray) -> np.ndarray:
    """Elementwise eval_horner on an array; shape preserved.

    Shares the scalar code path, so results are bitwise-equal to a
    scalar loop in 64-bit single-threaded mode.
    """
    return eval_horner(c, np.asarray(xs))


def _derivative_coeffs(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of d/dx of a polynomial given constant-first coeffs."""
    if coeffs.size <= 1:
        return np.zeros(1)
    return coeffs[1:] * np.arange(1, coeffs.size, dtype=np.float64)


def grad_parts(c: RationalCoeffs, x):
    """Shared intermediates for the analytic gradients.

    Returns (P, A, Q, sign(A), P', A') where A is the inner denominator
    polynomial and Q = 1 + |A|.  sign(0) is 0 (subgradient choice at
    the |.| kink).  Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    p = polynomial_horner(c.a, x)
    if c.n:
        b_full = np.concatenate(([0.0], c.b))
        a_val = polynomial_horner(b_full, x)
        a_der = polynomial_horner(_derivative_coeffs(b_full), x)
    else:
        a_val = np.zeros_like(x)
        a_der = np.zeros_like(x)
    q = 1.0 + np.abs(a_val)
    sgn = np.sign(a_val)
    p_der = polynomial_horner(_derivative_coeffs(c.a), x)
    return p, a_val, q, sgn, p_der, a_der


def grad(c: RationalCoeffs, x: float):
    """Analytic gradients of F at a scalar x.

    Returns (dF/dx, dF/da [m+1], dF/db [n]) with

        dF/da_k = x^k / Q
        dF/db_k = -x^k sign(A) P / Q^2
        dF/dx   = P'/Q - sign(A) A' P / Q^2
    """
    _check_finite_x(x)
    p, _, q, sgn, p_der, a_der = grad_parts(c, x)
    dfdx = p_der / q - sgn * a_der * p / (q * q)
    powers = x ** np.arange(c.m + 1, dtype=np.float64)
    dfda = powers / q
    if c.n:
        bpowers = x ** np.arange(1, c.n + 1, dtype=np.float64)
        dfdb = -bpowers * sgn * p / (q * q)
    else:
        dfdb = np.zeros(0)
    return float(dfdx), dfda, dfdb


def grad_batch(c: RationalCoeffs, xs: np.ndarray):
    """Batched analytic gradients.

    Returns (dF/dx elementwise, dF/da with shape xs.shape + (m+1,),
    dF/db with shape xs.shape + (n,)).  Same formulas as grad; the
    autodiff tape registers this code path as the adjoint of
    eval_batch, so tape gradients match the analytic ones exactly.
    """
    xs = np.asarray(xs, dtype=np.float64)
    p, _, q, sgn, p_der, a_der = grad_parts(c, xs)
    dfdx = p_der / q - sgn * a_der * p / (q * q)
    powers = xs[..., None] ** np.arange(c.m + 1, dtype=np.float64)
    dfda = powers / q[..., None]
    if c.n:
        bpowers = xs[..., None] ** np.arange(1, c.n + 1, dtype=np.float64)
        dfdb = -bpowers * (sgn * p / (q * q))[..., None]
    else:
        dfdb = np.zeros(xs.shape + (0,))
    return dfdx, dfda, dfdb
