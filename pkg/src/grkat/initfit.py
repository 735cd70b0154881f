"""Initialization machinery for group-rational layers.

Covers: least-squares fitting of rational coefficients to reference
activations, Monte-Carlo gain estimation under unit-normal input,
variance-preserving weight initialization, weight transfer from a
trained MLP block, and the variance diagnosis of the default
SiLU+spline parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erf

from .errors import ConfigError, DomainError, FitError
from .grkan import GroupRationalParams, GrKanLayer
from .rational import RationalCoeffs, eval_batch, grad_batch

# ---------------------------------------------------------------------------
# reference activations


def _gelu(x):
    return x * 0.5 * (1.0 + erf(x / math.sqrt(2.0)))


def _silu(x):
    return x / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class ActivationTarget:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=np.float64))


TARGETS = {
    "identity": ActivationTarget("identity", lambda x: x),
    "relu": ActivationTarget("relu", lambda x: np.maximum(x, 0.0)),
    "gelu": ActivationTarget("gelu", _gelu),
    "silu": ActivationTarget("silu", _silu),
    "swish": ActivationTarget("swish", _silu),
    # gated units, gain-table parity only: both operands take the same input
    "geglu": ActivationTarget("geglu", lambda x: x * _gelu(x)),
    "swishglu": ActivationTarget("swishglu", lambda x: x * _silu(x)),
}

#: Gain values used as shipped defaults (identity and relu are analytic).
REFERENCE_GAINS = {
    "identity": 1.0,
    "relu": 2.0,
    "gelu": 2.3568,
    "swish": 2.8178,
    "silu": 2.8178,
    "geglu": 0.7112,
    "swishglu": 0.8434,
}


def get_target(name: str) -> ActivationTarget:
    try:
        return TARGETS[name.lower()]
    except KeyError:
        raise ConfigError(
            f"unknown activation {name!r}; choose from {sorted(TARGETS)}"
        ) from None


# ---------------------------------------------------------------------------
# Levenberg-Marquardt rational fit


@dataclass
class FitResult:
    coeffs: RationalCoeffs
    max_abs_err: float
    cost_history: list


def _lm_minimize(target_vals, xs, theta0, m, n, max_iter=200):
    """Damped least-squares refinement of [a..., b...] coefficients.

    Accepted steps never increase the cost; the returned history holds
    the accepted cost sequence.
    """

    def unpack(theta):
        return RationalCoeffs(theta[: m + 1], theta[m + 1:])

    def residual_jac(theta):
        c = unpack(theta)
        f = eval_batch(c, xs)
        _, dfda, dfdb = grad_batch(c, xs)
        jac = np.concatenate([dfda, dfdb], axis=-1)
        return f - target_vals, jac

    theta = theta0.copy()
    r, jac = residual_jac(theta)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = 1e-3
    eye = np.eye(theta.size)
    rel_drop = math.inf
    for _ in range(max_iter):
        grad_vec = jac.T @ r
        hess = jac.T @ jac
        improved = False
        for _ in range(12):
            damp = hess + lam * np.diag(np.diag(hess)) + 1e-14 * eye
            try:
                step = np.linalg.solve(damp, -grad_vec)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            theta_new = theta + step
            r_new, jac_new = residual_jac(theta_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                theta, r, jac = theta_new, r_new, jac_new
                rel_drop = (cost - cost_new) / max(cost, 1e-300)
                cost = cost_new
                history.append(cost)
                lam = max(lam / 3.0, 1e-12)
                improved = True
                break
            lam *= 4.0
        if not improved or rel_drop < 1e-14:
            break
    return theta, cost, history


def fit_rational(target, m: int = 5, n: int = 4, grid=(-4.0, 4.0),
                 npoints: int = 4096, restarts: int = 16, seed: int = 0) -> FitResult:
    """Fit a safe rational function to a reference activation.

    Minimizes the sum of squared errors on a uniform grid with
    Levenberg-Marquardt (analytic Jacobian); the first start is the
    plain polynomial least-squares fit (b = 0), the remaining starts
    are seeded random perturbations.  Returns the best restart.
    """
    if isinstance(target, str):
        target = get_target(target)
    lo, hi = float(grid[0]), float(grid[1])
    if not lo < hi:
        raise ConfigError("fit grid must satisfy lo < hi")
    if npoints < 10 * (m + n):
        raise ConfigError(f"npoints={npoints} too small for degrees m={m}, n={n}")
    xs = np.linspace(lo, hi, npoints)
    tvals = target(xs)

    poly_a = np.polynomial.polynomial.polyfit(xs, tvals, m)
    starts = [np.concatenate([poly_a, np.zeros(n)])]
    rng = np.random.default_rng(seed)
    for _ in range(restarts - 1):
        starts.append(starts[0] + rng.normal(scale=0.1, size=m + 1 + n))

    best = None
    for theta0 in starts:
        theta, cost, history = _lm_minimize(tvals, xs, theta0, m, n)
        if best is None or cost < best[1]:
            best = (theta, cost, history)
    theta, cost, history = best
    if not np.isfinite(cost):
        raise FitError("rational fit diverged", best_residual=cost)
    coeffs = RationalCoeffs(theta[: m + 1], theta[m + 1:])
    max_err = float(np.max(np.abs(eval_batch(coeffs, xs) - tvals)))
    return FitResult(coeffs, max_err, history)


# ---------------------------------------------------------------------------
# gain estimation


@dataclass
class GainEstimate:
    alpha: float
    stderr: float
    mean_sq: float


DEFAULT_GAIN_SAMPLES = 4_000_000
DEFAULT_GAIN_SEED = 1


def estimate_gain(fn, nsamples: int = DEFAULT_GAIN_SAMPLES,
                  seed: int = DEFAULT_GAIN_SEED,
                  chunk: int = 250_000) -> GainEstimate:
    """Monte-Carlo gain alpha = Var[x] / E[F(x)^2] for x ~ N(0, 1).

    fn may be an activation name, an ActivationTarget, a RationalCoeffs
    or any callable.  Samples are drawn in fixed-size chunks with
    per-chunk seeded streams and reduced in fixed order, so the result
    is deterministic for a given seed.
    """
    if nsamples < 1_000_000:
        raise ConfigError("gain estimation needs at least 1e6 samples")
    if isinstance(fn, str):
        fn = get_target(fn)
    if isinstance(fn, RationalCoeffs):
        coeffs = fn
        fn = lambda x: eval_batch(coeffs, x)  # noqa: E731
    seeds = np.random.SeedSequence(seed).spawn(math.ceil(nsamples / chunk))
    total_sq = 0.0
    total_quad = 0.0
    drawn = 0
    for ss in seeds:
        size = min(chunk, nsamples - drawn)
        x = np.random.default_rng(ss).standard_normal(size)
        f2 = np.asarray(fn(x), dtype=np.float64) ** 2
        total_sq += float(f2.sum())
        total_quad += float((f2 * f2).sum())
        drawn += size
    mean_sq = total_sq / drawn
    if mean_sq < 1e-12:
        raise DomainError("degenerate activation: E[F^2] is numerically zero")
    var_f2 = total_quad / drawn - mean_sq**2
    se_mean = math.sqrt(max(var_f2, 0.0) / drawn)
    return GainEstimate(alpha=1.0 / mean_sq, stderr=se_mean / mean_sq**2,
                        mean_sq=mean_sq)


def kan_default_variance(sigma_x: float, nsamples: int = 2_000_000,
                         seed: int = 0):
    """Monte-Carlo variance of the default SiLU+spline edge function.

    Returns (E[silu(x)^2], predicted Var) with x ~ N(0, sigma_x^2);
    the prediction is 3 E[silu^2] plus the 0.01 zero-order-spline term.
    """
    if sigma_x <= 0:
        raise ConfigError("sigma_x must be positive")
    x = sigma_x * np.random.default_rng(seed).standard_normal(nsamples)
    e_silu_sq = float(np.mean(_silu(x) ** 2))
    return e_silu_sq, 3.0 * e_silu_sq + 0.01


# ---------------------------------------------------------------------------
# layer initialization and transfer


def init_variance_preserving(layer: GrKanLayer, alpha: float, seed: int = 0):
    """W ~ N(0, alpha/d_in) i.i.d., bias zeroed, in place."""
    if alpha <= 0:
        raise ConfigError("gain alpha must be positive")
    rng = np.random.default_rng(seed)
    layer.W.data = rng.normal(
        scale=math.sqrt(alpha / layer.d_in), size=layer.W.data.shape
    )
    layer.bias.data = np.zeros(layer.d_out)


def make_grkan_layer(d_in: int, d_out: int, g: int, coeffs: RationalCoeffs,
                     alpha: float, seed: int = 0,
                     per_group_denominator: bool = False) -> GrKanLayer:
    """Layer with the given rational replicated over g groups and
    gain-scaled normal weights."""
    act = GroupRationalParams.from_coeffs(d_in, g, coeffs,
                                          per_group_denominator)
    layer = GrKanLayer(act, np.zeros((d_out, d_in)), np.zeros(d_out))
    init_variance_preserving(layer, alpha, seed)
    return layer


def transfer_from_mlp(linear1, act_name: str, linear2, g: int = 8,
                      m: int = 5, n: int = 4,
                      fit_grid=(-6.0, 6.0)) -> tuple[GrKanLayer, GrKanLayer]:
    """Map a trained MLP block (linear1 -> activation -> linear2) onto
    two group-rational layers.

    The first rational is the exact identity so layer1 reproduces
    linear1; the second rational is fitted to the MLP's activation and
    reuses linear2's weights unchanged.
    """
    w1, b1 = (np.asarray(a, dtype=np.float64) for a in linear1)
    w2, b2 = (np.asarray(a, dtype=np.float64) for a in linear2)
    ident = RationalCoeffs.identity(m, n)
    layer1 = GrKanLayer(
        GroupRationalParams.from_coeffs(w1.shape[1], g, ident), w1, b1)
    fit = fit_rational(act_name, m=m, n=n, grid=fit_grid)
    layer2 = GrKanLayer(
        GroupRationalParams.from_coeffs(w2.shape[1], g, fit.coeffs), w2, b2)
    return layer1, layer2


def variance_profile(layers, x: np.ndarray) -> list:
    """Per-layer output variance of a stack applied to x (no tape)."""
    variances = []
    h = np.asarray(x, dtype=np.float64)
    for layer in layers:
        h = layer.forward_vectorized(h)
        variances.append(float(h.var()))
    return variances
