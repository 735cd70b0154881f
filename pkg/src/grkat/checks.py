"""Numeric self-checks: central finite-difference verification of every
analytic gradient path, and depth-variance probes.

These back both the ``gradcheck``/``varcheck`` subcommands and the test
suite.  All checks run in 64-bit and report the worst relative error
seen, where the relative error of analytic value a against central
difference d is |a - d| / max(1, |a|, |d|).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .grkan import GrKanLayer, GroupRationalParams, group_rational
from .initfit import estimate_gain, fit_rational, make_grkan_layer, variance_profile
from .model import KatConfig, build
from .rational import RationalCoeffs, eval_horner, grad as rational_grad


@dataclass
class CheckReport:
    name: str
    cases: int
    max_rel_err: float
    tol: float
    details: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def _rel(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


def _central(f, x0: float, h: float = 1e-6) -> float:
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h)


def check_rational_grads(ncases: int = 1200, seed: int = 0,
                         tol: float = 1e-6) -> CheckReport:
    """dF/dx, dF/da_k, dF/db_k against central differences at random
    coefficient/input draws."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(ncases):
        m = int(rng.integers(1, 7))
        n = int(rng.integers(1, 6))
        c = RationalCoeffs(rng.normal(scale=1.0, size=m + 1),
                           rng.normal(scale=1.0, size=n))
        x = float(rng.uniform(-4.0, 4.0))
        dx, da, db = rational_grad(c, x)
        worst = max(worst, _rel(dx, _central(lambda t: eval_horner(c, t), x)))
        for k in range(m + 1):
            def f_a(t, k=k):
                a2 = c.a.copy(); a2[k] = t
                return eval_horner(RationalCoeffs(a2, c.b), x)
            worst = max(worst, _rel(da[k], _central(f_a, float(c.a[k]))))
        for k in range(n):
            def f_b(t, k=k):
                b2 = c.b.copy(); b2[k] = t
                return eval_horner(RationalCoeffs(c.a, b2), x)
            worst = max(worst, _rel(db[k], _central(f_b, float(c.b[k]))))
    return CheckReport("rational", ncases, worst, tol)


def _fd_tensor_grads(loss_fn, tensors: dict, h: float = 1e-6) -> float:
    """Compare tape gradients of scalar loss_fn() against central
    differences over every element of every tensor in `tensors`."""
    loss = loss_fn()
    T.backward(loss)
    grads = {name: np.array(t.grad, copy=True) for name, t in tensors.items()}
    worst = 0.0
    for name, t in tensors.items():
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            hi = float(loss_fn().data)
            flat[i] = keep - h
            lo = float(loss_fn().data)
            flat[i] = keep
            fd = (hi - lo) / (2.0 * h)
            worst = max(worst, _rel(float(grads[name].reshape(-1)[i]), fd))
    return worst


def check_layer_grads(seed: int = 0, tol: float = 1e-6) -> CheckReport:
    """GrKanLayer adjoints (input, weights, bias, shared coefficients)."""
    rng = np.random.default_rng(seed)
    d_in, d_out, g = 6, 5, 3
    params = GroupRationalParams.from_coeffs(
        d_in, g, RationalCoeffs(rng.normal(size=6), rng.normal(size=4)))
    params.numerators = params.numerators + 0.1 * rng.normal(
        size=params.numerators.shape)
    layer = GrKanLayer(params, rng.normal(size=(d_out, d_in)),
                       rng.normal(size=d_out))
    x = T.Tensor(rng.normal(size=(7, d_in)), requires_grad=True)
    w = T.Tensor(rng.normal(size=(1, d_out)))

    def loss_fn():
        for t in (x, layer.W, layer.bias, layer.numer, layer.denom):
            t.grad = None
        out = layer.forward(x)
        return T.mean(T.mul(out, T.Tensor(np.broadcast_to(w.data, out.shape))))

    worst = _fd_tensor_grads(loss_fn, {
        "x": x, "W": layer.W, "bias": layer.bias,
        "numer": layer.numer, "denom": layer.denom})
    cases = sum(t.data.size for t in (x, layer.W, layer.bias, layer.numer,
                                      layer.denom))
    return CheckReport("grkan-layer", cases, worst, tol)


def check_model_grads(seed: int = 0, tol: float = 1e-6) -> CheckReport:
    """End-to-end adjoints of a miniature transformer (every parameter
    element against central differences)."""
    cfg = KatConfig(layers=1, hidden=8, mixer_hidden=8, heads=2, groups=2,
                    input_kind="vector", tokens=3, token_dim=4,
                    num_outputs=3, head="classify")
    model = build(cfg, seed=seed)
    rng = np.random.default_rng(seed + 1)
    tokens = rng.normal(size=(4, 3, 4))
    labels = rng.integers(0, 3, size=4)

    def loss_fn():
        for p in model.parameters():
            p.grad = None
        return model.loss(tokens, labels)

    tensors = dict(model.params)
    worst = _fd_tensor_grads(loss_fn, tensors)
    cases = sum(t.data.size for t in tensors.values())
    return CheckReport("kat-model", cases, worst, tol)


def check_primitive_grads(seed: int = 0, tol: float = 1e-6) -> CheckReport:
    """Tape primitives not covered by the model path (taped group
    activation on 3-D input, mse head)."""
    rng = np.random.default_rng(seed)
    numer = T.Tensor(rng.normal(size=(2, 6)), requires_grad=True)
    denom = T.Tensor(rng.normal(size=(2, 4)), requires_grad=True)  # per-group mode
    x = T.Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    target = rng.normal(size=(2, 3, 4))

    def loss_fn():
        for t in (x, numer, denom):
            t.grad = None
        return T.mse(group_rational(x, numer, denom, 4), target)

    worst = _fd_tensor_grads(loss_fn, {"x": x, "numer": numer, "denom": denom})
    cases = x.data.size + numer.data.size + denom.data.size
    return CheckReport("taped-activation", cases, worst, tol)


def run_gradcheck(seed: int = 0, tol: float = 1e-6) -> list[CheckReport]:
    return [
        check_rational_grads(seed=seed, tol=tol),
        check_layer_grads(seed=seed, tol=tol),
        check_primitive_grads(seed=seed, tol=tol),
        check_model_grads(seed=seed, tol=tol),
    ]


def depth_variance_probe(depth: int = 10, d: int = 256, g: int = 8,
                         batch: int = 4096, act: str = "swish",
                         seed: int = 100, gain_scaled: bool = True):
    """Per-layer output variance of a gain-initialized rational stack on
    unit-normal input.  gain_scaled=False is the alpha=1 control."""
    coeffs = fit_rational(act).coeffs
    alpha = estimate_gain(coeffs, nsamples=1_000_000).alpha if gain_scaled else 1.0
    layers = [make_grkan_layer(d, d, g, coeffs, alpha, seed=seed + i)
              for i in range(depth)]
    # draw the probe input from a stream disjoint from every weight
    # stream: sharing a seed would make weight rows coincide with input
    # rows and bias the measured variance
    x = np.random.default_rng(seed + 90001).standard_normal((batch, d))
    return variance_profile(layers, x)
