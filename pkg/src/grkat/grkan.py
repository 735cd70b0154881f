"""Group-rational KAN layer: per-group safe rational activation applied
channel-wise, followed by a dense linear map.

Channel i uses the numerator of group floor(i / d_g) with d_g = d_in/g;
by default one denominator vector is shared by every group (a per-group
denominator mode exists for ablation).  Three activation kernels are
provided for benchmarking:

* looped     - iterates the groups, evaluates each slice, concatenates
* vectorized - reshapes to [rows, g, d_g] and broadcasts coefficients
* fused      - one multi-threaded compiled pass with per-channel lookup

All three apply the same per-element operation order, so outputs are
bitwise identical in a fixed dtype; the linear stage always accumulates
in float64 and is shared between variants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from . import flops
from .errors import ConfigError, ShapeError
from .rational import RationalCoeffs, grad_parts
from .tensor import Tensor, _accumulate, _record, add, matmul, transpose


@dataclass
class GroupRationalParams:
    """Value type for a grouped rational activation.

    numerators: [g, m+1]; denominator: [n] shared across groups, or
    [g, n] in the per-group ablation mode.
    """

    d_in: int
    numerators: np.ndarray
    denominator: np.ndarray

    def __post_init__(self):
        self.numerators = np.atleast_2d(np.asarray(self.numerators, dtype=np.float64))
        self.denominator = np.asarray(self.denominator, dtype=np.float64)
        if self.d_in % self.g != 0:
            raise ConfigError(
                f"d_in={self.d_in} not divisible by group count g={self.g}"
            )
        if self.denominator.ndim == 2 and self.denominator.shape[0] != self.g:
            raise ConfigError("per-group denominator must have g rows")
        if self.denominator.ndim > 2:
            raise ConfigError("denominator must be [n] or [g, n]")

    @property
    def g(self) -> int:
        return self.numerators.shape[0]

    @property
    def m(self) -> int:
        return self.numerators.shape[1] - 1

    @property
    def n(self) -> int:
        return self.denominator.shape[-1]

    @property
    def d_g(self) -> int:
        return self.d_in // self.g

    @property
    def shared_denominator(self) -> bool:
        return self.denominator.ndim == 1

    @classmethod
    def from_coeffs(cls, d_in: int, g: int, coeffs: RationalCoeffs,
                    per_group_denominator: bool = False) -> "GroupRationalParams":
        """Replicate one rational function across all g groups."""
        numer = np.tile(coeffs.a, (g, 1))
        denom = np.tile(coeffs.b, (g, 1)) if per_group_denominator else coeffs.b.copy()
        return cls(d_in, numer, denom)

    def group_coeffs(self, k: int) -> RationalCoeffs:
        den = self.denominator if self.shared_denominator else self.denominator[k]
        return RationalCoeffs(self.numerators[k].copy(), den.copy())


# ---------------------------------------------------------------------------
# activation kernels (array in, array out, no tape)


def _rows(x: np.ndarray, d_in: int) -> np.ndarray:
    if x.shape[-1] != d_in:
        raise ShapeError(f"input last dim {x.shape[-1]} != layer d_in {d_in}")
    return x.reshape(-1, d_in)


def act_looped(params: GroupRationalParams, x: np.ndarray) -> np.ndarray:
    """Group loop + concatenate (the reference 'looped' method)."""
    dt = x.dtype.type
    rows = _rows(x, params.d_in)
    d_g = params.d_g
    pieces = []
    for k in range(params.g):
        xs = rows[:, k * d_g:(k + 1) * d_g]
        a = params.numerators[k].astype(x.dtype)
        b = (params.denominator if params.shared_denominator
             else params.denominator[k]).astype(x.dtype)
        acc = a[-1] * np.ones_like(xs)
        for c in a[-2::-1]:
            acc = acc * xs + c
        inner = dt(0.0) * xs
        for c in b[::-1]:
            inner = (inner + c) * xs
        pieces.append(acc / (dt(1.0) + np.abs(inner)))
    return np.concatenate(pieces, axis=1).reshape(x.shape)


def act_vectorized(params: GroupRationalParams, x: np.ndarray) -> np.ndarray:
    """Reshape to [rows, g, d_g], broadcast per-group coefficients."""
    dt = x.dtype.type
    rows = _rows(x, params.d_in)
    xs = rows.reshape(rows.shape[0], params.g, params.d_g)
    a = params.numerators.astype(x.dtype)  # [g, m+1]
    if params.shared_denominator:
        b = np.broadcast_to(params.denominator.astype(x.dtype),
                            (params.g, params.n))
    else:
        b = params.denominator.astype(x.dtype)
    acc = np.empty_like(xs)
    acc[:] = a[:, -1][None, :, None]
    for k in range(a.shape[1] - 2, -1, -1):
        acc *= xs
        acc += a[:, k][None, :, None]
    inner = np.zeros_like(xs)
    for k in range(b.shape[1] - 1, -1, -1):
        inner += b[:, k][None, :, None]
        inner *= xs
    den = np.abs(inner)
    den += dt(1.0)
    acc /= den
    return acc.reshape(x.shape)


@njit(parallel=True, cache=True)
def _fused_kernel(xs, numer, denom, out, d_g, one, zero):  # pragma: no cover
    rows, width = xs.shape
    order = numer.shape[1]
    ndeg = denom.shape[1]
    for r in prange(rows):
        for c in range(width):
            grp = c // d_g
            x = xs[r, c]
            acc = numer[grp, order - 1]
            for k in range(order - 2, -1, -1):
                acc = acc * x + numer[grp, k]
            inner = zero
            for k in range(ndeg - 1, -1, -1):
                inner = (inner + denom[grp, k]) * x
            out[r, c] = acc / (one + abs(inner))


def act_fused(params: GroupRationalParams, x: np.ndarray) -> np.ndarray:
    """Single compiled multi-threaded pass with per-channel group lookup."""
    rows = np.ascontiguousarray(_rows(x, params.d_in))
    a = np.ascontiguousarray(params.numerators.astype(x.dtype))
    if params.shared_denominator:
        b = np.ascontiguousarray(
            np.broadcast_to(params.denominator.astype(x.dtype),
                            (params.g, params.n)))
    else:
        b = np.ascontiguousarray(params.denominator.astype(x.dtype))
    out = np.empty_like(rows)
    _fused_kernel(rows, a, b, out, params.d_g,
                  x.dtype.type(1.0), x.dtype.type(0.0))
    return out.reshape(x.shape)


ACT_KERNELS = {"looped": act_looped, "vectorized": act_vectorized, "fused": act_fused}


# ---------------------------------------------------------------------------
# taped op and layer


def _group_grads(params: GroupRationalParams, xs: np.ndarray, g_out: np.ndarray):
    """Adjoints of the grouped activation w.r.t. input and coefficients.

    xs, g_out: [rows, d_in].  Returns (dx [rows, d_in],
    dnumer [g, m+1], ddenom matching params.denominator shape).
    Shared-denominator gradients are the fixed-order sum of per-group
    contributions.
    """
    rows = xs.shape[0]
    d_g = params.d_g
    dx = np.empty_like(xs)
    dnum = np.zeros_like(params.numerators)
    dden = np.zeros_like(params.denominator)
    for k in range(params.g):
        sl = slice(k * d_g, (k + 1) * d_g)
        xk = xs[:, sl]
        gk = g_out[:, sl]
        c = params.group_coeffs(k)
        p, _, q, sgn, p_der, a_der = grad_parts(c, xk)
        dx[:, sl] = gk * (p_der / q - sgn * a_der * p / (q * q))
        powers = xk[..., None] ** np.arange(c.m + 1, dtype=np.float64)
        dnum[k] = (gk[..., None] * powers / q[..., None]).sum(axis=(0, 1))
        if c.n:
            bpow = xk[..., None] ** np.arange(1, c.n + 1, dtype=np.float64)
            contrib = (gk[..., None] * (-bpow) * (sgn * p / (q * q))[..., None]
                       ).sum(axis=(0, 1))
            if params.shared_denominator:
                dden += contrib
            else:
                dden[k] = contrib
    return dx, dnum, dden


def group_rational(x: Tensor, numer: Tensor, denom: Tensor, d_in: int) -> Tensor:
    """Taped grouped rational activation; adjoints use the analytic
    gradient formulas (same code path as rational.grad_batch)."""
    params = GroupRationalParams(d_in, numer.data, denom.data)
    out = Tensor(act_vectorized(params, x.data))

    def bwd(g):
        g2 = g.reshape(-1, d_in)
        xs = x.data.reshape(-1, d_in)
        dx, dnum, dden = _group_grads(params, xs, g2)
        _accumulate(x, dx.reshape(x.data.shape))
        _accumulate(numer, dnum)
        _accumulate(denom, dden)

    return _record(out, (x, numer, denom), bwd)


class GrKanLayer:
    """Group-rational activation followed by a dense linear map."""

    def __init__(self, act: GroupRationalParams, W: np.ndarray, bias: np.ndarray,
                 name: str = "grkan"):
        W = np.asarray(W, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if W.ndim != 2 or W.shape[1] != act.d_in:
            raise ShapeError(f"W must be [d_out, {act.d_in}], got {W.shape}")
        if bias.shape != (W.shape[0],):
            raise ShapeError("bias must be [d_out]")
        self.d_in = act.d_in
        self.d_out = W.shape[0]
        self.g = act.g
        self.numer = Tensor(act.numerators, requires_grad=True, name=f"{name}.numer")
        self.denom = Tensor(act.denominator, requires_grad=True, name=f"{name}.denom")
        self.W = Tensor(W, requires_grad=True, name=f"{name}.W")
        self.bias = Tensor(bias, requires_grad=True, name=f"{name}.bias")

    @property
    def act_params(self) -> GroupRationalParams:
        return GroupRationalParams(self.d_in, self.numer.data, self.denom.data)

    def parameters(self) -> list[Tensor]:
        return [self.numer, self.denom, self.W, self.bias]

    def forward(self, x: Tensor) -> Tensor:
        """y = W F(x) + bias on the tape (vectorized activation)."""
        f = group_rational(x, self.numer, self.denom, self.d_in)
        return add(matmul(f, transpose(self.W, (1, 0))), self.bias)

    # --- untaped kernel variants (differential testing and benchmarks) ---

    def _linear(self, f: np.ndarray) -> np.ndarray:
        # accumulate in float64 regardless of activation dtype
        y = f.astype(np.float64) @ self.W.data.T + self.bias.data
        return y.astype(f.dtype)

    def forward_looped(self, x: np.ndarray) -> np.ndarray:
        return self._linear(act_looped(self.act_params, x))

    def forward_vectorized(self, x: np.ndarray) -> np.ndarray:
        return self._linear(act_vectorized(self.act_params, x))

    def forward_fused(self, x: np.ndarray) -> np.ndarray:
        return self._linear(act_fused(self.act_params, x))


def count_params_flops(d_in: int, d_out: int, m: int, n: int, g: int,
                       variant: str, G: int = 3, K: int = 3,
                       nonlinear_flops: int = 0) -> tuple[int, int]:
    """(parameter count, FLOPs) for one layer of the given variant."""
    report = flops.audit(variant, d_in, d_out, m=m, n=n, g=g, G=G, K=K,
                         nonlinear_flops=nonlinear_flops)
    return report["params"], report["flops"]
