"""Symbolic FLOPs and parameter accounting for MLP, B-spline KAN and
group-rational layers, plus an instrumented interpreter that recounts
the Horner evaluation by actually executing it.

Conventions: abs and division are charged 1 FLOP each; external
nonlinearities are charged through a caller-supplied per-call cost.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .rational import horner_rational, polynomial_horner


@dataclass
class OpCount:
    mults: int = 0
    adds: int = 0
    abs_ops: int = 0
    divs: int = 0
    nonlinear_calls: int = 0

    def total(self) -> int:
        return self.mults + self.adds + self.abs_ops + self.divs + self.nonlinear_calls


def rational_flops_plain(m: int, n: int) -> OpCount:
    """Op count of the power-sum rational evaluation.

    Powers of x cost m(m+1)/2 (resp. n(n+1)/2) multiplications, the
    coefficient products m (resp. n) more; additions are m for the
    numerator, n for the inner polynomial and 1 after the abs.
    """
    if m < 0 or n < 0:
        raise ValueError("degrees must be non-negative")
    mults = m * (m + 1) // 2 + n * (n + 1) // 2 + m + n
    adds = m + n + 1
    return OpCount(mults=mults, adds=adds, abs_ops=1, divs=1)


def rational_flops_horner(m: int, n: int) -> OpCount:
    """Op count of the nested (Horner) rational evaluation:
    m+n multiplications, m+n+1 additions, one abs, one division."""
    if m < 0 or n < 0:
        raise ValueError("degrees must be non-negative")
    return OpCount(mults=m + n, adds=m + n + 1, abs_ops=1, divs=1)


def rational_flops_per_scalar(m: int, n: int) -> int:
    """Per-element activation cost with Horner evaluation: 2m+2n+3."""
    return rational_flops_horner(m, n).total()


def kan_edge_flops(G: int, K: int) -> float:
    """Per-edge cost bracket of a B-spline evaluated with the De Boor-Cox
    recursion: 9K(G + 1.5K) + 2G - 2.5K + 3."""
    return 9 * K * (G + 1.5 * K) + 2 * G - 2.5 * K + 3


def mlp_layer_flops(d_in: int, d_out: int, nonlinear_flops: int) -> int:
    """Linear layer followed by a fixed activation on each output."""
    return nonlinear_flops * d_out + 2 * d_in * d_out


def kan_layer_flops(d_in: int, d_out: int, G: int, K: int, nonlinear_flops: int) -> int:
    """B-spline KAN layer: one base nonlinearity per input channel plus
    the spline bracket on every edge."""
    bracket = kan_edge_flops(G, K)
    total = nonlinear_flops * d_in + d_in * d_out * bracket
    return int(round(total))


def grkan_layer_flops(d_in: int, d_out: int, m: int, n: int) -> int:
    """Group-rational layer: Horner activation per input channel, then a
    dense linear map."""
    return rational_flops_per_scalar(m, n) * d_in + 2 * d_in * d_out


def mlp_layer_params(d_in: int, d_out: int) -> int:
    return d_in * d_out + d_out


def kan_layer_params(d_in: int, d_out: int, G: int, K: int) -> int:
    return d_in * d_out * (G + K + 3) + d_out


def grkan_layer_params(d_in: int, d_out: int, m: int, n: int, g: int) -> int:
    """Parameters under the shared-denominator layout: one numerator per
    group plus a single denominator vector shared by all groups."""
    return d_in * d_out + d_out + (m + 1) * g + n


def grkan_layer_params_table(d_in: int, d_out: int, m: int, n: int, g: int) -> int:
    """Parameter count as tabulated in the source comparison (m + n*g
    extra); kept for cross-checking, contradicts the shared-denominator
    layout and is not what the layer allocates."""
    return d_in * d_out + d_out + m + n * g


class CountingScalar:
    """Symbolic scalar that tallies arithmetic performed on it."""

    __slots__ = ("counter",)

    def __init__(self, counter: OpCount):
        self.counter = counter

    def _lift(self, other):
        if isinstance(other, CountingScalar):
            return other
        return self

    def __mul__(self, other):
        self.counter.mults += 1
        return self._lift(other)

    __rmul__ = __mul__

    def __add__(self, other):
        self.counter.adds += 1
        return self._lift(other)

    __radd__ = __add__

    def __abs__(self):
        self.counter.abs_ops += 1
        return self

    def __truediv__(self, other):
        self.counter.divs += 1
        return self._lift(other)

    __rtruediv__ = __truediv__


def count_horner_ops(m: int, n: int) -> OpCount:
    """Execute the Horner rational core on a counting scalar and report
    the arithmetic it actually performed."""
    counter = OpCount()
    x = CountingScalar(counter)
    a = [CountingScalar(counter) for _ in range(m + 1)]
    b = [CountingScalar(counter) for _ in range(n)]
    horner_rational(a, b, x, zero=CountingScalar(counter))
    return counter


def count_polynomial_ops(degree: int) -> OpCount:
    """Op count of one Horner polynomial of the given degree, measured
    by instrumented execution."""
    counter = OpCount()
    x = CountingScalar(counter)
    coeffs = [CountingScalar(counter) for _ in range(degree + 1)]
    polynomial_horner(coeffs, x)
    return counter


def audit(variant: str, d_in: int, d_out: int, m: int = 5, n: int = 4,
          g: int = 8, G: int = 3, K: int = 3, nonlinear_flops: int = 0) -> dict:
    """Full accounting for one layer variant, JSON-serializable."""
    variant_key = variant.lower().replace("-", "").replace("_", "")
    if variant_key == "mlp":
        params = mlp_layer_params(d_in, d_out)
        flops = mlp_layer_flops(d_in, d_out, nonlinear_flops)
        breakdown = {"nonlinear": nonlinear_flops * d_out,
                     "linear": 2 * d_in * d_out}
    elif variant_key == "kan":
        params = kan_layer_params(d_in, d_out, G, K)
        flops = kan_layer_flops(d_in, d_out, G, K, nonlinear_flops)
        breakdown = {"nonlinear": nonlinear_flops * d_in,
                     "spline_edges": int(round(d_in * d_out * kan_edge_flops(G, K)))}
    elif variant_key == "grkan":
        params = grkan_layer_params(d_in, d_out, m, n, g)
        flops = grkan_layer_flops(d_in, d_out, m, n)
        breakdown = {
            "activation": rational_flops_per_scalar(m, n) * d_in,
            "linear": 2 * d_in * d_out,
            "params_table_convention": grkan_layer_params_table(d_in, d_out, m, n, g),
        }
    else:
        raise ValueError(f"unknown variant {variant!r} (MLP, KAN, GR-KAN)")
    return {
        "variant": variant,
        "dims": {"d_in": d_in, "d_out": d_out, "m": m, "n": n, "g": g,
                 "G": G, "K": K, "nonlinear_flops": nonlinear_flops},
        "params": params,
        "flops": flops,
        "breakdown": breakdown,
        "per_scalar": {
            "rational_plain": asdict(rational_flops_plain(m, n)),
            "rational_horner": asdict(rational_flops_horner(m, n)),
            "bspline_edge": kan_edge_flops(G, K),
        },
    }


def audit_json(*args, **kwargs) -> str:
    return json.dumps(audit(*args, **kwargs), indent=2)
