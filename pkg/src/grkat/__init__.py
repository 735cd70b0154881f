"""Group-rational KAN layers with safe Pade activations, a minimal
reverse-mode tape, a desk-scale transformer, and numeric audit tools."""

from .errors import (ConfigError, DivergenceError, DomainError, FitError,
                     FormatError, ShapeError)
from .rational import (RationalCoeffs, eval_batch, eval_horner, eval_naive,
                       grad, grad_batch)
from .grkan import (ACT_KERNELS, GroupRationalParams, GrKanLayer,
                    act_fused, act_looped, act_vectorized, group_rational)
from .initfit import (REFERENCE_GAINS, FitResult, GainEstimate,
                      estimate_gain, fit_rational, init_variance_preserving,
                      kan_default_variance, make_grkan_layer,
                      transfer_from_mlp, variance_profile)
from .flops import (OpCount, audit, count_horner_ops, grkan_layer_flops,
                    grkan_layer_params, kan_edge_flops, kan_layer_flops,
                    mlp_layer_flops, rational_flops_horner,
                    rational_flops_plain)
from .model import (KatConfig, KatModel, OptimizerCfg, PRESETS, TraceRow,
                    build, patchify, preset_config, train)
from .config import RunConfig, load_run_config
from .data import Dataset, blob_classification, load_dataset, periodic_regression
from .tensor import Tensor, backward, no_grad

__version__ = "1.0.0"

__all__ = [
    "ACT_KERNELS", "ConfigError", "Dataset", "DivergenceError", "DomainError",
    "FitError", "FitResult", "FormatError", "GainEstimate", "GrKanLayer",
    "GroupRationalParams", "KatConfig", "KatModel", "OpCount", "OptimizerCfg",
    "PRESETS", "REFERENCE_GAINS", "RationalCoeffs", "RunConfig", "ShapeError",
    "Tensor", "TraceRow", "act_fused", "act_looped", "act_vectorized",
    "audit", "backward", "blob_classification", "build", "count_horner_ops",
    "estimate_gain", "eval_batch", "eval_horner", "eval_naive", "fit_rational",
    "grad", "grad_batch", "grkan_layer_flops", "grkan_layer_params",
    "group_rational", "init_variance_preserving", "kan_default_variance",
    "kan_edge_flops", "kan_layer_flops", "load_dataset", "load_run_config",
    "make_grkan_layer", "mlp_layer_flops", "no_grad", "patchify",
    "periodic_regression", "preset_config", "rational_flops_horner",
    "rational_flops_plain", "train", "transfer_from_mlp", "variance_profile",
]
