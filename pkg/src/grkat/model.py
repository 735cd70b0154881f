"""Desk-scale Kolmogorov-Arnold transformer.

Pre-norm blocks: x <- x + MSA(LN(x)); x <- x + mixer(LN(x)), where the
mixer is either a two-stage group-rational block or a plain two-layer
MLP baseline.  Token embedding is a linear map over flattened patches
(or raw feature tokens), pooling is a mean over tokens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import checkpoint as ckpt
from . import tensor as T
from .errors import ConfigError, DivergenceError, ShapeError
from .grkan import GroupRationalParams, GrKanLayer
from .initfit import REFERENCE_GAINS, estimate_gain, fit_rational
from .rational import RationalCoeffs
from .tensor import Tensor


@dataclass
class KatConfig:
    layers: int = 12
    hidden: int = 192
    mixer_hidden: int = 0  # 0 -> 4 * hidden
    heads: int = 3
    mixer: str = "grkan"  # grkan | mlp
    groups: int = 8
    m: int = 5
    n: int = 4
    rational1: str = "identity"
    rational2: str = "swish"
    mlp_activation: str = "gelu"
    per_group_denominator: bool = False
    # token spec
    input_kind: str = "image"  # image | vector
    img_size: int = 224
    patch_size: int = 16
    in_chans: int = 3
    tokens: int = 1  # vector mode
    token_dim: int = 1  # vector mode
    num_outputs: int = 1000
    head: str = "classify"  # classify | regress
    pos_learnable: bool = True

    def __post_init__(self):
        if self.mixer_hidden == 0:
            self.mixer_hidden = 4 * self.hidden
        if self.hidden % self.heads != 0:
            raise ConfigError(f"hidden {self.hidden} not divisible by heads {self.heads}")
        if self.mixer == "grkan":
            for width in (self.hidden, self.mixer_hidden):
                if width % self.groups != 0:
                    raise ConfigError(
                        f"width {width} not divisible by g={self.groups}")
        elif self.mixer != "mlp":
            raise ConfigError(f"unknown mixer {self.mixer!r}")
        if self.input_kind == "image":
            if self.img_size % self.patch_size != 0:
                raise ConfigError("img_size must be a multiple of patch_size")
        elif self.input_kind != "vector":
            raise ConfigError(f"unknown input kind {self.input_kind!r}")

    @property
    def num_tokens(self) -> int:
        if self.input_kind == "image":
            return (self.img_size // self.patch_size) ** 2
        return self.tokens

    @property
    def embed_dim(self) -> int:
        if self.input_kind == "image":
            return self.patch_size**2 * self.in_chans
        return self.token_dim


#: Published tiny/small/base dimensions plus desk-scale variants for the
#: toy tasks.
PRESETS = {
    "tiny": dict(layers=12, hidden=192, mixer_hidden=768, heads=3),
    "small": dict(layers=12, hidden=384, mixer_hidden=1536, heads=6),
    "base": dict(layers=12, hidden=768, mixer_hidden=3072, heads=12),
    "tiny-narrow": dict(layers=4, hidden=64, mixer_hidden=256, heads=4),
    "desk": dict(layers=2, hidden=64, mixer_hidden=256, heads=4),
}


def preset_config(name: str, **overrides) -> KatConfig:
    try:
        base = PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return KatConfig(**{**base, **overrides})


@lru_cache(maxsize=None)
def _fitted_coeffs(name: str, m: int, n: int) -> RationalCoeffs:
    if name == "identity":
        return RationalCoeffs.identity(m, n)
    return fit_rational(name, m=m, n=n).coeffs


@lru_cache(maxsize=None)
def _gain(name: str) -> float:
    if name in REFERENCE_GAINS:
        return REFERENCE_GAINS[name]
    return estimate_gain(name).alpha


def patchify(images: np.ndarray, patch: int) -> np.ndarray:
    """[B, H, W] or [B, H, W, C] images -> [B, T, patch*patch*C] tokens."""
    if images.ndim == 3:
        images = images[..., None]
    b, h, w, c = images.shape
    if h % patch or w % patch:
        raise ShapeError("image size not divisible by patch size")
    x = images.reshape(b, h // patch, patch, w // patch, patch, c)
    x = x.transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b, (h // patch) * (w // patch), patch * patch * c)


class KatModel:
    """Embedding, L pre-norm blocks, mean pooling, linear head."""

    def __init__(self, cfg: KatConfig, seed: int = 0, dtype=np.float64):
        self.cfg = cfg
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        d, t = cfg.hidden, cfg.num_tokens

        def uniform_fan(shape, fan_in, name):
            bound = 1.0 / math.sqrt(fan_in)
            return self._add(name, rng.uniform(-bound, bound, size=shape))

        self._add("embed.W", rng.uniform(-1, 1, size=(cfg.embed_dim, d))
                  / math.sqrt(cfg.embed_dim))
        self._add("embed.b", np.zeros(d))
        if cfg.pos_learnable:
            self._add("pos", rng.normal(scale=0.02, size=(t, d)))
        else:
            self._add("pos", _sinusoidal_encoding(t, d), trainable=False)

        self.blocks = []
        for l in range(cfg.layers):
            blk = {}
            p = f"block{l}"
            blk["ln1.g"] = self._add(f"{p}.ln1.g", np.ones(d))
            blk["ln1.b"] = self._add(f"{p}.ln1.b", np.zeros(d))
            blk["qkv.W"] = uniform_fan((3 * d, d), d, f"{p}.qkv.W")
            blk["qkv.b"] = self._add(f"{p}.qkv.b", np.zeros(3 * d))
            blk["proj.W"] = uniform_fan((d, d), d, f"{p}.proj.W")
            blk["proj.b"] = self._add(f"{p}.proj.b", np.zeros(d))
            blk["ln2.g"] = self._add(f"{p}.ln2.g", np.ones(d))
            blk["ln2.b"] = self._add(f"{p}.ln2.b", np.zeros(d))
            if cfg.mixer == "grkan":
                blk["mix1"] = self._grkan_stage(
                    rng, d, cfg.mixer_hidden, cfg.rational1, f"{p}.mix1")
                blk["mix2"] = self._grkan_stage(
                    rng, cfg.mixer_hidden, d, cfg.rational2, f"{p}.mix2")
            else:
                blk["fc1.W"] = uniform_fan((cfg.mixer_hidden, d), d, f"{p}.fc1.W")
                blk["fc1.b"] = self._add(f"{p}.fc1.b", np.zeros(cfg.mixer_hidden))
                blk["fc2.W"] = uniform_fan((d, cfg.mixer_hidden), cfg.mixer_hidden,
                                           f"{p}.fc2.W")
                blk["fc2.b"] = self._add(f"{p}.fc2.b", np.zeros(d))
            self.blocks.append(blk)

        self._add("final_ln.g", np.ones(d))
        self._add("final_ln.b", np.zeros(d))
        uniform_fan((d, cfg.num_outputs), d, "head.W")
        self._add("head.b", np.zeros(cfg.num_outputs))
        self.block_variances: list[float] = []

    # -- construction helpers ------------------------------------------------

    def _add(self, name: str, data: np.ndarray, trainable: bool = True) -> Tensor:
        tensor = Tensor(np.asarray(data, dtype=self.dtype),
                        requires_grad=trainable, name=name)
        self.params[name] = tensor
        return tensor

    def _grkan_stage(self, rng, d_in, d_out, act_name, name) -> GrKanLayer:
        cfg = self.cfg
        coeffs = _fitted_coeffs(act_name, cfg.m, cfg.n)
        act = GroupRationalParams.from_coeffs(
            d_in, cfg.groups, coeffs, cfg.per_group_denominator)
        alpha = _gain(act_name)
        w = rng.normal(scale=math.sqrt(alpha / d_in), size=(d_out, d_in))
        layer = GrKanLayer(act, w, np.zeros(d_out), name=name)
        for suffix, tensor in (("numer", layer.numer), ("denom", layer.denom),
                               ("W", layer.W), ("b", layer.bias)):
            tensor.data = tensor.data.astype(self.dtype)
            self.params[f"{name}.{suffix}"] = tensor
        return layer

    # -- forward -------------------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return [p for p in self.params.values() if p.requires_grad]

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def forward(self, tokens, record_variance: bool = False) -> Tensor:
        """tokens: [B, T, embed_dim] array or Tensor -> [B, num_outputs]."""
        x = tokens if isinstance(tokens, Tensor) else Tensor(
            np.asarray(tokens, dtype=self.dtype))
        if x.data.ndim != 3 or x.data.shape[1:] != (self.cfg.num_tokens,
                                                    self.cfg.embed_dim):
            raise ShapeError(
                f"expected tokens [B, {self.cfg.num_tokens}, "
                f"{self.cfg.embed_dim}], got {x.data.shape}")
        if record_variance:
            self.block_variances = []
        p = self.params
        d = self.cfg.hidden
        h = T.add(T.add(T.matmul(x, p["embed.W"]), p["embed.b"]), p["pos"])
        for blk in self.blocks:
            normed = T.layer_norm(h, blk["ln1.g"], blk["ln1.b"])
            qkv = T.add(T.matmul(normed, T.transpose(blk["qkv.W"], (1, 0))),
                        blk["qkv.b"])
            q = T.narrow(qkv, -1, 0, d)
            k = T.narrow(qkv, -1, d, d)
            v = T.narrow(qkv, -1, 2 * d, d)
            attn = T.softmax_attention(q, k, v, self.cfg.heads)
            attn = T.add(T.matmul(attn, T.transpose(blk["proj.W"], (1, 0))),
                         blk["proj.b"])
            h = T.add(h, attn)
            normed2 = T.layer_norm(h, blk["ln2.g"], blk["ln2.b"])
            if self.cfg.mixer == "grkan":
                mix = blk["mix2"].forward(blk["mix1"].forward(normed2))
            else:
                hid = T.add(T.matmul(normed2, T.transpose(blk["fc1.W"], (1, 0))),
                            blk["fc1.b"])
                act = T.gelu(hid) if self.cfg.mlp_activation == "gelu" else T.relu(hid)
                mix = T.add(T.matmul(act, T.transpose(blk["fc2.W"], (1, 0))),
                            blk["fc2.b"])
            if record_variance:
                self.block_variances.append(float(mix.data.var()))
            h = T.add(h, mix)
        h = T.layer_norm(h, p["final_ln.g"], p["final_ln.b"])
        pooled = T.mean(h, axis=1)
        return T.add(T.matmul(pooled, p["head.W"]), p["head.b"])

    def forward_inference(self, tokens) -> np.ndarray:
        """Deterministic forward with no tape recorded."""
        with T.no_grad():
            return self.forward(tokens).data

    def loss(self, tokens, targets) -> Tensor:
        logits = self.forward(tokens, record_variance=True)
        if self.cfg.head == "classify":
            return T.cross_entropy(logits, np.asarray(targets))
        target = np.asarray(targets, dtype=np.float64).reshape(logits.data.shape)
        return T.mse(logits, target)

    # -- persistence ---------------------------------------------------------

    def state(self) -> dict:
        return {name: t.data for name, t in self.params.items()}

    def save(self, path):
        ckpt.save(path, self.state(), meta={"config": self.cfg.__dict__,
                                            "dtype": np.dtype(self.dtype).name})

    @classmethod
    def load(cls, path) -> "KatModel":
        tensors, meta = ckpt.load(path)
        cfg_kwargs = dict(meta["config"])
        cfg = KatConfig(**cfg_kwargs)
        model = cls(cfg, seed=0, dtype=np.dtype(meta.get("dtype", "float64")))
        for name, tensor in model.params.items():
            if name not in tensors:
                raise ShapeError(f"checkpoint missing tensor {name!r}")
            if tuple(tensors[name].shape) != tensor.data.shape:
                raise ShapeError(f"checkpoint shape mismatch for {name!r}")
            tensor.data = tensors[name].astype(model.dtype)
        return model


def build(cfg: KatConfig, seed: int = 0, dtype=np.float64) -> KatModel:
    """Construct a model; two builds with the same seed are bit-identical."""
    return KatModel(cfg, seed=seed, dtype=dtype)


@dataclass
class OptimizerCfg:
    lr: float = 1e-3
    weight_decay: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    schedule: str = "cosine"  # cosine | constant
    warmup_steps: int = 0
    steps: int = 1000
    batch_size: int = 64
    seed: int = 0
    trace_every: int = 100


@dataclass
class TraceRow:
    step: int
    loss: float
    grad_norm: float
    block_variances: list = field(default_factory=list)


def _lr_at(opt: OptimizerCfg, step: int) -> float:
    if opt.warmup_steps and step < opt.warmup_steps:
        return opt.lr * (step + 1) / opt.warmup_steps
    if opt.schedule == "constant":
        return opt.lr
    progress = (step - opt.warmup_steps) / max(opt.steps - opt.warmup_steps, 1)
    return opt.lr * 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))


def train(model: KatModel, dataset, opt: OptimizerCfg) -> list[TraceRow]:
    """Minibatch training with decoupled-weight-decay Adam.

    dataset: object with .tokens [N, T, embed_dim] and .targets (int
    labels or float regression targets).  Returns the trace; raises
    DivergenceError on the first non-finite loss.  steps == 0 records
    the initial loss only.
    """
    params = model.parameters()
    m_state = [np.zeros_like(p.data) for p in params]
    v_state = [np.zeros_like(p.data) for p in params]
    rng = np.random.default_rng(opt.seed)
    n = dataset.tokens.shape[0]
    trace: list[TraceRow] = []

    with T.no_grad():
        loss0 = model.loss(dataset.tokens, dataset.targets)
    trace.append(TraceRow(0, float(loss0.data), 0.0,
                          list(model.block_variances)))

    # decay only matrix-shaped weights, mirroring the usual AdamW practice
    decay_mask = [p.data.ndim >= 2 and not p.name.endswith(("numer", "denom"))
                  for p in params]

    for step in range(opt.steps):
        idx = rng.choice(n, size=min(opt.batch_size, n), replace=False)
        for p in params:
            p.grad = None
        loss = model.loss(dataset.tokens[idx], _take(dataset.targets, idx))
        loss_val = float(loss.data)
        if not math.isfinite(loss_val):
            raise DivergenceError(f"non-finite loss at step {step}", step=step)
        T.backward(loss)
        lr = _lr_at(opt, step)
        gnorm_sq = 0.0
        t_adam = step + 1
        for i, p in enumerate(params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            gnorm_sq += float(np.sum(g * g))
            m_state[i] = opt.beta1 * m_state[i] + (1 - opt.beta1) * g
            v_state[i] = opt.beta2 * v_state[i] + (1 - opt.beta2) * g * g
            mhat = m_state[i] / (1 - opt.beta1**t_adam)
            vhat = v_state[i] / (1 - opt.beta2**t_adam)
            update = mhat / (np.sqrt(vhat) + opt.eps)
            if decay_mask[i] and opt.weight_decay:
                update = update + opt.weight_decay * p.data
            p.data = p.data - lr * update
        if (step + 1) % opt.trace_every == 0 or step + 1 == opt.steps:
            trace.append(TraceRow(step + 1, loss_val, math.sqrt(gnorm_sq),
                                  list(model.block_variances)))
    return trace


def _take(targets, idx):
    return np.asarray(targets)[idx]


def _sinusoidal_encoding(tokens: int, dim: int) -> np.ndarray:
    pos = np.arange(tokens)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    enc = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return enc
