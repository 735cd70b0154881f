"""Run configuration: YAML document with strict key checking.

Unknown keys are rejected; all defaults are materialized so the echoed
effective config is complete.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigError
from .model import KatConfig, preset_config

_MODEL_KEYS = {
    "preset", "layers", "hidden", "mixer_hidden", "heads", "mixer", "groups",
    "m", "n", "rational1", "rational2", "mlp_activation",
    "per_group_denominator", "input_kind", "img_size", "patch_size",
    "in_chans", "tokens", "token_dim", "num_outputs", "head", "pos_learnable",
}
_OPT_KEYS = {"lr", "weight_decay", "beta1", "beta2", "eps", "schedule",
             "warmup_steps", "steps", "batch_size", "seed", "trace_every"}
_DATA_KEYS = {"kind", "n", "classes", "img", "patch", "noise", "seed",
              "path", "images", "labels", "limit"}
_TOP_KEYS = {"model", "optimizer", "dataset", "seed", "out_dir"}


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    dataset: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"

    def model_config(self) -> KatConfig:
        spec = dict(self.model)
        preset = spec.pop("preset", None)
        if preset is not None:
            return preset_config(preset, **spec)
        return KatConfig(**spec)


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError("run config must be a mapping")
    _check_keys(doc, _TOP_KEYS, "top-level")
    _check_keys(doc.get("model", {}) or {}, _MODEL_KEYS, "model")
    _check_keys(doc.get("optimizer", {}) or {}, _OPT_KEYS, "optimizer")
    _check_keys(doc.get("dataset", {}) or {}, _DATA_KEYS, "dataset")
    return RunConfig(model=doc.get("model", {}) or {},
                     optimizer=doc.get("optimizer", {}) or {},
                     dataset=doc.get("dataset", {}) or {},
                     seed=doc.get("seed", 0),
                     out_dir=doc.get("out_dir", "out"))


def effective_config(run: RunConfig, opt_cfg, model_cfg: KatConfig) -> dict:
    """Fully materialized config (every default filled in)."""
    return {
        "model": dict(model_cfg.__dict__),
        "optimizer": asdict(opt_cfg),
        "dataset": dict(run.dataset),
        "seed": run.seed,
        "out_dir": run.out_dir,
    }


def dump_effective(path, run: RunConfig, opt_cfg, model_cfg: KatConfig):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(effective_config(run, opt_cfg, model_cfg), fh,
                       sort_keys=False)
