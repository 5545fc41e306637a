"""Run configuration: one JSON document, schema-validated before any work."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .losses import LossWeights
from .models.specs import CriticSpec, GeneratorSpec, small_critic_spec
from .training.config import TrainConfig, VARIANTS

SCHEMA_VERSION = 1

_TRAIN_PROPS = {
    "total_iters": {"type": "integer", "minimum": 1},
    "base_lr": {"type": "number", "exclusiveMinimum": 0},
    "decay_factor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    "decay_interval": {"type": "integer", "minimum": 1},
    "batch_size": {"type": "integer", "minimum": 1},
    "linear_scale": {"enum": [2, 3, 4, 8]},
    "checkpoint_interval": {"type": "integer", "minimum": 1},
    "variant": {"enum": list(VARIANTS)},
    "seed": {"type": "integer"},
    "init_seed": {"type": "integer"},
    "roi_patch_size": {"type": "integer", "minimum": 8},
    "roi_max_patches": {"type": "integer", "minimum": 1},
    "roi_coverage_tau": {"type": "number", "minimum": 0, "maximum": 1},
    "crop_size": {"type": ["integer", "null"], "minimum": 1},
    "pretrain_iters": {"type": "integer", "minimum": 0},
}

_GENERATOR_PROPS = {
    "n_rrdb_blocks": {"type": "integer", "minimum": 1},
    "base_channels": {"type": "integer", "minimum": 1},
    "growth_channels": {"type": "integer", "minimum": 1},
    "residual_scaling": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
}

_CRITIC_PROPS = {
    "input_size": {"type": "array", "items": {"type": "integer", "minimum": 1},
                   "minItems": 2, "maxItems": 2},
    "conv_stages": {"type": "array", "items": {
        "type": "array", "items": {"type": "integer", "minimum": 1},
        "minItems": 2, "maxItems": 2}},
    "leak": {"type": "number", "exclusiveMinimum": 0},
    "head_width": {"type": "integer", "minimum": 1},
}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "manifest", "out_dir"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "manifest": {"type": "string"},
        "dataset_label": {"type": "string"},
        "out_dir": {"type": "string"},
        "train": {"type": "object", "additionalProperties": False,
                  "properties": _TRAIN_PROPS},
        "losses": {"type": "object", "additionalProperties": False, "properties": {
            "eta": {"type": "number", "minimum": 0},
            "lambda_t1": {"type": "number", "minimum": 0},
            "lambda_t2": {"type": "number", "minimum": 0},
            "alpha_edge": {"type": "number", "minimum": 0},
            "perceptual": {"type": "object", "additionalProperties": False, "properties": {
                "enabled": {"type": "boolean"},
                "weights_path": {"type": ["string", "null"]},
                "tap": {"type": ["string", "null"]},
                "seed": {"type": "integer"},
            }},
        }},
        "generator": {"type": "object", "additionalProperties": False,
                      "properties": _GENERATOR_PROPS},
        "critics": {"type": "object", "additionalProperties": False, "properties": {
            "t1": {"type": "object", "additionalProperties": False,
                   "properties": _CRITIC_PROPS},
            "t2": {"type": "object", "additionalProperties": False,
                   "properties": _CRITIC_PROPS},
        }},
        "metrics": {"type": "object", "additionalProperties": False, "properties": {
            "niqe_model": {"type": ["string", "null"]},
            "ma_scorer": {"type": ["string", "null"]},
            "area_scale": {"enum": [4, 9, 16, 64]},
        }},
    },
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    manifest: Path
    out_dir: Path
    train: TrainConfig
    generator: GeneratorSpec
    t1_spec: CriticSpec
    t2_spec: CriticSpec
    dataset_label: str | None = None
    perceptual: dict = field(default_factory=lambda: {
        "enabled": True, "weights_path": None, "tap": None, "seed": 0})
    niqe_model: Path | None = None
    ma_scorer: str | None = None
    area_scale: int | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def effective_area_scale(self) -> int:
        return self.area_scale or self.train.linear_scale ** 2

    def build_feature_extractor(self):
        from .losses import FeatureExtractor
        if not self.perceptual.get("enabled", True):
            return None
        weights = self.perceptual.get("weights_path")
        tap = self.perceptual.get("tap")
        if weights:
            return FeatureExtractor.from_file(weights)
        return FeatureExtractor.default(seed=self.perceptual.get("seed", 0), tap=tap)


def validate_run_config(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(RUN_CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        details = "; ".join(
            f"{'/'.join(str(p) for p in err.absolute_path) or '<root>'}: {err.message}"
            for err in errors
        )
        raise ConfigError(f"invalid run config: {details}")


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_run_config(doc)
    base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else (base / p)

    train_doc = dict(doc.get("train", {}))
    losses_doc = dict(doc.get("losses", {}))
    perceptual = {"enabled": True, "weights_path": None, "tap": None, "seed": 0}
    perceptual.update(losses_doc.pop("perceptual", {}))
    weights = LossWeights(**losses_doc)
    train = TrainConfig(weights=weights, **train_doc)

    gen_doc = dict(doc.get("generator", {}))
    generator = GeneratorSpec(linear_scale=train.linear_scale, **gen_doc)

    critics_doc = doc.get("critics", {})
    p = train.roi_patch_size

    def critic_spec(key, default):
        sub = critics_doc.get(key)
        if sub is None:
            return default
        sub = dict(sub)
        if "input_size" in sub:
            sub["input_size"] = tuple(sub["input_size"])
        if "conv_stages" in sub:
            sub["conv_stages"] = tuple(tuple(s) for s in sub["conv_stages"])
        return CriticSpec(**{**default.__dict__, **sub})

    t1_spec = critic_spec("t1", CriticSpec(input_size=(p, p)))
    t2_spec = critic_spec("t2", small_critic_spec((p, p)))

    metrics_doc = doc.get("metrics", {})
    if perceptual.get("weights_path"):
        perceptual["weights_path"] = str(resolve(perceptual["weights_path"]))
    return RunConfig(
        manifest=resolve(doc["manifest"]),
        out_dir=resolve(doc["out_dir"]),
        train=train,
        generator=generator,
        t1_spec=t1_spec,
        t2_spec=t2_spec,
        dataset_label=doc.get("dataset_label"),
        perceptual=perceptual,
        niqe_model=resolve(metrics_doc["niqe_model"]) if metrics_doc.get("niqe_model") else None,
        ma_scorer=metrics_doc.get("ma_scorer"),
        area_scale=metrics_doc.get("area_scale"),
        raw=doc,
    )


def serialize_run_config(cfg: RunConfig) -> dict:
    """Round-trippable document (parse(serialize(parse(x))) == parse(x))."""
    return json.loads(json.dumps(cfg.raw))
