"""Pipeline configuration: a human-editable YAML file plus CLI overrides."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Optional

import yaml

from .enrichment import DEFAULT_CACHE_TTL_DAYS, DEFAULT_REFERENCE_DATE
from .errors import ConfigError
from .models import ExperimentSpec, HyperParams, registered_backends, spec_from_dict
from .textprep import _TRANSLATION_BACKENDS
from .vision import _OBJECT_DETECTORS, _OCR_ENGINES


@dataclass(frozen=True)
class PipelineConfig:
    manifest: str = "manifest.jsonl"
    out_dir: str = "out"
    reference_date: date = DEFAULT_REFERENCE_DATE

    ocr_engine: str = "glyph"
    object_detector: str = "color"
    translator: str = "identity"

    bot_enabled: bool = False
    bot_endpoint: str = ""
    bot_cache: str = ""
    bot_ttl_days: int = DEFAULT_CACHE_TTL_DAYS

    text_encoder: str = "hash"
    text_dim: int = 768
    image_encoder: str = "moments"
    image_dim: int = 512
    encoder_seed: int = 0

    test_fraction: float = 0.2
    seed: int = 7
    seeds: Optional[tuple[int, ...]] = None
    averaging: str = "macro"
    hyperparams: HyperParams = field(default_factory=HyperParams)
    matrix: Optional[tuple[ExperimentSpec, ...]] = None

    stopwords_path: Optional[str] = None
    gender_dict_path: Optional[str] = None
    verdict_aliases_path: Optional[str] = None
    translator_cache: Optional[str] = None


def _parse_hyperparams(row: dict) -> HyperParams:
    try:
        return HyperParams(
            batch_size=int(row.get("batch_size", 32)),
            optimizer=str(row.get("optimizer", "adam")),
            learning_rate=float(row.get("learning_rate", 0.1)),
            loss=str(row.get("loss", "categorical_cross_entropy")),
            epochs=int(row.get("epochs", 50)),
            early_stop_patience=row.get("early_stop_patience", 5),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid hyperparams: {exc}")


def load_config(path: str | Path) -> PipelineConfig:
    """Read a YAML config file and validate it."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping, got {type(doc).__name__}")
    return config_from_dict(doc, base_dir=path.parent)


def config_from_dict(doc: dict, base_dir: Optional[Path] = None) -> PipelineConfig:
    def resolve(value: Optional[str]) -> Optional[str]:
        if value is None or base_dir is None:
            return value
        p = Path(value)
        return str(p if p.is_absolute() else base_dir / p)

    reference_date = doc.get("reference_date", DEFAULT_REFERENCE_DATE)
    if isinstance(reference_date, str):
        try:
            reference_date = date.fromisoformat(reference_date)
        except ValueError as exc:
            raise ConfigError(f"invalid reference_date: {exc}")

    vision_doc = doc.get("vision", {})
    text_doc = doc.get("text", {})
    bot_doc = doc.get("bot", {})
    encoders_doc = doc.get("encoders", {})
    split_doc = doc.get("split", {})

    matrix = None
    if "matrix" in doc and doc["matrix"] is not None:
        try:
            matrix = tuple(spec_from_dict(row) for row in doc["matrix"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid experiment matrix entry: {exc}")

    seeds = doc.get("seeds")
    config = PipelineConfig(
        manifest=resolve(doc.get("manifest", "manifest.jsonl")),
        out_dir=resolve(doc.get("out_dir", "out")),
        reference_date=reference_date,
        ocr_engine=vision_doc.get("ocr_engine", "glyph"),
        object_detector=vision_doc.get("object_detector", "color"),
        translator=text_doc.get("translator", "identity"),
        bot_enabled=bool(bot_doc.get("enabled", False)),
        bot_endpoint=bot_doc.get("endpoint", ""),
        bot_cache=resolve(bot_doc.get("cache", "")) or "",
        bot_ttl_days=int(bot_doc.get("ttl_days", DEFAULT_CACHE_TTL_DAYS)),
        text_encoder=encoders_doc.get("text", {}).get("name", "hash"),
        text_dim=int(encoders_doc.get("text", {}).get("dim", 768)),
        image_encoder=encoders_doc.get("image", {}).get("name", "moments"),
        image_dim=int(encoders_doc.get("image", {}).get("dim", 512)),
        encoder_seed=int(encoders_doc.get("seed", 0)),
        test_fraction=float(split_doc.get("test_fraction", 0.2)),
        seed=int(split_doc.get("seed", 7)),
        seeds=tuple(int(s) for s in seeds) if seeds else None,
        averaging=doc.get("averaging", "macro"),
        hyperparams=_parse_hyperparams(doc.get("hyperparams", {})),
        matrix=matrix,
        stopwords_path=resolve(text_doc.get("stopwords")),
        gender_dict_path=resolve(doc.get("gender_dict")),
        verdict_aliases_path=resolve(doc.get("verdict_aliases")),
        translator_cache=resolve(text_doc.get("cache")),
    )
    validate_config(config)
    return config


def validate_config(config: PipelineConfig) -> None:
    """All referenced adapters and backends must resolve; dims and fraction sane."""
    problems = []
    if config.ocr_engine not in _OCR_ENGINES:
        problems.append(f"unknown OCR engine {config.ocr_engine!r}")
    if config.object_detector not in _OBJECT_DETECTORS:
        problems.append(f"unknown object detector {config.object_detector!r}")
    if config.translator not in _TRANSLATION_BACKENDS:
        problems.append(f"unknown translator {config.translator!r}")
    if config.text_dim < 1 or config.image_dim < 1:
        problems.append("encoder dims must be positive")
    if not 0.0 < config.test_fraction < 1.0:
        problems.append(f"test_fraction must be in (0,1), got {config.test_fraction}")
    if config.averaging != "macro":
        problems.append(f"unsupported averaging mode {config.averaging!r} (only macro is implemented)")
    if config.bot_enabled and not config.bot_endpoint:
        problems.append("bot scoring enabled but no endpoint configured")
    if config.matrix is not None:
        known = set(registered_backends())
        for spec in config.matrix:
            for name in spec.backend_combo:
                if name not in known:
                    problems.append(f"spec {spec.name!r} references unregistered backend {name!r}")
    if problems:
        raise ConfigError("; ".join(problems))


def with_overrides(config: PipelineConfig, seed: Optional[int] = None, out_dir: Optional[str] = None) -> PipelineConfig:
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if out_dir is not None:
        updates["out_dir"] = out_dir
    return replace(config, **updates) if updates else config


def dump_config_yaml(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False)
