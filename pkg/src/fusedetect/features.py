"""Modality encoders, social vector schema, normalization, and early fusion.

Each record becomes one fixed-length fusion vector: the text block, image
block, and social block concatenated in that order. Absent modalities
contribute zero blocks and clear their mask bit, so every record in a run has
the same dimensionality.

The bundled encoders are deterministic and dependency-free so full runs work
offline; real pretrained encoders plug in through the same interface.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .corpus import TweetRecord
from .enrichment import EnrichmentRecord, Gender
from .errors import DimensionMismatch, EmptyTraining, EncoderFailure, NotRegistered, SchemaMismatch
from .vision import RGBImage

OCR_SEPARATOR = "<ocr>"


class Modality(Enum):
    TEXT = "text"
    IMAGE = "image"
    SOCIAL = "social"


class EncoderHandle(Protocol):
    """Deterministic fixed-width encoder for one modality."""

    name: str
    modality: Modality
    output_dim: int

    def encode(self, value) -> np.ndarray: ...


class HashTextEncoder:
    """Seeded hash projection of whitespace tokens, mean-pooled.

    Each token t maps to a pseudo-random vector drawn as
    ``default_rng(first 8 bytes of sha256("{seed}|{t}"), big-endian).uniform(-1, 1, dim)``;
    the text vector is the mean over token vectors. The empty string maps to
    the zero vector. Stable across processes (no interpreter hash salt).
    """

    modality = Modality.TEXT

    def __init__(self, output_dim: int, seed: int = 0):
        if output_dim < 1:
            raise ValueError("output_dim must be positive")
        self.name = f"hash-{output_dim}-s{seed}"
        self.output_dim = output_dim
        self.seed = seed

    def token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}|{token}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        return rng.uniform(-1.0, 1.0, self.output_dim)

    def encode(self, text: str) -> np.ndarray:
        tokens = text.split()
        if not tokens:
            return np.zeros(self.output_dim)
        return np.mean([self.token_vector(t) for t in tokens], axis=0)


class ChannelMomentImageEncoder:
    """Projects each channel's intensity histogram onto fixed polynomial bases.

    Feature (c, p) is the mean of (value/255)**p over all pixels of channel c,
    for p = 1..ceil(dim/3), laid out channel-major and truncated to dim. The
    first moment per channel is the mean pixel intensity, so the all-black
    image maps to the zero vector.
    """

    modality = Modality.IMAGE

    def __init__(self, output_dim: int):
        if output_dim < 1:
            raise ValueError("output_dim must be positive")
        self.name = f"moments-{output_dim}"
        self.output_dim = output_dim
        self.moments_per_channel = math.ceil(output_dim / 3)

    def encode(self, img: RGBImage) -> np.ndarray:
        arr = img.as_array().astype(np.float64) / 255.0
        feats = np.empty((3, self.moments_per_channel))
        powered = arr.copy()
        for p in range(self.moments_per_channel):
            feats[:, p] = powered.mean(axis=0)
            powered *= arr
        return feats.reshape(-1)[: self.output_dim].copy()


_TEXT_ENCODERS: dict[str, type] = {"hash": HashTextEncoder}
_IMAGE_ENCODERS: dict[str, type] = {"moments": ChannelMomentImageEncoder}


def register_text_encoder(name: str, factory: type) -> None:
    _TEXT_ENCODERS[name] = factory


def register_image_encoder(name: str, factory: type) -> None:
    _IMAGE_ENCODERS[name] = factory


def create_text_encoder(name: str, output_dim: int, seed: int = 0):
    if name not in _TEXT_ENCODERS:
        raise NotRegistered(f"unknown text encoder {name!r}")
    return _TEXT_ENCODERS[name](output_dim, seed)


def create_image_encoder(name: str, output_dim: int):
    if name not in _IMAGE_ENCODERS:
        raise NotRegistered(f"unknown image encoder {name!r}")
    return _IMAGE_ENCODERS[name](output_dim)


def text_encoding_input(cleaned_text: str, ocr_text: str) -> str:
    """Text fed to the text encoder: cleaned text plus any embedded-image text.

    OCR output is appended after a separator token so text printed over images
    is visible to the text model as well as exposed separately.
    """
    if ocr_text:
        return f"{cleaned_text} {OCR_SEPARATOR} {ocr_text.lower()}".strip()
    return cleaned_text


def encode_text(cleaned_text: str, enc: EncoderHandle) -> np.ndarray:
    """Encode text to a vector of length enc.output_dim."""
    if enc.modality is not Modality.TEXT:
        raise ValueError(f"encoder {enc.name} is not a text encoder")
    try:
        vec = np.asarray(enc.encode(cleaned_text), dtype=np.float64)
    except Exception as exc:
        raise EncoderFailure(f"text encoder {enc.name} failed: {exc}")
    if vec.shape != (enc.output_dim,):
        raise EncoderFailure(f"text encoder {enc.name} returned shape {vec.shape}, expected ({enc.output_dim},)")
    return vec


def encode_image(img: RGBImage, enc: EncoderHandle) -> np.ndarray:
    """Encode an image to a vector of length enc.output_dim."""
    if enc.modality is not Modality.IMAGE:
        raise ValueError(f"encoder {enc.name} is not an image encoder")
    try:
        vec = np.asarray(enc.encode(img), dtype=np.float64)
    except Exception as exc:
        raise EncoderFailure(f"image encoder {enc.name} failed: {exc}")
    if vec.shape != (enc.output_dim,):
        raise EncoderFailure(f"image encoder {enc.name} returned shape {vec.shape}, expected ({enc.output_dim},)")
    return vec


class ColumnKind(Enum):
    NUMERIC = "numeric"
    BOOLEAN = "boolean"
    ONEHOT = "onehot"
    FLAG = "flag"


@dataclass(frozen=True)
class SchemaColumn:
    name: str
    kind: ColumnKind


@dataclass(frozen=True)
class SocialVectorSchema:
    """Fixed, versioned column layout of the social feature block."""

    columns: tuple[SchemaColumn, ...]
    version: int = 1

    @property
    def total_dim(self) -> int:
        return len(self.columns)

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise SchemaMismatch(f"no column named {name!r}")

    def numeric_mask(self) -> np.ndarray:
        return np.array([c.kind is ColumnKind.NUMERIC for c in self.columns])

    @classmethod
    def default(cls) -> "SocialVectorSchema":
        cols = [
            SchemaColumn("retweet_count", ColumnKind.NUMERIC),
            SchemaColumn("favourite_count", ColumnKind.NUMERIC),
            SchemaColumn("retweeted", ColumnKind.BOOLEAN),
            SchemaColumn("followers_count", ColumnKind.NUMERIC),
            SchemaColumn("favorites_count", ColumnKind.NUMERIC),
            SchemaColumn("friends_count", ColumnKind.NUMERIC),
            SchemaColumn("verified", ColumnKind.BOOLEAN),
            SchemaColumn("statuses_count", ColumnKind.NUMERIC),
            SchemaColumn("gender=male", ColumnKind.ONEHOT),
            SchemaColumn("gender=female", ColumnKind.ONEHOT),
            SchemaColumn("gender=undetermined", ColumnKind.ONEHOT),
            SchemaColumn("bot_score", ColumnKind.NUMERIC),
            SchemaColumn("bot_score_present", ColumnKind.FLAG),
            SchemaColumn("popular", ColumnKind.BOOLEAN),
            SchemaColumn("account_age_days", ColumnKind.NUMERIC),
            SchemaColumn("object_text_similarity", ColumnKind.NUMERIC),
            SchemaColumn("object_text_similarity_present", ColumnKind.FLAG),
        ]
        return cls(columns=tuple(cols))


def build_social_vector(rec: TweetRecord, enr: EnrichmentRecord, schema: SocialVectorSchema) -> np.ndarray:
    """Serialize record and enrichment fields in schema order.

    Booleans become {0,1}; absent optionals contribute 0 with their presence
    flag 0. Raises SchemaMismatch for columns the record pair cannot supply.
    """
    values = {
        "retweet_count": float(rec.retweet_count),
        "favourite_count": float(rec.favourite_count),
        "retweeted": 1.0 if rec.retweeted else 0.0,
        "followers_count": float(rec.user.followers_count),
        "favorites_count": float(rec.user.favorites_count),
        "friends_count": float(rec.user.friends_count),
        "verified": 1.0 if rec.user.verified else 0.0,
        "statuses_count": float(rec.user.statuses_count),
        "gender=male": 1.0 if enr.gender is Gender.MALE else 0.0,
        "gender=female": 1.0 if enr.gender is Gender.FEMALE else 0.0,
        "gender=undetermined": 1.0 if enr.gender is Gender.UNDETERMINED else 0.0,
        "bot_score": enr.bot_score if enr.bot_score is not None else 0.0,
        "bot_score_present": 1.0 if enr.bot_score is not None else 0.0,
        "popular": 1.0 if enr.popular else 0.0,
        "account_age_days": float(enr.account_age_days),
        "object_text_similarity": enr.object_text_similarity if enr.object_text_similarity is not None else 0.0,
        "object_text_similarity_present": 1.0 if enr.object_text_similarity is not None else 0.0,
    }
    vec = np.empty(schema.total_dim)
    for i, col in enumerate(schema.columns):
        if col.name not in values:
            raise SchemaMismatch(f"schema column {col.name!r} has no source field")
        vec[i] = values[col.name]
    return vec


class SocialFeatureNormalizer(TransformerMixin, BaseEstimator):
    """Min-max scaling of the numeric social columns, fitted on training data only.

    Numeric columns map through (x - min) / (max - min), clamped to [0, 1] for
    values outside the training range; columns constant in training map to 0.
    Boolean, one-hot, and presence-flag columns pass through untouched.

    Parameters
    ----------
    schema : SocialVectorSchema, optional
        Column layout; defaults to the bundled schema.
    """

    def __init__(self, schema: Optional[SocialVectorSchema] = None):
        self.schema = schema

    def _resolved_schema(self) -> SocialVectorSchema:
        return self.schema if self.schema is not None else SocialVectorSchema.default()

    def fit(self, X, y=None) -> "SocialFeatureNormalizer":
        schema = self._resolved_schema()
        try:
            X = check_array(X, dtype=np.float64)
        except ValueError as exc:
            if np.asarray(X).size == 0:
                raise EmptyTraining("normalizer needs at least one training vector")
            raise
        if X.shape[1] != schema.total_dim:
            raise SchemaMismatch(f"vectors have {X.shape[1]} columns, schema has {schema.total_dim}")
        numeric = schema.numeric_mask()
        self.min_ = np.where(numeric, X.min(axis=0), 0.0)
        self.max_ = np.where(numeric, X.max(axis=0), 0.0)
        self.constant_ = numeric & (self.min_ == self.max_)
        self.numeric_mask_ = numeric
        self.n_features_in_ = schema.total_dim
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "min_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise SchemaMismatch(f"vectors have {X.shape[1]} columns, normalizer fitted on {self.n_features_in_}")
        out = X.copy()
        scalable = self.numeric_mask_ & ~self.constant_
        span = np.where(scalable, self.max_ - self.min_, 1.0)
        scaled = np.clip((X - self.min_) / span, 0.0, 1.0)
        out[:, scalable] = scaled[:, scalable]
        out[:, self.constant_] = 0.0
        return out

    def state_dict(self) -> dict:
        check_is_fitted(self, "min_")
        return {
            "schema_version": self._resolved_schema().version,
            "min": self.min_.tolist(),
            "max": self.max_.tolist(),
        }

    @classmethod
    def from_state_dict(cls, state: dict, schema: Optional[SocialVectorSchema] = None) -> "SocialFeatureNormalizer":
        norm = cls(schema=schema)
        resolved = norm._resolved_schema()
        norm.min_ = np.asarray(state["min"], dtype=np.float64)
        norm.max_ = np.asarray(state["max"], dtype=np.float64)
        norm.numeric_mask_ = resolved.numeric_mask()
        norm.constant_ = norm.numeric_mask_ & (norm.min_ == norm.max_)
        norm.n_features_in_ = resolved.total_dim
        return norm


def fit_normalizer(train_vectors: Sequence[np.ndarray], schema: SocialVectorSchema) -> SocialFeatureNormalizer:
    """Fit min/max per numeric column from training vectors only."""
    if len(train_vectors) == 0:
        raise EmptyTraining("normalizer needs at least one training vector")
    return SocialFeatureNormalizer(schema=schema).fit(np.asarray(train_vectors))


def apply_normalizer(normalizer: SocialFeatureNormalizer, vector: np.ndarray) -> np.ndarray:
    """Normalize one raw social vector."""
    return normalizer.transform(np.asarray(vector, dtype=np.float64).reshape(1, -1))[0]


@dataclass(frozen=True)
class FeatureBundle:
    """Per-record encoded modality vectors plus the assembled fusion vector."""

    tweet_id: str
    text_vec: Optional[np.ndarray]
    image_vec: Optional[np.ndarray]
    social_vec: Optional[np.ndarray]
    modality_mask: tuple[bool, bool, bool]
    fusion_vec: np.ndarray
    dims: tuple[int, int, int]


def assemble_fusion(
    text_vec: Optional[np.ndarray],
    image_vec: Optional[np.ndarray],
    social_vec: Optional[np.ndarray],
    dims: tuple[int, int, int],
    tweet_id: str = "",
) -> FeatureBundle:
    """Concatenate [text | image | social] blocks, zero-filling absent ones.

    Every present vector must match its configured dim (DimensionMismatch
    otherwise). The mask records which modalities were actually present.
    """
    d_t, d_i, d_s = dims
    blocks = []
    mask = []
    kept: list[Optional[np.ndarray]] = []
    for vec, dim, label in ((text_vec, d_t, "text"), (image_vec, d_i, "image"), (social_vec, d_s, "social")):
        if vec is None:
            blocks.append(np.zeros(dim))
            mask.append(False)
            kept.append(None)
        else:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (dim,):
                raise DimensionMismatch(f"{label} vector has shape {arr.shape}, configured dim {dim}")
            blocks.append(arr)
            mask.append(True)
            kept.append(arr)
    fusion = np.concatenate(blocks)
    return FeatureBundle(
        tweet_id=tweet_id,
        text_vec=kept[0],
        image_vec=kept[1],
        social_vec=kept[2],
        modality_mask=(mask[0], mask[1], mask[2]),
        fusion_vec=fusion,
        dims=(d_t, d_i, d_s),
    )


def save_feature_store(
    path: str | Path,
    bundles: Sequence[FeatureBundle],
    text_encoder_name: str,
    image_encoder_name: str,
    schema_version: int = 1,
) -> None:
    """Persist fusion vectors and masks so evaluation can replay without re-encoding.

    Layout: JSON lines. The first line is a header with the schema version,
    block dims, and encoder names; each following line is one record with its
    tweet_id, modality mask, and fusion vector.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not bundles:
        raise ValueError("no bundles to save")
    dims = bundles[0].dims
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "kind": "features",
            "schema_version": schema_version,
            "d_t": dims[0],
            "d_i": dims[1],
            "d_s": dims[2],
            "text_encoder": text_encoder_name,
            "image_encoder": image_encoder_name,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for b in bundles:
            if b.dims != dims:
                raise DimensionMismatch(f"bundle {b.tweet_id} dims {b.dims} != store dims {dims}")
            row = {
                "tweet_id": b.tweet_id,
                "mask": [int(m) for m in b.modality_mask],
                "fusion": b.fusion_vec.tolist(),
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_feature_store(path: str | Path) -> tuple[dict, list[FeatureBundle]]:
    """Reload a feature store; returns (header, bundles)."""
    path = Path(path)
    header: Optional[dict] = None
    bundles: list[FeatureBundle] = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row.get("kind") == "features":
                header = row
                continue
            if header is None:
                raise ValueError(f"feature store {path} is missing its header line")
            dims = (header["d_t"], header["d_i"], header["d_s"])
            fusion = np.asarray(row["fusion"], dtype=np.float64)
            if fusion.shape != (sum(dims),):
                raise DimensionMismatch(f"record {row['tweet_id']} has fusion length {fusion.shape[0]}")
            mask = tuple(bool(m) for m in row["mask"])
            d_t, d_i, d_s = dims
            text_vec = fusion[:d_t] if mask[0] else None
            image_vec = fusion[d_t : d_t + d_i] if mask[1] else None
            social_vec = fusion[d_t + d_i :] if mask[2] else None
            bundles.append(
                FeatureBundle(
                    tweet_id=row["tweet_id"],
                    text_vec=text_vec,
                    image_vec=image_vec,
                    social_vec=social_vec,
                    modality_mask=(mask[0], mask[1], mask[2]),
                    fusion_vec=fusion,
                    dims=dims,
                )
            )
    if header is None:
        raise ValueError(f"feature store {path} is empty")
    return header, bundles
