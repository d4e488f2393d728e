"""Tweet dataset ingestion: parsing, label normalization, persistence, splitting.

The dataset lives in a line-delimited manifest (one JSON record per line, UTF-8).
Records that fail validation are collected into a ``<manifest>.rejects`` report
beside the manifest instead of aborting ingestion; scraped social data is dirty
by nature.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Optional

from .errors import EmptyDataset, InsufficientClassSize, MalformedRecord, ManifestNotFound

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class VerdictClass(Enum):
    """Normalized fact-checker verdict."""

    FALSE = "false"
    TRUE = "true"
    PARTIALLY_FALSE = "partially_false"
    OTHER = "other"


class BinaryLabel(Enum):
    """Classification target. False and partially-false verdicts count as misinformation."""

    MISINFORMATION = "misinformation"
    OTHER = "other"


@dataclass(frozen=True)
class UserSnapshot:
    handle: str
    display_name: str
    followers_count: int
    friends_count: int
    favorites_count: int
    statuses_count: int
    verified: bool
    account_created_at: datetime


@dataclass(frozen=True)
class TweetRecord:
    """One social-media post with its author snapshot and engagement counts."""

    tweet_id: str
    text: str
    language: str
    created_at: datetime
    hashtags: tuple[str, ...]
    mentions: tuple[str, ...]
    media_path: Optional[str]
    user: UserSnapshot
    retweet_count: int
    favourite_count: int
    retweeted: bool
    raw_verdict: str


@dataclass(frozen=True)
class Dataset:
    """Ordered, deduplicated records with binarized labels."""

    records: tuple[tuple[TweetRecord, BinaryLabel], ...]
    source_manifest: str
    schema_version: int = SCHEMA_VERSION

    def __len__(self) -> int:
        return len(self.records)

    def class_counts(self) -> tuple[int, int]:
        """(misinformation, other) record counts."""
        m = sum(1 for _, lab in self.records if lab is BinaryLabel.MISINFORMATION)
        return m, len(self.records) - m


@dataclass(frozen=True)
class RejectEntry:
    tweet_id: str
    reason: str


class VerdictAliasTable:
    """Case-insensitive map from published verdict strings to normalized classes.

    Loaded from a two-column TSV (alias TAB class). Unmatched strings map to
    ``VerdictClass.OTHER``.
    """

    def __init__(self, entries: dict[str, VerdictClass]):
        self.entries = {k.strip().lower(): v for k, v in entries.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "VerdictAliasTable":
        entries: dict[str, VerdictClass] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            alias, _, klass = line.partition("\t")
            entries[alias] = VerdictClass(klass.strip())
        return cls(entries)

    @classmethod
    def default(cls) -> "VerdictAliasTable":
        with resources.as_file(resources.files("fusedetect.data") / "verdict_aliases.tsv") as p:
            return cls.from_file(p)


def normalize_verdict(raw_verdict: str, aliases: Optional[VerdictAliasTable] = None) -> VerdictClass:
    """Map a published fact-checker verdict string to one of the four classes.

    Total over non-empty strings: anything without an alias entry is OTHER.
    """
    if aliases is None:
        aliases = _default_aliases()
    key = " ".join(raw_verdict.strip().lower().split())
    return aliases.entries.get(key, VerdictClass.OTHER)


def binarize_label(v: VerdictClass) -> BinaryLabel:
    """False and partially-false are misinformation; true and other are not."""
    if v in (VerdictClass.FALSE, VerdictClass.PARTIALLY_FALSE):
        return BinaryLabel.MISINFORMATION
    return BinaryLabel.OTHER


_ALIASES_CACHE: Optional[VerdictAliasTable] = None


def _default_aliases() -> VerdictAliasTable:
    global _ALIASES_CACHE
    if _ALIASES_CACHE is None:
        _ALIASES_CACHE = VerdictAliasTable.default()
    return _ALIASES_CACHE


def parse_timestamp(value: Any, field_name: str, tweet_id: str) -> datetime:
    """Parse an ISO-8601 timestamp as a UTC instant.

    Naive timestamps are taken to be UTC; zoned ones are converted.
    """
    if isinstance(value, datetime):
        dt = value
    elif isinstance(value, str):
        text = value.strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(text)
        except ValueError:
            raise MalformedRecord(tweet_id, f"unparsable timestamp in {field_name}: {value!r}")
    else:
        raise MalformedRecord(tweet_id, f"unparsable timestamp in {field_name}: {value!r}")
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _require(document: dict, key: str, tweet_id: str) -> Any:
    if key not in document or document[key] is None:
        raise MalformedRecord(tweet_id, f"missing required field {key}")
    return document[key]


def _non_negative_int(value: Any, field_name: str, tweet_id: str) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise MalformedRecord(tweet_id, f"non-integer {field_name}: {value!r}")
    if n < 0:
        raise MalformedRecord(tweet_id, f"negative {field_name}: {n}")
    return n


def _string_list(value: Any, field_name: str, tweet_id: str) -> tuple[str, ...]:
    if value is None:
        return ()
    if not isinstance(value, (list, tuple)):
        raise MalformedRecord(tweet_id, f"{field_name} must be a list")
    return tuple(str(x) for x in value)


def parse_tweet(document: dict) -> TweetRecord:
    """Validate one manifest record into a TweetRecord.

    Optional fields (media_path, hashtags, mentions) default to absent/empty.
    Raises MalformedRecord on a missing required field, unparsable timestamp,
    or negative count.
    """
    tweet_id = str(document.get("tweet_id") or "").strip()
    if not tweet_id:
        raise MalformedRecord("<missing tweet_id>", "missing required field tweet_id")

    text = _require(document, "text", tweet_id)
    raw_verdict = str(_require(document, "raw_verdict", tweet_id))
    if not raw_verdict.strip():
        raise MalformedRecord(tweet_id, "empty raw_verdict")
    created_at = parse_timestamp(_require(document, "created_at", tweet_id), "created_at", tweet_id)

    user_doc = _require(document, "user", tweet_id)
    if not isinstance(user_doc, dict):
        raise MalformedRecord(tweet_id, "user must be a sub-record")
    account_created_at = parse_timestamp(
        _require(user_doc, "account_created_at", tweet_id), "user.account_created_at", tweet_id
    )
    if account_created_at > created_at:
        raise MalformedRecord(tweet_id, "account_created_at later than tweet created_at")
    user = UserSnapshot(
        handle=str(_require(user_doc, "handle", tweet_id)),
        display_name=str(user_doc.get("display_name", "")),
        followers_count=_non_negative_int(user_doc.get("followers_count", 0), "followers_count", tweet_id),
        friends_count=_non_negative_int(user_doc.get("friends_count", 0), "friends_count", tweet_id),
        favorites_count=_non_negative_int(user_doc.get("favorites_count", 0), "favorites_count", tweet_id),
        statuses_count=_non_negative_int(user_doc.get("statuses_count", 0), "statuses_count", tweet_id),
        verified=bool(user_doc.get("verified", False)),
        account_created_at=account_created_at,
    )

    media_path = document.get("media_path")
    return TweetRecord(
        tweet_id=tweet_id,
        text=str(text),
        language=str(document.get("language", "en")).lower(),
        created_at=created_at,
        hashtags=_string_list(document.get("hashtags"), "hashtags", tweet_id),
        mentions=_string_list(document.get("mentions"), "mentions", tweet_id),
        media_path=str(media_path) if media_path else None,
        user=user,
        retweet_count=_non_negative_int(document.get("retweet_count", 0), "retweet_count", tweet_id),
        favourite_count=_non_negative_int(document.get("favourite_count", 0), "favourite_count", tweet_id),
        retweeted=bool(document.get("retweeted", False)),
        raw_verdict=raw_verdict,
    )


def load_dataset(
    manifest_path: str | Path,
    aliases: Optional[VerdictAliasTable] = None,
    write_rejects: bool = True,
) -> tuple[Dataset, list[RejectEntry]]:
    """Load all parsable manifest records with binarized labels.

    Per-record parse failures (including duplicate tweet_ids) become reject
    entries, written one per line as ``tweet_id TAB reason`` to
    ``<manifest>.rejects``. Raises ManifestNotFound / EmptyDataset.
    """
    path = Path(manifest_path)
    if not path.is_file():
        raise ManifestNotFound(str(path))

    records: list[tuple[TweetRecord, BinaryLabel]] = []
    rejects: list[RejectEntry] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                document = json.loads(line)
            except json.JSONDecodeError as exc:
                rejects.append(RejectEntry(f"<line:{lineno}>", f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(document, dict):
                rejects.append(RejectEntry(f"<line:{lineno}>", "record is not an object"))
                continue
            try:
                record = parse_tweet(document)
            except MalformedRecord as exc:
                tid = exc.tweet_id if exc.tweet_id != "<missing tweet_id>" else f"<line:{lineno}>"
                rejects.append(RejectEntry(tid, exc.reason))
                continue
            if record.tweet_id in seen_ids:
                rejects.append(RejectEntry(record.tweet_id, "duplicate tweet_id"))
                continue
            seen_ids.add(record.tweet_id)
            label = binarize_label(normalize_verdict(record.raw_verdict, aliases))
            records.append((record, label))

    if write_rejects:
        rejects_path = path.with_name(path.name + ".rejects")
        with rejects_path.open("w", encoding="utf-8") as fh:
            for entry in rejects:
                fh.write(f"{entry.tweet_id}\t{entry.reason}\n")

    if not records:
        raise EmptyDataset(f"no valid records in {path}")
    if rejects:
        logger.warning("rejected %d of %d manifest records", len(rejects), len(records) + len(rejects))
    return Dataset(records=tuple(records), source_manifest=str(path)), rejects


def split_dataset(d: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split, deterministic for a fixed seed.

    Per-class test sizes are rounded half-up: floor(n_class * fraction + 0.5).
    Record order within each side follows the dataset's own order. Raises
    InsufficientClassSize when either class has fewer than two records.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0,1), got {test_fraction}")
    by_class: dict[BinaryLabel, list[int]] = {BinaryLabel.MISINFORMATION: [], BinaryLabel.OTHER: []}
    for idx, (_, label) in enumerate(d.records):
        by_class[label].append(idx)
    for label, indices in by_class.items():
        if len(indices) < 2:
            raise InsufficientClassSize(f"class {label.value} has {len(indices)} records, need >= 2")

    test_indices: set[int] = set()
    rng = random.Random(seed)
    # fixed label order keeps the RNG stream stable across runs
    for label in (BinaryLabel.MISINFORMATION, BinaryLabel.OTHER):
        indices = list(by_class[label])
        n_test = math.floor(len(indices) * test_fraction + 0.5)
        rng.shuffle(indices)
        test_indices.update(indices[:n_test])

    train_records = tuple(pair for i, pair in enumerate(d.records) if i not in test_indices)
    test_records = tuple(pair for i, pair in enumerate(d.records) if i in test_indices)
    train = Dataset(records=train_records, source_manifest=d.source_manifest, schema_version=d.schema_version)
    test = Dataset(records=test_records, source_manifest=d.source_manifest, schema_version=d.schema_version)
    return train, test


# dataset store: validated records plus labels, replayable without re-parsing the manifest

def _user_to_dict(u: UserSnapshot) -> dict:
    return {
        "handle": u.handle,
        "display_name": u.display_name,
        "followers_count": u.followers_count,
        "friends_count": u.friends_count,
        "favorites_count": u.favorites_count,
        "statuses_count": u.statuses_count,
        "verified": u.verified,
        "account_created_at": u.account_created_at.isoformat(),
    }


def record_to_dict(r: TweetRecord) -> dict:
    return {
        "tweet_id": r.tweet_id,
        "text": r.text,
        "language": r.language,
        "created_at": r.created_at.isoformat(),
        "hashtags": list(r.hashtags),
        "mentions": list(r.mentions),
        "media_path": r.media_path,
        "user": _user_to_dict(r.user),
        "retweet_count": r.retweet_count,
        "favourite_count": r.favourite_count,
        "retweeted": r.retweeted,
        "raw_verdict": r.raw_verdict,
    }


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Persist a validated dataset as JSON lines with a header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        header = {
            "kind": "dataset",
            "schema_version": dataset.schema_version,
            "source_manifest": dataset.source_manifest,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for record, label in dataset.records:
            row = record_to_dict(record)
            row["label"] = label.value
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_dataset_store(path: str | Path) -> Dataset:
    """Reload a dataset persisted by save_dataset, preserving order and labels."""
    path = Path(path)
    if not path.is_file():
        raise ManifestNotFound(str(path))
    records: list[tuple[TweetRecord, BinaryLabel]] = []
    source_manifest = str(path)
    schema_version = SCHEMA_VERSION
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row.get("kind") == "dataset":
                source_manifest = row.get("source_manifest", source_manifest)
                schema_version = int(row.get("schema_version", SCHEMA_VERSION))
                continue
            record = parse_tweet(row)
            records.append((record, BinaryLabel(row["label"])))
    if not records:
        raise EmptyDataset(f"no records in dataset store {path}")
    return Dataset(records=tuple(records), source_manifest=source_manifest, schema_version=schema_version)


def iter_records(dataset: Dataset) -> Iterable[TweetRecord]:
    for record, _ in dataset.records:
        yield record
