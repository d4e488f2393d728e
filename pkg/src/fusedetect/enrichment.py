"""Derived social features: account age, popularity, gender, bot score.

The bot-score client is the only networked component; it caches persistently
and degrades to an absent score on any failure so the pipeline never blocks
on the scoring service.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from .corpus import TweetRecord
from .errors import FutureAccount

logger = logging.getLogger(__name__)

DEFAULT_REFERENCE_DATE = date(2022, 9, 30)
DEFAULT_CACHE_TTL_DAYS = 30

BOT_SCORE_MIN = 0.0
BOT_SCORE_MAX = 5.0


class Gender(Enum):
    MALE = "male"
    FEMALE = "female"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class EnrichmentRecord:
    """Per-record derived features across social, visual, and text channels."""

    tweet_id: str
    account_age_days: int
    popular: bool
    gender: Gender
    bot_score: Optional[float]
    ocr_text: str
    detected_objects: tuple[tuple[str, float], ...]
    object_text_similarity: Optional[float]
    translated_text: str
    cleaned_text: str

    def __post_init__(self):
        if self.account_age_days < 0:
            raise ValueError(f"account_age_days must be >= 0, got {self.account_age_days}")
        if self.bot_score is not None and not BOT_SCORE_MIN <= self.bot_score <= BOT_SCORE_MAX:
            raise ValueError(f"bot_score out of [0,5]: {self.bot_score}")
        if self.object_text_similarity is not None and not -1.0 <= self.object_text_similarity <= 1.0:
            raise ValueError(f"object_text_similarity out of [-1,1]: {self.object_text_similarity}")
        for label, confidence in self.detected_objects:
            if not 0.0 <= confidence <= 1.0:
                raise ValueError(f"object confidence out of [0,1]: {label}={confidence}")


class GenderDictionary:
    """Lower-cased first name -> gender lookup table."""

    def __init__(self, entries: dict[str, Gender]):
        self.entries = {k.strip().lower(): v for k, v in entries.items() if k.strip()}

    @classmethod
    def from_file(cls, path: str | Path) -> "GenderDictionary":
        entries: dict[str, Gender] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, _, gender = line.partition("\t")
            entries[name] = Gender(gender.strip().lower())
        return cls(entries)

    @classmethod
    def default(cls) -> "GenderDictionary":
        with resources.as_file(resources.files("fusedetect.data") / "gender_names.tsv") as p:
            return cls.from_file(p)


def compute_account_age(account_created_at: datetime, reference_date: date) -> int:
    """Whole calendar days (UTC) between account creation and the reference date.

    Raises FutureAccount when the creation date lies after the reference date;
    that signals corrupt metadata rather than a degradable feature.
    """
    if account_created_at.tzinfo is None:
        account_created_at = account_created_at.replace(tzinfo=timezone.utc)
    created = account_created_at.astimezone(timezone.utc).date()
    days = (reference_date - created).days
    if days < 0:
        raise FutureAccount(f"account created {created}, after reference {reference_date}")
    return days


def compute_popularity(followers_count: int, friends_count: int) -> bool:
    """True iff the follower count strictly exceeds the following count.

    Pure integer comparison; equivalent to the ratio rule followers/friends > 1
    without the division (0 friends with any followers is popular, 0/0 is not).
    """
    if followers_count < 0 or friends_count < 0:
        raise ValueError("counts must be non-negative")
    return followers_count > friends_count


def lookup_gender(display_name: str, dictionary: GenderDictionary) -> Gender:
    """Dictionary lookup on the first display-name token, letters only.

    Institutions, groups, and anything unrecognized resolve to UNDETERMINED.
    """
    tokens = display_name.split()
    if not tokens:
        return Gender.UNDETERMINED
    first = "".join(ch for ch in tokens[0] if ch.isalpha()).lower()
    if not first:
        return Gender.UNDETERMINED
    return dictionary.entries.get(first, Gender.UNDETERMINED)


def _default_transport(endpoint: str, credential: str, handle: str) -> float:
    """HTTP GET against the scoring endpoint; expects JSON {"score": <number>}."""
    import requests

    response = requests.get(
        endpoint,
        params={"handle": handle},
        headers={"Authorization": f"Bearer {credential}"} if credential else {},
        timeout=10,
    )
    response.raise_for_status()
    return float(response.json()["score"])


class BotScoreClient:
    """Cached client for an account-automation scoring service (scores in [0,5]).

    Cache entries younger than the TTL are served without any network call.
    The cache persists as ``handle TAB score TAB fetched_at`` lines. Writes
    are serialized; fetches for distinct handles may run concurrently under
    the request-rate cap.
    """

    def __init__(
        self,
        endpoint: str,
        credential: Optional[str] = None,
        cache_path: Optional[str | Path] = None,
        ttl_days: int = DEFAULT_CACHE_TTL_DAYS,
        transport: Optional[Callable[[str, str, str], float]] = None,
        max_concurrent_requests: int = 4,
    ):
        self.endpoint = endpoint
        self.credential = credential if credential is not None else os.environ.get("BOT_SCORE_API_KEY", "")
        self.cache_path = Path(cache_path) if cache_path else None
        self.ttl_days = ttl_days
        self.transport = transport or _default_transport
        self.cache: dict[str, tuple[float, datetime]] = {}
        self.network_calls = 0
        self._lock = threading.Lock()
        self._request_slots = threading.Semaphore(max_concurrent_requests)
        if self.cache_path and self.cache_path.is_file():
            self._load_cache()

    def _load_cache(self) -> None:
        for line in self.cache_path.read_text(encoding="utf-8").splitlines():
            parts = line.split("\t")
            if len(parts) != 3:
                continue
            handle, score, fetched_at = parts
            try:
                self.cache[handle] = (float(score), datetime.fromisoformat(fetched_at))
            except ValueError:
                continue

    def _fresh(self, handle: str, now: datetime) -> Optional[float]:
        entry = self.cache.get(handle)
        if entry is None:
            return None
        score, fetched_at = entry
        if (now - fetched_at).days >= self.ttl_days:
            return None
        return score

    def _store(self, handle: str, score: float, now: datetime) -> None:
        self.cache[handle] = (score, now)
        if self.cache_path:
            self.cache_path.parent.mkdir(parents=True, exist_ok=True)
            with self.cache_path.open("a", encoding="utf-8") as fh:
                fh.write(f"{handle}\t{score}\t{now.isoformat()}\n")

    def fetch(self, handle: str, now: Optional[datetime] = None) -> Optional[float]:
        """Score for a handle, or None when the service cannot provide one."""
        if not handle:
            raise ValueError("handle must be non-empty")
        now = now or datetime.now(timezone.utc)
        with self._lock:
            cached = self._fresh(handle, now)
        if cached is not None:
            return cached
        try:
            with self._request_slots:
                score = self.transport(self.endpoint, self.credential, handle)
            with self._lock:
                self.network_calls += 1
        except Exception as exc:
            logger.warning("bot-score fetch failed for %s: %s", handle, exc)
            return None
        if not BOT_SCORE_MIN <= score <= BOT_SCORE_MAX:
            logger.warning("bot-score %s for %s outside [0,5]; discarding", score, handle)
            return None
        with self._lock:
            self._store(handle, score, now)
        return score


def fetch_bot_score(handle: str, client: BotScoreClient) -> Optional[float]:
    return client.fetch(handle)


@dataclass(frozen=True)
class VisionOutputs:
    ocr_text: str = ""
    detected_objects: tuple[tuple[str, float], ...] = ()
    object_text_similarity: Optional[float] = None


@dataclass(frozen=True)
class TextOutputs:
    translated_text: str = ""
    cleaned_text: str = ""


def enrich(
    record: TweetRecord,
    gender_dict: GenderDictionary,
    bot_client: Optional[BotScoreClient],
    vision_outputs: VisionOutputs,
    text_outputs: TextOutputs,
    reference_date: date = DEFAULT_REFERENCE_DATE,
) -> EnrichmentRecord:
    """Assemble all derived features for one validated record.

    Only FutureAccount propagates; every other sub-feature degrades to
    absent/empty. bot_score is absent when no client is configured.
    """
    bot_score = None
    if bot_client is not None:
        bot_score = fetch_bot_score(record.user.handle, bot_client)
    return EnrichmentRecord(
        tweet_id=record.tweet_id,
        account_age_days=compute_account_age(record.user.account_created_at, reference_date),
        popular=compute_popularity(record.user.followers_count, record.user.friends_count),
        gender=lookup_gender(record.user.display_name, gender_dict),
        bot_score=bot_score,
        ocr_text=vision_outputs.ocr_text,
        detected_objects=tuple(vision_outputs.detected_objects),
        object_text_similarity=vision_outputs.object_text_similarity,
        translated_text=text_outputs.translated_text,
        cleaned_text=text_outputs.cleaned_text,
    )


def enrichment_to_dict(e: EnrichmentRecord) -> dict:
    return {
        "tweet_id": e.tweet_id,
        "account_age_days": e.account_age_days,
        "popular": e.popular,
        "gender": e.gender.value,
        "bot_score": e.bot_score,
        "ocr_text": e.ocr_text,
        "detected_objects": [[label, conf] for label, conf in e.detected_objects],
        "object_text_similarity": e.object_text_similarity,
        "translated_text": e.translated_text,
        "cleaned_text": e.cleaned_text,
    }


def enrichment_from_dict(row: dict) -> EnrichmentRecord:
    return EnrichmentRecord(
        tweet_id=row["tweet_id"],
        account_age_days=int(row["account_age_days"]),
        popular=bool(row["popular"]),
        gender=Gender(row["gender"]),
        bot_score=row.get("bot_score"),
        ocr_text=row.get("ocr_text", ""),
        detected_objects=tuple((label, float(conf)) for label, conf in row.get("detected_objects", [])),
        object_text_similarity=row.get("object_text_similarity"),
        translated_text=row.get("translated_text", ""),
        cleaned_text=row.get("cleaned_text", ""),
    )


def save_enrichments(enrichments: list[EnrichmentRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for e in enrichments:
            fh.write(json.dumps(enrichment_to_dict(e), sort_keys=True) + "\n")


def load_enrichments(path: str | Path) -> list[EnrichmentRecord]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(enrichment_from_dict(json.loads(line)))
    return out
