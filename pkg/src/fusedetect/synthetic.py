"""Synthetic fixture generators for offline runs, demos, and benchmarks.

Two generators live here:

* ``generate_benchmark`` builds an imbalanced multimodal set whose label
  signal is split additively across the three modalities. Each record carries
  one latent score per modality; the class is decided by the latent sum plus
  observation noise, so a model sees more of the score the more modalities it
  fuses. Defaults mirror the bundled demo distribution (1529 records, 1273
  positive).
* ``generate_spread_fixture`` builds a two-class set with exact engagement
  sums and per-account attributes, together with the generator's own
  bookkeeping of every aggregate a propagation report derives, so reports can
  be checked value for value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .corpus import (
    BinaryLabel,
    Dataset,
    TweetRecord,
    UserSnapshot,
    binarize_label,
    normalize_verdict,
    record_to_dict,
)
from .enrichment import DEFAULT_REFERENCE_DATE, Gender, GenderDictionary
from .propagation import ClassStats
from .vision import RGBImage, save_png

import json

_INSTITUTIONS = (
    "Global Health Watch",
    "Daily Chronicle",
    "Civic Data Lab",
    "Metro News Desk",
    "Open Election Forum",
    "Public Record Office",
    "Statewide Wire",
    "Harbor City Gazette",
)

_SURNAMES = (
    "Alvarez", "Brown", "Chen", "Dubois", "Evans", "Fischer", "Garcia", "Haddad",
    "Ivanov", "Johnson", "Kim", "Lopez", "Mbeki", "Novak", "Okafor", "Patel",
    "Quinn", "Rossi", "Singh", "Tanaka",
)

_MISINFO_VERDICTS = ("false", "Partially False", "MISLEADING")
_OTHER_VERDICTS = ("true", "satire", "unproven")


def _name_pools() -> tuple[list[str], list[str]]:
    entries = GenderDictionary.default().entries
    males = sorted(name for name, g in entries.items() if g is Gender.MALE)
    females = sorted(name for name, g in entries.items() if g is Gender.FEMALE)
    return males, females


def _phi(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _uniform_image(value: int, size: int = 8) -> RGBImage:
    v = int(np.clip(value, 0, 255))
    return RGBImage(width=size, height=size, pixels=bytes([v, v, v]) * (size * size))


@dataclass(frozen=True)
class BenchmarkSet:
    records: tuple[TweetRecord, ...]
    images: dict[str, RGBImage]

    def as_dataset(self, source: str = "<synthetic>") -> Dataset:
        pairs = tuple(
            (record, binarize_label(normalize_verdict(record.raw_verdict))) for record in self.records
        )
        return Dataset(records=pairs, source_manifest=source)


def generate_benchmark(
    n_records: int = 1529,
    n_misinformation: int = 1273,
    seed: int = 20259,
    noise_std: float = 0.6,
    channel_weights: tuple[float, float, float] = (1.2, 1.2, 0.7),
    signal_buckets: int = 16,
    image_gain: float = 48.0,
) -> BenchmarkSet:
    """Imbalanced multimodal set with the label signal split across modalities.

    Latents s_text, s_image, s_social are iid standard normal. The class score
    is their weighted sum plus N(0, noise_std^2); the n_misinformation highest
    scores are labeled misinformation, fixing the class counts exactly. Each
    latent is observable only through its own modality: a quantile token in
    the text, the gray level of the image, and the statuses count in the
    social block. The social weight is lowest because that channel is
    observed without encoder loss; the weights keep single-modality views
    comparably and only partially informative.
    """
    if not 0 < n_misinformation < n_records:
        raise ValueError("need 0 < n_misinformation < n_records")
    rng = np.random.default_rng(seed)
    males, females = _name_pools()
    reference = datetime(
        DEFAULT_REFERENCE_DATE.year, DEFAULT_REFERENCE_DATE.month, DEFAULT_REFERENCE_DATE.day,
        12, 0, tzinfo=timezone.utc,
    )

    w_text, w_image, w_social = channel_weights
    s_text = rng.standard_normal(n_records)
    s_image = rng.standard_normal(n_records)
    s_social = rng.standard_normal(n_records)
    score = (
        w_text * s_text
        + w_image * s_image
        + w_social * s_social
        + rng.normal(0.0, noise_std, n_records)
    )
    positive = np.zeros(n_records, dtype=bool)
    positive[np.argsort(-score)[:n_misinformation]] = True

    records = []
    images: dict[str, RGBImage] = {}
    for i in range(n_records):
        tweet_id = f"t{i:05d}"
        bucket = min(signal_buckets - 1, int(_phi(float(s_text[i])) * signal_buckets))
        filler = int(rng.integers(0, 6))
        # signal token repeated so mean pooling keeps it dominant over fillers
        words = [f"sig{bucket}", f"sig{bucket}", f"note{filler}"]
        hashtags: list[str] = []
        mentions: list[str] = []
        if rng.random() < 0.4:
            tag = f"tag{int(rng.integers(0, 40))}"
            hashtags.append(tag)
            words.append(f"#{tag}")
        if rng.random() < 0.2:
            mention = f"friend{int(rng.integers(0, 60))}"
            mentions.append(mention)
            words.append(f"@{mention}")
        text = " ".join(words)

        gray = int(np.clip(round(128.0 + image_gain * float(s_image[i])), 5, 250))
        images[tweet_id] = _uniform_image(gray)

        kind = rng.random()
        if kind < 0.4:
            display_name = f"{males[int(rng.integers(0, len(males)))].title()} {_SURNAMES[int(rng.integers(0, len(_SURNAMES)))]}"
        elif kind < 0.7:
            display_name = f"{females[int(rng.integers(0, len(females)))].title()} {_SURNAMES[int(rng.integers(0, len(_SURNAMES)))]}"
        else:
            display_name = _INSTITUTIONS[int(rng.integers(0, len(_INSTITUTIONS)))]

        age_days = int(rng.integers(300, 4801))
        tweet_time = reference - timedelta(days=int(rng.integers(0, 200)), hours=int(rng.integers(0, 12)))
        statuses = max(0, int(round(30000.0 + 8000.0 * float(s_social[i]))))
        followers = int(math.exp(rng.normal(8.0, 2.0)))
        friends = int(math.exp(rng.normal(7.0, 1.5)))

        verdict_pool = _MISINFO_VERDICTS if positive[i] else _OTHER_VERDICTS
        user = UserSnapshot(
            handle=f"user{i:05d}",
            display_name=display_name,
            followers_count=followers,
            friends_count=friends,
            favorites_count=int(rng.integers(0, 40000)),
            statuses_count=statuses,
            verified=bool(rng.random() < 0.55),
            account_created_at=reference - timedelta(days=age_days),
        )
        records.append(
            TweetRecord(
                tweet_id=tweet_id,
                text=text,
                language="en",
                created_at=tweet_time,
                hashtags=tuple(hashtags),
                mentions=tuple(mentions),
                media_path=f"images/{tweet_id}.png",
                user=user,
                retweet_count=int(math.exp(rng.normal(4.0, 1.5))),
                favourite_count=int(math.exp(rng.normal(5.0, 1.5))),
                retweeted=bool(rng.random() < 0.5),
                raw_verdict=verdict_pool[i % len(verdict_pool)],
            )
        )
    return BenchmarkSet(records=tuple(records), images=images)


def write_benchmark(bench: BenchmarkSet, out_dir: str | Path, config_name: str = "config.yaml") -> Path:
    """Write the manifest, image files, and a ready-to-run demo config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.jsonl"
    with manifest.open("w", encoding="utf-8") as fh:
        for record in bench.records:
            fh.write(json.dumps(record_to_dict(record), sort_keys=True) + "\n")
    for tweet_id, img in bench.images.items():
        save_png(img, out / "images" / f"{tweet_id}.png")

    config_doc = {
        "manifest": "manifest.jsonl",
        "out_dir": "out",
        "reference_date": DEFAULT_REFERENCE_DATE.isoformat(),
        "vision": {"ocr_engine": "glyph", "object_detector": "null"},
        "text": {"translator": "identity"},
        "bot": {"enabled": False},
        "encoders": {"text": {"name": "hash", "dim": 32}, "image": {"name": "moments", "dim": 12}, "seed": 0},
        "split": {"test_fraction": 0.2, "seed": 7},
        "hyperparams": {"batch_size": 32, "learning_rate": 0.1, "epochs": 50, "early_stop_patience": 5},
    }
    import yaml

    (out / config_name).write_text(yaml.safe_dump(config_doc, sort_keys=False), encoding="utf-8")
    return manifest


@dataclass(frozen=True)
class SpreadFixture:
    """Dataset plus the generator's independent tally of every report aggregate."""

    dataset: Dataset
    expected: dict[BinaryLabel, ClassStats]
    expected_diffusion: dict[str, dict[BinaryLabel, dict[str, tuple[int, int, int]]]]
    # diffusion values are (count, retweet_total, favourite_total)


def _exact_sum_counts(rng: np.random.Generator, n: int, mean: int, spread: int) -> list[int]:
    """n non-negative ints whose sum is exactly n * mean."""
    counts = []
    for _ in range(n // 2):
        delta = int(rng.integers(0, min(mean, spread) + 1))
        counts.append(mean + delta)
        counts.append(mean - delta)
    if n % 2:
        counts.append(mean)
    return counts


def generate_spread_fixture(
    n_false: int = 1273,
    unique_false: int = 1054,
    mean_retweet_false: int = 4768,
    mean_favourite_false: int = 15706,
    verified_false: int = 612,
    popular_false: int = 939,
    n_other: int = 256,
    unique_other: int = 229,
    mean_retweet_other: int = 4333,
    mean_favourite_other: int = 10195,
    verified_other: int = 125,
    popular_other: int = 205,
    seed: int = 77,
) -> SpreadFixture:
    """Two-class fixture with exact mean engagement and per-account attributes.

    Every tweet of a reused handle carries the identical account snapshot, so
    account-level attribution is unambiguous. The returned bookkeeping is
    tallied during generation, independent of any report computation.
    """
    rng = np.random.default_rng(seed)
    males, females = _name_pools()
    reference = datetime(
        DEFAULT_REFERENCE_DATE.year, DEFAULT_REFERENCE_DATE.month, DEFAULT_REFERENCE_DATE.day,
        12, 0, tzinfo=timezone.utc,
    )

    records: list[tuple[TweetRecord, BinaryLabel]] = []
    expected: dict[BinaryLabel, ClassStats] = {}
    expected_diffusion: dict[str, dict[BinaryLabel, dict[str, tuple[int, int, int]]]] = {
        "gender": {},
        "verified": {},
        "popularity": {},
    }

    class_plans = (
        (BinaryLabel.MISINFORMATION, "f", n_false, unique_false, mean_retweet_false,
         mean_favourite_false, verified_false, popular_false, "false"),
        (BinaryLabel.OTHER, "o", n_other, unique_other, mean_retweet_other,
         mean_favourite_other, verified_other, popular_other, "true"),
    )

    for (label, prefix, n_tweets, n_accounts, mean_rt, mean_fav,
         n_verified, n_popular, verdict) in class_plans:
        if n_accounts > n_tweets:
            raise ValueError("unique accounts cannot exceed tweet count")
        # fixed per-account attributes
        accounts = []
        gender_split = (
            [Gender.MALE] * (n_accounts // 3)
            + [Gender.FEMALE] * (n_accounts // 4)
        )
        gender_split += [Gender.UNDETERMINED] * (n_accounts - len(gender_split))
        for a in range(n_accounts):
            gender = gender_split[a]
            if gender is Gender.MALE:
                display = f"{males[a % len(males)].title()} {_SURNAMES[a % len(_SURNAMES)]}"
            elif gender is Gender.FEMALE:
                display = f"{females[a % len(females)].title()} {_SURNAMES[a % len(_SURNAMES)]}"
            else:
                display = _INSTITUTIONS[a % len(_INSTITUTIONS)]
            popular = a < n_popular
            friends = int(rng.integers(50, 5000))
            if popular:
                followers = friends + int(rng.integers(1, 100000))
            else:
                followers = int(rng.integers(0, friends + 1))
            accounts.append(
                {
                    "handle": f"{prefix}acct{a:05d}",
                    "display": display,
                    "gender": gender,
                    "verified": a < n_verified,
                    "popular": popular,
                    "followers": followers,
                    "friends": friends,
                    "statuses": int(rng.integers(100, 90000)),
                    "favorites": int(rng.integers(0, 50000)),
                    "age_days": int(rng.integers(100, 4801)),
                }
            )

        retweets = _exact_sum_counts(rng, n_tweets, mean_rt, 900)
        favourites = _exact_sum_counts(rng, n_tweets, mean_fav, 2500)

        # first n_accounts tweets introduce each account once; the rest reuse
        retweet_sum = favourite_sum = followers_sum = friends_sum = statuses_sum = age_sum = 0
        hashtags_seen: set[str] = set()
        mentions_seen: set[str] = set()
        diffusion_tally: dict[str, dict[str, list[int]]] = {
            "gender": {},
            "verified": {},
            "popularity": {},
        }
        for t in range(n_tweets):
            account = accounts[t if t < n_accounts else t % n_accounts]
            tweet_id = f"{prefix}{t:05d}"
            hashtags = [f"h{int(rng.integers(0, 600))}"] if rng.random() < 0.5 else []
            mentions = [f"m{int(rng.integers(0, 600))}"] if rng.random() < 0.4 else []
            hashtags_seen.update(hashtags)
            mentions_seen.update(mentions)
            tweet_time = reference - timedelta(days=int(rng.integers(0, 90)))
            user = UserSnapshot(
                handle=account["handle"],
                display_name=account["display"],
                followers_count=account["followers"],
                friends_count=account["friends"],
                favorites_count=account["favorites"],
                statuses_count=account["statuses"],
                verified=account["verified"],
                account_created_at=reference - timedelta(days=account["age_days"]),
            )
            record = TweetRecord(
                tweet_id=tweet_id,
                text=f"spread sample {t}",
                language="en",
                created_at=tweet_time,
                hashtags=tuple(hashtags),
                mentions=tuple(mentions),
                media_path=None,
                user=user,
                retweet_count=retweets[t],
                favourite_count=favourites[t],
                retweeted=bool(rng.random() < 0.5),
                raw_verdict=verdict,
            )
            records.append((record, label))

            retweet_sum += retweets[t]
            favourite_sum += favourites[t]
            followers_sum += account["followers"]
            friends_sum += account["friends"]
            statuses_sum += account["statuses"]
            age_sum += account["age_days"]
            group_keys = {
                "gender": account["gender"].value,
                "verified": "verified" if account["verified"] else "unverified",
                "popularity": "popular" if account["popular"] else "unpopular",
            }
            for grouping, key in group_keys.items():
                bucket = diffusion_tally[grouping].setdefault(key, [0, 0, 0])
                bucket[0] += 1
                bucket[1] += retweets[t]
                bucket[2] += favourites[t]

        males_n = sum(1 for a in accounts if a["gender"] is Gender.MALE)
        females_n = sum(1 for a in accounts if a["gender"] is Gender.FEMALE)
        expected[label] = ClassStats(
            tweet_count=n_tweets,
            unique_accounts=n_accounts,
            verified_count=n_verified,
            verified_share=100.0 * n_verified / n_accounts,
            popular_count=n_popular,
            popular_share=100.0 * n_popular / n_accounts,
            mean_retweet=retweet_sum / n_tweets,
            mean_favourite=favourite_sum / n_tweets,
            mean_followers=followers_sum / n_tweets,
            mean_friends=friends_sum / n_tweets,
            mean_statuses=statuses_sum / n_tweets,
            mean_account_age=age_sum / n_tweets,
            unique_hashtags=len(hashtags_seen),
            unique_mentions=len(mentions_seen),
            gender_counts=(males_n, females_n, n_accounts - males_n - females_n),
        )
        for grouping, groups in diffusion_tally.items():
            expected_diffusion[grouping][label] = {
                key: (count, rt, fav) for key, (count, rt, fav) in groups.items()
            }

    dataset = Dataset(records=tuple(records), source_manifest="<spread-fixture>")
    return SpreadFixture(dataset=dataset, expected=expected, expected_diffusion=expected_diffusion)
