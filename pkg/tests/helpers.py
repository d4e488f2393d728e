"""Shared builders and independent oracles used across the test suite."""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

from fusedetect.corpus import BinaryLabel, Dataset, TweetRecord, UserSnapshot, record_to_dict


def make_user(
    handle: str = "u1",
    display: str = "Some User",
    followers: int = 10,
    friends: int = 5,
    favorites: int = 0,
    statuses: int = 0,
    verified: bool = False,
    account_created: str = "2020-01-01T00:00:00+00:00",
) -> UserSnapshot:
    return UserSnapshot(
        handle=handle,
        display_name=display,
        followers_count=followers,
        friends_count=friends,
        favorites_count=favorites,
        statuses_count=statuses,
        verified=verified,
        account_created_at=datetime.fromisoformat(account_created),
    )


def make_record(
    tweet_id: str = "t1",
    text: str = "hello world",
    lang: str = "en",
    created: str = "2022-09-01T00:00:00+00:00",
    hashtags: tuple = (),
    mentions: tuple = (),
    media: str | None = None,
    user: UserSnapshot | None = None,
    retweets: int = 0,
    favs: int = 0,
    retweeted: bool = False,
    verdict: str = "false",
    **user_kwargs,
) -> TweetRecord:
    return TweetRecord(
        tweet_id=tweet_id,
        text=text,
        language=lang,
        created_at=datetime.fromisoformat(created),
        hashtags=tuple(hashtags),
        mentions=tuple(mentions),
        media_path=media,
        user=user if user is not None else make_user(**user_kwargs),
        retweet_count=retweets,
        favourite_count=favs,
        retweeted=retweeted,
        raw_verdict=verdict,
    )


def make_dataset(pairs: list[tuple[TweetRecord, BinaryLabel]], source: str = "<test>") -> Dataset:
    return Dataset(records=tuple(pairs), source_manifest=source)


def write_manifest(path: Path, documents: list[dict]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(json.dumps(doc) + "\n")
    return path


def record_document(record: TweetRecord) -> dict:
    return record_to_dict(record)


def build_matrix_fixture(n_records=160, n_pos=120, gen_seed=5, dims_t=12, dims_i=6, **gen_kwargs):
    """Generate a benchmark set and encode it into MatrixInputs."""
    from fusedetect import enrichment, features, textprep
    from fusedetect.evaluation import MatrixInputs
    from fusedetect.synthetic import generate_benchmark

    bench = generate_benchmark(n_records=n_records, n_misinformation=n_pos, seed=gen_seed, **gen_kwargs)
    dataset = bench.as_dataset()
    gd = enrichment.GenderDictionary.default()
    sw = textprep.StopwordList.english()
    text_enc = features.create_text_encoder("hash", dims_t, 0)
    img_enc = features.create_image_encoder("moments", dims_i)
    schema = features.SocialVectorSchema.default()
    text_vecs, image_vecs, raw_social = {}, {}, {}
    for rec, _ in dataset.records:
        cleaned = textprep.clean_text(rec.text, sw)
        enr = enrichment.enrich(
            rec, gd, None, enrichment.VisionOutputs(), enrichment.TextOutputs(rec.text, cleaned)
        )
        text_vecs[rec.tweet_id] = features.encode_text(cleaned, text_enc)
        image_vecs[rec.tweet_id] = features.encode_image(bench.images[rec.tweet_id], img_enc)
        raw_social[rec.tweet_id] = features.build_social_vector(rec, enr, schema)
    inputs = MatrixInputs(
        text_vecs=text_vecs,
        image_vecs=image_vecs,
        raw_social_vecs=raw_social,
        dims=(dims_t, dims_i, schema.total_dim),
        schema=schema,
        test_fraction=0.2,
    )
    return dataset, inputs


def brute_force_metrics(labels, preds) -> dict[str, float]:
    """Set-based recomputation of accuracy and macro precision/recall/F1.

    Deliberately a different code path from the confusion-count route: builds
    index sets per class and derives each ratio from set intersections.
    """
    total = len(labels)
    accuracy = sum(1 for l, p in zip(labels, preds) if l is p) / total
    precisions, recalls, f1s = [], [], []
    for cls in (BinaryLabel.MISINFORMATION, BinaryLabel.OTHER):
        predicted = {i for i, p in enumerate(preds) if p is cls}
        actual = {i for i, l in enumerate(labels) if l is cls}
        hit = len(predicted & actual)
        precision = hit / len(predicted) if predicted else 0.0
        recall = hit / len(actual) if actual else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    return {
        "accuracy": accuracy,
        "precision": sum(precisions) / 2,
        "recall": sum(recalls) / 2,
        "f1": sum(f1s) / 2,
    }


def shifted(dt_iso: str, days: int) -> str:
    return (datetime.fromisoformat(dt_iso) + timedelta(days=days)).isoformat()


UTC_NOW = datetime(2022, 9, 30, tzinfo=timezone.utc)
