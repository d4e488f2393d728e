"""Descriptive analytics of spread: per-class aggregates and diffusion by group.

Account-level rows (verified, popular, gender) are attributed once per unique
handle using the first-seen snapshot within the class; engagement means are
tweet-level. Grouped diffusion tables report mean retweets and likes per
(class, group) with empty groups absent rather than zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus import BinaryLabel, Dataset, TweetRecord
from .enrichment import EnrichmentRecord, Gender
from .errors import CoverageGap

GROUPINGS = ("gender", "verified", "popularity")


@dataclass(frozen=True)
class ClassStats:
    tweet_count: int
    unique_accounts: int
    verified_count: int
    verified_share: float
    popular_count: int
    popular_share: float
    mean_retweet: float
    mean_favourite: float
    mean_followers: float
    mean_friends: float
    mean_statuses: float
    mean_account_age: float
    unique_hashtags: int
    unique_mentions: int
    gender_counts: tuple[int, int, int]  # male, female, undetermined


@dataclass(frozen=True)
class GroupStat:
    count: int
    retweet_total: int
    favourite_total: int
    mean_retweet: float
    mean_favourite: float


@dataclass(frozen=True)
class PropagationReport:
    per_class: dict[BinaryLabel, ClassStats]
    diffusion: dict[str, dict[BinaryLabel, dict[str, GroupStat]]]


def _enrichment_index(
    dataset: Dataset, enrichments: Sequence[EnrichmentRecord]
) -> dict[str, EnrichmentRecord]:
    index = {e.tweet_id: e for e in enrichments}
    for record, _ in dataset.records:
        if record.tweet_id not in index:
            raise CoverageGap(f"record {record.tweet_id} has no enrichment")
    return index


def _class_stats(pairs: list[tuple[TweetRecord, EnrichmentRecord]]) -> ClassStats:
    tweet_count = len(pairs)
    retweet_sum = favourite_sum = followers_sum = friends_sum = statuses_sum = age_sum = 0
    hashtags: set[str] = set()
    mentions: set[str] = set()
    first_seen: dict[str, tuple[bool, bool, Gender]] = {}
    for record, enr in pairs:
        retweet_sum += record.retweet_count
        favourite_sum += record.favourite_count
        followers_sum += record.user.followers_count
        friends_sum += record.user.friends_count
        statuses_sum += record.user.statuses_count
        age_sum += enr.account_age_days
        hashtags.update(record.hashtags)
        mentions.update(record.mentions)
        if record.user.handle not in first_seen:
            first_seen[record.user.handle] = (record.user.verified, enr.popular, enr.gender)

    unique_accounts = len(first_seen)
    verified_count = sum(1 for verified, _, _ in first_seen.values() if verified)
    popular_count = sum(1 for _, popular, _ in first_seen.values() if popular)
    males = sum(1 for _, _, g in first_seen.values() if g is Gender.MALE)
    females = sum(1 for _, _, g in first_seen.values() if g is Gender.FEMALE)
    undetermined = unique_accounts - males - females

    def mean(total: int) -> float:
        return total / tweet_count if tweet_count else 0.0

    def share(count: int) -> float:
        return 100.0 * count / unique_accounts if unique_accounts else 0.0

    return ClassStats(
        tweet_count=tweet_count,
        unique_accounts=unique_accounts,
        verified_count=verified_count,
        verified_share=share(verified_count),
        popular_count=popular_count,
        popular_share=share(popular_count),
        mean_retweet=mean(retweet_sum),
        mean_favourite=mean(favourite_sum),
        mean_followers=mean(followers_sum),
        mean_friends=mean(friends_sum),
        mean_statuses=mean(statuses_sum),
        mean_account_age=mean(age_sum),
        unique_hashtags=len(hashtags),
        unique_mentions=len(mentions),
        gender_counts=(males, females, undetermined),
    )


def _group_key(record: TweetRecord, enr: EnrichmentRecord, grouping: str) -> str:
    if grouping == "gender":
        return enr.gender.value
    if grouping == "verified":
        return "verified" if record.user.verified else "unverified"
    if grouping == "popularity":
        return "popular" if enr.popular else "unpopular"
    raise ValueError(f"unknown grouping {grouping!r}")


def diffusion_by_group(
    dataset: Dataset,
    enrichments: Sequence[EnrichmentRecord],
    grouping: str,
) -> dict[BinaryLabel, dict[str, GroupStat]]:
    """Per (class, group) mean retweet and favourite counts.

    Each tweet contributes to exactly one group per grouping; groups with no
    tweets are absent from the table.
    """
    index = _enrichment_index(dataset, enrichments)
    sums: dict[BinaryLabel, dict[str, list[int]]] = {
        BinaryLabel.MISINFORMATION: {},
        BinaryLabel.OTHER: {},
    }
    for record, label in dataset.records:
        enr = index[record.tweet_id]
        key = _group_key(record, enr, grouping)
        bucket = sums[label].setdefault(key, [0, 0, 0])
        bucket[0] += 1
        bucket[1] += record.retweet_count
        bucket[2] += record.favourite_count
    table: dict[BinaryLabel, dict[str, GroupStat]] = {}
    for label, groups in sums.items():
        table[label] = {
            key: GroupStat(
                count=count,
                retweet_total=retweets,
                favourite_total=favourites,
                mean_retweet=retweets / count,
                mean_favourite=favourites / count,
            )
            for key, (count, retweets, favourites) in groups.items()
        }
    return table


def descriptive_stats(dataset: Dataset, enrichments: Sequence[EnrichmentRecord]) -> PropagationReport:
    """Per-class descriptive aggregates plus diffusion tables for every grouping.

    Raises CoverageGap when any record lacks an enrichment.
    """
    index = _enrichment_index(dataset, enrichments)
    by_class: dict[BinaryLabel, list[tuple[TweetRecord, EnrichmentRecord]]] = {
        BinaryLabel.MISINFORMATION: [],
        BinaryLabel.OTHER: [],
    }
    for record, label in dataset.records:
        by_class[label].append((record, index[record.tweet_id]))
    per_class = {label: _class_stats(pairs) for label, pairs in by_class.items()}
    diffusion = {grouping: diffusion_by_group(dataset, enrichments, grouping) for grouping in GROUPINGS}
    return PropagationReport(per_class=per_class, diffusion=diffusion)


_CLASS_ORDER = (BinaryLabel.MISINFORMATION, BinaryLabel.OTHER)

_STAT_ROWS: list[tuple[str, callable]] = [
    ("Number of Tweets", lambda s: str(s.tweet_count)),
    ("Unique Accounts", lambda s: str(s.unique_accounts)),
    ("Verified Accounts", lambda s: f"{s.verified_count} ({s.verified_share:.0f}%)"),
    ("Popular Accounts", lambda s: f"{s.popular_count} ({s.popular_share:.0f}%)"),
    ("Mean Retweet Count", lambda s: f"{s.mean_retweet:.2f}"),
    ("Mean Favourite Count", lambda s: f"{s.mean_favourite:.2f}"),
    ("Mean Followers Count", lambda s: f"{s.mean_followers:.2f}"),
    ("Mean Friends Count", lambda s: f"{s.mean_friends:.2f}"),
    ("Mean Statuses Count", lambda s: f"{s.mean_statuses:.2f}"),
    ("Mean Account Age (days)", lambda s: f"{s.mean_account_age:.2f}"),
    ("Unique Hashtags", lambda s: str(s.unique_hashtags)),
    ("Unique Mentions", lambda s: str(s.unique_mentions)),
    ("Gender (male/female/undetermined)", lambda s: "/".join(str(c) for c in s.gender_counts)),
]


def render_propagation_report(report: PropagationReport, format: str = "table-text") -> str:
    """Plain-text table of per-class aggregates and diffusion tables, or CSV."""
    stats = [report.per_class[label] for label in _CLASS_ORDER]
    if format == "delimited":
        lines = ["Parameter,Misinformation,Other"]
        for name, fmt in _STAT_ROWS:
            lines.append(",".join([name.replace(",", ";")] + [fmt(s).replace(",", ";") for s in stats]))
        lines.append("")
        lines.append("Grouping,Class,Group,Count,MeanRetweet,MeanFavourite")
        for grouping in GROUPINGS:
            for label in _CLASS_ORDER:
                for group, stat in sorted(report.diffusion[grouping][label].items()):
                    lines.append(
                        f"{grouping},{label.value},{group},{stat.count},"
                        f"{stat.mean_retweet:.2f},{stat.mean_favourite:.2f}"
                    )
        return "\n".join(lines) + "\n"

    if format != "table-text":
        raise ValueError(f"unknown report format {format!r}")
    lines = ["Parameter | Misinformation | Other"]
    for name, fmt in _STAT_ROWS:
        lines.append(f"{name} | {fmt(stats[0])} | {fmt(stats[1])}")
    for grouping in GROUPINGS:
        lines.append("")
        lines.append(f"== Diffusion by {grouping} ==")
        lines.append("Class | Group | Count | Mean Retweet | Mean Favourite")
        for label in _CLASS_ORDER:
            for group, stat in sorted(report.diffusion[grouping][label].items()):
                lines.append(
                    f"{label.value} | {group} | {stat.count} | "
                    f"{stat.mean_retweet:.2f} | {stat.mean_favourite:.2f}"
                )
    return "\n".join(lines) + "\n"
