"""Metrics, the modality-by-backend experiment matrix, and report rendering.

Metrics are macro-averaged over the two classes: an imbalanced set punishes
one-class predictors (macro precision collapses to half the positive share),
which is exactly the degenerate signature the reports should expose.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .corpus import BinaryLabel, Dataset, split_dataset
from .errors import EmptyEvaluation, LengthMismatch
from .features import (
    FeatureBundle,
    Modality,
    SocialVectorSchema,
    apply_normalizer,
    assemble_fusion,
    fit_normalizer,
)
from .models import ExperimentSpec, HyperParams, predict, train

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionCounts:
    """Two-class confusion counts; the positive class is misinformation."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str = "macro"


def confusion(labels: Sequence[BinaryLabel], preds: Sequence[BinaryLabel]) -> ConfusionCounts:
    """Exact confusion counts over paired label/prediction lists."""
    if len(labels) != len(preds):
        raise LengthMismatch(f"{len(labels)} labels vs {len(preds)} predictions")
    if not labels:
        raise EmptyEvaluation("no records to evaluate")
    tp = fp = fn = tn = 0
    for label, pred in zip(labels, preds):
        if label is BinaryLabel.MISINFORMATION:
            if pred is BinaryLabel.MISINFORMATION:
                tp += 1
            else:
                fn += 1
        else:
            if pred is BinaryLabel.MISINFORMATION:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def metrics(c: ConfusionCounts) -> MetricSet:
    """Accuracy plus macro-averaged precision, recall, and F1.

    Per-class ratios use the 0-for-0/0 convention, and a class F1 is 0 when
    its precision and recall are both 0.
    """
    if c.total == 0:
        raise EmptyEvaluation("confusion counts are all zero")
    accuracy = (c.tp + c.tn) / c.total
    precision_pos = _safe_div(c.tp, c.tp + c.fp)
    recall_pos = _safe_div(c.tp, c.tp + c.fn)
    precision_neg = _safe_div(c.tn, c.tn + c.fn)
    recall_neg = _safe_div(c.tn, c.tn + c.fp)
    f1_pos = _safe_div(2 * precision_pos * recall_pos, precision_pos + recall_pos)
    f1_neg = _safe_div(2 * precision_neg * recall_neg, precision_neg + recall_neg)
    return MetricSet(
        accuracy=accuracy,
        precision=(precision_pos + precision_neg) / 2,
        recall=(recall_pos + recall_neg) / 2,
        f1=(f1_pos + f1_neg) / 2,
    )


@dataclass(frozen=True)
class ExperimentResult:
    spec_name: str
    modalities: frozenset[Modality]
    backend_combo: tuple[str, ...]
    metrics: MetricSet
    seed: int
    wallclock: float
    split_fingerprint: str


@dataclass(frozen=True)
class ExperimentFailure:
    spec_name: str
    error: str


@dataclass(frozen=True)
class MatrixRun:
    results: tuple[ExperimentResult, ...]
    failures: tuple[ExperimentFailure, ...]
    seed: int
    split_fingerprint: str


@dataclass(frozen=True)
class MatrixInputs:
    """Pre-encoded per-record features the matrix assembles into bundles.

    Text and image vectors are stateless encodings computed once for all
    records; only the social normalizer is fitted, on the training side of
    the split.
    """

    text_vecs: dict[str, Optional[np.ndarray]]
    image_vecs: dict[str, Optional[np.ndarray]]
    raw_social_vecs: dict[str, np.ndarray]
    dims: tuple[int, int, int]
    schema: SocialVectorSchema
    test_fraction: float = 0.2


def split_fingerprint(test_ids: Sequence[str]) -> str:
    digest = hashlib.sha256("\n".join(sorted(test_ids)).encode("utf-8")).hexdigest()
    return digest[:16]


@dataclass(frozen=True)
class PreparedSplit:
    """Assembled bundles for one split, with the normalizer fitted on train only."""

    train_pairs: tuple[tuple[FeatureBundle, BinaryLabel], ...]
    test_pairs: tuple[tuple[FeatureBundle, BinaryLabel], ...]
    normalizer: object
    fingerprint: str
    all_bundles: tuple[FeatureBundle, ...]  # dataset order


def prepare_bundles(dataset: Dataset, inputs: MatrixInputs, seed: int) -> PreparedSplit:
    """Split the dataset, fit the social normalizer on train, assemble bundles."""
    train_ds, test_ds = split_dataset(dataset, inputs.test_fraction, seed)
    fingerprint = split_fingerprint([r.tweet_id for r, _ in test_ds.records])

    train_raw = [inputs.raw_social_vecs[r.tweet_id] for r, _ in train_ds.records]
    normalizer = fit_normalizer(train_raw, inputs.schema)

    def bundle_for(record) -> FeatureBundle:
        social = apply_normalizer(normalizer, inputs.raw_social_vecs[record.tweet_id])
        return assemble_fusion(
            inputs.text_vecs.get(record.tweet_id),
            inputs.image_vecs.get(record.tweet_id),
            social,
            inputs.dims,
            tweet_id=record.tweet_id,
        )

    bundles = {record.tweet_id: bundle_for(record) for record, _ in dataset.records}
    return PreparedSplit(
        train_pairs=tuple((bundles[r.tweet_id], label) for r, label in train_ds.records),
        test_pairs=tuple((bundles[r.tweet_id], label) for r, label in test_ds.records),
        normalizer=normalizer,
        fingerprint=fingerprint,
        all_bundles=tuple(bundles[r.tweet_id] for r, _ in dataset.records),
    )


def run_experiment_matrix(
    specs: Sequence[ExperimentSpec],
    dataset: Dataset,
    inputs: MatrixInputs,
    seed: int,
) -> MatrixRun:
    """Train and evaluate every spec against one shared train/test split.

    The run seed drives the split and replaces each spec's training seed so a
    rerun with the same seed is identical end to end. Per-spec failures are
    recorded without aborting the rest of the matrix.
    """
    prepared = prepare_bundles(dataset, inputs, seed)
    fingerprint = prepared.fingerprint
    normalizer = prepared.normalizer
    train_pairs = prepared.train_pairs
    test_pairs = prepared.test_pairs

    results: list[ExperimentResult] = []
    failures: list[ExperimentFailure] = []
    for spec in specs:
        started = time.perf_counter()
        try:
            seeded_spec = replace(spec, seed=seed)
            model = train(seeded_spec, train_pairs, normalizer=normalizer)
            preds = [predict(model, bundle)[1] for bundle, _ in test_pairs]
            scores = metrics(confusion([label for _, label in test_pairs], preds))
        except Exception as exc:
            logger.warning("experiment %s failed: %s", spec.name, exc)
            failures.append(ExperimentFailure(spec_name=spec.name, error=f"{type(exc).__name__}: {exc}"))
            continue
        results.append(
            ExperimentResult(
                spec_name=spec.name,
                modalities=spec.modalities,
                backend_combo=spec.backend_combo,
                metrics=scores,
                seed=seed,
                wallclock=time.perf_counter() - started,
                split_fingerprint=fingerprint,
            )
        )
    return MatrixRun(results=tuple(results), failures=tuple(failures), seed=seed, split_fingerprint=fingerprint)


def run_multi_seed(
    specs: Sequence[ExperimentSpec],
    dataset: Dataset,
    inputs: MatrixInputs,
    seeds: Sequence[int],
) -> list[MatrixRun]:
    return [run_experiment_matrix(specs, dataset, inputs, seed) for seed in seeds]


def summarize_multi_seed(runs: Sequence[MatrixRun]) -> dict[str, dict[str, tuple[float, float]]]:
    """Per-spec (mean, half-range) of each metric across seeds."""
    by_spec: dict[str, list[MetricSet]] = {}
    for run in runs:
        for result in run.results:
            by_spec.setdefault(result.spec_name, []).append(result.metrics)
    summary = {}
    for spec_name, sets in by_spec.items():
        summary[spec_name] = {}
        for metric_name in ("accuracy", "precision", "recall", "f1"):
            values = [getattr(m, metric_name) for m in sets]
            summary[spec_name][metric_name] = (
                float(np.mean(values)),
                float((max(values) - min(values)) / 2),
            )
    return summary


_MODALITY_ORDER = (Modality.TEXT, Modality.IMAGE, Modality.SOCIAL)
_SECTION_NAMES = {1: "Unimodal", 2: "Bimodal", 3: "Trimodal"}
REPORT_COLUMNS = ("Modalities", "Model", "Accuracy", "Precision", "Recall", "F1")


def render_modalities(modalities: frozenset[Modality]) -> str:
    return "+".join(m.value.capitalize() for m in _MODALITY_ORDER if m in modalities)


def _format_value(value: float) -> str:
    # fixed-point formatting of the double: round-half-even at 2 decimals
    return f"{value:.2f}"


def _result_cells(result: ExperimentResult) -> tuple[str, ...]:
    m = result.metrics
    return (
        render_modalities(result.modalities),
        "+".join(result.backend_combo),
        _format_value(m.accuracy),
        _format_value(m.precision),
        _format_value(m.recall),
        _format_value(m.f1),
    )


def render_report(results: Sequence[ExperimentResult], format: str = "table-text") -> str:
    """Render results in three sections (unimodal, bimodal, trimodal).

    "table-text" is a pipe-separated human table; "delimited" is CSV with a
    header row, rows ordered unimodal then bimodal then trimodal (the section
    is recoverable from the Modalities column).
    """
    sections: dict[int, list[ExperimentResult]] = {1: [], 2: [], 3: []}
    for result in results:
        sections[len(result.modalities)].append(result)

    if format == "delimited":
        lines = [",".join(REPORT_COLUMNS)]
        for arity in (1, 2, 3):
            for result in sections[arity]:
                lines.append(",".join(_result_cells(result)))
        return "\n".join(lines) + "\n"

    if format != "table-text":
        raise ValueError(f"unknown report format {format!r}")
    lines = []
    for arity in (1, 2, 3):
        lines.append(f"== {_SECTION_NAMES[arity]} ==")
        lines.append(" | ".join(REPORT_COLUMNS))
        for result in sections[arity]:
            lines.append(" | ".join(_result_cells(result)))
        lines.append("")
    return "\n".join(lines)


def results_to_jsonl(run: MatrixRun) -> str:
    """Full per-spec detail (spec name, seed, wallclock, fingerprint) as JSON lines."""
    lines = []
    for result in run.results:
        lines.append(
            json.dumps(
                {
                    "spec_name": result.spec_name,
                    "modalities": sorted(m.value for m in result.modalities),
                    "backend_combo": list(result.backend_combo),
                    "accuracy": result.metrics.accuracy,
                    "precision": result.metrics.precision,
                    "recall": result.metrics.recall,
                    "f1": result.metrics.f1,
                    "seed": result.seed,
                    "wallclock": result.wallclock,
                    "split_fingerprint": result.split_fingerprint,
                },
                sort_keys=True,
            )
        )
    for failure in run.failures:
        lines.append(json.dumps({"spec_name": failure.spec_name, "error": failure.error}, sort_keys=True))
    return "\n".join(lines) + "\n"


def default_experiment_matrix(hyperparams: Optional[HyperParams] = None) -> list[ExperimentSpec]:
    """The bundled 15-spec matrix: 6 unimodal, 5 bimodal, 4 trimodal rows."""
    hp = hyperparams or HyperParams()
    hp_slow = replace(hp, learning_rate=hp.learning_rate * 0.3)
    text = frozenset({Modality.TEXT})
    image = frozenset({Modality.IMAGE})
    social = frozenset({Modality.SOCIAL})
    specs = [
        ExperimentSpec("text-linear", text, ("linear",), hp),
        ExperimentSpec("text-mlp", text, ("mlp",), hp),
        ExperimentSpec("image-linear", image, ("linear",), hp),
        ExperimentSpec("image-mlp", image, ("mlp",), hp),
        ExperimentSpec("social-linear", social, ("linear",), hp),
        ExperimentSpec("social-mlp", social, ("mlp",), hp),
        ExperimentSpec("image+social-linear", image | social, ("linear",), hp),
        ExperimentSpec("text+social-linear", text | social, ("linear",), hp),
        ExperimentSpec("text+image-linear", text | image, ("linear",), hp),
        ExperimentSpec("text+image-mlp", text | image, ("mlp",), hp),
        ExperimentSpec("text+social-mlp", text | social, ("mlp",), hp),
        ExperimentSpec("trimodal-linear", text | image | social, ("linear",), hp),
        ExperimentSpec("trimodal-mlp", text | image | social, ("mlp",), hp),
        ExperimentSpec("trimodal-linear-slow", text | image | social, ("linear",), hp_slow),
        ExperimentSpec("trimodal-mlp-slow", text | image | social, ("mlp",), hp_slow),
    ]
    return specs
