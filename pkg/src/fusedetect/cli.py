"""Command-line pipeline driver.

Three persisted stages keep expensive external calls from repeating:
``ingest`` writes the validated dataset, ``enrich`` writes derived features,
``run`` encodes, trains the experiment matrix, and writes reports. ``synth``
generates the bundled demo fixture so the whole pipeline runs offline.

Exit codes: 0 success, 1 partial experiment failure, 2 input/config error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click

from . import corpus, enrichment, evaluation, features, propagation, synthetic, textprep, vision
from .config import PipelineConfig, load_config, validate_config, with_overrides
from .errors import ConfigError, EncoderFailure, EngineFailure, FuseDetectError, FutureAccount, UnreadableImage

logger = logging.getLogger(__name__)

DATASET_STORE = "dataset.jsonl"
ENRICHMENT_STORE = "enrichments.jsonl"
FEATURE_STORE = "features.jsonl"

EXIT_OK = 0
EXIT_PARTIAL_FAILURE = 1
EXIT_INPUT_ERROR = 2


def cmd_ingest(config: PipelineConfig) -> str:
    """Load the manifest, persist the validated dataset, return the summary line."""
    aliases = None
    if config.verdict_aliases_path:
        aliases = corpus.VerdictAliasTable.from_file(config.verdict_aliases_path)
    dataset, rejects = corpus.load_dataset(config.manifest, aliases=aliases)
    out_dir = Path(config.out_dir)
    corpus.save_dataset(dataset, out_dir / DATASET_STORE)
    misinfo, other = dataset.class_counts()
    summary = f"{len(dataset)} records ({misinfo} misinformation / {other} other)"
    if rejects:
        summary += f", {len(rejects)} rejected (see {config.manifest}.rejects)"
    return summary


def _gender_dictionary(config: PipelineConfig) -> enrichment.GenderDictionary:
    if config.gender_dict_path:
        return enrichment.GenderDictionary.from_file(config.gender_dict_path)
    return enrichment.GenderDictionary.default()


def _stopwords(config: PipelineConfig) -> textprep.StopwordList:
    if config.stopwords_path:
        return textprep.StopwordList.from_file(config.stopwords_path, "en")
    return textprep.StopwordList.english()


def _resolve_media(config: PipelineConfig, media_path: str) -> Path:
    p = Path(media_path)
    return p if p.is_absolute() else Path(config.manifest).parent / p


def cmd_enrich(config: PipelineConfig) -> list[str]:
    """Derive per-record features, persist them, return degradation summary lines."""
    out_dir = Path(config.out_dir)
    dataset = corpus.load_dataset_store(out_dir / DATASET_STORE)

    gender_dict = _gender_dictionary(config)
    stopwords = _stopwords(config)
    ocr_engine = vision.create_ocr_engine(config.ocr_engine)
    detector = vision.create_object_detector(config.object_detector)
    translator = textprep.Translator(
        textprep.create_translation_backend(config.translator),
        cache_path=config.translator_cache,
    )
    bot_client = None
    if config.bot_enabled:
        bot_client = enrichment.BotScoreClient(
            endpoint=config.bot_endpoint,
            cache_path=config.bot_cache or None,
            ttl_days=config.bot_ttl_days,
        )
    sim_encoder = features.create_text_encoder(config.text_encoder, config.text_dim, config.encoder_seed)

    stats = {
        "records": len(dataset),
        "with_media": 0,
        "readable_images": 0,
        "ocr_nonempty": 0,
        "with_objects": 0,
        "similarity": 0,
        "bot_scores": 0,
        "non_english": 0,
    }
    enriched: list[enrichment.EnrichmentRecord] = []
    for record, _ in dataset.records:
        if record.language != "en":
            stats["non_english"] += 1
        translated = textprep.translate_to_english(record.text, record.language, translator)
        cleaned = textprep.clean_text(translated, stopwords)

        vision_out = enrichment.VisionOutputs()
        if record.media_path:
            stats["with_media"] += 1
            try:
                img = vision.load_image(_resolve_media(config, record.media_path))
            except UnreadableImage as exc:
                logger.warning("image unreadable for %s: %s", record.tweet_id, exc)
            else:
                stats["readable_images"] += 1
                ocr_text = vision.extract_ocr_text(img, ocr_engine)
                if ocr_text:
                    stats["ocr_nonempty"] += 1
                try:
                    objects = vision.detect_objects(img, detector)
                except EngineFailure as exc:
                    logger.warning("object detection failed for %s: %s", record.tweet_id, exc)
                    objects = []
                similarity = None
                if objects and cleaned:
                    try:
                        similarity = vision.object_text_similarity(
                            [label for label, _ in objects], cleaned, sim_encoder
                        )
                        stats["similarity"] += 1
                    except (EncoderFailure, ValueError) as exc:
                        logger.warning("similarity unavailable for %s: %s", record.tweet_id, exc)
                if objects:
                    stats["with_objects"] += 1
                vision_out = enrichment.VisionOutputs(
                    ocr_text=ocr_text,
                    detected_objects=tuple(objects),
                    object_text_similarity=similarity,
                )

        enriched.append(
            enrichment.enrich(
                record,
                gender_dict,
                bot_client,
                vision_out,
                enrichment.TextOutputs(translated_text=translated, cleaned_text=cleaned),
                reference_date=config.reference_date,
            )
        )
    stats["bot_scores"] = sum(1 for e in enriched if e.bot_score is not None)

    enrichment.save_enrichments(enriched, out_dir / ENRICHMENT_STORE)
    n = stats["records"]
    m = stats["with_media"]
    return [
        f"enriched {n} records",
        f"images: {stats['readable_images']}/{m} readable",
        f"ocr_text: {stats['ocr_nonempty']}/{m} non-empty",
        f"objects: {stats['with_objects']}/{m} with detections",
        f"object_text_similarity: {stats['similarity']}/{m} computed",
        f"bot_score: {stats['bot_scores']}/{n} fetched",
        f"translations: {stats['non_english']}/{n} non-English routed through {config.translator}",
    ]


def _encode_all(config, dataset, enrichments):
    """Stateless per-record text/image encodings plus raw social vectors."""
    text_encoder = features.create_text_encoder(config.text_encoder, config.text_dim, config.encoder_seed)
    image_encoder = features.create_image_encoder(config.image_encoder, config.image_dim)
    schema = features.SocialVectorSchema.default()
    by_id = {e.tweet_id: e for e in enrichments}

    text_vecs = {}
    image_vecs = {}
    raw_social = {}
    for record, _ in dataset.records:
        enr = by_id.get(record.tweet_id)
        if enr is None:
            raise FuseDetectError(f"record {record.tweet_id} missing from the enrichment store")
        try:
            text_vecs[record.tweet_id] = features.encode_text(
                features.text_encoding_input(enr.cleaned_text, enr.ocr_text), text_encoder
            )
        except EncoderFailure as exc:
            logger.warning("text encoding failed for %s: %s", record.tweet_id, exc)
            text_vecs[record.tweet_id] = None

        image_vecs[record.tweet_id] = None
        if record.media_path:
            try:
                img = vision.load_image(_resolve_media(config, record.media_path))
                image_vecs[record.tweet_id] = features.encode_image(img, image_encoder)
            except (UnreadableImage, EncoderFailure) as exc:
                logger.warning("image encoding absent for %s: %s", record.tweet_id, exc)

        raw_social[record.tweet_id] = features.build_social_vector(record, enr, schema)

    dims = (config.text_dim, config.image_dim, schema.total_dim)
    return evaluation.MatrixInputs(
        text_vecs=text_vecs,
        image_vecs=image_vecs,
        raw_social_vecs=raw_social,
        dims=dims,
        schema=schema,
        test_fraction=config.test_fraction,
    ), text_encoder, image_encoder


def cmd_run(config: PipelineConfig) -> tuple[int, list[str]]:
    """Encode features, run the experiment matrix, write all report files.

    Returns (exit_code, summary lines).
    """
    out_dir = Path(config.out_dir)
    dataset = corpus.load_dataset_store(out_dir / DATASET_STORE)
    enrichments = enrichment.load_enrichments(out_dir / ENRICHMENT_STORE)

    inputs, text_encoder, image_encoder = _encode_all(config, dataset, enrichments)
    specs = list(config.matrix) if config.matrix else evaluation.default_experiment_matrix(config.hyperparams)

    seeds = list(config.seeds) if config.seeds else [config.seed]
    runs = evaluation.run_multi_seed(specs, dataset, inputs, seeds)
    primary = runs[0]

    # feature store for the primary seed, replayable without re-encoding
    prepared = evaluation.prepare_bundles(dataset, inputs, seeds[0])
    features.save_feature_store(
        out_dir / FEATURE_STORE,
        prepared.all_bundles,
        text_encoder_name=text_encoder.name,
        image_encoder_name=image_encoder.name,
        schema_version=inputs.schema.version,
    )

    summary_lines = []
    for run, seed in zip(runs, seeds):
        tag = "" if len(seeds) == 1 else f"-seed{seed}"
        (out_dir / f"metrics_report{tag}.txt").write_text(
            evaluation.render_report(run.results, "table-text"), encoding="utf-8"
        )
        (out_dir / f"metrics_report{tag}.csv").write_text(
            evaluation.render_report(run.results, "delimited"), encoding="utf-8"
        )
        (out_dir / f"results{tag}.jsonl").write_text(evaluation.results_to_jsonl(run), encoding="utf-8")
        summary_lines.append(
            f"seed {seed}: {len(run.results)} experiments succeeded, {len(run.failures)} failed"
            f" (split {run.split_fingerprint})"
        )
    if len(seeds) > 1:
        summary = evaluation.summarize_multi_seed(runs)
        (out_dir / "multi_seed_summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8"
        )

    report = propagation.descriptive_stats(dataset, enrichments)
    (out_dir / "propagation_report.txt").write_text(
        propagation.render_propagation_report(report, "table-text"), encoding="utf-8"
    )
    (out_dir / "propagation_report.csv").write_text(
        propagation.render_propagation_report(report, "delimited"), encoding="utf-8"
    )

    failed = any(run.failures for run in runs)
    return (EXIT_PARTIAL_FAILURE if failed else EXIT_OK), summary_lines


def _load_config_or_exit(config_path: Optional[str], seed: Optional[int], out_dir: Optional[str]) -> PipelineConfig:
    try:
        if config_path:
            config = load_config(config_path)
        else:
            config = PipelineConfig()
            validate_config(config)
        return with_overrides(config, seed=seed, out_dir=out_dir)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)


_config_option = click.option("--config", "config_path", type=click.Path(), default=None, help="YAML config file.")
_seed_option = click.option("--seed", type=int, default=None, help="Override the run seed.")
_out_option = click.option("--out", "out_dir", type=click.Path(), default=None, help="Override the output directory.")


@click.group()
@click.option("--verbose", is_flag=True, default=False, help="Debug-level logging.")
def main(verbose: bool):
    """Multimodal misinformation detection pipeline."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_config_option
@_seed_option
@_out_option
def ingest(config_path, seed, out_dir):
    """Parse and validate the manifest; write the dataset store."""
    config = _load_config_or_exit(config_path, seed, out_dir)
    try:
        summary = cmd_ingest(config)
    except FuseDetectError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)
    click.echo(summary)


@main.command()
@_config_option
@_seed_option
@_out_option
def enrich(config_path, seed, out_dir):
    """Derive social and visual features; write the enrichment store."""
    config = _load_config_or_exit(config_path, seed, out_dir)
    try:
        lines = cmd_enrich(config)
    except (FuseDetectError, OSError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)
    for line in lines:
        click.echo(line)


@main.command()
@_config_option
@_seed_option
@_out_option
def run(config_path, seed, out_dir):
    """Encode features, run the experiment matrix, write reports."""
    config = _load_config_or_exit(config_path, seed, out_dir)
    try:
        code, lines = cmd_run(config)
    except (FuseDetectError, OSError) as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)
    for line in lines:
        click.echo(line)
    sys.exit(code)


@main.command()
@click.option("--out", "out_dir", type=click.Path(), default="demo", help="Fixture directory.")
@click.option("--records", type=int, default=1529, help="Total records.")
@click.option("--misinfo", type=int, default=1273, help="Misinformation records.")
@click.option("--seed", type=int, default=20259, help="Generator seed.")
def synth(out_dir, records, misinfo, seed):
    """Generate the bundled synthetic fixture (manifest, images, config)."""
    bench = synthetic.generate_benchmark(n_records=records, n_misinformation=misinfo, seed=seed)
    manifest = synthetic.write_benchmark(bench, out_dir)
    click.echo(f"wrote {records} records to {manifest}")
    click.echo(f"run: fusedetect ingest --config {Path(out_dir) / 'config.yaml'}")


if __name__ == "__main__":
    main()
