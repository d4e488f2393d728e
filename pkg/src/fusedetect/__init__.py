"""Multimodal misinformation detection over tweet records.

Builds early-fusion feature vectors from text, image, and social modalities,
trains pluggable classifier backends across the full modality combination
matrix, and reports classification metrics plus propagation analytics.
"""

from .corpus import (
    BinaryLabel,
    Dataset,
    TweetRecord,
    UserSnapshot,
    VerdictClass,
    binarize_label,
    load_dataset,
    normalize_verdict,
    parse_tweet,
    split_dataset,
)
from .enrichment import (
    BotScoreClient,
    EnrichmentRecord,
    Gender,
    GenderDictionary,
    compute_account_age,
    compute_popularity,
    enrich,
    fetch_bot_score,
    lookup_gender,
)
from .errors import FuseDetectError
from .evaluation import (
    ConfusionCounts,
    ExperimentResult,
    MatrixInputs,
    MetricSet,
    confusion,
    default_experiment_matrix,
    metrics,
    render_report,
    run_experiment_matrix,
)
from .features import (
    ChannelMomentImageEncoder,
    FeatureBundle,
    HashTextEncoder,
    Modality,
    SocialFeatureNormalizer,
    SocialVectorSchema,
    apply_normalizer,
    assemble_fusion,
    build_social_vector,
    encode_image,
    encode_text,
    fit_normalizer,
)
from .models import (
    ExperimentSpec,
    HyperParams,
    LinearFusionClassifier,
    MLPFusionClassifier,
    TrainedModel,
    load_model,
    predict,
    register_backend,
    save_model,
    train,
)
from .propagation import PropagationReport, descriptive_stats, diffusion_by_group
from .textprep import StopwordList, Translator, clean_text, translate_to_english
from .vision import (
    ObjectDetector,
    OcrEngine,
    RGBImage,
    detect_objects,
    extract_ocr_text,
    load_image,
    object_text_similarity,
    render_text_image,
)

__version__ = "0.1.0"
