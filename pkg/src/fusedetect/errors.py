"""Exception types shared across the pipeline."""


class FuseDetectError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(FuseDetectError):
    """Pipeline configuration is invalid or references unknown components."""


# corpus

class MalformedRecord(FuseDetectError):
    """A manifest record is missing required fields or violates an invariant."""

    def __init__(self, tweet_id: str, reason: str):
        super().__init__(f"{tweet_id}: {reason}")
        self.tweet_id = tweet_id
        self.reason = reason


class ManifestNotFound(FuseDetectError):
    """The dataset manifest file does not exist."""


class EmptyDataset(FuseDetectError):
    """A manifest yielded zero valid records."""


class InsufficientClassSize(FuseDetectError):
    """A stratified split needs at least two records of each class."""


# enrichment

class FutureAccount(FuseDetectError):
    """Account creation date lies after the reference date; metadata is corrupt."""


# vision

class UnreadableImage(FuseDetectError):
    """Image file is missing or cannot be decoded."""


class EngineFailure(FuseDetectError):
    """A vision or encoder adapter returned output violating its contract."""


# features

class SchemaMismatch(FuseDetectError):
    """A social vector does not match the schema it is used with."""


class EmptyTraining(FuseDetectError):
    """Normalizer fitting requires at least one training vector."""


class DimensionMismatch(FuseDetectError):
    """A vector's length does not match its configured dimension."""


class EncoderFailure(FuseDetectError):
    """An encoder could not produce a vector; the modality is treated as absent."""


# models

class DuplicateName(FuseDetectError):
    """A backend name is already registered."""


class NotRegistered(FuseDetectError):
    """No backend is registered under the requested name."""


class InsufficientData(FuseDetectError):
    """Training requires at least two examples of each class."""


class NonFiniteLoss(FuseDetectError):
    """Training loss became NaN or infinite (divergence)."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite training loss at epoch {epoch}: {loss}")
        self.epoch = epoch
        self.loss = loss


# evaluation

class LengthMismatch(FuseDetectError):
    """Label and prediction lists differ in length."""


class EmptyEvaluation(FuseDetectError):
    """Metrics require at least one evaluated record."""


# propagation

class CoverageGap(FuseDetectError):
    """A dataset record has no matching enrichment record."""
