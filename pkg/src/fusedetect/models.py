"""Classifier backends over fusion vectors and the experiment spec registry.

The bundled backends are a logistic head ("linear") and a one-hidden-layer
network ("mlp"), both trained with mini-batch Adam on class-weighted
categorical cross-entropy. Training is seed-deterministic: the same spec and
seed produce byte-identical parameter blobs. Heavyweight pretrained models
plug in through the same registry instead of being bundled.
"""

from __future__ import annotations

import base64
import json
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .corpus import BinaryLabel
from .errors import (
    ConfigError,
    DimensionMismatch,
    DuplicateName,
    InsufficientData,
    NonFiniteLoss,
    NotRegistered,
)
from .features import FeatureBundle, Modality, SocialFeatureNormalizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HyperParams:
    """Training contract: batch 32, Adam, learning rate 0.1, categorical cross-entropy."""

    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float = 0.1
    loss: str = "categorical_cross_entropy"
    epochs: int = 50
    early_stop_patience: Optional[int] = 5

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.learning_rate <= 0:
            raise ValueError("batch_size, epochs, and learning_rate must be positive")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be positive when set")


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a modality subset, a backend combo, and hyperparameters."""

    name: str
    modalities: frozenset[Modality]
    backend_combo: tuple[str, ...]
    hyperparams: HyperParams = HyperParams()
    seed: int = 0

    def __post_init__(self):
        if not self.modalities:
            raise ValueError(f"spec {self.name!r} selects no modalities")
        if not self.backend_combo:
            raise ValueError(f"spec {self.name!r} names no backends")


class _AdamSoftmaxClassifier(ClassifierMixin, BaseEstimator):
    """Shared mini-batch Adam trainer for two-class softmax heads.

    Subclasses define the parameter tensors and forward/backward pass. Labels
    must be integers {0, 1}; class 1 probability drives predict with ties at
    0.5 going to class 1.
    """

    _ADAM_BETA1 = 0.9
    _ADAM_BETA2 = 0.999
    _ADAM_EPS = 1e-8
    _IMPROVEMENT_TOL = 1e-6

    def __init__(self, batch_size=32, learning_rate=0.1, epochs=50,
                 early_stop_patience=5, class_weighted=True, seed=0):
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.early_stop_patience = early_stop_patience
        self.class_weighted = class_weighted
        self.seed = seed

    # subclass hooks
    def _init_params(self, rng: np.random.Generator, n_features: int) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def _forward(self, X: np.ndarray, params: dict[str, np.ndarray]):
        """Returns (logits, cache for backward)."""
        raise NotImplementedError

    def _backward(self, X, dlogits, params, cache) -> dict[str, np.ndarray]:
        raise NotImplementedError

    @staticmethod
    def _softmax(logits: np.ndarray) -> np.ndarray:
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(int)
        classes = np.unique(y)
        if not np.array_equal(classes, np.array([0, 1])):
            raise ValueError(f"labels must be {{0,1}} with both present, got {classes.tolist()}")
        self.classes_ = np.array([0, 1])
        n, d = X.shape
        self.n_features_in_ = d

        counts = np.bincount(y, minlength=2)
        if self.class_weighted:
            weights = n / (2.0 * counts)
        else:
            weights = np.ones(2)
        sample_weights = weights[y]

        rng = np.random.default_rng(self.seed)
        params = self._init_params(rng, d)
        adam_m = {k: np.zeros_like(v) for k, v in params.items()}
        adam_v = {k: np.zeros_like(v) for k, v in params.items()}
        step = 0

        onehot = np.zeros((n, 2))
        onehot[np.arange(n), y] = 1.0

        history: list[float] = []
        best_loss = np.inf
        epochs_since_improvement = 0
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            epoch_weighted_loss = 0.0
            epoch_weight = 0.0
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                xb, yb, wb = X[idx], onehot[idx], sample_weights[idx]
                logits, cache = self._forward(xb, params)
                probs = self._softmax(logits)
                w_sum = wb.sum()
                losses = -np.log(np.clip((probs * yb).sum(axis=1), 1e-12, None))
                epoch_weighted_loss += float((losses * wb).sum())
                epoch_weight += float(w_sum)

                dlogits = (probs - yb) * (wb / w_sum)[:, None]
                grads = self._backward(xb, dlogits, params, cache)
                step += 1
                for key, grad in grads.items():
                    adam_m[key] = self._ADAM_BETA1 * adam_m[key] + (1 - self._ADAM_BETA1) * grad
                    adam_v[key] = self._ADAM_BETA2 * adam_v[key] + (1 - self._ADAM_BETA2) * grad**2
                    m_hat = adam_m[key] / (1 - self._ADAM_BETA1**step)
                    v_hat = adam_v[key] / (1 - self._ADAM_BETA2**step)
                    params[key] = params[key] - self.learning_rate * m_hat / (np.sqrt(v_hat) + self._ADAM_EPS)

            epoch_loss = epoch_weighted_loss / epoch_weight
            if not np.isfinite(epoch_loss):
                raise NonFiniteLoss(epoch, epoch_loss)
            history.append(epoch_loss)
            if epoch_loss < best_loss - self._IMPROVEMENT_TOL:
                best_loss = epoch_loss
                epochs_since_improvement = 0
            else:
                epochs_since_improvement += 1
                if self.early_stop_patience is not None and epochs_since_improvement >= self.early_stop_patience:
                    break

        self.params_ = params
        self.loss_history_ = history
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        logits, _ = self._forward(X, self.params_)
        return self._softmax(logits)

    def predict(self, X) -> np.ndarray:
        # boundary probability 0.5 is assigned to class 1
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    # deterministic parameter serialization

    def _param_order(self) -> list[str]:
        return sorted(self.params_)

    def parameters_blob(self) -> bytes:
        check_is_fitted(self, "params_")
        header = {
            "names": self._param_order(),
            "shapes": {k: list(self.params_[k].shape) for k in self._param_order()},
            "n_features": int(self.n_features_in_),
        }
        payload = b"".join(np.ascontiguousarray(self.params_[k], dtype=np.float64).tobytes() for k in self._param_order())
        return json.dumps(header, sort_keys=True).encode("utf-8") + b"\x00" + payload

    def restore_from_blob(self, blob: bytes) -> "_AdamSoftmaxClassifier":
        header_bytes, _, payload = blob.partition(b"\x00")
        header = json.loads(header_bytes.decode("utf-8"))
        params = {}
        offset = 0
        for name in header["names"]:
            shape = tuple(header["shapes"][name])
            size = int(np.prod(shape)) * 8
            params[name] = np.frombuffer(payload[offset : offset + size], dtype=np.float64).reshape(shape).copy()
            offset += size
        self.params_ = params
        self.n_features_in_ = header["n_features"]
        self.classes_ = np.array([0, 1])
        self.loss_history_ = []
        return self


class LinearFusionClassifier(_AdamSoftmaxClassifier):
    """Logistic (softmax) classifier over the fusion vector."""

    backend_name = "linear"

    def _init_params(self, rng, n_features):
        return {
            "W": rng.normal(0.0, 0.01, (n_features, 2)),
            "b": np.zeros(2),
        }

    def _forward(self, X, params):
        return X @ params["W"] + params["b"], None

    def _backward(self, X, dlogits, params, cache):
        return {"W": X.T @ dlogits, "b": dlogits.sum(axis=0)}


class MLPFusionClassifier(_AdamSoftmaxClassifier):
    """One-hidden-layer tanh network over the fusion vector."""

    backend_name = "mlp"

    def __init__(self, batch_size=32, learning_rate=0.1, epochs=50,
                 early_stop_patience=5, class_weighted=True, seed=0, hidden_dim=32):
        super().__init__(batch_size=batch_size, learning_rate=learning_rate, epochs=epochs,
                         early_stop_patience=early_stop_patience, class_weighted=class_weighted, seed=seed)
        self.hidden_dim = hidden_dim

    def _init_params(self, rng, n_features):
        scale1 = 1.0 / np.sqrt(n_features)
        scale2 = 1.0 / np.sqrt(self.hidden_dim)
        return {
            "W1": rng.normal(0.0, scale1, (n_features, self.hidden_dim)),
            "b1": np.zeros(self.hidden_dim),
            "W2": rng.normal(0.0, scale2, (self.hidden_dim, 2)),
            "b2": np.zeros(2),
        }

    def _forward(self, X, params):
        hidden = np.tanh(X @ params["W1"] + params["b1"])
        return hidden @ params["W2"] + params["b2"], hidden

    def _backward(self, X, dlogits, params, hidden):
        dW2 = hidden.T @ dlogits
        db2 = dlogits.sum(axis=0)
        dhidden = (dlogits @ params["W2"].T) * (1 - hidden**2)
        return {"W1": X.T @ dhidden, "b1": dhidden.sum(axis=0), "W2": dW2, "b2": db2}


BackendFactory = Callable[[HyperParams, int], _AdamSoftmaxClassifier]

_BACKENDS: dict[str, BackendFactory] = {}


def register_backend(name: str, factory: BackendFactory) -> None:
    """Register a classifier backend under a unique name."""
    if name in _BACKENDS:
        raise DuplicateName(f"backend {name!r} already registered")
    _BACKENDS[name] = factory


def resolve_backend(name: str) -> BackendFactory:
    if name not in _BACKENDS:
        raise NotRegistered(f"backend {name!r} is not registered")
    return _BACKENDS[name]


def registered_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def _check_hyperparams(hp: HyperParams) -> None:
    if hp.optimizer != "adam":
        raise ConfigError(f"bundled backends support only the adam optimizer, got {hp.optimizer!r}")
    if hp.loss != "categorical_cross_entropy":
        raise ConfigError(f"bundled backends support only categorical_cross_entropy loss, got {hp.loss!r}")


def _linear_factory(hp: HyperParams, seed: int) -> LinearFusionClassifier:
    _check_hyperparams(hp)
    return LinearFusionClassifier(
        batch_size=hp.batch_size,
        learning_rate=hp.learning_rate,
        epochs=hp.epochs,
        early_stop_patience=hp.early_stop_patience,
        seed=seed,
    )


def _mlp_factory(hp: HyperParams, seed: int) -> MLPFusionClassifier:
    _check_hyperparams(hp)
    return MLPFusionClassifier(
        batch_size=hp.batch_size,
        learning_rate=hp.learning_rate,
        epochs=hp.epochs,
        early_stop_patience=hp.early_stop_patience,
        seed=seed,
    )


register_backend("linear", _linear_factory)
register_backend("mlp", _mlp_factory)


@dataclass
class TrainedModel:
    """A fitted backend plus everything needed to replay its predictions."""

    spec: ExperimentSpec
    parameters: bytes
    normalizer: Optional[SocialFeatureNormalizer]
    fitted_at: datetime
    training_history: tuple[float, ...]
    dims: tuple[int, int, int]
    estimator: _AdamSoftmaxClassifier = field(repr=False, compare=False, default=None)


def modality_column_mask(modalities: frozenset[Modality], dims: tuple[int, int, int]) -> np.ndarray:
    """Boolean column mask selecting the blocks of the given modalities."""
    d_t, d_i, d_s = dims
    mask = np.zeros(d_t + d_i + d_s, dtype=bool)
    if Modality.TEXT in modalities:
        mask[:d_t] = True
    if Modality.IMAGE in modalities:
        mask[d_t : d_t + d_i] = True
    if Modality.SOCIAL in modalities:
        mask[d_t + d_i :] = True
    return mask


def _label_int(label: BinaryLabel) -> int:
    return 1 if label is BinaryLabel.MISINFORMATION else 0


def _design_matrix(spec: ExperimentSpec, bundles: Sequence[FeatureBundle]) -> tuple[np.ndarray, tuple[int, int, int]]:
    dims = bundles[0].dims
    for b in bundles:
        if b.dims != dims:
            raise DimensionMismatch(f"bundle {b.tweet_id} dims {b.dims} differ from {dims}")
    X = np.stack([b.fusion_vec for b in bundles]).astype(np.float64)
    # the backend must see only the selected blocks
    X[:, ~modality_column_mask(spec.modalities, dims)] = 0.0
    return X, dims


def train(
    spec: ExperimentSpec,
    train_bundles: Sequence[tuple[FeatureBundle, BinaryLabel]],
    normalizer: Optional[SocialFeatureNormalizer] = None,
) -> TrainedModel:
    """Fit the spec's head backend on the selected modality blocks.

    Blocks of unselected modalities are zeroed before training. Deterministic
    for a fixed seed. Raises InsufficientData with fewer than two examples of
    either class and NonFiniteLoss if training diverges.
    """
    if not train_bundles:
        raise InsufficientData("no training examples")
    labels = np.array([_label_int(label) for _, label in train_bundles])
    counts = np.bincount(labels, minlength=2)
    if counts.min() < 2:
        raise InsufficientData(f"need >= 2 examples per class, got misinformation={counts[1]}, other={counts[0]}")

    for name in spec.backend_combo:
        resolve_backend(name)
    head_factory = resolve_backend(spec.backend_combo[-1])
    estimator = head_factory(spec.hyperparams, spec.seed)

    X, dims = _design_matrix(spec, [b for b, _ in train_bundles])
    estimator.fit(X, labels)
    return TrainedModel(
        spec=spec,
        parameters=estimator.parameters_blob(),
        normalizer=normalizer,
        fitted_at=datetime.now(timezone.utc),
        training_history=tuple(estimator.loss_history_),
        dims=dims,
        estimator=estimator,
    )


def predict(model: TrainedModel, bundle: FeatureBundle) -> tuple[float, BinaryLabel]:
    """(misinformation probability, label); probability 0.5 labels as misinformation."""
    if bundle.dims != model.dims:
        raise DimensionMismatch(f"bundle dims {bundle.dims} != model dims {model.dims}")
    x = bundle.fusion_vec.astype(np.float64).copy()
    x[~modality_column_mask(model.spec.modalities, model.dims)] = 0.0
    probability = float(model.estimator.predict_proba(x.reshape(1, -1))[0, 1])
    label = BinaryLabel.MISINFORMATION if probability >= 0.5 else BinaryLabel.OTHER
    return probability, label


def spec_to_dict(spec: ExperimentSpec) -> dict:
    return {
        "name": spec.name,
        "modalities": sorted(m.value for m in spec.modalities),
        "backend_combo": list(spec.backend_combo),
        "hyperparams": {
            "batch_size": spec.hyperparams.batch_size,
            "optimizer": spec.hyperparams.optimizer,
            "learning_rate": spec.hyperparams.learning_rate,
            "loss": spec.hyperparams.loss,
            "epochs": spec.hyperparams.epochs,
            "early_stop_patience": spec.hyperparams.early_stop_patience,
        },
        "seed": spec.seed,
    }


def spec_from_dict(row: dict) -> ExperimentSpec:
    hp_row = row.get("hyperparams", {})
    return ExperimentSpec(
        name=row["name"],
        modalities=frozenset(Modality(m) for m in row["modalities"]),
        backend_combo=tuple(row["backend_combo"]),
        hyperparams=HyperParams(
            batch_size=int(hp_row.get("batch_size", 32)),
            optimizer=hp_row.get("optimizer", "adam"),
            learning_rate=float(hp_row.get("learning_rate", 0.1)),
            loss=hp_row.get("loss", "categorical_cross_entropy"),
            epochs=int(hp_row.get("epochs", 50)),
            early_stop_patience=hp_row.get("early_stop_patience", 5),
        ),
        seed=int(row.get("seed", 0)),
    )


MODEL_FILE_VERSION = 1


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Persist a trained model: header (spec, seed, fitted_at) plus parameter blob."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "kind": "trained_model",
        "file_version": MODEL_FILE_VERSION,
        "spec": spec_to_dict(model.spec),
        "seed": model.spec.seed,
        "fitted_at": model.fitted_at.isoformat(),
        "training_history": list(model.training_history),
        "dims": list(model.dims),
        "normalizer": model.normalizer.state_dict() if model.normalizer is not None else None,
        "parameters": base64.b64encode(model.parameters).decode("ascii"),
    }
    path.write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("kind") != "trained_model":
        raise ValueError(f"{path} is not a trained model file")
    spec = spec_from_dict(doc["spec"])
    blob = base64.b64decode(doc["parameters"])
    estimator = resolve_backend(spec.backend_combo[-1])(spec.hyperparams, spec.seed)
    estimator.restore_from_blob(blob)
    normalizer = None
    if doc.get("normalizer") is not None:
        normalizer = SocialFeatureNormalizer.from_state_dict(doc["normalizer"])
    return TrainedModel(
        spec=spec,
        parameters=blob,
        normalizer=normalizer,
        fitted_at=datetime.fromisoformat(doc["fitted_at"]),
        training_history=tuple(doc["training_history"]),
        dims=tuple(doc["dims"]),
        estimator=estimator,
    )
